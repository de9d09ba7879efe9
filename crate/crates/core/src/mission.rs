//! Waypoint missions and the setpoint generator that walks them.

use std::fmt::Write as _;

use crate::autopilot::Setpoint;
use crate::error::ParseError;
use crate::math::{wrap_angle, Vec3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Waypoint {
    /// NED position, m.
    pub position: Vec3,
    pub psi: f64,
    pub acceptance_radius: f64,
    /// Time to stay inside the acceptance radius before moving on, s.
    pub hold: f64,
}

impl Waypoint {
    pub fn new(x: f64, y: f64, z: f64, psi: f64, acceptance_radius: f64, hold: f64) -> Self {
        Self {
            position: Vec3::new(x, y, z),
            psi,
            acceptance_radius,
            hold,
        }
    }
}

/// How the position setpoint moves between waypoints.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SetpointMode {
    /// The setpoint jumps to the next waypoint; no feedforward.
    Step,
    /// The setpoint slides along each leg with a trapezoidal speed profile
    /// and supplies the profile velocity and azimuth rate as feedforward.
    #[default]
    Trajectory,
}

impl std::str::FromStr for SetpointMode {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "step" => Ok(SetpointMode::Step),
            "trajectory" => Ok(SetpointMode::Trajectory),
            other => Err(ParseError::Invalid(format!("unknown setpoint mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for SetpointMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SetpointMode::Step => "step",
            SetpointMode::Trajectory => "trajectory",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MissionPlan {
    pub waypoints: Vec<Waypoint>,
    /// Altitude of the first waypoint above the start, m.
    pub takeoff_altitude: f64,
    /// Leg speed in trajectory mode, m/s.
    pub cruise_speed: f64,
    /// Leg acceleration in trajectory mode, m/s².
    pub cruise_accel: f64,
    /// Azimuth slew rate in trajectory mode, rad/s.
    pub yaw_rate: f64,
    pub mode: SetpointMode,
}

pub const DEFAULT_CRUISE_SPEED: f64 = 2.0;
pub const DEFAULT_CRUISE_ACCEL: f64 = 1.0;
pub const DEFAULT_YAW_RATE: f64 = 0.5;

impl MissionPlan {
    pub fn new(waypoints: Vec<Waypoint>) -> Result<Self, ParseError> {
        let plan = Self {
            takeoff_altitude: waypoints.first().map_or(0.0, |w| -w.position.z),
            waypoints,
            cruise_speed: DEFAULT_CRUISE_SPEED,
            cruise_accel: DEFAULT_CRUISE_ACCEL,
            yaw_rate: DEFAULT_YAW_RATE,
            mode: SetpointMode::Trajectory,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn with_mode(mut self, mode: SetpointMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<(), ParseError> {
        let first = self
            .waypoints
            .first()
            .ok_or_else(|| ParseError::Invalid("mission has no waypoints".into()))?;
        if !(first.position.z < 0.0) {
            return Err(ParseError::Invalid(
                "first waypoint must be above the ground (z < 0)".into(),
            ));
        }
        for (i, w) in self.waypoints.iter().enumerate() {
            if !(w.acceptance_radius > 0.0 && w.acceptance_radius.is_finite()) {
                return Err(ParseError::Invalid(format!(
                    "waypoint {i}: acceptance radius must be positive"
                )));
            }
            if !(w.hold >= 0.0 && w.hold.is_finite()) {
                return Err(ParseError::Invalid(format!("waypoint {i}: hold must be non-negative")));
            }
            if !(w.position.iter().all(|c| c.is_finite()) && w.psi.is_finite()) {
                return Err(ParseError::Invalid(format!("waypoint {i}: non-finite value")));
            }
        }
        for (name, v) in [
            ("cruise speed", self.cruise_speed),
            ("cruise acceleration", self.cruise_accel),
            ("yaw rate", self.yaw_rate),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ParseError::Invalid(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    /// One waypoint per line: `x y z psi radius hold`. Optional setting lines
    /// `mode step|trajectory`, `cruise_speed v`, `cruise_accel a` and
    /// `yaw_rate w` may appear anywhere.
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut waypoints = Vec::new();
        let mut settings: Vec<(usize, &str, &str)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields[0].starts_with(|c: char| c.is_ascii_alphabetic()) {
                if fields.len() != 2 {
                    return Err(ParseError::at(
                        line_no,
                        format!("setting `{}` takes one value", fields[0]),
                    ));
                }
                settings.push((line_no, fields[0], fields[1]));
                continue;
            }
            if fields.len() != 6 {
                return Err(ParseError::at(
                    line_no,
                    format!("expected 6 fields `x y z psi radius hold`, found {}", fields.len()),
                ));
            }
            let mut v = [0.0; 6];
            for (slot, f) in v.iter_mut().zip(&fields) {
                *slot = f
                    .parse()
                    .map_err(|_| ParseError::at(line_no, format!("`{f}` is not a number")))?;
            }
            if !(v[4] > 0.0) {
                return Err(ParseError::at(line_no, "acceptance radius must be positive"));
            }
            if !(v[5] >= 0.0) {
                return Err(ParseError::at(line_no, "hold must be non-negative"));
            }
            waypoints.push(Waypoint::new(v[0], v[1], v[2], v[3], v[4], v[5]));
        }
        let mut plan = Self::new(waypoints)?;
        for (line_no, key, value) in settings {
            let number = || {
                value
                    .parse::<f64>()
                    .map_err(|_| ParseError::at(line_no, format!("`{value}` is not a number")))
            };
            match key {
                "mode" => {
                    plan.mode = value
                        .parse()
                        .map_err(|e: ParseError| ParseError::at(line_no, e.to_string()))?
                }
                "cruise_speed" => plan.cruise_speed = number()?,
                "cruise_accel" => plan.cruise_accel = number()?,
                "yaw_rate" => plan.yaw_rate = number()?,
                other => return Err(ParseError::at(line_no, format!("unknown setting `{other}`"))),
            }
        }
        plan.validate()?;
        Ok(plan)
    }

    pub fn to_file_string(&self) -> String {
        let mut out = format!(
            "mode {}\ncruise_speed {:?}\ncruise_accel {:?}\nyaw_rate {:?}\n# x y z psi radius hold\n",
            self.mode, self.cruise_speed, self.cruise_accel, self.yaw_rate
        );
        for w in &self.waypoints {
            writeln!(
                out,
                "{:?} {:?} {:?} {:?} {:?} {:?}",
                w.position.x, w.position.y, w.position.z, w.psi, w.acceptance_radius, w.hold
            )
            .unwrap();
        }
        out
    }

    /// Length of the polyline from `start` through every waypoint.
    pub fn path_length(&self, start: &Vec3) -> f64 {
        let mut prev = *start;
        let mut total = 0.0;
        for w in &self.waypoints {
            total += (w.position - prev).norm();
            prev = w.position;
        }
        total
    }
}

/// Takeoff to 5 m, a 20 m x 15 m rectangle flown with the nose along each
/// leg, return above the start and a final hold.
pub fn default_mission() -> MissionPlan {
    use std::f64::consts::{FRAC_PI_2, PI};
    let h = -5.0;
    let rad = 0.7;
    let wps = vec![
        Waypoint::new(0.0, 0.0, h, 0.0, rad, 1.0),
        Waypoint::new(20.0, 0.0, h, 0.0, rad, 0.0),
        Waypoint::new(20.0, 15.0, h, FRAC_PI_2, rad, 0.0),
        Waypoint::new(0.0, 15.0, h, PI, rad, 0.0),
        Waypoint::new(0.0, 0.0, h, -FRAC_PI_2, rad, 0.0),
        Waypoint::new(0.0, 0.0, h, 0.0, rad, 2.0),
    ];
    MissionPlan::new(wps).expect("default mission is valid")
}

/// Output of one generator update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MissionSetpoint {
    pub setpoint: Setpoint,
    /// Index of the waypoint being flown to; equals the waypoint count once
    /// the mission is complete.
    pub waypoint: usize,
    /// The active waypoint changed on this update.
    pub advanced: bool,
    pub complete: bool,
}

/// Walks a mission plan, advancing when the vehicle has been inside the
/// acceptance radius for the hold time.
#[derive(Clone, Debug)]
pub struct SetpointGenerator {
    plan: MissionPlan,
    index: usize,
    arrived_at: Option<f64>,
    leg_start: Vec3,
    leg_start_psi: f64,
    leg_t0: f64,
    last: Setpoint,
}

impl SetpointGenerator {
    pub fn new(plan: MissionPlan, start: Vec3, start_psi: f64) -> Self {
        Self {
            plan,
            index: 0,
            arrived_at: None,
            leg_start: start,
            leg_start_psi: start_psi,
            leg_t0: 0.0,
            last: Setpoint {
                r: start,
                v_ff: Vec3::zeros(),
                psi: start_psi,
                psi_rate_ff: 0.0,
            },
        }
    }

    pub fn plan(&self) -> &MissionPlan {
        &self.plan
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn is_complete(&self) -> bool {
        self.index >= self.plan.waypoints.len()
    }

    pub fn update(&mut self, r_meas: &Vec3, t: f64) -> MissionSetpoint {
        let mut advanced = false;
        if let Some(w) = self.plan.waypoints.get(self.index).copied() {
            if (r_meas - w.position).norm() < w.acceptance_radius {
                let since = *self.arrived_at.get_or_insert(t);
                if t - since >= w.hold {
                    self.index += 1;
                    self.arrived_at = None;
                    self.leg_start = w.position;
                    self.leg_start_psi = w.psi;
                    self.leg_t0 = t;
                    advanced = true;
                }
            } else {
                self.arrived_at = None;
            }
        }
        let complete = self.is_complete();
        if !complete {
            self.last = self.shape(t);
        } else {
            let w = self.plan.waypoints.last().expect("plan is nonempty");
            self.last = Setpoint {
                r: w.position,
                v_ff: Vec3::zeros(),
                psi: w.psi,
                psi_rate_ff: 0.0,
            };
        }
        MissionSetpoint {
            setpoint: self.last,
            waypoint: self.index,
            advanced,
            complete,
        }
    }

    fn shape(&self, t: f64) -> Setpoint {
        let w = &self.plan.waypoints[self.index];
        match self.plan.mode {
            SetpointMode::Step => Setpoint {
                r: w.position,
                v_ff: Vec3::zeros(),
                psi: w.psi,
                psi_rate_ff: 0.0,
            },
            SetpointMode::Trajectory => {
                let tau = t - self.leg_t0;
                let leg = w.position - self.leg_start;
                let length = leg.norm();
                let (s, s_dot) = trapezoid(length, self.plan.cruise_speed, self.plan.cruise_accel, tau);
                let (r, v_ff) = if length > 0.0 {
                    let dir = leg / length;
                    (self.leg_start + dir * s, dir * s_dot)
                } else {
                    (w.position, Vec3::zeros())
                };
                let dpsi = wrap_angle(w.psi - self.leg_start_psi);
                let turned = (self.plan.yaw_rate * tau).min(dpsi.abs());
                let (psi, psi_rate_ff) = if turned < dpsi.abs() {
                    (
                        wrap_angle(self.leg_start_psi + dpsi.signum() * turned),
                        dpsi.signum() * self.plan.yaw_rate,
                    )
                } else {
                    (w.psi, 0.0)
                };
                Setpoint {
                    r,
                    v_ff,
                    psi,
                    psi_rate_ff,
                }
            }
        }
    }
}

/// Distance and speed along a leg of length `length` at time `t` into a
/// trapezoidal (or triangular) speed profile.
pub fn trapezoid(length: f64, v_max: f64, a_max: f64, t: f64) -> (f64, f64) {
    if length <= 0.0 || t <= 0.0 {
        return (0.0, 0.0);
    }
    let t_acc_full = v_max / a_max;
    let (v_peak, t_acc) = if a_max * t_acc_full * t_acc_full >= length {
        let t_acc = (length / a_max).sqrt();
        (a_max * t_acc, t_acc)
    } else {
        (v_max, t_acc_full)
    };
    let d_acc = 0.5 * a_max * t_acc * t_acc;
    let t_cruise = (length - 2.0 * d_acc) / v_peak;
    let t_total = 2.0 * t_acc + t_cruise;
    if t < t_acc {
        (0.5 * a_max * t * t, a_max * t)
    } else if t < t_acc + t_cruise {
        (d_acc + v_peak * (t - t_acc), v_peak)
    } else if t < t_total {
        let td = t_total - t;
        (length - 0.5 * a_max * td * td, a_max * td)
    } else {
        (length, 0.0)
    }
}
