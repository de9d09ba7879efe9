//! The fixed-gain cascade: position P with velocity feedforward, velocity PID,
//! the force-to-attitude map, attitude P with azimuth-rate feedforward and a
//! body-rate PID with rate feedforward.
//!
//! PID laws use the shift-operator form `K_P z_k + K_I γ_k + K_D (z_k - z_{k-1})`
//! where `γ_k = Σ_{i<k} z_i`; the sample period is absorbed by the gains.

use crate::gains::GainSet;
use crate::math::{axis_rotation, euler_to_quat, quat_error, sgn, Axis, EulerAngles321, UnitQuaternion, Vec3};

/// Force norm below which the attitude setpoint is undefined, N.
pub const MIN_FORCE_NORM: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct ControlLimits {
    /// Horizontal speed limit, m/s.
    pub max_speed_xy: f64,
    /// Vertical speed limit, m/s.
    pub max_speed_z: f64,
    /// Maximum tilt of the force setpoint from vertical, rad.
    pub tilt_max: f64,
    /// Smallest upward force the velocity loop may request, N.
    pub thrust_min: f64,
    pub thrust_max: f64,
    /// Body rate setpoint limits, rad/s.
    pub rate_max: Vec3,
    pub moment_max: Vec3,
    /// Symmetric clamp on the velocity-loop integrators; `None` disables it.
    pub velocity_integrator_bound: Option<f64>,
    /// Symmetric clamp on the rate-loop integrators; `None` disables it.
    pub rate_integrator_bound: Option<f64>,
}

impl ControlLimits {
    pub fn for_vehicle(params: &crate::dynamics::VehicleParams) -> Self {
        Self {
            max_speed_xy: 5.0,
            max_speed_z: 2.0,
            tilt_max: 45f64.to_radians(),
            thrust_min: 0.1 * params.hover_thrust(),
            thrust_max: params.thrust_max,
            rate_max: Vec3::new(3.5, 3.5, 2.0),
            moment_max: params.moment_max,
            velocity_integrator_bound: Some(50.0),
            rate_integrator_bound: Some(50.0),
        }
    }

    pub fn clamp_velocity(&self, v: &Vec3) -> Vec3 {
        let mut out = *v;
        let xy = (v.x * v.x + v.y * v.y).sqrt();
        if xy > self.max_speed_xy {
            let s = self.max_speed_xy / xy;
            out.x *= s;
            out.y *= s;
        }
        out.z = out.z.clamp(-self.max_speed_z, self.max_speed_z);
        out
    }

    /// Keeps the force setpoint pointing up, within the tilt cone and within
    /// the total thrust. The vertical component has priority.
    pub fn clamp_force(&self, f: &Vec3) -> Vec3 {
        let fz = f.z.clamp(-self.thrust_max, -self.thrust_min);
        let mut fx = f.x;
        let mut fy = f.y;
        let xy = (fx * fx + fy * fy).sqrt();
        let xy_tilt = -fz * self.tilt_max.tan();
        let xy_thrust = (self.thrust_max * self.thrust_max - fz * fz).max(0.0).sqrt();
        let xy_max = xy_tilt.min(xy_thrust);
        if xy > xy_max {
            let s = xy_max / xy;
            fx *= s;
            fy *= s;
        }
        Vec3::new(fx, fy, fz)
    }

    pub fn clamp_rates(&self, w: &Vec3) -> Vec3 {
        clamp_each(w, &self.rate_max)
    }

    pub fn clamp_moment(&self, m: &Vec3) -> Vec3 {
        clamp_each(m, &self.moment_max)
    }
}

fn clamp_each(v: &Vec3, bound: &Vec3) -> Vec3 {
    Vec3::new(
        v.x.clamp(-bound.x, bound.x),
        v.y.clamp(-bound.y, bound.y),
        v.z.clamp(-bound.z, bound.z),
    )
}

/// Integrator and previous error of one scalar PID.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PidAxis {
    /// `γ_k = Σ_{i<k} z_i`, possibly clamped.
    pub integrator: f64,
    pub z_prev: f64,
}

impl PidAxis {
    pub fn output(&self, z: f64, kp: f64, ki: f64, kd: f64) -> f64 {
        kp * z + ki * self.integrator + kd * (z - self.z_prev)
    }

    pub fn advance(&mut self, z: f64, bound: Option<f64>) {
        let next = self.integrator + z;
        self.integrator = match bound {
            Some(b) => next.clamp(-b, b),
            None => next,
        };
        self.z_prev = z;
    }
}

/// Three decoupled PID channels.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Pid3 {
    pub axes: [PidAxis; 3],
}

impl Pid3 {
    pub fn output(&self, z: &Vec3, kp: &Vec3, ki: &Vec3, kd: &Vec3) -> Vec3 {
        Vec3::from_fn(|i, _| self.axes[i].output(z[i], kp[i], ki[i], kd[i]))
    }

    pub fn advance(&mut self, z: &Vec3, bound: Option<f64>) {
        for (axis, zi) in self.axes.iter_mut().zip(z.iter()) {
            axis.advance(*zi, bound);
        }
    }

    pub fn integrators(&self) -> Vec3 {
        Vec3::from_fn(|i, _| self.axes[i].integrator)
    }
}

/// Errors seen by each loop at its latest update.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LoopErrors {
    pub z_r: Vec3,
    pub z_v: Vec3,
    pub z_q: Vec3,
    pub z_omega: Vec3,
}

/// Every setpoint flowing through the cascade.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SetpointChain {
    pub r_sp: Vec3,
    pub v_sp_ff: Vec3,
    pub psi_sp: f64,
    pub psi_rate_sp_ff: f64,
    pub v_sp: Vec3,
    pub f_sp: Vec3,
    pub q_sp: UnitQuaternion,
    pub omega_sp: Vec3,
    pub moment_sp: Vec3,
}

impl SetpointChain {
    pub fn hover(r: Vec3, psi: f64, hover_thrust: f64) -> Self {
        Self {
            r_sp: r,
            v_sp_ff: Vec3::zeros(),
            psi_sp: psi,
            psi_rate_sp_ff: 0.0,
            v_sp: Vec3::zeros(),
            f_sp: Vec3::new(0.0, 0.0, -hover_thrust),
            q_sp: euler_to_quat(EulerAngles321::new(psi, 0.0, 0.0)),
            omega_sp: Vec3::zeros(),
            moment_sp: Vec3::zeros(),
        }
    }
}

/// `K_r z_r + v_ff`, before clamping.
pub fn position_law(z_r: &Vec3, v_sp_ff: &Vec3, gains: &GainSet) -> Vec3 {
    gains.k_r.component_mul(z_r) + v_sp_ff
}

/// Velocity setpoint from the position error, clamped to the speed limits.
pub fn position_controller(
    r_sp: &Vec3,
    r_meas: &Vec3,
    v_sp_ff: &Vec3,
    gains: &GainSet,
    limits: &ControlLimits,
) -> Vec3 {
    limits.clamp_velocity(&position_law(&(r_sp - r_meas), v_sp_ff, gains))
}

/// Velocity-loop PID output plus the hover offset `-m g e3`, before clamping.
/// Does not advance the PID state.
pub fn velocity_law(pid: &Pid3, z_v: &Vec3, gains: &GainSet, hover_thrust: f64) -> Vec3 {
    pid.output(z_v, &gains.k_v_p, &gains.k_v_i, &gains.k_v_d) - Vec3::new(0.0, 0.0, hover_thrust)
}

/// Earth-frame force setpoint from the velocity error; advances the PID.
pub fn velocity_controller(
    v_sp: &Vec3,
    v_meas: &Vec3,
    pid: &mut Pid3,
    gains: &GainSet,
    limits: &ControlLimits,
    hover_thrust: f64,
    dt: f64,
) -> Vec3 {
    assert!(dt > 0.0, "controller period must be positive");
    let z_v = v_sp - v_meas;
    let f = velocity_law(pid, &z_v, gains, hover_thrust);
    pid.advance(&z_v, limits.velocity_integrator_bound);
    limits.clamp_force(&f)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttitudeSetpoint {
    pub q_sp: UnitQuaternion,
    pub elevation: f64,
    pub bank: f64,
    /// The force was too small to define a direction; a level attitude was
    /// returned instead.
    pub degenerate: bool,
}

/// Attitude whose thrust axis `-k_Q` points along `f_sp` and whose azimuth is
/// `psi_sp`.
pub fn f2q(f_sp: &Vec3, psi_sp: f64) -> AttitudeSetpoint {
    let norm = f_sp.norm();
    if !(norm > MIN_FORCE_NORM) {
        return AttitudeSetpoint {
            q_sp: euler_to_quat(EulerAngles321::new(psi_sp, 0.0, 0.0)),
            elevation: 0.0,
            bank: 0.0,
            degenerate: true,
        };
    }
    // Body k axis points opposite to the thrust.
    let k_e = -f_sp / norm;
    let k_a = axis_rotation(Axis::Z, psi_sp).apply(&k_e);
    // Keep the elevation in [-pi/2, pi/2]; inverted cases land in the bank.
    let s = if k_a.z < 0.0 { -1.0 } else { 1.0 };
    let elevation = (s * k_a.x).atan2(s * k_a.z);
    let k_b = axis_rotation(Axis::Y, elevation).apply(&k_a);
    let bank = (-k_b.y).atan2(k_b.z);
    AttitudeSetpoint {
        q_sp: euler_to_quat(EulerAngles321::new(psi_sp, elevation, bank)),
        elevation,
        bank,
        degenerate: false,
    }
}

/// Smallest rotation taking the measured body `k` axis onto the setpoint
/// body `k` axis, expressed in the measured body frame, and the error
/// `z_q = sgn(η_red) ε_red`.
pub fn reduced_attitude_error(q_meas: &UnitQuaternion, q_sp: &UnitQuaternion) -> (UnitQuaternion, Vec3) {
    let k_meas = Vec3::z();
    let k_sp = q_meas.inverse_rotate(&q_sp.rotate(&Vec3::z()));
    let cross = k_meas.cross(&k_sp);
    let sin_a = cross.norm();
    let cos_a = k_meas.dot(&k_sp).clamp(-1.0, 1.0);
    let alpha = sin_a.atan2(cos_a);
    let axis = if sin_a > 1e-12 {
        cross / sin_a
    } else {
        // Aligned (alpha = 0) or opposite (alpha = pi): any horizontal axis.
        Vec3::x()
    };
    let half = 0.5 * alpha;
    let q_red = UnitQuaternion::renormalized(half.cos(), axis * half.sin());
    let z_q = sgn(q_red.eta()) * q_red.eps();
    (q_red, z_q)
}

/// Remaining rotation about the thrust axis once the reduced correction has
/// been applied, as `sgn(η) ε_z` of that rotation.
pub fn azimuth_error(q_meas: &UnitQuaternion, q_red: &UnitQuaternion, q_sp: &UnitQuaternion) -> f64 {
    let reduced_sp = *q_meas * *q_red;
    let q_yaw = reduced_sp.inverse() * *q_sp;
    sgn(q_yaw.eta()) * q_yaw.eps().z
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AttitudeMode {
    /// Reduced attitude error on the tilt axes, azimuth handled separately,
    /// azimuth-rate feedforward.
    #[default]
    Reduced,
    /// `(2/τ) sgn(η̃) ε̃` on the full quaternion error.
    Full,
}

impl std::str::FromStr for AttitudeMode {
    type Err = crate::error::ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reduced" => Ok(AttitudeMode::Reduced),
            "full" => Ok(AttitudeMode::Full),
            other => Err(crate::error::ParseError::Invalid(format!(
                "unknown attitude mode `{other}`"
            ))),
        }
    }
}

impl std::fmt::Display for AttitudeMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AttitudeMode::Reduced => "reduced",
            AttitudeMode::Full => "full",
        })
    }
}

/// Attitude error vector used by the selected law. In reduced mode this is
/// the tilt error `z_red` plus the azimuth error on the third axis.
pub fn attitude_error(q_meas: &UnitQuaternion, q_sp: &UnitQuaternion, mode: AttitudeMode) -> Vec3 {
    match mode {
        AttitudeMode::Reduced => {
            let (q_red, z_red) = reduced_attitude_error(q_meas, q_sp);
            z_red + Vec3::new(0.0, 0.0, azimuth_error(q_meas, &q_red, q_sp))
        }
        AttitudeMode::Full => {
            let e = quat_error(q_meas, q_sp);
            sgn(e.eta()) * e.eps()
        }
    }
}

/// Body rate setpoint before clamping.
pub fn attitude_law(
    q_meas: &UnitQuaternion,
    z_q: &Vec3,
    psi_rate_sp_ff: f64,
    gains: &GainSet,
    mode: AttitudeMode,
) -> Vec3 {
    match mode {
        AttitudeMode::Reduced => {
            // ψ̇_ff · O_{Q/E} e3: the Earth down axis in body components.
            gains.k_q.component_mul(z_q) + psi_rate_sp_ff * q_meas.inverse_rotate(&Vec3::z())
        }
        AttitudeMode::Full => (2.0 / gains.tau) * z_q,
    }
}

pub fn attitude_controller(
    q_meas: &UnitQuaternion,
    q_sp: &UnitQuaternion,
    psi_rate_sp_ff: f64,
    gains: &GainSet,
    mode: AttitudeMode,
    limits: &ControlLimits,
) -> Vec3 {
    let z_q = attitude_error(q_meas, q_sp, mode);
    limits.clamp_rates(&attitude_law(q_meas, &z_q, psi_rate_sp_ff, gains, mode))
}

/// Rate-loop PID plus rate feedforward, before clamping. Does not advance
/// the PID state.
pub fn rate_law(pid: &Pid3, z_omega: &Vec3, omega_sp: &Vec3, gains: &GainSet) -> Vec3 {
    pid.output(z_omega, &gains.k_w_p, &gains.k_w_i, &gains.k_w_d) + gains.k_w_ff.component_mul(omega_sp)
}

/// Body moment setpoint; advances the PID.
pub fn rate_controller(
    omega_sp: &Vec3,
    omega_meas: &Vec3,
    pid: &mut Pid3,
    gains: &GainSet,
    limits: &ControlLimits,
    dt: f64,
) -> Vec3 {
    assert!(dt > 0.0, "controller period must be positive");
    let z_w = omega_sp - omega_meas;
    let m = rate_law(pid, &z_w, omega_sp, gains);
    pid.advance(&z_w, limits.rate_integrator_bound);
    limits.clamp_moment(&m)
}
