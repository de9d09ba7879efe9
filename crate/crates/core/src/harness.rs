//! Closed-loop experiments on a mission and the metrics computed from their
//! logs.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adaptive::{AdaptiveConfig, THETA_TOTAL_LEN};
use crate::autopilot::Autopilot;
use crate::dynamics::{mixer, step_with_output, RigidBodyState, VehicleParams};
use crate::error::{Error, ParseError, Result};
use crate::gains::GainSet;
use crate::log::{FlightLog, GainRow, LogRow};
use crate::math::{wrap_angle, UnitQuaternion, Vec3};
use crate::mission::{MissionPlan, SetpointGenerator};
use crate::stock::{AttitudeMode, ControlLimits};

/// Nominal position/velocity loop period, s.
pub const OUTER_PERIOD: f64 = 0.02;
/// Nominal attitude/rate loop period, s.
pub const INNER_PERIOD: f64 = 0.004;
pub const DEFAULT_DT: f64 = 0.002;
pub const DEFAULT_DURATION: f64 = 180.0;
/// Runs stop once the vehicle is this far from the origin, m.
pub const DIVERGENCE_RADIUS: f64 = 1000.0;

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    /// Detuning factor applied to every stock gain.
    pub alpha_p: f64,
    pub adaptive: bool,
    /// RCAC settings and per-loop enable flags; ignored for stock runs.
    pub rcac: AdaptiveConfig,
    /// Gains before detuning.
    pub gains: GainSet,
    pub limits: ControlLimits,
    pub vehicle: VehicleParams,
    pub attitude_mode: AttitudeMode,
    /// Physics step, s.
    pub dt: f64,
    /// Simulated time cap, s.
    pub duration: f64,
    pub seed: u64,
    /// Half-width of the uniform initial position offset, m.
    pub jitter: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let vehicle = VehicleParams::default();
        Self {
            alpha_p: 1.0,
            adaptive: false,
            rcac: AdaptiveConfig::default(),
            gains: GainSet::default(),
            limits: ControlLimits::for_vehicle(&vehicle),
            vehicle,
            attitude_mode: AttitudeMode::Reduced,
            dt: DEFAULT_DT,
            duration: DEFAULT_DURATION,
            seed: 0,
            jitter: 0.01,
        }
    }
}

impl ExperimentConfig {
    pub fn stock(alpha_p: f64) -> Self {
        Self {
            alpha_p,
            ..Self::default()
        }
    }

    pub fn adaptive(alpha_p: f64) -> Self {
        Self {
            alpha_p,
            adaptive: true,
            ..Self::default()
        }
    }

    /// Physics steps per (outer, inner) controller update.
    pub fn schedule(&self) -> Result<(u64, u64)> {
        let per = |period: f64| -> Result<u64> {
            let n = (period / self.dt).round();
            if n < 1.0 || ((n * self.dt) - period).abs() > 1e-9 * period {
                return Err(Error::Config(format!(
                    "physics step {} s does not divide the {} s controller period",
                    self.dt, period
                )));
            }
            Ok(n as u64)
        };
        Ok((per(OUTER_PERIOD)?, per(INNER_PERIOD)?))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_p > 0.0 && self.alpha_p.is_finite()) {
            return Err(Error::Config(format!("alpha must be positive, got {}", self.alpha_p)));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::Config(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(Error::Config(format!(
                "jitter must be non-negative, got {}",
                self.jitter
            )));
        }
        self.schedule()?;
        self.vehicle.validate()?;
        self.gains.validate()?;
        Ok(())
    }

    pub fn mode_name(&self) -> &'static str {
        if self.adaptive {
            "adaptive"
        } else {
            "stock"
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub log: FlightLog,
    pub metrics: MetricsReport,
    /// Set when the run stopped early on a numerical failure.
    pub abort_reason: Option<String>,
    /// Force setpoints too small to define an attitude.
    pub degenerate_force_count: u64,
}

fn initial_state(config: &ExperimentConfig) -> RigidBodyState {
    let mut state = RigidBodyState::default();
    if config.jitter > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let j = config.jitter;
        state.r = Vec3::new(
            rng.random_range(-j..=j),
            rng.random_range(-j..=j),
            rng.random_range(-j..=j),
        );
    }
    state
}

fn build_autopilot(config: &ExperimentConfig) -> Result<Autopilot> {
    let gains = config.gains.detune(config.alpha_p);
    Ok(if config.adaptive {
        Autopilot::adaptive(
            config.vehicle.clone(),
            gains,
            config.limits.clone(),
            config.attitude_mode,
            config.rcac.clone(),
        )?
    } else {
        Autopilot::stock(
            config.vehicle.clone(),
            gains,
            config.limits.clone(),
            config.attitude_mode,
        )
    })
}

/// Flies `plan` until it completes, the duration cap is reached or the
/// simulation fails. Every physics sample is logged.
pub fn run_experiment(config: &ExperimentConfig, plan: &MissionPlan) -> Result<ExperimentOutput> {
    config.validate()?;
    plan.validate()?;
    let (outer_every, inner_every) = config.schedule()?;
    let mut autopilot = build_autopilot(config)?;
    let mut state = initial_state(config);
    let mut generator = SetpointGenerator::new(plan.clone(), state.r, 0.0);
    let n_steps = (config.duration / config.dt).floor() as u64;
    let mut log = FlightLog::default();
    let mut abort_reason = None;
    let mut waypoint = 0;
    let mut theta = [0.0; THETA_TOTAL_LEN];

    for n in 0..=n_steps {
        let t = n as f64 * config.dt;
        let mut complete = false;
        let control = (|| -> Result<()> {
            if n % outer_every == 0 {
                let sp = generator.update(&state.r, t);
                waypoint = sp.waypoint;
                complete = sp.complete;
                autopilot.update_outer(&state, &sp.setpoint)?;
            }
            if n % inner_every == 0 {
                autopilot.update_inner(&state)?;
            }
            Ok(())
        })();
        if let Err(e) = control {
            abort_reason = Some(format!("t = {t}: {e}"));
            break;
        }
        if let Some(a) = autopilot.adaptive_state() {
            if n % inner_every == 0 {
                theta.copy_from_slice(&a.theta_all());
            }
        }

        let mixed = mixer(&autopilot.command(), &config.vehicle);
        let chain = autopilot.chain();
        let aug = autopilot.augmentation();
        log.rows.push(LogRow {
            t,
            r: state.r,
            r_sp: chain.r_sp,
            v: state.v,
            v_sp: chain.v_sp,
            q: state.q.to_array(),
            q_sp: chain.q_sp.to_array(),
            omega: state.omega,
            omega_sp: chain.omega_sp,
            f_sp: chain.f_sp,
            moment_sp: chain.moment_sp,
            u_r: aug.u_r,
            u_v: aug.u_v,
            u_q: aug.u_q,
            u_omega: aug.u_omega,
            thrust_achieved: mixed.thrust,
            saturated: mixed.saturated,
            waypoint,
        });
        log.gains.push(GainRow { t, theta });
        if complete {
            break;
        }

        match step_with_output(&state, &mixed, config.dt, &config.vehicle) {
            Ok(next) if next.r.norm() > DIVERGENCE_RADIUS => {
                abort_reason = Some(format!("t = {t}: vehicle left the {DIVERGENCE_RADIUS} m test volume"));
                break;
            }
            Ok(next) => state = next,
            Err(e) => {
                abort_reason = Some(format!("t = {t}: {e}"));
                break;
            }
        }
    }

    let metrics = compute_metrics(&log, plan)?;
    Ok(ExperimentOutput {
        log,
        metrics,
        abort_reason,
        degenerate_force_count: autopilot.degenerate_force_count(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    /// RMS of `‖r_sp - r‖` over the samples before completion, m.
    pub position_rmse: f64,
    /// Largest excursion past each waypoint along the leg direction, m.
    pub max_overshoot: Vec<f64>,
    /// RMS azimuth tracking error over the same samples, rad.
    pub azimuth_rmse: f64,
    /// Time of the final acceptance, or of the last sample if the mission
    /// did not complete, s.
    pub completion_time: f64,
    pub completed: bool,
    pub samples: usize,
    /// Terminal `‖θ‖` of the position, velocity, attitude and rate loops.
    pub theta_norms: [f64; 4],
}

fn azimuth(q: &[f64; 4]) -> f64 {
    UnitQuaternion::renormalized(q[0], Vec3::new(q[1], q[2], q[3]))
        .to_euler()
        .psi
}

pub fn compute_metrics(log: &FlightLog, plan: &MissionPlan) -> Result<MetricsReport> {
    let rows = &log.rows;
    let first = rows
        .first()
        .ok_or_else(|| Error::Config("cannot compute metrics of an empty log".into()))?;
    let n_wp = plan.waypoints.len();
    if let Some(bad) = rows.iter().find(|r| r.waypoint > n_wp) {
        return Err(ParseError::Invalid(format!(
            "log refers to waypoint {} of a {n_wp}-waypoint plan",
            bad.waypoint
        ))
        .into());
    }

    let active: Vec<&LogRow> = rows.iter().filter(|r| r.waypoint < n_wp).collect();
    let (mut pos_sq, mut psi_sq) = (0.0, 0.0);
    for r in &active {
        pos_sq += (r.r_sp - r.r).norm_squared();
        psi_sq += wrap_angle(azimuth(&r.q_sp) - azimuth(&r.q)).powi(2);
    }
    let count = active.len().max(1) as f64;

    let mut max_overshoot = Vec::with_capacity(n_wp);
    let mut start = first.r;
    for (i, w) in plan.waypoints.iter().enumerate() {
        let leg = w.position - start;
        let len = leg.norm();
        let mut worst: f64 = 0.0;
        if len > 0.0 {
            let dir = leg / len;
            for r in rows.iter().filter(|r| r.waypoint == i || r.waypoint == i + 1) {
                worst = worst.max((r.r - w.position).dot(&dir));
            }
        }
        max_overshoot.push(worst);
        start = w.position;
    }

    let done = rows.iter().find(|r| r.waypoint == n_wp);
    let last = rows.last().expect("nonempty");
    let theta = log.gains.last().map(|g| g.theta).unwrap_or([0.0; THETA_TOTAL_LEN]);
    let norm = |s: &[f64]| s.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(MetricsReport {
        position_rmse: (pos_sq / count).sqrt(),
        max_overshoot,
        azimuth_rmse: (psi_sq / count).sqrt(),
        completion_time: done.map_or(last.t, |r| r.t),
        completed: done.is_some(),
        samples: rows.len(),
        theta_norms: [
            norm(&theta[0..3]),
            norm(&theta[3..12]),
            norm(&theta[12..15]),
            norm(&theta[15..27]),
        ],
    })
}

impl MetricsReport {
    /// `key = value` text with round-trip floats.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "position_rmse = {}", self.position_rmse).unwrap();
        writeln!(out, "azimuth_rmse = {}", self.azimuth_rmse).unwrap();
        writeln!(out, "completion_time = {}", self.completion_time).unwrap();
        writeln!(out, "completed = {}", self.completed).unwrap();
        writeln!(out, "samples = {}", self.samples).unwrap();
        let over: Vec<String> = self.max_overshoot.iter().map(f64::to_string).collect();
        writeln!(out, "max_overshoot = {}", over.join(",")).unwrap();
        for (name, v) in ["r", "v", "q", "omega"].iter().zip(self.theta_norms) {
            writeln!(out, "theta_norm_{name} = {v}").unwrap();
        }
        out
    }
}
