//! Rigid-body quadcopter model: translational and rotational equations of
//! motion, quaternion kinematics, an ideal X-configuration mixer and a
//! fixed-step RK4 integrator.
//!
//! Rotor numbering (body frame, x forward, y right, z down):
//!
//! | rotor | position    | spin (from above) |
//! |-------|-------------|-------------------|
//! | 1     | front right | CCW               |
//! | 2     | rear left   | CCW               |
//! | 3     | front left  | CW                |
//! | 4     | rear right  | CW                |
//!
//! Each rotor pushes along `-k_Q`. A CCW rotor reacts with a positive
//! (nose-right) yaw moment of `rotor_torque_coeff · f_i`.

use std::f64::consts::SQRT_2;

use nalgebra::{Matrix4, Vector4};

use crate::error::DynamicsError;
use crate::math::{hamilton, Mat3, UnitQuaternion, Vec3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidBodyState {
    /// Position of the center of mass, Earth frame, m.
    pub r: Vec3,
    /// Earth-frame velocity, m/s.
    pub v: Vec3,
    /// Attitude of the body frame relative to the Earth frame.
    pub q: UnitQuaternion,
    /// Body angular rate (P, Q, R), rad/s.
    pub omega: Vec3,
}

impl Default for RigidBodyState {
    fn default() -> Self {
        Self {
            r: Vec3::zeros(),
            v: Vec3::zeros(),
            q: UnitQuaternion::identity(),
            omega: Vec3::zeros(),
        }
    }
}

impl RigidBodyState {
    pub fn check_finite(&self) -> Result<(), DynamicsError> {
        let finite = |v: &Vec3| v.iter().all(|c| c.is_finite());
        if !finite(&self.r) {
            return Err(DynamicsError::NonFiniteState("position"));
        }
        if !finite(&self.v) {
            return Err(DynamicsError::NonFiniteState("velocity"));
        }
        if !self.q.to_array().iter().all(|c| c.is_finite()) {
            return Err(DynamicsError::NonFiniteState("attitude"));
        }
        if !finite(&self.omega) {
            return Err(DynamicsError::NonFiniteState("angular rate"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VehicleParams {
    /// kg
    pub mass: f64,
    /// kg·m², body frame
    pub inertia: Mat3,
    /// m/s², along +k_E
    pub gravity: f64,
    /// Total thrust available from all four rotors, N.
    pub thrust_max: f64,
    /// Moment envelope used by the rate controller, N·m.
    pub moment_max: Vec3,
    /// Center to rotor distance, m.
    pub rotor_arm: f64,
    /// Yaw moment per unit rotor thrust, m.
    pub rotor_torque_coeff: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass: 2.0,
            inertia: Mat3::from_diagonal(&Vec3::new(0.021, 0.021, 0.036)),
            gravity: 9.81,
            thrust_max: 4.0 * 9.81,
            moment_max: Vec3::new(1.5, 1.5, 0.5),
            rotor_arm: 0.25,
            rotor_torque_coeff: 0.06,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |m: &str| Err(DynamicsError::InvalidParams(m.to_string()));
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return bad("mass must be positive");
        }
        if !(self.gravity.is_finite() && self.gravity >= 0.0) {
            return bad("gravity must be non-negative");
        }
        if !(self.thrust_max.is_finite() && self.thrust_max > 0.0) {
            return bad("thrust_max must be positive");
        }
        if !self.moment_max.iter().all(|m| m.is_finite() && *m > 0.0) {
            return bad("moment_max entries must be positive");
        }
        if !(self.rotor_arm > 0.0 && self.rotor_torque_coeff > 0.0) {
            return bad("rotor geometry must be positive");
        }
        if (self.inertia - self.inertia.transpose()).abs().max() > 1e-12 {
            return bad("inertia must be symmetric");
        }
        if self.inertia.cholesky().is_none() {
            return bad("inertia must be positive definite");
        }
        Ok(())
    }

    pub fn hover_thrust(&self) -> f64 {
        self.mass * self.gravity
    }

    pub fn rotor_thrust_max(&self) -> f64 {
        self.thrust_max / 4.0
    }

    fn inertia_inverse(&self) -> Mat3 {
        self.inertia
            .try_inverse()
            .expect("inertia validated as positive definite")
    }

    /// Maps rotor thrusts `[f1, f2, f3, f4]` to `[thrust, L, M, N]`.
    pub fn allocation_matrix(&self) -> Matrix4<f64> {
        let d = self.rotor_arm / SQRT_2;
        let c = self.rotor_torque_coeff;
        Matrix4::new(
            1.0, 1.0, 1.0, 1.0, //
            -d, d, d, -d, //
            d, -d, d, -d, //
            c, c, -c, -c,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActuatorCommand {
    /// Total thrust magnitude along `-k_Q`, N.
    pub thrust: f64,
    /// Body-frame moment, N·m.
    pub moment: Vec3,
}

impl ActuatorCommand {
    pub fn new(thrust: f64, moment: Vec3) -> Self {
        Self {
            thrust: thrust.max(0.0),
            moment,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixerOutput {
    pub thrust: f64,
    pub moment: Vec3,
    pub rotor_thrusts: [f64; 4],
    /// At least one rotor hit its floor or ceiling.
    pub saturated: bool,
}

/// Allocates a thrust/moment command to the four rotors, clamps every rotor to
/// `[0, thrust_max / 4]` and reports what the clamped rotors actually produce.
pub fn mixer(cmd: &ActuatorCommand, params: &VehicleParams) -> MixerOutput {
    let d = params.rotor_arm / SQRT_2;
    let c = params.rotor_torque_coeff;
    let (t, l, m, n) = (cmd.thrust, cmd.moment.x, cmd.moment.y, cmd.moment.z);
    // Rows of the allocation matrix are mutually orthogonal, so the inverse
    // is the scaled transpose.
    let raw = [
        t / 4.0 + (-l + m) / (4.0 * d) + n / (4.0 * c),
        t / 4.0 + (l - m) / (4.0 * d) + n / (4.0 * c),
        t / 4.0 + (l + m) / (4.0 * d) - n / (4.0 * c),
        t / 4.0 + (-l - m) / (4.0 * d) - n / (4.0 * c),
    ];
    let ceiling = params.rotor_thrust_max();
    let mut saturated = false;
    let rotors = raw.map(|f| {
        let clamped = f.clamp(0.0, ceiling);
        saturated |= clamped != f;
        clamped
    });
    if !saturated {
        return MixerOutput {
            thrust: cmd.thrust,
            moment: cmd.moment,
            rotor_thrusts: rotors,
            saturated,
        };
    }
    let out = params.allocation_matrix() * Vector4::from(rotors);
    MixerOutput {
        thrust: out[0],
        moment: Vec3::new(out[1], out[2], out[3]),
        rotor_thrusts: rotors,
        saturated,
    }
}

/// Earth-frame acceleration: `g·e3 + (1/m)·O_{E/Q}·(-thrust·e3)`.
pub fn translational_deriv(state: &RigidBodyState, achieved_thrust: f64, params: &VehicleParams) -> Vec3 {
    let thrust_body = Vec3::new(0.0, 0.0, -achieved_thrust);
    Vec3::new(0.0, 0.0, params.gravity) + state.q.rotate(&thrust_body) / params.mass
}

/// Body angular acceleration `J⁻¹ (M − ω × Jω)`.
pub fn rotational_deriv(state: &RigidBodyState, moment: &Vec3, params: &VehicleParams) -> Vec3 {
    let w = state.omega;
    params.inertia_inverse() * (moment - w.cross(&(params.inertia * w)))
}

/// Quaternion rate `½ q ⊗ [0, ω]`, scalar first.
pub fn attitude_deriv(state: &RigidBodyState) -> [f64; 4] {
    quat_rate(&state.q.to_array(), &state.omega)
}

fn quat_rate(q: &[f64; 4], omega: &Vec3) -> [f64; 4] {
    let (e, v) = hamilton(q[0], &Vec3::new(q[1], q[2], q[3]), 0.0, omega);
    [0.5 * e, 0.5 * v.x, 0.5 * v.y, 0.5 * v.z]
}

/// Integration state with an unconstrained quaternion.
#[derive(Clone, Copy)]
struct Raw {
    r: Vec3,
    v: Vec3,
    q: [f64; 4],
    w: Vec3,
}

impl Raw {
    fn axpy(&self, h: f64, d: &Raw) -> Raw {
        Raw {
            r: self.r + d.r * h,
            v: self.v + d.v * h,
            q: [
                self.q[0] + h * d.q[0],
                self.q[1] + h * d.q[1],
                self.q[2] + h * d.q[2],
                self.q[3] + h * d.q[3],
            ],
            w: self.w + d.w * h,
        }
    }
}

fn raw_deriv(s: &Raw, thrust: f64, moment: &Vec3, params: &VehicleParams, j_inv: &Mat3) -> Raw {
    // The quaternion is not renormalized inside a stage; rotate with the
    // normalized direction so thrust magnitude stays exact.
    let n = (s.q.iter().map(|c| c * c).sum::<f64>()).sqrt();
    let q = UnitQuaternion::new(s.q[0] / n, Vec3::new(s.q[1], s.q[2], s.q[3]) / n)
        .unwrap_or_else(|_| UnitQuaternion::identity());
    let accel = Vec3::new(0.0, 0.0, params.gravity) + q.rotate(&Vec3::new(0.0, 0.0, -thrust)) / params.mass;
    let w_dot = j_inv * (moment - s.w.cross(&(params.inertia * s.w)));
    Raw {
        r: s.v,
        v: accel,
        q: quat_rate(&s.q, &s.w),
        w: w_dot,
    }
}

/// Advances the state by `dt` with classical RK4. The mixer output is held
/// constant across the step.
pub fn step(
    state: &RigidBodyState,
    cmd: &ActuatorCommand,
    dt: f64,
    params: &VehicleParams,
) -> Result<RigidBodyState, DynamicsError> {
    let mixed = mixer(cmd, params);
    step_with_output(state, &mixed, dt, params)
}

pub(crate) fn step_with_output(
    state: &RigidBodyState,
    mixed: &MixerOutput,
    dt: f64,
    params: &VehicleParams,
) -> Result<RigidBodyState, DynamicsError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(DynamicsError::InvalidStep(dt));
    }
    let j_inv = params.inertia_inverse();
    let s0 = Raw {
        r: state.r,
        v: state.v,
        q: state.q.to_array(),
        w: state.omega,
    };
    let f = |s: &Raw| raw_deriv(s, mixed.thrust, &mixed.moment, params, &j_inv);
    let k1 = f(&s0);
    let k2 = f(&s0.axpy(0.5 * dt, &k1));
    let k3 = f(&s0.axpy(0.5 * dt, &k2));
    let k4 = f(&s0.axpy(dt, &k3));
    let mut next = s0;
    next = next.axpy(dt / 6.0, &k1);
    next = next.axpy(dt / 3.0, &k2);
    next = next.axpy(dt / 3.0, &k3);
    next = next.axpy(dt / 6.0, &k4);

    let q = UnitQuaternion::from_array(next.q).map_err(|_| DynamicsError::NonFiniteState("attitude"))?;
    let out = RigidBodyState {
        r: next.r,
        v: next.v,
        q,
        omega: next.w,
    };
    out.check_finite()?;
    Ok(out)
}
