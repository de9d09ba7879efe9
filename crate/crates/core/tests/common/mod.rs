//! Independent oracles shared by the integration tests and the acceptance
//! suite.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rcac_autopilot::dynamics::{step, ActuatorCommand, RigidBodyState, VehicleParams};
use rcac_autopilot::math::{euler_to_quat, EulerAngles321, Mat3, UnitQuaternion, Vec3};
use rcac_autopilot::rcac::{min_eigenvalue, RcacConfig, RcacState};
use rcac_autopilot::stock::f2q;

/// One sample `(z_k, φ_{k-1}, u_{k-1})`.
pub struct Sample {
    pub z: DVector<f64>,
    pub phi_prev: DMatrix<f64>,
    pub u_prev: DVector<f64>,
}

/// Minimizer of `Σ ‖z + Σ(φθ - u)‖² + (θ - θ₀)ᵀ(θ - θ₀)/p0` from the normal
/// equations, solved by LU.
pub fn batch_minimizer(config: &RcacConfig, history: &[Sample]) -> DVector<f64> {
    let n = config.n_coeffs();
    let sigma = DVector::from_column_slice(&config.sigma);
    let theta0 = DVector::from_column_slice(&config.theta0);
    let mut a = DMatrix::identity(n, n) / config.p0;
    let mut b = theta0 / config.p0;
    for s in history {
        a += s.phi_prev.transpose() * &s.phi_prev;
        b += s.phi_prev.transpose() * (&s.u_prev - sigma.component_mul(&s.z));
    }
    a.lu().solve(&b).expect("normal equations are nonsingular")
}

pub struct RlsCheck {
    pub max_relative_error: f64,
    pub max_asymmetry: f64,
    /// Smallest eigenvalue of `P_k - P_{k+1}` over all steps.
    pub min_decrease_eigenvalue: f64,
    pub steps: usize,
}

/// Drives an `RcacState` through `steps` random closed-loop steps and
/// compares `θ` with the batch minimizer after every update.
pub fn rls_versus_batch(seed: u64, n_coeffs: usize, steps: usize) -> RlsCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_channels = match n_coeffs {
        9 | 12 => 3,
        3 if rng.random_bool(0.5) => 3,
        _ => 1,
    };
    let mut config = RcacConfig::new(rng.random_range(0.1..10.0), 1.0, n_channels, n_coeffs);
    for s in config.sigma.iter_mut() {
        *s = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    }
    if rng.random_bool(0.5) {
        config.theta0 = (0..n_coeffs).map(|_| rng.random_range(-1.0..1.0)).collect();
    }
    config.check_covariance = false;
    let mut state = RcacState::new(&config).unwrap();

    let mut history: Vec<Sample> = Vec::new();
    let mut check = RlsCheck {
        max_relative_error: 0.0,
        max_asymmetry: 0.0,
        min_decrease_eigenvalue: f64::INFINITY,
        steps: 0,
    };
    for k in 0..=steps {
        let z = DVector::from_fn(n_channels, |_, _| rng.random_range(-1.0..1.0));
        let phi = DMatrix::from_fn(n_channels, n_coeffs, |_, _| rng.random_range(-1.0..1.0));
        let stored = state.phi_prev().cloned().map(|p| (p, state.u_prev().clone()));
        let p_before = state.covariance().clone();
        state.step(z.as_slice(), phi, &config).unwrap();
        let Some((phi_prev, u_prev)) = stored else {
            continue;
        };
        history.push(Sample { z, phi_prev, u_prev });
        let batch = batch_minimizer(&config, &history);
        let rel = (state.theta() - &batch).norm() / batch.norm();
        check.max_relative_error = check.max_relative_error.max(rel);
        let p = state.covariance();
        check.max_asymmetry = check.max_asymmetry.max((p - p.transpose()).abs().max());
        check.min_decrease_eigenvalue = check.min_decrease_eigenvalue.min(min_eigenvalue(&(p_before - p)));
        check.steps = k;
    }
    check
}

/// Coefficient counts exercised by the RLS checks.
pub const RLS_SIZES: [usize; 5] = [1, 3, 4, 9, 12];

/// Largest position error of a zero-thrust 1 s flight against `r = r₀ + v₀t + g t²/2`.
pub fn ballistic_error() -> f64 {
    let params = VehicleParams::default();
    let mut s = RigidBodyState {
        r: Vec3::new(1.0, -2.0, -10.0),
        v: Vec3::new(0.5, 1.5, -3.0),
        q: euler_to_quat(EulerAngles321::new(0.4, 0.2, -0.3)),
        omega: Vec3::new(0.3, -0.2, 0.5),
    };
    let (r0, v0) = (s.r, s.v);
    let g = Vec3::new(0.0, 0.0, params.gravity);
    let dt = 0.002;
    let mut worst: f64 = 0.0;
    for n in 1..=500 {
        s = step(&s, &ActuatorCommand::new(0.0, Vec3::zeros()), dt, &params).unwrap();
        let t = n as f64 * dt;
        worst = worst.max((s.r - (r0 + v0 * t + 0.5 * g * t * t)).norm());
    }
    worst
}

/// Position drift after 10 s of commanded hover from rest.
pub fn hover_drift() -> f64 {
    let params = VehicleParams::default();
    let mut s = RigidBodyState::default();
    let cmd = ActuatorCommand::new(params.hover_thrust(), Vec3::zeros());
    for _ in 0..5000 {
        s = step(&s, &cmd, 0.002, &params).unwrap();
    }
    s.r.norm()
}

/// Largest relative change of `‖Jω‖` over 10 s of torque-free tumbling with
/// `J = diag(1, 2, 3)`.
pub fn momentum_drift() -> f64 {
    let params = VehicleParams {
        inertia: Mat3::from_diagonal(&Vec3::new(1.0, 2.0, 3.0)),
        ..VehicleParams::default()
    };
    let mut s = RigidBodyState {
        omega: Vec3::new(1.0, 0.1, 0.5),
        ..RigidBodyState::default()
    };
    let h0 = (params.inertia * s.omega).norm();
    let mut worst: f64 = 0.0;
    for _ in 0..5000 {
        s = step(&s, &ActuatorCommand::new(0.0, Vec3::zeros()), 0.002, &params).unwrap();
        worst = worst.max(((params.inertia * s.omega).norm() - h0).abs() / h0);
    }
    worst
}

fn state_distance(a: &RigidBodyState, b: &RigidBodyState) -> f64 {
    let qa = a.q.to_array();
    let qb = b.q.to_array();
    let dq: f64 = qa.iter().zip(&qb).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    (a.r - b.r).norm() + (a.v - b.v).norm() + dq + (a.omega - b.omega).norm()
}

fn fly_one_second(dt: f64) -> RigidBodyState {
    let params = VehicleParams::default();
    let cmd = ActuatorCommand::new(15.0, Vec3::new(0.02, -0.03, 0.01));
    let mut s = RigidBodyState {
        v: Vec3::new(1.0, 0.0, -0.5),
        omega: Vec3::new(1.0, -0.5, 0.8),
        ..RigidBodyState::default()
    };
    let n = (1.0 / dt).round() as usize;
    for _ in 0..n {
        s = step(&s, &cmd, dt, &params).unwrap();
    }
    s
}

/// `err(h) / err(h/2)` against an `h/16` reference for a tumbling, thrusting
/// 1 s flight. Fourth order gives 16.
pub fn rk4_order_ratio() -> f64 {
    let h = 0.04;
    let reference = fly_one_second(h / 16.0);
    let coarse = state_distance(&fly_one_second(h), &reference);
    let fine = state_distance(&fly_one_second(h / 2.0), &reference);
    coarse / fine
}

pub struct F2qCheck {
    pub max_alignment_error: f64,
    pub max_azimuth_error: f64,
}

/// Random force setpoints with upward thrust and azimuths in (-π, π).
pub fn f2q_alignment(n: usize, seed: u64) -> F2qCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut check = F2qCheck {
        max_alignment_error: 0.0,
        max_azimuth_error: 0.0,
    };
    for _ in 0..n {
        let f = Vec3::new(
            rng.random_range(-20.0..20.0),
            rng.random_range(-20.0..20.0),
            rng.random_range(-40.0..-1.0),
        );
        let psi = rng.random_range(-3.1..3.1);
        let sp = f2q(&f, psi);
        check.max_alignment_error = check.max_alignment_error.max(alignment_error(&sp.q_sp, &f));
        let err = rcac_autopilot::math::wrap_angle(sp.q_sp.to_euler().psi - psi).abs();
        check.max_azimuth_error = check.max_azimuth_error.max(err);
    }
    check
}

/// Distance between the body thrust direction `-k_Q` in Earth axes and `f/‖f‖`.
pub fn alignment_error(q: &UnitQuaternion, f: &Vec3) -> f64 {
    let thrust_dir = -q.rotate(&Vec3::z());
    (thrust_dir - f.normalize()).norm()
}
