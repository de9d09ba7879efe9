mod common;

use proptest::prelude::*;

use rcac_autopilot::dynamics::{mixer, step, ActuatorCommand, RigidBodyState, VehicleParams};
use rcac_autopilot::math::{euler_to_quat, EulerAngles321, Vec3};

#[test]
fn ballistic_flight_matches_closed_form() {
    let err = common::ballistic_error();
    assert!(err < 1e-9, "{err}");
}

#[test]
fn free_fall_from_rest() {
    let params = VehicleParams::default();
    let mut s = RigidBodyState::default();
    for _ in 0..500 {
        s = step(&s, &ActuatorCommand::new(0.0, Vec3::zeros()), 0.002, &params).unwrap();
    }
    assert!((s.r.z - params.gravity / 2.0).abs() < 1e-10);
    assert!((s.v.z - params.gravity).abs() < 1e-12);
}

#[test]
fn hover_holds_position() {
    let drift = common::hover_drift();
    assert!(drift < 1e-6, "{drift}");
}

#[test]
fn torque_free_spin_conserves_angular_momentum() {
    let drift = common::momentum_drift();
    assert!(drift < 1e-6, "{drift}");
}

#[test]
fn integrator_is_fourth_order() {
    let ratio = common::rk4_order_ratio();
    assert!(ratio >= 12.0, "{ratio}");
}

proptest! {
    #[test]
    fn quaternion_stays_unit(
        psi in -3.0f64..3.0, theta in -1.4f64..1.4, phi in -3.0f64..3.0,
        w in prop::array::uniform3(-5.0f64..5.0),
        thrust in 0.0f64..40.0, m in prop::array::uniform3(-1.0f64..1.0),
    ) {
        let params = VehicleParams::default();
        let mut s = RigidBodyState {
            q: euler_to_quat(EulerAngles321::new(psi, theta, phi)),
            omega: Vec3::from(w),
            ..RigidBodyState::default()
        };
        for _ in 0..50 {
            s = step(&s, &ActuatorCommand::new(thrust, Vec3::from(m)), 0.002, &params).unwrap();
            prop_assert!((s.q.norm() - 1.0).abs() <= 1e-12);
        }
    }

    /// Achieved totals are always the allocation of the clamped rotor thrusts.
    #[test]
    fn mixer_output_is_consistent(thrust in -10.0f64..60.0, m in prop::array::uniform3(-3.0f64..3.0)) {
        let params = VehicleParams::default();
        let out = mixer(&ActuatorCommand::new(thrust, Vec3::from(m)), &params);
        let limit = params.rotor_thrust_max();
        for f in out.rotor_thrusts {
            prop_assert!((0.0..=limit).contains(&f));
        }
        let forward = params.allocation_matrix() * nalgebra::Vector4::from(out.rotor_thrusts);
        prop_assert!((forward[0] - out.thrust).abs() < 1e-12);
        prop_assert!((Vec3::new(forward[1], forward[2], forward[3]) - out.moment).norm() < 1e-12);
    }
}
