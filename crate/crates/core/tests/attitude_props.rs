mod common;

use proptest::prelude::*;

use rcac_autopilot::math::{
    axis_rotation, euler_to_quat, quat_to_rotmat, wrap_angle, Axis, EulerAngles321, UnitQuaternion, Vec3,
};
use rcac_autopilot::stock::{f2q, reduced_attitude_error};

#[test]
fn f2q_aligns_a_thousand_random_setpoints() {
    let c = common::f2q_alignment(1000, 42);
    assert!(c.max_alignment_error < 1e-9, "{}", c.max_alignment_error);
    assert!(c.max_azimuth_error < 1e-9, "{}", c.max_azimuth_error);
}

fn euler() -> impl Strategy<Value = EulerAngles321> {
    (-3.1f64..3.1, -1.5f64..1.5, -3.1f64..3.1).prop_map(|(a, b, c)| EulerAngles321::new(a, b, c))
}

fn thrust_axis(q: &UnitQuaternion) -> Vec3 {
    q.rotate(&Vec3::z())
}

proptest! {
    #[test]
    fn f2q_alignment_property(
        fx in -30.0f64..30.0, fy in -30.0f64..30.0, fz in -50.0f64..-0.5, psi in -3.1f64..3.1,
    ) {
        let f = Vec3::new(fx, fy, fz);
        let sp = f2q(&f, psi);
        prop_assert!(!sp.degenerate);
        prop_assert!(common::alignment_error(&sp.q_sp, &f) < 1e-9);
        prop_assert!(wrap_angle(sp.q_sp.to_euler().psi - psi).abs() < 1e-9);
    }

    #[test]
    fn rotmat_is_the_euler_composition(e in euler()) {
        let r = quat_to_rotmat(&euler_to_quat(e));
        let o = axis_rotation(Axis::X, e.phi) * axis_rotation(Axis::Y, e.theta) * axis_rotation(Axis::Z, e.psi);
        prop_assert!((r.matrix() - o.matrix()).abs().max() < 1e-9);
    }

    /// Rotating the measured thrust axis by the reduced error lands on the
    /// setpoint thrust axis.
    #[test]
    fn reduced_error_rotates_axis_onto_setpoint(a in euler(), b in euler()) {
        let (qm, qs) = (euler_to_quat(a), euler_to_quat(b));
        let (q_red, _) = reduced_attitude_error(&qm, &qs);
        let k_meas_body = Vec3::z();
        let k_sp_body = qm.inverse_rotate(&thrust_axis(&qs));
        prop_assert!((q_red.rotate(&k_meas_body) - k_sp_body).norm() < 1e-9);
    }

    /// Reduced attitude ignores yaw: spinning either attitude about its own
    /// thrust axis leaves the error angle unchanged.
    #[test]
    fn reduced_error_angle_ignores_yaw(a in euler(), b in euler(), ya in -3.0f64..3.0, yb in -3.0f64..3.0) {
        let (qm, qs) = (euler_to_quat(a), euler_to_quat(b));
        let spin = |q: UnitQuaternion, y: f64| q * UnitQuaternion::from_axis_angle(&Vec3::z(), y).unwrap();
        let angle = |q: UnitQuaternion| 2.0 * q.eps().norm().atan2(q.eta().abs());
        let base = angle(reduced_attitude_error(&qm, &qs).0);
        let spun = angle(reduced_attitude_error(&spin(qm, ya), &spin(qs, yb)).0);
        prop_assert!((base - spun).abs() < 1e-9);
    }
}
