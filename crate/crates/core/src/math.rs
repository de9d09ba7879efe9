//! Attitude primitives.
//!
//! Conventions used throughout the crate:
//!
//! * Frames are NED: `E` is the Earth frame (x north, y east, z down) and `Q`
//!   is the body frame (x forward, y right, z down).
//! * Quaternions are scalar-first `[eta, eps]` and compose with the Hamilton
//!   product.
//! * A [`UnitQuaternion`] `q` describes the attitude of `Q` relative to `E`.
//!   The matching [`RotationMatrix`] is the passive direction-cosine matrix
//!   `O_{Q/E}` that maps Earth-frame components to body-frame components,
//!   `v_Q = O_{Q/E} v_E`. Equivalently, rotating a body vector actively by
//!   `q` (`q ⊗ v ⊗ q⁻¹`) yields its Earth-frame components.
//! * 3-2-1 Euler angles compose as `O_{Q/E} = O_1(phi) O_2(theta) O_3(psi)`.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Mul;

use nalgebra::{Matrix3, Vector3};

use crate::error::MathError;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Norm deviation that is tolerated before renormalization is considered a
/// bug rather than round-off.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, PartialEq)]
pub struct UnitQuaternion {
    eta: f64,
    eps: Vec3,
}

impl fmt::Debug for UnitQuaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "UnitQuaternion({}, {}, {}, {})",
            self.eta, self.eps.x, self.eps.y, self.eps.z
        )
    }
}

impl Default for UnitQuaternion {
    fn default() -> Self {
        Self::identity()
    }
}

impl UnitQuaternion {
    pub fn identity() -> Self {
        Self {
            eta: 1.0,
            eps: Vec3::zeros(),
        }
    }

    /// Builds a unit quaternion from raw components, normalizing them.
    ///
    /// Returns an error for a zero or non-finite input.
    pub fn new(eta: f64, eps: Vec3) -> Result<Self, MathError> {
        let norm = (eta * eta + eps.norm_squared()).sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(MathError::DegenerateQuaternion);
        }
        Ok(Self {
            eta: eta / norm,
            eps: eps / norm,
        })
    }

    /// Normalizes components that are already close to unit length.
    ///
    /// Debug builds assert that the drift stayed under
    /// [`UNIT_NORM_TOLERANCE`].
    pub fn renormalized(eta: f64, eps: Vec3) -> Self {
        let norm = (eta * eta + eps.norm_squared()).sqrt();
        debug_assert!(
            (norm - 1.0).abs() <= UNIT_NORM_TOLERANCE,
            "quaternion drifted off the unit sphere: norm = {norm}"
        );
        Self {
            eta: eta / norm,
            eps: eps / norm,
        }
    }

    pub fn from_array(c: [f64; 4]) -> Result<Self, MathError> {
        Self::new(c[0], Vec3::new(c[1], c[2], c[3]))
    }

    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Result<Self, MathError> {
        let n = axis.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(MathError::DegenerateAxis);
        }
        let half = 0.5 * angle;
        Ok(Self {
            eta: half.cos(),
            eps: axis * (half.sin() / n),
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn eps(&self) -> Vec3 {
        self.eps
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.eta, self.eps.x, self.eps.y, self.eps.z]
    }

    pub fn norm(&self) -> f64 {
        (self.eta * self.eta + self.eps.norm_squared()).sqrt()
    }

    pub fn inverse(&self) -> Self {
        Self {
            eta: self.eta,
            eps: -self.eps,
        }
    }

    /// Rotates `v` actively: `q ⊗ [0, v] ⊗ q⁻¹`. For an attitude quaternion
    /// this maps body components to Earth components.
    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        let t = 2.0 * self.eps.cross(v);
        v + self.eta * t + self.eps.cross(&t)
    }

    /// Same as `self.inverse().rotate(v)`: Earth components to body components.
    pub fn inverse_rotate(&self, v: &Vec3) -> Vec3 {
        self.inverse().rotate(v)
    }

    /// Returns the representative with non-negative scalar part.
    pub fn canonical(&self) -> Self {
        if self.eta < 0.0 {
            Self {
                eta: -self.eta,
                eps: -self.eps,
            }
        } else {
            *self
        }
    }

    /// Extracts 3-2-1 Euler angles.
    pub fn to_euler(&self) -> EulerAngles321 {
        let (w, x, y, z) = (self.eta, self.eps.x, self.eps.y, self.eps.z);
        let sin_theta = (2.0 * (w * y - x * z)).clamp(-1.0, 1.0);
        let theta = sin_theta.asin();
        let phi = (2.0 * (w * x + y * z)).atan2(1.0 - 2.0 * (x * x + y * y));
        let psi = (2.0 * (w * z + x * y)).atan2(1.0 - 2.0 * (y * y + z * z));
        EulerAngles321 {
            psi: wrap_angle(psi),
            theta,
            phi: wrap_angle(phi),
        }
    }
}

/// Hamilton product, renormalized.
impl Mul for UnitQuaternion {
    type Output = UnitQuaternion;

    fn mul(self, rhs: UnitQuaternion) -> UnitQuaternion {
        let (e, v) = hamilton(self.eta, &self.eps, rhs.eta, &rhs.eps);
        UnitQuaternion::renormalized(e, v)
    }
}

pub(crate) fn hamilton(a0: f64, a: &Vec3, b0: f64, b: &Vec3) -> (f64, Vec3) {
    (a0 * b0 - a.dot(b), a0 * b + b0 * a + a.cross(b))
}

/// Direction-cosine matrix; orthogonal with unit determinant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotationMatrix(Mat3);

impl RotationMatrix {
    pub fn identity() -> Self {
        Self(Mat3::identity())
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }
}

impl Mul for RotationMatrix {
    type Output = RotationMatrix;

    fn mul(self, rhs: RotationMatrix) -> RotationMatrix {
        RotationMatrix(self.0 * rhs.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EulerAngles321 {
    /// Azimuth, rad.
    pub psi: f64,
    /// Elevation, rad.
    pub theta: f64,
    /// Bank, rad.
    pub phi: f64,
}

impl EulerAngles321 {
    pub fn new(psi: f64, theta: f64, phi: f64) -> Self {
        Self { psi, theta, phi }
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// `sgn` with `sgn(0) = +1`.
pub fn sgn(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

pub fn euler_to_quat(e: EulerAngles321) -> UnitQuaternion {
    let (sps, cps) = (0.5 * e.psi).sin_cos();
    let (sth, cth) = (0.5 * e.theta).sin_cos();
    let (sph, cph) = (0.5 * e.phi).sin_cos();
    let eta = cph * cth * cps + sph * sth * sps;
    let eps = Vec3::new(
        -cph * sth * sps + sph * cth * cps,
        cph * sth * cps + sph * cth * sps,
        cph * cth * sps - sph * sth * cps,
    );
    UnitQuaternion::renormalized(eta, eps)
}

/// Attitude error `q_meas⁻¹ ⊗ q_sp`.
pub fn quat_error(q_meas: &UnitQuaternion, q_sp: &UnitQuaternion) -> UnitQuaternion {
    q_meas.inverse() * *q_sp
}

/// Passive direction-cosine matrix `O_{Q/E}` for attitude `q`.
pub fn quat_to_rotmat(q: &UnitQuaternion) -> RotationMatrix {
    let (w, x, y, z) = (q.eta, q.eps.x, q.eps.y, q.eps.z);
    // Active rotation matrix of q, transposed.
    RotationMatrix(Mat3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y + w * z),
        2.0 * (x * z - w * y),
        2.0 * (x * y - w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z + w * x),
        2.0 * (x * z + w * y),
        2.0 * (y * z - w * x),
        1.0 - 2.0 * (x * x + y * y),
    ))
}

/// Recovers the attitude quaternion (non-negative scalar part) from `O_{Q/E}`.
pub fn rotmat_to_quat(r: &RotationMatrix) -> UnitQuaternion {
    // Work with the active matrix A = Rᵀ.
    let a = r.0.transpose();
    let trace = a.trace();
    let (w, x, y, z);
    if trace > 0.0 {
        let s = 2.0 * (trace + 1.0).sqrt();
        w = 0.25 * s;
        x = (a[(2, 1)] - a[(1, 2)]) / s;
        y = (a[(0, 2)] - a[(2, 0)]) / s;
        z = (a[(1, 0)] - a[(0, 1)]) / s;
    } else if a[(0, 0)] > a[(1, 1)] && a[(0, 0)] > a[(2, 2)] {
        let s = 2.0 * (1.0 + a[(0, 0)] - a[(1, 1)] - a[(2, 2)]).sqrt();
        w = (a[(2, 1)] - a[(1, 2)]) / s;
        x = 0.25 * s;
        y = (a[(0, 1)] + a[(1, 0)]) / s;
        z = (a[(0, 2)] + a[(2, 0)]) / s;
    } else if a[(1, 1)] > a[(2, 2)] {
        let s = 2.0 * (1.0 + a[(1, 1)] - a[(0, 0)] - a[(2, 2)]).sqrt();
        w = (a[(0, 2)] - a[(2, 0)]) / s;
        x = (a[(0, 1)] + a[(1, 0)]) / s;
        y = 0.25 * s;
        z = (a[(1, 2)] + a[(2, 1)]) / s;
    } else {
        let s = 2.0 * (1.0 + a[(2, 2)] - a[(0, 0)] - a[(1, 1)]).sqrt();
        w = (a[(1, 0)] - a[(0, 1)]) / s;
        x = (a[(0, 2)] + a[(2, 0)]) / s;
        y = (a[(1, 2)] + a[(2, 1)]) / s;
        z = 0.25 * s;
    }
    UnitQuaternion::new(w, Vec3::new(x, y, z))
        .expect("rotation matrix produced a degenerate quaternion")
        .canonical()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X = 1,
    Y = 2,
    Z = 3,
}

impl TryFrom<u8> for Axis {
    type Error = MathError;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        match value {
            1 => Ok(Axis::X),
            2 => Ok(Axis::Y),
            3 => Ok(Axis::Z),
            other => Err(MathError::InvalidAxis(other)),
        }
    }
}

/// Passive single-axis rotation `O_i(angle)`.
pub fn axis_rotation(axis: Axis, angle: f64) -> RotationMatrix {
    let (s, c) = angle.sin_cos();
    RotationMatrix(match axis {
        Axis::X => Mat3::new(1.0, 0.0, 0.0, 0.0, c, s, 0.0, -s, c),
        Axis::Y => Mat3::new(c, 0.0, -s, 0.0, 1.0, 0.0, s, 0.0, c),
        Axis::Z => Mat3::new(c, s, 0.0, -s, c, 0.0, 0.0, 0.0, 1.0),
    })
}

/// Same as [`axis_rotation`] but takes the axis as an index in `{1, 2, 3}`.
pub fn axis_rotation_index(axis: u8, angle: f64) -> Result<RotationMatrix, MathError> {
    Ok(axis_rotation(Axis::try_from(axis)?, angle))
}

/// Skew-symmetric cross-product matrix: `cross_matrix(v) * w == v × w`.
pub fn cross_matrix(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}
