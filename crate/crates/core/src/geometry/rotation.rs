//! Rotation matrices, the continuous 6D rotation encoding, and the
//! allocentric/egocentric conversion.

use super::GeometryError;
use crate::{Mat3, Vec3};

const ORTHONORMAL_TOL: f64 = 1e-9;
const PARALLEL_TOL: f64 = 1e-12;

/// A validated 3×3 rotation matrix: orthonormal with determinant +1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(Mat3);

impl RotationMatrix {
    pub fn identity() -> Self {
        Self(Mat3::identity())
    }

    /// Validates orthonormality (RᵀR = I within 1e-9) and det(R) = +1.
    pub fn try_from_matrix(m: Mat3) -> Result<Self, GeometryError> {
        let gram = m.transpose() * m;
        let dev = (gram - Mat3::identity()).abs().max();
        if dev > ORTHONORMAL_TOL {
            return Err(GeometryError::NotARotation(format!(
                "RᵀR deviates from identity by {dev:.3e}"
            )));
        }
        let det = m.determinant();
        if (det - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(GeometryError::NotARotation(format!("det(R) = {det:.12}")));
        }
        Ok(Self(m))
    }

    /// Rodrigues rotation about `axis` (need not be unit) by `angle` radians.
    ///
    /// A zero axis yields the identity.
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let n = axis.norm();
        if n < PARALLEL_TOL {
            return Self::identity();
        }
        let u = axis / n;
        let (s, c) = angle.sin_cos();
        let k = skew(u);
        Self(Mat3::identity() + k * s + k * k * (1.0 - c))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn into_matrix(self) -> Mat3 {
        self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    /// Applies the rotation to a vector.
    #[inline]
    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// Composition: `self · other`.
    pub fn compose(&self, other: &Self) -> Self {
        Self(self.0 * other.0)
    }

    /// Rotation angle (radians) between this rotation and another.
    pub fn angle_to(&self, other: &Self) -> f64 {
        let rel = self.0.transpose() * other.0;
        ((rel.trace() - 1.0) * 0.5).clamp(-1.0, 1.0).acos()
    }
}

fn skew(u: Vec3) -> Mat3 {
    Mat3::new(0.0, -u.z, u.y, u.z, 0.0, -u.x, -u.y, u.x, 0.0)
}

/// Continuous 6D rotation encoding: the first two columns of a rotation
/// matrix before orthonormalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rot6D {
    pub a: Vec3,
    pub b: Vec3,
}

impl Rot6D {
    pub fn new(a: Vec3, b: Vec3) -> Self {
        Self { a, b }
    }

    /// Extracts the encoding from a rotation matrix (its first two columns).
    pub fn from_matrix(r: &RotationMatrix) -> Self {
        let m = r.matrix();
        Self {
            a: m.column(0).into(),
            b: m.column(1).into(),
        }
    }
}

/// Orthonormalizes a [`Rot6D`] into a rotation matrix: normalize the first
/// vector, Gram-Schmidt the second against it, cross product for the third.
pub fn rot6d_to_matrix(r: &Rot6D) -> Result<RotationMatrix, GeometryError> {
    let na = r.a.norm();
    if na < PARALLEL_TOL {
        return Err(GeometryError::DegenerateInput(
            "first 6D vector is zero".into(),
        ));
    }
    let c0 = r.a / na;
    let rejected = r.b - c0 * c0.dot(&r.b);
    let nr = rejected.norm();
    if nr < PARALLEL_TOL * r.b.norm().max(1.0) {
        return Err(GeometryError::DegenerateInput(
            "6D vectors are parallel".into(),
        ));
    }
    let c1 = rejected / nr;
    let c2 = c0.cross(&c1);
    Ok(RotationMatrix(Mat3::from_columns(&[c0, c1, c2])))
}

/// Rotation that takes the optical axis (0,0,1) onto the unit ray toward `t`.
///
/// This is the correction between allocentric and egocentric rotations for an
/// object centered at translation `t`.
fn viewpoint_correction(t: &Vec3) -> Result<RotationMatrix, GeometryError> {
    let n = t.norm();
    if n < PARALLEL_TOL {
        return Err(GeometryError::DegenerateInput(
            "translation has zero norm".into(),
        ));
    }
    let ray = t / n;
    let z = Vec3::new(0.0, 0.0, 1.0);
    let axis = z.cross(&ray);
    let angle = ray.z.clamp(-1.0, 1.0).acos();
    if axis.norm() < PARALLEL_TOL {
        // On the optical axis (or directly behind): no well-defined azimuth.
        // Behind-camera translations never occur for visible objects; treat
        // the antipodal case as a half-turn about x.
        if ray.z > 0.0 {
            return Ok(RotationMatrix::identity());
        }
        return Ok(RotationMatrix::from_axis_angle(
            Vec3::new(1.0, 0.0, 0.0),
            std::f64::consts::PI,
        ));
    }
    Ok(RotationMatrix::from_axis_angle(axis, angle))
}

/// Converts an allocentric rotation (viewpoint-invariant) to the egocentric
/// rotation observed by a camera for an object at translation `t`.
pub fn allocentric_to_egocentric(
    r_alloc: &RotationMatrix,
    t: &Vec3,
) -> Result<RotationMatrix, GeometryError> {
    let corr = viewpoint_correction(t)?;
    Ok(corr.compose(r_alloc))
}

/// Inverse of [`allocentric_to_egocentric`].
pub fn egocentric_to_allocentric(
    r_ego: &RotationMatrix,
    t: &Vec3,
) -> Result<RotationMatrix, GeometryError> {
    let corr = viewpoint_correction(t)?;
    Ok(corr.transpose().compose(r_ego))
}
