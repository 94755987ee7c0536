//! Rigid pose, point transforms, and the scale-invariant translation
//! encoding relative to a detection crop.

use super::{CameraIntrinsics, GeometryError, RotationMatrix};
use crate::Vec3;

/// Crop size (pixels) that network inputs are resized to; the zoom ratio of
/// the scale-invariant translation encoding is expressed against it.
pub const CANONICAL_CROP_SIZE: f64 = 256.0;

/// Rigid transform from object frame to camera frame: `x_cam = R·x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: RotationMatrix,
    pub translation: Vec3,
}

impl Pose {
    pub fn new(rotation: RotationMatrix, translation: Vec3) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self {
            rotation: RotationMatrix::identity(),
            translation: Vec3::zeros(),
        }
    }

    #[inline]
    pub fn transform(&self, p: &Vec3) -> Vec3 {
        self.rotation.rotate(p) + self.translation
    }

    /// Composition: apply `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation.compose(&other.rotation),
            translation: self.rotation.rotate(&other.translation) + self.translation,
        }
    }
}

/// Applies a pose to a set of points.
pub fn transform_points(pose: &Pose, points: &[Vec3]) -> Vec<Vec3> {
    points.iter().map(|p| pose.transform(p)).collect()
}

/// Square detection crop in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropBox {
    /// Crop center, continuous pixels.
    pub center_u: f64,
    pub center_v: f64,
    /// Side length in pixels.
    pub size: f64,
}

impl CropBox {
    pub fn new(center_u: f64, center_v: f64, size: f64) -> Result<Self, GeometryError> {
        if !size.is_finite() || size <= 0.0 {
            return Err(GeometryError::DegenerateInput(format!(
                "crop size must be positive, got {size}"
            )));
        }
        Ok(Self {
            center_u,
            center_v,
            size,
        })
    }

    /// Crop size over canonical size.
    pub fn zoom_ratio(&self) -> f64 {
        self.size / CANONICAL_CROP_SIZE
    }
}

/// Scale-invariant translation encoding.
///
/// `(dx, dy)` are the offsets of the projected object center from the crop
/// center as fractions of the crop size; `dz` is depth divided by the crop's
/// zoom ratio (meters per unit).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiteTranslation {
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
}

/// Encodes a camera-frame translation against a crop.
pub fn translation_to_site(
    t: &Vec3,
    crop: &CropBox,
    k: &CameraIntrinsics,
) -> Result<SiteTranslation, GeometryError> {
    if t.z <= 0.0 {
        return Err(GeometryError::DegenerateInput(format!(
            "translation depth must be positive, got {}",
            t.z
        )));
    }
    let (u, v) = k.project(t);
    Ok(SiteTranslation {
        dx: (u - crop.center_u) / crop.size,
        dy: (v - crop.center_v) / crop.size,
        dz: t.z / crop.zoom_ratio(),
    })
}

/// Decodes a [`SiteTranslation`] back into a camera-frame translation.
pub fn site_to_translation(
    s: &SiteTranslation,
    crop: &CropBox,
    k: &CameraIntrinsics,
) -> Result<Vec3, GeometryError> {
    if !s.dz.is_finite() || s.dz <= 0.0 {
        return Err(GeometryError::DegenerateInput(format!(
            "site dz must be positive, got {}",
            s.dz
        )));
    }
    let z = s.dz * crop.zoom_ratio();
    let u = crop.center_u + s.dx * crop.size;
    let v = crop.center_v + s.dy * crop.size;
    Ok(Vec3::new(
        (u - k.cx) / k.fx * z,
        (v - k.cy) / k.fy * z,
        z,
    ))
}
