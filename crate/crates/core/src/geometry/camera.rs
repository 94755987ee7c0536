//! Pinhole camera model.

use super::GeometryError;
use crate::Vec3;

/// Pinhole intrinsics. Pixel coordinates are continuous with pixel centers
/// at integer + 0.5; `(cx, cy)` is expressed in the same system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, GeometryError> {
        if !(fx > 0.0 && fy > 0.0) || !fx.is_finite() || !fy.is_finite() {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "focal lengths must be positive, got fx={fx}, fy={fy}"
            )));
        }
        if !(0.0..width as f64).contains(&cx) || !(0.0..height as f64).contains(&cy) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "principal point ({cx}, {cy}) outside {width}x{height} image"
            )));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    /// Projects a camera-frame point (z > 0) to continuous pixel coordinates.
    #[inline]
    pub fn project(&self, p: &Vec3) -> (f64, f64) {
        (
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        )
    }

    /// Unit ray through pixel `(u, v)`, pointing into the scene (+z).
    ///
    /// Errors with `OutOfBounds` when the pixel lies outside the image.
    pub fn backproject(&self, u: f64, v: f64) -> Result<Vec3, GeometryError> {
        if !(0.0..=self.width as f64).contains(&u) || !(0.0..=self.height as f64).contains(&v) {
            return Err(GeometryError::OutOfBounds {
                u,
                v,
                width: self.width,
                height: self.height,
            });
        }
        Ok(self.ray_unchecked(u, v))
    }

    /// Same as [`backproject`](Self::backproject) without the bounds check,
    /// for inner loops that iterate over pixels by construction.
    #[inline]
    pub fn ray_unchecked(&self, u: f64, v: f64) -> Vec3 {
        Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0).normalize()
    }

    /// Unit vector from the surface point seen at `(u, v)` toward the camera.
    #[inline]
    pub fn view_dir_unchecked(&self, u: f64, v: f64) -> Vec3 {
        -self.ray_unchecked(u, v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::new(100.0, 120.0, 320.0, 240.0, 640, 480).unwrap()
    }

    #[test]
    fn principal_point_is_optical_axis() {
        let ray = k().backproject(320.0, 240.0).unwrap();
        assert_abs_diff_eq!(ray, Vec3::new(0.0, 0.0, 1.0), epsilon = 1e-15);
    }

    #[test]
    fn unit_tangent_offset() {
        let kk = k();
        let ray = kk.backproject(kk.cx + kk.fx, kk.cy).unwrap();
        let expected = Vec3::new(1.0, 0.0, 1.0).normalize();
        assert_abs_diff_eq!(ray, expected, epsilon = 1e-15);
    }

    #[test]
    fn projection_round_trip() {
        let kk = k();
        for i in 0..200 {
            let u = 0.5 + (i as f64 * 3.19) % 639.0;
            let v = 0.5 + (i as f64 * 7.07) % 479.0;
            let ray = kk.backproject(u, v).unwrap();
            assert_abs_diff_eq!(ray.norm(), 1.0, epsilon = 1e-12);
            let (pu, pv) = kk.project(&ray);
            assert!((pu - u).abs() < 1e-9 && (pv - v).abs() < 1e-9);
        }
    }

    #[test]
    fn out_of_bounds_rejected() {
        assert!(matches!(
            k().backproject(-1.0, 10.0),
            Err(GeometryError::OutOfBounds { .. })
        ));
        assert!(k().backproject(641.0, 10.0).is_err());
    }

    #[test]
    fn invalid_intrinsics_rejected() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 1.0, 1.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 5.0, 1.0, 4, 4).is_err());
    }
}
