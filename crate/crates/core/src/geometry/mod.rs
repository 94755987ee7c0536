//! Pose representations, conversions, camera model, and point transforms.
//!
//! Conventions used everywhere in this crate:
//!
//! * Camera frame: x right, y down, z forward (pinhole looking along +z).
//! * Pixel centers sit at integer coordinates + 0.5; intrinsics are expressed
//!   in this continuous pixel coordinate system.
//! * All angles are radians. Degrees appear only at CLI boundaries.

mod camera;
mod mesh;
mod pose;
mod rotation;

pub use camera::CameraIntrinsics;
pub use mesh::{MeshModel, load_obj, parse_obj, primitives, write_obj};
pub use pose::{
    CropBox, Pose, SiteTranslation, site_to_translation, transform_points, translation_to_site,
};
pub use rotation::{
    Rot6D, RotationMatrix, allocentric_to_egocentric, egocentric_to_allocentric, rot6d_to_matrix,
};

use thiserror::Error;

/// Errors raised by geometric constructors and conversions.
#[derive(Debug, Error)]
pub enum GeometryError {
    /// Inputs are singular for the requested operation (zero vectors,
    /// parallel 6D columns, zero-area crops, ...).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// A pixel coordinate lies outside the image.
    #[error("pixel ({u}, {v}) outside image of size {width}x{height}")]
    OutOfBounds {
        u: f64,
        v: f64,
        width: u32,
        height: u32,
    },

    /// A matrix failed the rotation-matrix invariants.
    #[error("matrix is not a rotation: {0}")]
    NotARotation(String),

    /// Intrinsics fields violate their invariants.
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),

    /// Mesh data violates its invariants.
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
}
