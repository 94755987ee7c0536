//! Shape-from-polarization and 6D object-pose workbench core.
//!
//! The crate bundles the pieces needed to run physics-based pose experiments
//! end to end without a GPU or a neural network:
//!
//! * [`geometry`] — pose representations, camera model, meshes.
//! * [`polarization`] — the forward polarimetric image formation model,
//!   its least-squares decomposition, Fresnel degree-of-polarization curves,
//!   and the inversion back to plausible surface normals.
//! * [`raster`] — a deterministic software rasterizer (mask / normal / depth
//!   buffers) plus synthetic polarimetric quadruplet generation.
//! * [`losses`] — pose, mask, normal, physics, and chamfer losses with the
//!   pseudo-label selection policy.
//! * [`metrics`] — ADD / ADD-S pose accuracy metrics and recall aggregation.
//! * [`refine`] — numerical pose refinement driven by the physics loss.
//!
//! All operations are pure functions on value types; everything is safe to
//! call concurrently and is bitwise deterministic for fixed inputs.

pub mod geometry;
pub mod grid;
pub mod losses;
pub mod metrics;
pub mod numeric;
pub mod polarization;
pub mod raster;
pub mod refine;
pub mod spatial;

/// Scalar type used throughout the crate.
pub type Real = f64;
/// 3-vector with [`Real`] components.
pub type Vec3 = nalgebra::Vector3<Real>;
/// 3×3 matrix with [`Real`] entries.
pub type Mat3 = nalgebra::Matrix3<Real>;
