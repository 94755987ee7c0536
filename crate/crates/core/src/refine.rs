//! Numerical pose refinement against observed polarimetric data.
//!
//! In place of a learned pose regressor, a perturbed pose is improved
//! directly: the objective renders the mesh at the candidate pose, derives
//! analytic DoP maps through the inverted physical model, and scores them
//! against the observed DoP (physics loss) plus a mask alignment term. A
//! finite-difference gradient descent with backtracking line search drives
//! the pose; the rendered landscape is only piecewise smooth, so rejected
//! steps shrink the step length instead of assuming descent.

use crate::geometry::{CameraIntrinsics, MeshModel, Pose, RotationMatrix};
use crate::grid::{Grid, Mask, ScalarMap};
use crate::losses::{mask_loss, physics_loss};
use crate::polarization::{MaterialSpec, analytic_dop_maps};
use crate::raster::rasterize;
use crate::Vec3;
use rayon::prelude::*;
use thiserror::Error;

/// Objective value reported for candidates that render no pixels; large but
/// finite so the line search can still compare and reject them.
pub const EMPTY_RENDER_SENTINEL: f64 = 1e12;

#[derive(Debug, Error)]
pub enum RefineError {
    #[error("initial pose renders with no overlap against the observed mask")]
    NoOverlap,

    #[error("shape mismatch between observation buffers")]
    ShapeMismatch,
}

/// Observed polarimetric data for one scene.
#[derive(Debug, Clone)]
pub struct Observation {
    /// Degree of polarization per pixel, in [0, 1].
    pub rho: ScalarMap,
    /// Angle of polarization per pixel, in [0, π). Not used by the default
    /// objective (the physics loss is DoP-only); retained for extensions.
    pub aop: ScalarMap,
    /// Object mask of the observation.
    pub mask: Mask,
    pub intrinsics: CameraIntrinsics,
    pub material: MaterialSpec,
}

impl Observation {
    pub fn validate(&self) -> Result<(), RefineError> {
        if !self.rho.same_shape(&self.aop)
            || !self.rho.same_shape(&self.mask)
            || self.rho.shape() != (self.intrinsics.width as usize, self.intrinsics.height as usize)
        {
            return Err(RefineError::ShapeMismatch);
        }
        Ok(())
    }
}

/// Weights of the two objective terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveWeights {
    pub physics: f64,
    pub mask: f64,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        Self {
            physics: 1.0,
            mask: 1.0,
        }
    }
}

/// Refinement configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineConfig {
    /// Outer gradient iterations.
    pub max_iters: usize,
    /// Central-difference probe length for the rotation parameters, radians.
    pub fd_step_rot: f64,
    /// Central-difference probe length for the translation parameters, meters.
    pub fd_step_trans: f64,
    /// Natural step scale of the rotation block, radians.
    pub step_rot: f64,
    /// Natural step scale of the translation block, meters.
    pub step_trans: f64,
    /// Step-length growth factor applied after an accepted step.
    pub step_growth: f64,
    /// Maximum step length in scaled units.
    pub step_max: f64,
    /// Backtracking halvings per iteration before giving up.
    pub max_backtracks: u32,
    /// Terminate once an accepted step improves the loss by less than this.
    pub loss_tol: f64,
    pub weights: ObjectiveWeights,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            max_iters: 80,
            fd_step_rot: 1e-3,
            fd_step_trans: 1e-4,
            step_rot: 0.02,
            step_trans: 0.004,
            step_growth: 1.5,
            step_max: 4.0,
            max_backtracks: 20,
            loss_tol: 1e-12,
            weights: ObjectiveWeights::default(),
        }
    }
}

/// Refinement output: the improved pose and the objective trace, one entry
/// per iteration starting at the initial objective.
#[derive(Debug, Clone)]
pub struct RefineResult {
    pub pose: Pose,
    pub trace: Vec<f64>,
}

/// Renders the mesh at `pose` and scores it against the observation:
/// `w_physics · physics_loss + w_mask · mask_loss`. Candidates that render
/// nothing (or sit behind the camera) score [`EMPTY_RENDER_SENTINEL`].
pub fn objective(
    pose: &Pose,
    obs: &Observation,
    mesh: &MeshModel,
    weights: &ObjectiveWeights,
) -> f64 {
    if pose.translation.z <= 0.0 {
        return EMPTY_RENDER_SENTINEL;
    }
    let rb = rasterize(mesh, pose, &obs.intrinsics);
    if rb.is_empty_render() {
        return EMPTY_RENDER_SENTINEL;
    }
    let analytic = analytic_dop_maps(&rb.normals, &rb.mask, &obs.intrinsics, &obs.material);
    // The physics term lives where rendered normals exist; the mask term
    // anchors the silhouette, which DoP alone cannot see.
    let physics = physics_loss(&obs.rho, &analytic, &rb.mask).expect("rendered mask is non-empty");
    let mask = mask_loss(&rb.mask.to_scalar(), &obs.mask.to_scalar()).expect("shapes agree");
    weights.physics * physics + weights.mask * mask
}

/// Applies a scaled 6-vector increment: the first three components rotate
/// on the left of `R` (axis-angle, radians), the last three translate.
fn apply_increment(pose: &Pose, delta: &[f64; 6]) -> Pose {
    let axis = Vec3::new(delta[0], delta[1], delta[2]);
    let angle = axis.norm();
    let rot = RotationMatrix::from_axis_angle(axis, angle);
    Pose::new(
        rot.compose(&pose.rotation),
        pose.translation + Vec3::new(delta[3], delta[4], delta[5]),
    )
}

/// Refines a pose by finite-difference gradient descent on the objective.
///
/// The trace is monotone non-increasing: probes and rejected candidates are
/// never recorded, only accepted states. Given identical inputs the result
/// is bitwise deterministic.
pub fn refine_pose(
    p0: &Pose,
    obs: &Observation,
    mesh: &MeshModel,
    cfg: &RefineConfig,
) -> Result<RefineResult, RefineError> {
    obs.validate()?;

    // Precondition: the initial render must overlap the observed mask.
    let rb0 = rasterize(mesh, p0, &obs.intrinsics);
    let overlap = rb0
        .mask
        .as_slice()
        .iter()
        .zip(obs.mask.as_slice())
        .any(|(&a, &b)| a && b);
    if !overlap {
        return Err(RefineError::NoOverlap);
    }

    let scales = [
        cfg.step_rot,
        cfg.step_rot,
        cfg.step_rot,
        cfg.step_trans,
        cfg.step_trans,
        cfg.step_trans,
    ];
    let fd = [
        cfg.fd_step_rot,
        cfg.fd_step_rot,
        cfg.fd_step_rot,
        cfg.fd_step_trans,
        cfg.fd_step_trans,
        cfg.fd_step_trans,
    ];

    let mut pose = *p0;
    let mut f = objective(&pose, obs, mesh, &cfg.weights);
    let mut trace = vec![f];
    let mut step = 1.0f64;

    for _ in 0..cfg.max_iters {
        // Central differences over the 6 pose parameters. Probes are
        // independent; evaluate them concurrently, combined in fixed order.
        let grad: Vec<f64> = (0..6)
            .into_par_iter()
            .map(|i| {
                let mut plus = [0.0; 6];
                plus[i] = fd[i];
                let mut minus = [0.0; 6];
                minus[i] = -fd[i];
                let fp = objective(&apply_increment(&pose, &plus), obs, mesh, &cfg.weights);
                let fm = objective(&apply_increment(&pose, &minus), obs, mesh, &cfg.weights);
                (fp - fm) / (2.0 * fd[i])
            })
            .collect();

        // Steepest descent in coordinates scaled by the per-block steps.
        let mut dir = [0.0f64; 6];
        let mut norm2 = 0.0;
        for i in 0..6 {
            dir[i] = -grad[i] * scales[i];
            norm2 += dir[i] * dir[i];
        }
        let norm = norm2.sqrt();
        if norm == 0.0 {
            break; // flat point at finite-difference resolution
        }

        let mut accepted = false;
        let mut alpha = step;
        for _ in 0..=cfg.max_backtracks {
            let mut delta = [0.0f64; 6];
            for i in 0..6 {
                delta[i] = dir[i] / norm * alpha * scales[i];
            }
            let candidate = apply_increment(&pose, &delta);
            // Candidates that would move the object behind the camera are
            // rejected outright.
            if candidate.translation.z > 0.0 {
                let fc = objective(&candidate, obs, mesh, &cfg.weights);
                if fc < f {
                    let improvement = f - fc;
                    pose = candidate;
                    f = fc;
                    step = (alpha * cfg.step_growth).min(cfg.step_max);
                    accepted = true;
                    trace.push(f);
                    if improvement < cfg.loss_tol {
                        return Ok(RefineResult { pose, trace });
                    }
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            break; // gradient direction exhausted at the smallest step
        }
    }

    Ok(RefineResult { pose, trace })
}

/// Builds an observation directly from maps (shapes validated).
pub fn observation_from_maps(
    rho: ScalarMap,
    aop: ScalarMap,
    mask: Mask,
    intrinsics: CameraIntrinsics,
    material: MaterialSpec,
) -> Result<Observation, RefineError> {
    let obs = Observation {
        rho,
        aop,
        mask,
        intrinsics,
        material,
    };
    obs.validate()?;
    Ok(obs)
}

/// Convenience: synthesizes a noiseless observation of a mesh at a ground
/// truth pose (render, shade, decompose). Used by tests and the selfcheck
/// pipeline.
pub fn synthesize_observation(
    mesh: &MeshModel,
    pose_gt: &Pose,
    k: &CameraIntrinsics,
    material: &MaterialSpec,
    shading: &crate::raster::ShadingSpec,
    mode: crate::polarization::ReflectionMode,
) -> Observation {
    let rb = rasterize(mesh, pose_gt, k);
    let modes = Grid::filled(k.width as usize, k.height as usize, mode);
    let quad = crate::raster::render_polarization(&rb, k, material, shading, &modes)
        .expect("shapes agree");
    let maps = crate::polarization::decompose_quadruplet(&quad).expect("canonical angles");
    Observation {
        rho: maps.rho,
        aop: maps.phi,
        mask: rb.mask,
        intrinsics: *k,
        material: material.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives;
    use crate::polarization::ReflectionMode;
    use crate::raster::ShadingSpec;

    fn camera() -> CameraIntrinsics {
        CameraIntrinsics::new(400.0, 400.0, 96.0, 96.0, 192, 192).unwrap()
    }

    fn sphere_obs() -> (MeshModel, Pose, Observation) {
        let mesh = primitives::sphere(0.05, 48, 24);
        let pose = Pose::new(RotationMatrix::identity(), Vec3::new(0.01, -0.01, 0.45));
        let obs = synthesize_observation(
            &mesh,
            &pose,
            &camera(),
            &MaterialSpec::plastics(),
            &ShadingSpec::default(),
            ReflectionMode::Diffuse,
        );
        (mesh, pose, obs)
    }

    #[test]
    fn objective_near_zero_at_ground_truth() {
        let (mesh, pose, obs) = sphere_obs();
        let weights = ObjectiveWeights::default();
        let f_gt = objective(&pose, &obs, &mesh, &weights);
        assert!(f_gt < 1e-7, "objective at GT pose: {f_gt:.3e}");
    }

    #[test]
    fn objective_sentinel_on_disjoint_render() {
        let (mesh, _, obs) = sphere_obs();
        let off = Pose::new(RotationMatrix::identity(), Vec3::new(5.0, 0.0, 0.45));
        let f = objective(&off, &obs, &mesh, &ObjectiveWeights::default());
        assert_eq!(f, EMPTY_RENDER_SENTINEL);
        let behind = Pose::new(RotationMatrix::identity(), Vec3::new(0.0, 0.0, -0.45));
        assert_eq!(
            objective(&behind, &obs, &mesh, &ObjectiveWeights::default()),
            EMPTY_RENDER_SENTINEL
        );
    }

    #[test]
    fn objective_decreases_toward_ground_truth() {
        // Landscape probe: walking from a perturbed pose toward GT should
        // mostly lower the objective.
        let (mesh, gt, obs) = sphere_obs();
        let weights = ObjectiveWeights::default();
        let mut decreasing_trials = 0;
        let trials = 10;
        for t in 0..trials {
            let angle = 0.087; // 5 degrees
            let axis = Vec3::new((t as f64).sin(), (t as f64 * 1.7).cos(), 0.4);
            let dt = Vec3::new(0.004, -0.002, 0.003) * ((t % 3) as f64 - 1.0);
            let perturbed = Pose::new(
                RotationMatrix::from_axis_angle(axis, angle).compose(&gt.rotation),
                gt.translation + dt,
            );
            let mut ok = true;
            let mut prev = f64::INFINITY;
            for s in 0..=10 {
                let w = s as f64 / 10.0;
                // Interpolate translation linearly and rotation by scaling
                // the axis-angle offset.
                let rel_angle = angle * (1.0 - w);
                let pose = Pose::new(
                    RotationMatrix::from_axis_angle(axis, rel_angle).compose(&gt.rotation),
                    perturbed.translation * (1.0 - w) + gt.translation * w,
                );
                let f = objective(&pose, &obs, &mesh, &weights);
                if f > prev + 1e-6 {
                    ok = false;
                }
                prev = f;
            }
            if ok {
                decreasing_trials += 1;
            }
        }
        assert!(
            decreasing_trials * 10 >= trials * 8,
            "{decreasing_trials}/{trials} monotone descent lines"
        );
    }

    #[test]
    fn refine_fixed_point_at_ground_truth() {
        let (mesh, gt, obs) = sphere_obs();
        let cfg = RefineConfig {
            max_iters: 5,
            ..Default::default()
        };
        let out = refine_pose(&gt, &obs, &mesh, &cfg).unwrap();
        let w = ObjectiveWeights::default();
        assert!(objective(&out.pose, &obs, &mesh, &w) <= objective(&gt, &obs, &mesh, &w));
        for pair in out.trace.windows(2) {
            assert!(pair[1] <= pair[0]);
        }
    }

    #[test]
    fn refine_improves_perturbed_pose() {
        let (mesh, gt, obs) = sphere_obs();
        let perturbed = Pose::new(
            RotationMatrix::from_axis_angle(Vec3::new(0.3, 0.8, 0.1), 0.087)
                .compose(&gt.rotation),
            gt.translation + Vec3::new(0.004, -0.003, 0.002),
        );
        let cfg = RefineConfig {
            max_iters: 40,
            ..Default::default()
        };
        let out = refine_pose(&perturbed, &obs, &mesh, &cfg).unwrap();
        let w = ObjectiveWeights::default();
        let f0 = objective(&perturbed, &obs, &mesh, &w);
        let f1 = objective(&out.pose, &obs, &mesh, &w);
        assert!(f1 < f0, "refinement failed to improve: {f0:.3e} -> {f1:.3e}");
        // Trace monotone non-increasing.
        for pair in out.trace.windows(2) {
            assert!(pair[1] <= pair[0]);
        }
        // Pose error must shrink.
        let add_before = crate::metrics::add_metric(&gt, &perturbed, &mesh);
        let add_after = crate::metrics::add_metric(&gt, &out.pose, &mesh);
        assert!(
            add_after < add_before,
            "ADD grew: {add_before:.5} -> {add_after:.5}"
        );
    }

    #[test]
    fn refine_deterministic() {
        let (mesh, gt, obs) = sphere_obs();
        let perturbed = Pose::new(
            RotationMatrix::from_axis_angle(Vec3::new(0.1, 0.9, -0.2), 0.06)
                .compose(&gt.rotation),
            gt.translation + Vec3::new(-0.002, 0.003, -0.001),
        );
        let cfg = RefineConfig {
            max_iters: 15,
            ..Default::default()
        };
        let a = refine_pose(&perturbed, &obs, &mesh, &cfg).unwrap();
        let b = refine_pose(&perturbed, &obs, &mesh, &cfg).unwrap();
        assert_eq!(a.pose.translation, b.pose.translation);
        assert_eq!(a.pose.rotation.matrix(), b.pose.rotation.matrix());
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn refine_no_overlap_rejected() {
        let (mesh, _, obs) = sphere_obs();
        let off = Pose::new(RotationMatrix::identity(), Vec3::new(0.3, 0.0, 0.45));
        let cfg = RefineConfig::default();
        assert!(matches!(
            refine_pose(&off, &obs, &mesh, &cfg),
            Err(RefineError::NoOverlap)
        ));
    }

    #[test]
    fn more_iterations_never_hurt() {
        let (mesh, gt, obs) = sphere_obs();
        let perturbed = Pose::new(
            RotationMatrix::from_axis_angle(Vec3::new(0.5, 0.2, 0.8), 0.05)
                .compose(&gt.rotation),
            gt.translation + Vec3::new(0.003, 0.001, -0.002),
        );
        let w = ObjectiveWeights::default();
        let short = RefineConfig {
            max_iters: 10,
            ..Default::default()
        };
        let long = RefineConfig {
            max_iters: 20,
            ..Default::default()
        };
        let f_short = objective(
            &refine_pose(&perturbed, &obs, &mesh, &short).unwrap().pose,
            &obs,
            &mesh,
            &w,
        );
        let f_long = objective(
            &refine_pose(&perturbed, &obs, &mesh, &long).unwrap().pose,
            &obs,
            &mesh,
            &w,
        );
        assert!(f_long <= f_short);
    }
}
