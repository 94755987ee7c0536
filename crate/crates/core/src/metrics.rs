//! ADD / ADD-S pose-accuracy metrics and recall aggregation.
//!
//! Model points are the mesh vertices, without resampling, so reported
//! numbers are exactly reproducible for a given mesh file.

use crate::geometry::{MeshModel, Pose};
use crate::losses::BRUTE_FORCE_LIMIT;
use crate::numeric::pairwise_mean;
use crate::spatial::KdTree3;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no records to aggregate")]
    EmptyInput,
}

/// Average Distance of Distinguishable Model Points: mean Euclidean
/// deviation between the two posed copies of the vertex set, in meters.
pub fn add_metric(p_gt: &Pose, p_est: &Pose, mesh: &MeshModel) -> f64 {
    let terms: Vec<f64> = mesh
        .vertices()
        .iter()
        .map(|x| (p_gt.transform(x) - p_est.transform(x)).norm())
        .collect();
    pairwise_mean(&terms)
}

/// ADD-S, the symmetric variant: mean distance from each ground-truth
/// transformed vertex to the closest estimated transformed vertex.
pub fn adds_metric(p_gt: &Pose, p_est: &Pose, mesh: &MeshModel) -> f64 {
    let gt_pts: Vec<_> = mesh.vertices().iter().map(|x| p_gt.transform(x)).collect();
    let est_pts: Vec<_> = mesh.vertices().iter().map(|x| p_est.transform(x)).collect();
    let terms: Vec<f64> = if est_pts.len() <= BRUTE_FORCE_LIMIT {
        gt_pts
            .iter()
            .map(|p| {
                est_pts
                    .iter()
                    .map(|q| (p - q).norm_squared())
                    .fold(f64::INFINITY, f64::min)
                    .sqrt()
            })
            .collect()
    } else {
        let tree = KdTree3::build(&est_pts);
        gt_pts.iter().map(|p| tree.nearest_distance(p)).collect()
    };
    pairwise_mean(&terms)
}

/// One evaluated pose: the metric value, the decision threshold
/// (0.1 × object diameter), and whether it counts as a hit.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub object: String,
    pub add: f64,
    pub threshold: f64,
    pub hit: bool,
}

impl EvalRecord {
    /// `hit` is derived, never supplied: `add < threshold`.
    pub fn new(object: impl Into<String>, add: f64, threshold: f64) -> Self {
        Self {
            object: object.into(),
            add,
            threshold,
            hit: add < threshold,
        }
    }

    /// Record with the threshold rule pinned to 10% of the mesh diameter.
    pub fn with_diameter(object: impl Into<String>, add: f64, diameter: f64) -> Self {
        Self::new(object, add, 0.1 * diameter)
    }
}

/// Hit percentage over a batch of records.
pub fn recall(records: &[EvalRecord]) -> Result<f64, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let hits = records.iter().filter(|r| r.hit).count();
    Ok(100.0 * hits as f64 / records.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Vec3;
    use crate::geometry::{RotationMatrix, primitives};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pose(rng: &mut ChaCha8Rng) -> Pose {
        let axis = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        Pose::new(
            RotationMatrix::from_axis_angle(axis, rng.gen_range(0.0..3.0)),
            Vec3::new(
                rng.gen_range(-0.3..0.3),
                rng.gen_range(-0.3..0.3),
                rng.gen_range(0.5..1.5),
            ),
        )
    }

    #[test]
    fn identical_poses_are_zero() {
        let mesh = primitives::sphere(0.05, 16, 8);
        let p = random_pose(&mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(add_metric(&p, &p, &mesh), 0.0);
        assert_eq!(adds_metric(&p, &p, &mesh), 0.0);
    }

    #[test]
    fn pure_translation_gives_its_norm() {
        let mesh = primitives::sphere(0.05, 16, 8);
        let p = random_pose(&mut ChaCha8Rng::seed_from_u64(2));
        let d = Vec3::new(0.003, -0.004, 0.0);
        let q = Pose::new(p.rotation, p.translation + d);
        assert_abs_diff_eq!(add_metric(&p, &q, &mesh), 0.005, epsilon = 1e-12);
    }

    #[test]
    fn add_and_adds_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cloud: Vec<Vec3> = (0..300)
            .map(|_| {
                Vec3::new(
                    rng.gen_range(-0.05..0.05),
                    rng.gen_range(-0.05..0.05),
                    rng.gen_range(-0.05..0.05),
                )
            })
            .collect();
        let normals = vec![Vec3::new(0.0, 0.0, 1.0); cloud.len()];
        let mesh = MeshModel::try_new(cloud.clone(), vec![[0, 1, 2]], normals).unwrap();
        for _ in 0..20 {
            let (pa, pb) = (random_pose(&mut rng), random_pose(&mut rng));
            let gt: Vec<Vec3> = cloud.iter().map(|x| pa.transform(x)).collect();
            let est: Vec<Vec3> = cloud.iter().map(|x| pb.transform(x)).collect();

            let add_oracle =
                gt.iter().zip(&est).map(|(a, b)| (a - b).norm()).sum::<f64>() / gt.len() as f64;
            assert!((add_metric(&pa, &pb, &mesh) - add_oracle).abs() < 1e-12);

            let adds_oracle = gt
                .iter()
                .map(|p| est.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min))
                .sum::<f64>()
                / gt.len() as f64;
            assert!((adds_metric(&pa, &pb, &mesh) - adds_oracle).abs() < 1e-12);

            // Closest-point relaxation.
            assert!(adds_metric(&pa, &pb, &mesh) <= add_metric(&pa, &pb, &mesh) + 1e-15);
        }
    }

    #[test]
    fn cylinder_symmetry_separates_add_from_adds() {
        let n_seg = 64;
        let mesh = primitives::cylinder(0.03, 0.1, n_seg);
        let p_gt = random_pose(&mut ChaCha8Rng::seed_from_u64(4));
        // Rotate about the symmetry axis by exactly one segment step so the
        // vertex set maps onto itself.
        let step = RotationMatrix::from_axis_angle(
            Vec3::new(0.0, 0.0, 1.0),
            2.0 * std::f64::consts::PI / n_seg as f64,
        );
        let p_est = Pose::new(p_gt.rotation.compose(&step), p_gt.translation);
        assert!(adds_metric(&p_gt, &p_est, &mesh) < 1e-9);
        assert!(add_metric(&p_gt, &p_est, &mesh) > 1e-4);
    }

    #[test]
    fn metrics_invariant_under_common_rigid_motion() {
        let mesh = primitives::sphere(0.05, 16, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (pa, pb) = (random_pose(&mut rng), random_pose(&mut rng));
        let left = random_pose(&mut rng);
        let add_before = add_metric(&pa, &pb, &mesh);
        let adds_before = adds_metric(&pa, &pb, &mesh);
        let add_after = add_metric(&left.compose(&pa), &left.compose(&pb), &mesh);
        let adds_after = adds_metric(&left.compose(&pa), &left.compose(&pb), &mesh);
        assert!((add_before - add_after).abs() < 1e-9);
        assert!((adds_before - adds_after).abs() < 1e-9);
    }

    #[test]
    fn recall_and_threshold_rule() {
        let all: Vec<EvalRecord> = (0..4)
            .map(|i| EvalRecord::with_diameter(format!("o{i}"), 0.001, 0.1))
            .collect();
        assert_eq!(recall(&all).unwrap(), 100.0);

        let none: Vec<EvalRecord> = (0..4)
            .map(|i| EvalRecord::with_diameter(format!("o{i}"), 0.5, 0.1))
            .collect();
        assert_eq!(recall(&none).unwrap(), 0.0);

        // Strict inequality at the boundary.
        let boundary = EvalRecord::new("o", 0.01, 0.01);
        assert!(!boundary.hit);
        let derived = EvalRecord::with_diameter("o", 0.005, 0.1);
        assert!((derived.threshold - 0.01).abs() < 1e-15);
        assert!(derived.hit);

        assert!(matches!(recall(&[]), Err(MetricsError::EmptyInput)));
    }
}
