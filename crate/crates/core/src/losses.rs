//! Loss suite: point-matching pose loss, mask MSE, normal cosine loss,
//! the pixel-wise minimum physics loss, chamfer distance, and the
//! pseudo-label selection policy that weights them.

use crate::geometry::{MeshModel, Pose};
use crate::grid::{Grid, Mask, ScalarMap, VectorMap};
use crate::numeric::pairwise_mean;
use crate::polarization::AnalyticDop;
use crate::spatial::KdTree3;
use crate::Vec3;
use thiserror::Error;

/// Point count below which chamfer and ADD-S style queries use a plain
/// double loop instead of a KD-tree. Both paths return identical values.
pub const BRUTE_FORCE_LIMIT: usize = 500;

#[derive(Debug, Error)]
pub enum LossError {
    #[error("shape mismatch: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),

    #[error("no valid pixel in the evaluation mask")]
    EmptyMask,

    #[error("both masks are empty")]
    BothEmpty,

    #[error("point set is empty")]
    EmptySet,
}

fn check_shapes<T, U>(a: &Grid<T>, b: &Grid<U>) -> Result<(), LossError> {
    if !a.same_shape(b) {
        return Err(LossError::ShapeMismatch(
            a.width(),
            a.height(),
            b.width(),
            b.height(),
        ));
    }
    Ok(())
}

/// Mean L1 distance between two posed copies of the model point set:
/// `avg_x ‖(R_a x + t_a) − (R_b x + t_b)‖₁`.
pub fn point_matching_loss(p_a: &Pose, p_b: &Pose, mesh: &MeshModel) -> f64 {
    let terms: Vec<f64> = mesh
        .vertices()
        .iter()
        .map(|x| {
            let d = p_a.transform(x) - p_b.transform(x);
            d.x.abs() + d.y.abs() + d.z.abs()
        })
        .collect();
    pairwise_mean(&terms)
}

/// Mean squared error between two soft masks.
pub fn mask_loss(m_a: &ScalarMap, m_b: &ScalarMap) -> Result<f64, LossError> {
    check_shapes(m_a, m_b)?;
    let terms: Vec<f64> = m_a
        .as_slice()
        .iter()
        .zip(m_b.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .collect();
    Ok(pairwise_mean(&terms))
}

/// Mean cosine dissimilarity `1 − n_a·n_b` over valid pixels; in [0, 2]
/// for unit normals.
pub fn normal_loss(n_a: &VectorMap, n_b: &VectorMap, valid: &Mask) -> Result<f64, LossError> {
    check_shapes(n_a, n_b)?;
    check_shapes(n_a, valid)?;
    let terms: Vec<f64> = n_a
        .as_slice()
        .iter()
        .zip(n_b.as_slice())
        .zip(valid.as_slice())
        .filter(|(_, &v)| v)
        .map(|((a, b), _)| 1.0 - a.dot(b))
        .collect();
    if terms.is_empty() {
        return Err(LossError::EmptyMask);
    }
    Ok(pairwise_mean(&terms))
}

/// Pixel-wise minimum physics loss: mean over valid pixels of
/// `min(|ρ − ρ̂_d|, |ρ − ρ̂_s|)`.
pub fn physics_loss(
    rho_obs: &ScalarMap,
    analytic: &Grid<AnalyticDop>,
    valid: &Mask,
) -> Result<f64, LossError> {
    check_shapes(rho_obs, analytic)?;
    check_shapes(rho_obs, valid)?;
    let terms: Vec<f64> = rho_obs
        .as_slice()
        .iter()
        .zip(analytic.as_slice())
        .zip(valid.as_slice())
        .filter(|(_, &v)| v)
        .map(|((&rho, a), _)| {
            let dd = (rho - a.rho_d_hat).abs();
            let ds = (rho - a.rho_s_hat).abs();
            dd.min(ds)
        })
        .collect();
    if terms.is_empty() {
        return Err(LossError::EmptyMask);
    }
    Ok(pairwise_mean(&terms))
}

fn mean_nearest_distance(from: &[Vec3], to: &[Vec3]) -> f64 {
    let terms: Vec<f64> = if from.len().max(to.len()) <= BRUTE_FORCE_LIMIT {
        from.iter()
            .map(|p| {
                to.iter()
                    .map(|q| (p - q).norm_squared())
                    .fold(f64::INFINITY, f64::min)
                    .sqrt()
            })
            .collect()
    } else {
        let tree = KdTree3::build(to);
        from.iter().map(|p| tree.nearest_distance(p)).collect()
    };
    pairwise_mean(&terms)
}

/// Symmetric chamfer distance:
/// `avg_{p∈A} min_{q∈B} ‖p−q‖₂ + avg_{q∈B} min_{p∈A} ‖p−q‖₂`.
pub fn chamfer_loss(pc_a: &[Vec3], pc_b: &[Vec3]) -> Result<f64, LossError> {
    if pc_a.is_empty() || pc_b.is_empty() {
        return Err(LossError::EmptySet);
    }
    Ok(mean_nearest_distance(pc_a, pc_b) + mean_nearest_distance(pc_b, pc_a))
}

/// Which representation serves as geometric pseudo ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PseudoLabelSource {
    /// Mask and normal map rendered from the predicted pose.
    Rendered,
    /// Directly predicted mask and normal map.
    Predicted,
}

/// Pseudo-label selection policy: the normalized mask discrepancy δ decides
/// the geometric pseudo ground truth and down-weights the pose loss through
/// `λ₁ = 1 − δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudoLabelPolicy {
    /// Discrepancy threshold in [0, 1].
    pub r: f64,
    /// Normalized mask discrepancy `δ = 1 − IoU`.
    pub delta: f64,
    /// Pose-loss weight `λ₁ = 1 − δ`.
    pub lambda1: f64,
    pub source: PseudoLabelSource,
}

/// Compares predicted and rendered masks: `δ = 1 − IoU`; the rendered
/// representations win as pseudo ground truth when `δ ≤ r`.
pub fn select_pseudo_labels(
    m_pred: &Mask,
    m_rend: &Mask,
    r: f64,
) -> Result<PseudoLabelPolicy, LossError> {
    check_shapes(m_pred, m_rend)?;
    let mut intersection = 0usize;
    let mut union = 0usize;
    for (&a, &b) in m_pred.as_slice().iter().zip(m_rend.as_slice()) {
        intersection += (a && b) as usize;
        union += (a || b) as usize;
    }
    if union == 0 {
        return Err(LossError::BothEmpty);
    }
    let delta = 1.0 - intersection as f64 / union as f64;
    Ok(PseudoLabelPolicy {
        r,
        delta,
        lambda1: 1.0 - delta,
        source: if delta <= r {
            PseudoLabelSource::Rendered
        } else {
            PseudoLabelSource::Predicted
        },
    })
}

/// Raw loss component values prior to weighting.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossComponents {
    pub pose: f64,
    pub mask: f64,
    pub normals: f64,
    pub physics: f64,
    pub chamfer: f64,
}

/// Which loss terms participate in the total. Defaults reproduce the full
/// objective; switching individual terms off reproduces the ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LossToggles {
    pub pose: bool,
    pub mask: bool,
    pub normals: bool,
    pub physics: bool,
    pub chamfer: bool,
}

impl Default for LossToggles {
    fn default() -> Self {
        Self {
            pose: true,
            mask: true,
            normals: true,
            physics: true,
            chamfer: false,
        }
    }
}

/// Assembled loss report: raw components, the pseudo-label aggregate, and
/// the weighted total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    pub pose: f64,
    pub mask: f64,
    pub normals: f64,
    pub physics: f64,
    pub chamfer: f64,
    /// `λ₁ · pose + mask + normals` over the enabled subset.
    pub pseudo: f64,
    /// `pseudo + physics (+ chamfer)` over the enabled subset.
    pub total: f64,
}

/// Combines components into the training objective
/// `L = L_pseudo + L_physics`, `L_pseudo = λ₁ L_pose + L_mask + L_normals`,
/// honoring the toggles.
pub fn total_loss(
    components: &LossComponents,
    policy: &PseudoLabelPolicy,
    toggles: &LossToggles,
) -> LossReport {
    let pose_term = if toggles.pose {
        policy.lambda1 * components.pose
    } else {
        0.0
    };
    let mask_term = if toggles.mask { components.mask } else { 0.0 };
    let normals_term = if toggles.normals {
        components.normals
    } else {
        0.0
    };
    let physics_term = if toggles.physics {
        components.physics
    } else {
        0.0
    };
    let chamfer_term = if toggles.chamfer {
        components.chamfer
    } else {
        0.0
    };
    let pseudo = pose_term + mask_term + normals_term;
    LossReport {
        pose: components.pose,
        mask: components.mask,
        normals: components.normals,
        physics: components.physics,
        chamfer: components.chamfer,
        pseudo,
        total: pseudo + physics_term + chamfer_term,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
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
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
                rng.gen_range(0.5..2.0),
            ),
        )
    }

    fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec3> {
        (0..n)
            .map(|_| {
                Vec3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
            })
            .collect()
    }

    #[test]
    fn point_matching_identity_and_translation() {
        let mesh = primitives::sphere(0.05, 12, 6);
        let p = random_pose(&mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(point_matching_loss(&p, &p, &mesh), 0.0);

        let shifted = Pose::new(p.rotation, p.translation + Vec3::new(0.1, -0.2, 0.05));
        // Rotation cancels; the L1 norm of the shift remains.
        assert_abs_diff_eq!(
            point_matching_loss(&p, &shifted, &mesh),
            0.35,
            epsilon = 1e-12
        );
    }

    #[test]
    fn point_matching_matches_brute_force_and_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cloud = random_cloud(&mut rng, 100);
        let normals = vec![Vec3::new(0.0, 0.0, 1.0); 100];
        let mesh = MeshModel::try_new(cloud.clone(), vec![[0, 1, 2]], normals).unwrap();
        let (pa, pb) = (random_pose(&mut rng), random_pose(&mut rng));
        let mut acc = 0.0;
        for x in &cloud {
            let d = pa.transform(x) - pb.transform(x);
            acc += d.x.abs() + d.y.abs() + d.z.abs();
        }
        let oracle = acc / cloud.len() as f64;
        assert_abs_diff_eq!(point_matching_loss(&pa, &pb, &mesh), oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(
            point_matching_loss(&pa, &pb, &mesh),
            point_matching_loss(&pb, &pa, &mesh),
            epsilon = 1e-15
        );
    }

    #[test]
    fn mask_loss_cases() {
        let ones = ScalarMap::filled(4, 4, 1.0);
        let zeros = ScalarMap::filled(4, 4, 0.0);
        assert_eq!(mask_loss(&ones, &ones).unwrap(), 0.0);
        assert_eq!(mask_loss(&ones, &zeros).unwrap(), 1.0);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = ScalarMap::from_fn(5, 3, |_, _| rng.gen_range(0.0..1.0));
        let b = ScalarMap::from_fn(5, 3, |_, _| rng.gen_range(0.0..1.0));
        let oracle: f64 = a
            .as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            / 15.0;
        assert_abs_diff_eq!(mask_loss(&a, &b).unwrap(), oracle, epsilon = 1e-12);
        assert!(matches!(
            mask_loss(&ones, &ScalarMap::filled(3, 3, 0.0)),
            Err(LossError::ShapeMismatch(..))
        ));
    }

    #[test]
    fn normal_loss_cases() {
        let up = VectorMap::filled(3, 3, Vec3::new(0.0, 0.0, 1.0));
        let down = VectorMap::filled(3, 3, Vec3::new(0.0, 0.0, -1.0));
        let side = VectorMap::filled(3, 3, Vec3::new(1.0, 0.0, 0.0));
        let all = Mask::filled(3, 3, true);
        assert_eq!(normal_loss(&up, &up, &all).unwrap(), 0.0);
        assert_eq!(normal_loss(&up, &down, &all).unwrap(), 2.0);
        assert_eq!(normal_loss(&up, &side, &all).unwrap(), 1.0);
        let none = Mask::filled(3, 3, false);
        assert!(matches!(
            normal_loss(&up, &up, &none),
            Err(LossError::EmptyMask)
        ));
    }

    #[test]
    fn physics_loss_cases() {
        let valid = Mask::filled(2, 2, true);
        let analytic = Grid::filled(
            2,
            2,
            AnalyticDop {
                rho_d_hat: 0.2,
                rho_s_hat: 0.9,
            },
        );
        let rho = ScalarMap::filled(2, 2, 0.2);
        assert_eq!(physics_loss(&rho, &analytic, &valid).unwrap(), 0.0);
        // The specular branch wins pointwise at ρ = 0.85.
        let rho = ScalarMap::filled(2, 2, 0.85);
        assert_abs_diff_eq!(
            physics_loss(&rho, &analytic, &valid).unwrap(),
            0.05,
            epsilon = 1e-12
        );
        // Swapping the branch maps cannot change the minimum.
        let swapped = analytic.map(|a| AnalyticDop {
            rho_d_hat: a.rho_s_hat,
            rho_s_hat: a.rho_d_hat,
        });
        assert_eq!(
            physics_loss(&rho, &analytic, &valid).unwrap(),
            physics_loss(&rho, &swapped, &valid).unwrap()
        );
    }

    #[test]
    fn chamfer_cases() {
        let a = vec![Vec3::zeros()];
        let b = vec![Vec3::new(1.0, 0.0, 0.0)];
        assert_eq!(chamfer_loss(&a, &a).unwrap(), 0.0);
        assert_abs_diff_eq!(chamfer_loss(&a, &b).unwrap(), 2.0, epsilon = 1e-15);
        assert!(matches!(chamfer_loss(&a, &[]), Err(LossError::EmptySet)));
    }

    fn chamfer_brute(a: &[Vec3], b: &[Vec3]) -> f64 {
        let one_way = |from: &[Vec3], to: &[Vec3]| {
            from.iter()
                .map(|p| {
                    to.iter()
                        .map(|q| (p - q).norm())
                        .fold(f64::INFINITY, f64::min)
                })
                .sum::<f64>()
                / from.len() as f64
        };
        one_way(a, b) + one_way(b, a)
    }

    #[test]
    fn chamfer_matches_brute_force_and_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_cloud(&mut rng, 200);
        let b = random_cloud(&mut rng, 150);
        let got = chamfer_loss(&a, &b).unwrap();
        assert!((got - chamfer_brute(&a, &b)).abs() < 1e-12);
        assert_abs_diff_eq!(got, chamfer_loss(&b, &a).unwrap(), epsilon = 1e-15);
    }

    #[test]
    fn chamfer_kdtree_path_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_cloud(&mut rng, 600);
        let b = random_cloud(&mut rng, 620);
        let got = chamfer_loss(&a, &b).unwrap();
        assert!((got - chamfer_brute(&a, &b)).abs() < 1e-12);
    }

    #[test]
    fn pseudo_label_cases() {
        let full = Mask::filled(4, 4, true);
        let p = select_pseudo_labels(&full, &full, 0.3).unwrap();
        assert_eq!(p.delta, 0.0);
        assert_eq!(p.lambda1, 1.0);
        assert_eq!(p.source, PseudoLabelSource::Rendered);

        let mut left = Mask::filled(4, 4, false);
        let mut right = Mask::filled(4, 4, false);
        for y in 0..4 {
            for x in 0..2 {
                left.set(x, y, true);
                right.set(x + 2, y, true);
            }
        }
        let p = select_pseudo_labels(&left, &right, 0.3).unwrap();
        assert_eq!(p.delta, 1.0);
        assert_eq!(p.lambda1, 0.0);
        assert_eq!(p.source, PseudoLabelSource::Predicted);

        // 4x4 construction with IoU exactly 1/3: 8-pixel masks overlapping
        // on 4 pixels (union 12).
        let mut a = Mask::filled(4, 4, false);
        let mut b = Mask::filled(4, 4, false);
        for y in 0..2 {
            for x in 0..4 {
                a.set(x, y, true); // rows 0..2
                b.set(x, y + 1, true); // rows 1..3
            }
        }
        let p = select_pseudo_labels(&a, &b, 0.3).unwrap();
        assert_abs_diff_eq!(p.delta, 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.lambda1, 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(p.source, PseudoLabelSource::Predicted);
    }

    #[test]
    fn pseudo_label_lambda_monotone_in_overlap() {
        // Shrinking overlap must strictly decrease λ₁.
        let full = Mask::filled(8, 1, true);
        let mut prev = f64::INFINITY;
        for kept in (1..=8).rev() {
            let mut m = Mask::filled(8, 1, false);
            for x in 0..kept {
                m.set(x, 0, true);
            }
            let p = select_pseudo_labels(&m, &full, 0.3).unwrap();
            assert!(p.lambda1 < prev);
            prev = p.lambda1;
        }
    }

    #[test]
    fn pseudo_label_both_empty() {
        let empty = Mask::filled(4, 4, false);
        assert!(matches!(
            select_pseudo_labels(&empty, &empty, 0.3),
            Err(LossError::BothEmpty)
        ));
    }

    #[test]
    fn total_loss_assembly() {
        let policy = PseudoLabelPolicy {
            r: 0.3,
            delta: 0.25,
            lambda1: 0.75,
            source: PseudoLabelSource::Rendered,
        };
        let zero = LossComponents::default();
        let report = total_loss(&zero, &policy, &LossToggles::default());
        assert_eq!(report.total, 0.0);

        let components = LossComponents {
            pose: 1.0,
            ..Default::default()
        };
        let report = total_loss(&components, &policy, &LossToggles::default());
        assert_abs_diff_eq!(report.total, 0.75, epsilon = 1e-15);

        // Enabled-subset sums equal the manual sum.
        let components = LossComponents {
            pose: 0.5,
            mask: 0.25,
            normals: 0.125,
            physics: 0.0625,
            chamfer: 9.0,
        };
        let toggles = LossToggles {
            chamfer: false,
            ..Default::default()
        };
        let report = total_loss(&components, &policy, &toggles);
        assert_abs_diff_eq!(
            report.total,
            0.75 * 0.5 + 0.25 + 0.125 + 0.0625,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(report.pseudo, 0.75 * 0.5 + 0.25 + 0.125, epsilon = 1e-15);

        let no_pose = LossToggles {
            pose: false,
            ..Default::default()
        };
        let report = total_loss(&components, &policy, &no_pose);
        assert_abs_diff_eq!(report.total, 0.25 + 0.125 + 0.0625, epsilon = 1e-15);
    }
}
