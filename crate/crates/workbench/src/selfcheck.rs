//! Consistency suite behind `polarforge selfcheck`: physics round trips,
//! Brewster identities, DoP inversion, rendering closure, silhouette
//! accuracy, and metric/loss oracles, each with pinned tolerances.

use crate::formats::{IntrinsicsJson, MaterialJson, ShadingJson};
use crate::scene::{ModePolicy, SceneGenParams, generate_scenes};
use polarforge_core::Vec3;
use polarforge_core::geometry::{
    CameraIntrinsics, MeshModel, Pose, RotationMatrix, load_obj, primitives, write_obj,
};
use polarforge_core::grid::{Grid, Mask};
use polarforge_core::losses::{chamfer_loss, physics_loss, point_matching_loss, select_pseudo_labels};
use polarforge_core::metrics::{add_metric, adds_metric};
use polarforge_core::polarization::{
    CANONICAL_FILTER_ANGLES, MaterialSpec, PolarDecomposition, PolarSample, analytic_dop_maps,
    brewster_angle, decompose_quadruplet, dop_diffuse, dop_specular, fit_decomposition,
    forward_intensity, invert_dop, THETA_CAP,
};
use polarforge_core::raster::{ShadingSpec, rasterize, render_polarization};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::time::Instant;

/// Result of one named check.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn pass(name: &'static str, detail: String) -> Self {
        Self {
            name,
            passed: true,
            detail,
        }
    }

    fn fail(name: &'static str, detail: String) -> Self {
        Self {
            name,
            passed: false,
            detail,
        }
    }
}

const TABLE_ETAS: [f64; 3] = [1.50, 1.52, 2.75];

/// Forward/fit round trip over 10⁵ random decompositions, recovery within
/// 1e-9 (AoP modulo π), in under 5 seconds.
pub fn check_physics_round_trip() -> CheckOutcome {
    let name = "physics-round-trip";
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let mut worst = 0.0f64;
    for _ in 0..100_000 {
        let truth = PolarDecomposition::new(
            rng.gen_range(0.1..2.0),
            rng.gen_range(0.0..0.99),
            rng.gen_range(0.0..PI),
        )
        .expect("in range");
        let intensities = CANONICAL_FILTER_ANGLES.map(|a| forward_intensity(&truth, a));
        let fit = match fit_decomposition(&PolarSample::canonical(intensities).expect("valid")) {
            Ok(f) => f.decomposition,
            Err(e) => return CheckOutcome::fail(name, format!("fit failed: {e}")),
        };
        let dphi = (fit.phi - truth.phi).abs();
        let dphi = dphi.min(PI - dphi);
        worst = worst
            .max((fit.i_un - truth.i_un).abs())
            .max((fit.rho - truth.rho).abs())
            .max(dphi);
    }
    let elapsed = start.elapsed();
    let detail = format!("worst error {worst:.3e}, {:.2}s", elapsed.as_secs_f64());
    if worst < 1e-9 && elapsed.as_secs_f64() < 5.0 {
        CheckOutcome::pass(name, detail)
    } else {
        CheckOutcome::fail(name, detail)
    }
}

/// `ρ_s(atan η) = 1` within 1e-12 for the reference materials.
pub fn check_brewster_identity() -> CheckOutcome {
    let name = "brewster-identity";
    let mut worst = 0.0f64;
    for eta in TABLE_ETAS {
        let m = MaterialSpec::new("m", eta).expect("valid eta");
        let rho = dop_specular(brewster_angle(&m), &m).expect("in domain");
        worst = worst.max((rho - 1.0).abs());
    }
    let detail = format!("worst |ρ_s(Brewster) − 1| = {worst:.3e}");
    if worst <= 1e-12 {
        CheckOutcome::pass(name, detail)
    } else {
        CheckOutcome::fail(name, detail)
    }
}

/// `invert_dop ∘ dop` identity within 1e-8 over 10⁴ random angles per
/// branch per reference material.
pub fn check_inversion_oracle() -> CheckOutcome {
    let name = "inversion-oracle";
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0003);
    let mut worst = 0.0f64;
    for eta in TABLE_ETAS {
        let m = MaterialSpec::new("m", eta).expect("valid eta");
        let brewster = brewster_angle(&m);
        for _ in 0..10_000 {
            let theta = rng.gen_range(0.0..THETA_CAP);
            let inv = invert_dop(dop_diffuse(theta, &m).expect("domain"), &m).expect("rho range");
            match inv.theta_d {
                Some(t) => worst = worst.max((t - theta).abs()),
                None => return CheckOutcome::fail(name, format!("lost diffuse root at {theta}")),
            }

            let theta = rng.gen_range(0.0..brewster);
            let inv = invert_dop(dop_specular(theta, &m).expect("domain"), &m).expect("rho range");
            match inv.theta_s1 {
                Some(t) => worst = worst.max((t - theta).abs()),
                None => return CheckOutcome::fail(name, format!("lost s1 root at {theta}")),
            }

            let theta = rng.gen_range(brewster..THETA_CAP);
            let inv = invert_dop(dop_specular(theta, &m).expect("domain"), &m).expect("rho range");
            match inv.theta_s2 {
                Some(t) => worst = worst.max((t - theta).abs()),
                None => return CheckOutcome::fail(name, format!("lost s2 root at {theta}")),
            }
        }
    }
    let detail = format!("worst θ recovery error {worst:.3e}");
    if worst <= 1e-8 {
        CheckOutcome::pass(name, detail)
    } else {
        CheckOutcome::fail(name, detail)
    }
}

/// The three synthetic shapes: a sphere, a cylinder, and a cup that goes
/// through OBJ serialization and the loader.
pub fn reference_shapes() -> Vec<(&'static str, MeshModel, MaterialSpec, ModePolicy)> {
    let cup_loaded = {
        let dir = std::env::temp_dir().join(format!("polarforge-selfcheck-{}", std::process::id()));
        std::fs::create_dir_all(&dir).expect("temp dir");
        let path = dir.join("cup.obj");
        write_obj(&primitives::cup(0.04, 0.032, 0.1, 0.004, 48), &path).expect("write obj");
        let mesh = load_obj(&path).expect("load obj");
        std::fs::remove_dir_all(&dir).ok();
        mesh
    };
    vec![
        (
            "sphere",
            primitives::sphere(0.05, 48, 24),
            MaterialSpec::plastics(),
            ModePolicy::Diffuse,
        ),
        (
            "cylinder",
            primitives::cylinder(0.035, 0.1, 48),
            MaterialSpec::stainless_steel(),
            ModePolicy::Specular,
        ),
        (
            "cup",
            cup_loaded,
            MaterialSpec::glass(),
            ModePolicy::Diffuse,
        ),
    ]
}

fn default_camera() -> CameraIntrinsics {
    CameraIntrinsics::new(400.0, 400.0, 96.0, 96.0, 192, 192).expect("valid intrinsics")
}

fn scene_params(material: &MaterialSpec, mode: ModePolicy) -> SceneGenParams {
    let k = default_camera();
    let mut p = SceneGenParams::new(
        IntrinsicsJson::from_intrinsics(&k),
        MaterialJson {
            name: material.name.clone(),
            eta: material.eta,
        },
        ShadingJson::from_shading(&ShadingSpec::default()),
    );
    p.mode = mode;
    p
}

/// Physics-loss closure on 50 synthetic scenes: near zero at the ground
/// truth pose, and larger at a 10°-rotated pose in at least 95% of scenes.
pub fn check_physics_closure() -> CheckOutcome {
    let name = "physics-closure";
    let shapes = reference_shapes();
    let k = default_camera();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0004);
    let mut worst_gt = 0.0f64;
    let mut exceeded = 0usize;
    let total = 50usize;
    for i in 0..total {
        let (shape_name, mesh, material, mode) = &shapes[i % shapes.len()];
        let scenes = generate_scenes(
            "unused.obj",
            mesh,
            1,
            0x1000 + i as u64,
            &scene_params(material, *mode),
        );
        let pose_gt = scenes[0].pose.to_pose().expect("generated pose is valid");

        let rb = rasterize(mesh, &pose_gt, &k);
        let modes = Grid::filled(
            k.width as usize,
            k.height as usize,
            mode.resolve(&material.name),
        );
        let quad = render_polarization(&rb, &k, material, &ShadingSpec::default(), &modes)
            .expect("shapes agree");
        let maps = decompose_quadruplet(&quad).expect("canonical angles");

        let analytic_gt = analytic_dop_maps(&rb.normals, &rb.mask, &k, material);
        let loss_gt = match physics_loss(&maps.rho, &analytic_gt, &rb.mask) {
            Ok(l) => l,
            Err(e) => return CheckOutcome::fail(name, format!("{shape_name}: {e}")),
        };
        worst_gt = worst_gt.max(loss_gt);

        let axis = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let perturbed = Pose::new(
            RotationMatrix::from_axis_angle(axis, 10f64.to_radians()).compose(&pose_gt.rotation),
            pose_gt.translation,
        );
        let rb_p = rasterize(mesh, &perturbed, &k);
        let analytic_p = analytic_dop_maps(&rb_p.normals, &rb_p.mask, &k, material);
        let loss_p = match physics_loss(&maps.rho, &analytic_p, &rb_p.mask) {
            Ok(l) => l,
            Err(e) => return CheckOutcome::fail(name, format!("{shape_name} perturbed: {e}")),
        };
        if loss_p > loss_gt {
            exceeded += 1;
        }
    }
    let detail = format!(
        "worst GT loss {worst_gt:.3e}, perturbed exceeded GT in {exceeded}/{total}"
    );
    if worst_gt < 1e-7 && exceeded * 100 >= total * 95 {
        CheckOutcome::pass(name, detail)
    } else {
        CheckOutcome::fail(name, detail)
    }
}

/// Sphere silhouette area against the analytic projected disk across 20
/// focal length / distance combinations, within 1%.
pub fn check_silhouette_area() -> CheckOutcome {
    let name = "silhouette-area";
    let mesh = primitives::sphere(0.1, 96, 48);
    let r = 0.1f64;
    let mut worst = 0.0f64;
    for f in [250.0, 320.0, 400.0, 480.0, 560.0] {
        for z in [0.5, 0.65, 0.8, 1.0] {
            let k = CameraIntrinsics::new(f, f, 128.0, 128.0, 256, 256).expect("valid");
            let pose = Pose::new(RotationMatrix::identity(), Vec3::new(0.0, 0.0, z));
            let rb = rasterize(&mesh, &pose, &k);
            let disk_radius = f * r / (z * z - r * r).sqrt();
            let expected = PI * disk_radius * disk_radius;
            let got = rb.covered_pixels() as f64;
            worst = worst.max((got - expected).abs() / expected);
        }
    }
    let detail = format!("worst relative area error {worst:.4}");
    if worst < 0.01 {
        CheckOutcome::pass(name, detail)
    } else {
        CheckOutcome::fail(name, detail)
    }
}

/// ADD / ADD-S against O(n²) brute force on 100 random pose pairs, and the
/// cylinder symmetry separation.
pub fn check_metric_oracles() -> CheckOutcome {
    let name = "metric-oracles";
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0006);
    let cloud: Vec<Vec3> = (0..300)
        .map(|_| {
            Vec3::new(
                rng.gen_range(-0.05..0.05),
                rng.gen_range(-0.05..0.05),
                rng.gen_range(-0.05..0.05),
            )
        })
        .collect();
    let mesh = MeshModel::try_new(
        cloud.clone(),
        vec![[0, 1, 2]],
        vec![Vec3::new(0.0, 0.0, 1.0); cloud.len()],
    )
    .expect("cloud mesh");

    let random_pose = |rng: &mut ChaCha8Rng| {
        Pose::new(
            RotationMatrix::from_axis_angle(
                Vec3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ),
                rng.gen_range(0.0..3.0),
            ),
            Vec3::new(
                rng.gen_range(-0.3..0.3),
                rng.gen_range(-0.3..0.3),
                rng.gen_range(0.5..1.5),
            ),
        )
    };

    let mut worst = 0.0f64;
    for _ in 0..100 {
        let pa = random_pose(&mut rng);
        let pb = random_pose(&mut rng);
        let gt: Vec<Vec3> = cloud.iter().map(|x| pa.transform(x)).collect();
        let est: Vec<Vec3> = cloud.iter().map(|x| pb.transform(x)).collect();
        let add_oracle =
            gt.iter().zip(&est).map(|(a, b)| (a - b).norm()).sum::<f64>() / gt.len() as f64;
        let adds_oracle = gt
            .iter()
            .map(|p| {
                est.iter()
                    .map(|q| (p - q).norm())
                    .fold(f64::INFINITY, f64::min)
            })
            .sum::<f64>()
            / gt.len() as f64;
        worst = worst
            .max((add_metric(&pa, &pb, &mesh) - add_oracle).abs())
            .max((adds_metric(&pa, &pb, &mesh) - adds_oracle).abs());
    }

    let n_seg = 64u32;
    let cyl = primitives::cylinder(0.03, 0.1, n_seg);
    let p_gt = random_pose(&mut rng);
    let step =
        RotationMatrix::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), 2.0 * PI / n_seg as f64);
    let p_sym = Pose::new(p_gt.rotation.compose(&step), p_gt.translation);
    let adds_sym = adds_metric(&p_gt, &p_sym, &cyl);
    let add_sym = add_metric(&p_gt, &p_sym, &cyl);

    let detail = format!(
        "worst oracle deviation {worst:.3e}; cylinder ADD-S {adds_sym:.3e} vs ADD {add_sym:.3e}"
    );
    if worst < 1e-12 && adds_sym < 1e-9 && add_sym > 0.0 {
        CheckOutcome::pass(name, detail)
    } else {
        CheckOutcome::fail(name, detail)
    }
}

/// Chamfer and point-matching losses against brute force, and the three
/// constructed pseudo-label IoU cases.
pub fn check_loss_oracles() -> CheckOutcome {
    let name = "loss-oracles";
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0008);
    let cloud = |rng: &mut ChaCha8Rng, n: usize| -> Vec<Vec3> {
        (0..n)
            .map(|_| {
                Vec3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
            })
            .collect()
    };

    let a = cloud(&mut rng, 450);
    let b = cloud(&mut rng, 380);
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
    let chamfer_oracle = one_way(&a, &b) + one_way(&b, &a);
    let chamfer_got = match chamfer_loss(&a, &b) {
        Ok(v) => v,
        Err(e) => return CheckOutcome::fail(name, e.to_string()),
    };
    let chamfer_dev = (chamfer_got - chamfer_oracle).abs();

    let pts = cloud(&mut rng, 300);
    let mesh = MeshModel::try_new(
        pts.clone(),
        vec![[0, 1, 2]],
        vec![Vec3::new(0.0, 0.0, 1.0); pts.len()],
    )
    .expect("cloud mesh");
    let pa = Pose::new(
        RotationMatrix::from_axis_angle(Vec3::new(0.5, -0.2, 0.8), 1.1),
        Vec3::new(0.1, 0.0, 1.0),
    );
    let pb = Pose::new(
        RotationMatrix::from_axis_angle(Vec3::new(-0.3, 0.9, 0.1), 0.4),
        Vec3::new(-0.05, 0.08, 1.2),
    );
    let pm_oracle = pts
        .iter()
        .map(|x| {
            let d = pa.transform(x) - pb.transform(x);
            d.x.abs() + d.y.abs() + d.z.abs()
        })
        .sum::<f64>()
        / pts.len() as f64;
    let pm_dev = (point_matching_loss(&pa, &pb, &mesh) - pm_oracle).abs();

    // Pseudo-label policy on the three constructed overlap cases, compared
    // exactly against integer counting.
    let full = Mask::filled(4, 4, true);
    let identical = select_pseudo_labels(&full, &full, 0.3).expect("non-empty");
    let mut left = Mask::filled(4, 4, false);
    let mut right = Mask::filled(4, 4, false);
    let mut band_a = Mask::filled(4, 4, false);
    let mut band_b = Mask::filled(4, 4, false);
    for y in 0..4 {
        for x in 0..2 {
            left.set(x, y, true);
            right.set(x + 2, y, true);
        }
    }
    for y in 0..2 {
        for x in 0..4 {
            band_a.set(x, y, true);
            band_b.set(x, y + 1, true);
        }
    }
    let disjoint = select_pseudo_labels(&left, &right, 0.3).expect("non-empty");
    let banded = select_pseudo_labels(&band_a, &band_b, 0.3).expect("non-empty");
    // Counting oracle: intersection 4, union 12 for the banded pair; the
    // policy must reproduce δ = 1 − IoU and λ₁ = 1 − δ to the bit.
    let expected_delta = 1.0 - 4.0 / 12.0;
    let policy_exact = identical.delta == 0.0
        && identical.lambda1 == 1.0
        && disjoint.delta == 1.0
        && disjoint.lambda1 == 0.0
        && banded.delta == expected_delta
        && banded.lambda1 == 1.0 - expected_delta;

    let detail = format!(
        "chamfer dev {chamfer_dev:.3e}, point-matching dev {pm_dev:.3e}, policy exact: {policy_exact}"
    );
    if chamfer_dev < 1e-12 && pm_dev < 1e-12 && policy_exact {
        CheckOutcome::pass(name, detail)
    } else {
        CheckOutcome::fail(name, detail)
    }
}

/// Runs every check in order.
pub fn run_all() -> Vec<CheckOutcome> {
    vec![
        check_physics_round_trip(),
        check_brewster_identity(),
        check_inversion_oracle(),
        check_physics_closure(),
        check_silhouette_area(),
        check_metric_oracles(),
        check_loss_oracles(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brewster_and_inversion_pass() {
        assert!(check_brewster_identity().passed);
        assert!(check_inversion_oracle().passed);
    }

    #[test]
    fn loss_oracles_pass() {
        assert!(check_loss_oracles().passed);
    }
}
