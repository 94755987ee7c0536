//! Command-line workbench for polarimetric rendering, decomposition, pose
//! refinement, and evaluation.

use clap::{Parser, Subcommand};
use polarforge::archive::{
    QuadrupletArchive, read_archive, read_gt_mask, write_archive, write_gt_buffers,
};
use polarforge::formats::{MaterialJson, PoseJson, read_pose_records, table_eta};
use polarforge::pfm::{write_pfm_color, write_pfm_scalar};
use polarforge::report::{write_eval_csv, write_recall_json, write_trace_csv};
use polarforge::scene::{SceneFile, SceneGenParams, generate_scenes, render_scene, resolve_scene};
use polarforge::selfcheck;
use polarforge::{Result, WorkbenchError, write_atomic};
use polarforge_core::geometry::load_obj;
use polarforge_core::grid::Grid;
use polarforge_core::metrics::{EvalRecord, add_metric, adds_metric, recall};
use polarforge_core::polarization::{decompose_quadruplet, priors_from_pixel, PolarDecomposition};
use polarforge_core::refine::{Observation, ObjectiveWeights, RefineConfig, refine_pose};
use rayon::prelude::*;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "polarforge",
    version,
    about = "Polarimetric rendering, inversion, pose refinement, and evaluation workbench"
)]
struct Cli {
    /// Directory all relative paths resolve against.
    #[arg(long, global = true, default_value = ".")]
    workdir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample scene files with the camera on the object's upper hemisphere.
    Generate {
        /// Mesh path (OBJ), relative to the working directory.
        #[arg(long)]
        mesh: String,
        /// Number of scenes to sample.
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for scene_####.json files.
        #[arg(long)]
        out: PathBuf,
        /// Material name; reference materials pin their refractive index.
        #[arg(long, default_value = "plastics")]
        material: String,
        /// Refractive index for non-reference materials.
        #[arg(long)]
        eta: Option<f64>,
        /// In-plane center jitter as a fraction of the mesh diameter.
        #[arg(long, default_value_t = 0.0)]
        jitter: f64,
    },

    /// Render a scene (or every scene JSON in a directory) into quadruplet
    /// archives with ground-truth buffers.
    Render {
        /// Scene JSON file, or a directory of them.
        #[arg(long)]
        scene: PathBuf,
        /// Output archive directory (one subdirectory per scene in batch mode).
        #[arg(long)]
        out: PathBuf,
    },

    /// Decompose an archive into I_un / DoP / AoP maps and normal priors.
    Invert {
        /// Archive directory produced by `render`.
        #[arg(long = "in")]
        input: PathBuf,
        /// Output directory for the decomposition maps.
        #[arg(long)]
        out: PathBuf,
    },

    /// Refine an initial pose against an archive's polarimetric data.
    Refine {
        /// Archive directory produced by `render`.
        #[arg(long = "in")]
        input: PathBuf,
        /// Initial pose JSON.
        #[arg(long)]
        init: PathBuf,
        /// Optional refinement config JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Mesh override; defaults to the mesh recorded in the archive.
        #[arg(long)]
        mesh: Option<String>,
        /// Output directory for refined_pose.json and trace.csv.
        #[arg(long)]
        out: PathBuf,
    },

    /// Evaluate predicted poses against ground truth with ADD(-S).
    Eval {
        /// Ground-truth pose records (JSON array of {id, R, t}).
        #[arg(long)]
        gt: PathBuf,
        /// Predicted pose records (JSON array of {id, R, t}).
        #[arg(long)]
        pred: PathBuf,
        /// Mesh path (OBJ).
        #[arg(long)]
        mesh: String,
        /// Treat the object as symmetric (use ADD-S).
        #[arg(long)]
        sym: bool,
        /// Object label in reports; defaults to the mesh file stem.
        #[arg(long)]
        object: Option<String>,
        /// Output directory for eval.csv and recall.json.
        #[arg(long)]
        out: PathBuf,
    },

    /// Run the physics and metric consistency suite; nonzero exit on failure.
    Selfcheck,
}

fn resolve(workdir: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        workdir.join(p)
    }
}

fn main() {
    let cli = Cli::parse();

    if let Ok(threads) = std::env::var("POLARFORGE_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            if n > 0 {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .ok();
            }
        }
    }

    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let workdir = cli.workdir;
    match cli.command {
        Command::Generate {
            mesh,
            count,
            seed,
            out,
            material,
            eta,
            jitter,
        } => cmd_generate(&workdir, &mesh, count, seed, &out, &material, eta, jitter),
        Command::Render { scene, out } => cmd_render(&workdir, &scene, &out),
        Command::Invert { input, out } => cmd_invert(&workdir, &input, &out),
        Command::Refine {
            input,
            init,
            config,
            mesh,
            out,
        } => cmd_refine(&workdir, &input, &init, config.as_deref(), mesh.as_deref(), &out),
        Command::Eval {
            gt,
            pred,
            mesh,
            sym,
            object,
            out,
        } => cmd_eval(&workdir, &gt, &pred, &mesh, sym, object.as_deref(), &out),
        Command::Selfcheck => cmd_selfcheck(),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_generate(
    workdir: &Path,
    mesh_path: &str,
    count: usize,
    seed: u64,
    out: &Path,
    material_name: &str,
    eta: Option<f64>,
    jitter: f64,
) -> Result<()> {
    if count == 0 {
        return Err(WorkbenchError::BadInput("--count must be at least 1".into()));
    }
    let mesh = load_obj(&resolve(workdir, Path::new(mesh_path)))
        .map_err(|e| WorkbenchError::BadInput(e.to_string()))?;
    let eta = match (table_eta(material_name), eta) {
        (Some(table), _) => table,
        (None, Some(custom)) => custom,
        (None, None) => {
            return Err(WorkbenchError::BadInput(format!(
                "material '{material_name}' is not a reference material; pass --eta"
            )));
        }
    };
    let material = MaterialJson {
        name: material_name.to_string(),
        eta,
    };
    material.to_material()?;

    let mut params = SceneGenParams::new(
        polarforge::formats::IntrinsicsJson {
            fx: 500.0,
            fy: 500.0,
            cx: 128.0,
            cy: 128.0,
            width: 256,
            height: 256,
        },
        material,
        polarforge::formats::ShadingJson {
            light_dir: [0.3, -0.4, -1.0],
            ambient: 0.3,
            albedo: 0.6,
        },
    );
    params.center_jitter = jitter;

    let scenes = generate_scenes(mesh_path, &mesh, count, seed, &params);
    let out_dir = resolve(workdir, out);
    std::fs::create_dir_all(&out_dir)?;
    for (i, scene) in scenes.iter().enumerate() {
        scene.save(&out_dir.join(format!("scene_{i:04}.json")))?;
    }
    println!("wrote {count} scenes to {}", out_dir.display());
    Ok(())
}

fn render_one(workdir: &Path, scene_path: &Path, out_dir: &Path) -> Result<()> {
    let scene = SceneFile::load(scene_path)?;
    let resolved = resolve_scene(&scene, workdir)?;
    let (rb, quad) = render_scene(&resolved);
    let archive = QuadrupletArchive::from_quadruplet(
        &quad,
        scene.intrinsics.clone(),
        scene.pose.clone(),
        scene.material.clone(),
        Some(scene.mesh.clone()),
    );
    write_archive(out_dir, &archive)?;
    write_gt_buffers(out_dir, &rb)?;
    Ok(())
}

fn cmd_render(workdir: &Path, scene: &Path, out: &Path) -> Result<()> {
    let scene_path = resolve(workdir, scene);
    let out_dir = resolve(workdir, out);
    if scene_path.is_dir() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(&scene_path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
            .collect();
        entries.sort();
        if entries.is_empty() {
            return Err(WorkbenchError::BadInput(format!(
                "no scene JSON files in {}",
                scene_path.display()
            )));
        }
        let results: Vec<Result<()>> = entries
            .par_iter()
            .map(|path| {
                let stem = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "scene".into());
                render_one(workdir, path, &out_dir.join(stem))
            })
            .collect();
        let rendered = results.len();
        for r in results {
            r?;
        }
        println!("rendered {rendered} scenes to {}", out_dir.display());
    } else {
        render_one(workdir, &scene_path, &out_dir)?;
        println!("rendered scene to {}", out_dir.display());
    }
    Ok(())
}

fn cmd_invert(workdir: &Path, input: &Path, out: &Path) -> Result<()> {
    let in_dir = resolve(workdir, input);
    let out_dir = resolve(workdir, out);
    let archive = read_archive(&in_dir)?;
    let material = archive.meta.material.to_material()?;
    let quad = archive.to_quadruplet();
    let maps = decompose_quadruplet(&quad)
        .map_err(|e| WorkbenchError::BadInput(e.to_string()))?;

    std::fs::create_dir_all(&out_dir)?;
    write_pfm_scalar(&out_dir.join("iun.pfm"), &maps.i_un.map(|&v| v as f32))?;
    write_pfm_scalar(&out_dir.join("rho.pfm"), &maps.rho.map(|&v| v as f32))?;
    write_pfm_scalar(&out_dir.join("phi.pfm"), &maps.phi.map(|&v| v as f32))?;
    write_pfm_scalar(
        &out_dir.join("nonphysical.pfm"),
        &maps.non_physical.map(|&b| if b { 1.0f32 } else { 0.0 }),
    )?;

    let (w, h) = maps.rho.shape();
    let priors: Vec<_> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (x, y) = (i % w, i / w);
            let d = PolarDecomposition {
                i_un: *maps.i_un.get(x, y),
                rho: *maps.rho.get(x, y),
                phi: *maps.phi.get(x, y),
            };
            priors_from_pixel(&d, &material).expect("decomposed rho is clamped to [0,1]")
        })
        .collect();
    let as_color = |f: &dyn Fn(&polarforge_core::polarization::NormalPriors) -> [f32; 3]| {
        Grid::from_vec(w, h, priors.iter().map(f).collect())
    };
    write_pfm_color(
        &out_dir.join("prior_d.pfm"),
        &as_color(&|p| [p.n_d.x as f32, p.n_d.y as f32, p.n_d.z as f32]),
    )?;
    write_pfm_color(
        &out_dir.join("prior_s1.pfm"),
        &as_color(&|p| [p.n_s1.x as f32, p.n_s1.y as f32, p.n_s1.z as f32]),
    )?;
    write_pfm_color(
        &out_dir.join("prior_s2.pfm"),
        &as_color(&|p| [p.n_s2.x as f32, p.n_s2.y as f32, p.n_s2.z as f32]),
    )?;
    write_pfm_color(
        &out_dir.join("prior_valid.pfm"),
        &as_color(&|p| {
            [
                p.valid_d as u8 as f32,
                p.valid_s1 as u8 as f32,
                p.valid_s2 as u8 as f32,
            ]
        }),
    )?;

    let clamped = maps.non_physical.count_true();
    println!(
        "decomposed {}x{} archive; {clamped} non-physical pixels clamped",
        w, h
    );
    Ok(())
}

/// Optional refinement overrides loaded from `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RefineConfigJson {
    max_iters: Option<usize>,
    fd_step_rot: Option<f64>,
    fd_step_trans: Option<f64>,
    step_rot: Option<f64>,
    step_trans: Option<f64>,
    step_growth: Option<f64>,
    step_max: Option<f64>,
    max_backtracks: Option<u32>,
    loss_tol: Option<f64>,
    w_physics: Option<f64>,
    w_mask: Option<f64>,
}

impl RefineConfigJson {
    fn into_config(self) -> RefineConfig {
        let d = RefineConfig::default();
        RefineConfig {
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            fd_step_rot: self.fd_step_rot.unwrap_or(d.fd_step_rot),
            fd_step_trans: self.fd_step_trans.unwrap_or(d.fd_step_trans),
            step_rot: self.step_rot.unwrap_or(d.step_rot),
            step_trans: self.step_trans.unwrap_or(d.step_trans),
            step_growth: self.step_growth.unwrap_or(d.step_growth),
            step_max: self.step_max.unwrap_or(d.step_max),
            max_backtracks: self.max_backtracks.unwrap_or(d.max_backtracks),
            loss_tol: self.loss_tol.unwrap_or(d.loss_tol),
            weights: ObjectiveWeights {
                physics: self.w_physics.unwrap_or(d.weights.physics),
                mask: self.w_mask.unwrap_or(d.weights.mask),
            },
        }
    }
}

fn cmd_refine(
    workdir: &Path,
    input: &Path,
    init: &Path,
    config: Option<&Path>,
    mesh_override: Option<&str>,
    out: &Path,
) -> Result<()> {
    let in_dir = resolve(workdir, input);
    let archive = read_archive(&in_dir)?;
    let material = archive.meta.material.to_material()?;
    let intrinsics = archive.meta.intrinsics.to_intrinsics()?;

    let mesh_path = mesh_override
        .map(|s| s.to_string())
        .or_else(|| archive.meta.mesh.clone())
        .ok_or_else(|| {
            WorkbenchError::BadInput("archive records no mesh; pass --mesh".into())
        })?;
    let mesh = load_obj(&resolve(workdir, Path::new(&mesh_path)))
        .map_err(|e| WorkbenchError::BadInput(e.to_string()))?;

    let init_text = std::fs::read_to_string(resolve(workdir, init))
        .map_err(|e| WorkbenchError::BadInput(format!("{}: {e}", init.display())))?;
    let init_pose: PoseJson = serde_json::from_str(&init_text)?;
    let p0 = init_pose.to_pose()?;

    let cfg = match config {
        Some(path) => {
            let text = std::fs::read_to_string(resolve(workdir, path))
                .map_err(|e| WorkbenchError::BadInput(format!("{}: {e}", path.display())))?;
            serde_json::from_str::<RefineConfigJson>(&text)?.into_config()
        }
        None => RefineConfig::default(),
    };

    let quad = archive.to_quadruplet();
    let maps = decompose_quadruplet(&quad)
        .map_err(|e| WorkbenchError::BadInput(e.to_string()))?;
    let mask = read_gt_mask(&in_dir)?;
    let obs = Observation {
        rho: maps.rho,
        aop: maps.phi,
        mask,
        intrinsics,
        material,
    };

    let result = refine_pose(&p0, &obs, &mesh, &cfg)
        .map_err(|e| WorkbenchError::BadInput(e.to_string()))?;

    let out_dir = resolve(workdir, out);
    std::fs::create_dir_all(&out_dir)?;
    let pose_json = serde_json::to_string_pretty(&PoseJson::from_pose(&result.pose))?;
    write_atomic(&out_dir.join("refined_pose.json"), pose_json.as_bytes())?;
    write_trace_csv(&out_dir.join("trace.csv"), &result.trace)?;
    println!(
        "refined pose over {} accepted steps; objective {:.6e} -> {:.6e}",
        result.trace.len() - 1,
        result.trace.first().copied().unwrap_or(f64::NAN),
        result.trace.last().copied().unwrap_or(f64::NAN),
    );
    Ok(())
}

fn cmd_eval(
    workdir: &Path,
    gt: &Path,
    pred: &Path,
    mesh_path: &str,
    sym: bool,
    object: Option<&str>,
    out: &Path,
) -> Result<()> {
    let gts = read_pose_records(&resolve(workdir, gt))?;
    let preds = read_pose_records(&resolve(workdir, pred))?;
    if gts.is_empty() {
        return Err(WorkbenchError::BadInput("no ground-truth records".into()));
    }
    let pred_by_id: BTreeMap<&str, &PoseJson> =
        preds.iter().map(|r| (r.id.as_str(), &r.pose)).collect();

    let mesh = load_obj(&resolve(workdir, Path::new(mesh_path)))
        .map_err(|e| WorkbenchError::BadInput(e.to_string()))?;
    let object_name = object
        .map(|s| s.to_string())
        .unwrap_or_else(|| {
            Path::new(mesh_path)
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "object".into())
        });

    let threshold = 0.1 * mesh.diameter();
    let mut records = Vec::with_capacity(gts.len());
    for gt_rec in &gts {
        let pred_pose = pred_by_id.get(gt_rec.id.as_str()).ok_or_else(|| {
            WorkbenchError::BadInput(format!("no prediction for id '{}'", gt_rec.id))
        })?;
        let p_gt = gt_rec.pose.to_pose()?;
        let p_est = pred_pose.to_pose()?;
        let value = if sym {
            adds_metric(&p_gt, &p_est, &mesh)
        } else {
            add_metric(&p_gt, &p_est, &mesh)
        };
        records.push(EvalRecord::new(object_name.clone(), value, threshold));
    }

    let out_dir = resolve(workdir, out);
    std::fs::create_dir_all(&out_dir)?;
    write_eval_csv(&out_dir.join("eval.csv"), &records)?;
    let r = recall(&records).map_err(|e| WorkbenchError::BadInput(e.to_string()))?;
    let mut recalls = BTreeMap::new();
    recalls.insert(object_name.clone(), r);
    write_recall_json(&out_dir.join("recall.json"), &recalls)?;
    println!("{object_name}: ADD{} recall {r:.1}%", if sym { "-S" } else { "" });
    Ok(())
}

fn cmd_selfcheck() -> Result<()> {
    let outcomes = selfcheck::run_all();
    let mut failed = 0;
    for o in &outcomes {
        println!(
            "[{}] {} — {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.name,
            o.detail
        );
        if !o.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        return Err(WorkbenchError::InvariantViolation(format!(
            "{failed}/{} checks failed",
            outcomes.len()
        )));
    }
    println!("all {} checks passed", outcomes.len());
    Ok(())
}
