//! Deterministic software rasterizer.
//!
//! Produces the object mask, camera-frame normal map, and depth map for a
//! mesh under a pose and intrinsics, then optionally shades the buffers into
//! a synthetic four-filter polarimetric quadruplet.
//!
//! Determinism contract: output buffers are bitwise identical across runs
//! and across thread counts. Rows are rasterized independently (each row
//! owns its pixels) and triangles are visited in index order, so z-buffer
//! ties resolve to the lower triangle index everywhere.

use crate::geometry::{CameraIntrinsics, MeshModel, Pose};
use crate::grid::{Grid, Mask, ScalarMap, VectorMap};
use crate::polarization::{
    AnalyticDop, CANONICAL_FILTER_ANGLES, MaterialSpec, PolarDecomposition, PolarQuadruplet,
    ReflectionMode, THETA_CAP, aop_from_azimuth, dop_diffuse, dop_specular, forward_intensity,
};
use crate::Vec3;
use rayon::prelude::*;
use thiserror::Error;

/// Triangles with any vertex closer than this are dropped (coarse near-plane
/// clipping).
const NEAR_PLANE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("shape mismatch between buffers: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),

    #[error("invalid shading spec: {0}")]
    InvalidShading(String),
}

/// Rasterization output: binary mask, camera-frame unit normal map (zero
/// outside the mask), and z-depth map (infinity outside the mask).
#[derive(Debug, Clone, PartialEq)]
pub struct RenderBuffers {
    pub mask: Mask,
    pub normals: VectorMap,
    pub depth: ScalarMap,
}

impl RenderBuffers {
    pub fn width(&self) -> usize {
        self.mask.width()
    }

    pub fn height(&self) -> usize {
        self.mask.height()
    }

    /// Number of covered pixels; zero flags an empty render.
    pub fn covered_pixels(&self) -> usize {
        self.mask.count_true()
    }

    pub fn is_empty_render(&self) -> bool {
        self.covered_pixels() == 0
    }
}

/// Lambertian shading parameters for synthetic rendering. The ambient term
/// also serves as the unpolarized background intensity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShadingSpec {
    /// Unit vector from the surface toward the light, camera frame.
    pub light_dir: Vec3,
    pub ambient: f64,
    pub albedo: f64,
}

impl ShadingSpec {
    /// Normalizes the light direction; ambient and albedo must be in [0, 1].
    pub fn new(light_dir: Vec3, ambient: f64, albedo: f64) -> Result<Self, RasterError> {
        let norm = light_dir.norm();
        if norm < 1e-12 {
            return Err(RasterError::InvalidShading("zero light direction".into()));
        }
        for (v, what) in [(ambient, "ambient"), (albedo, "albedo")] {
            if !(0.0..=1.0).contains(&v) {
                return Err(RasterError::InvalidShading(format!(
                    "{what} = {v} outside [0, 1]"
                )));
            }
        }
        Ok(Self {
            light_dir: light_dir / norm,
            ambient,
            albedo,
        })
    }
}

impl Default for ShadingSpec {
    fn default() -> Self {
        Self::new(Vec3::new(0.3, -0.4, -1.0), 0.3, 0.6).unwrap()
    }
}

/// Per-pixel reflection regime map with a uniform constructor.
pub fn uniform_mode_map(width: usize, height: usize, mode: ReflectionMode) -> Grid<ReflectionMode> {
    Grid::filled(width, height, mode)
}

#[derive(Clone, Copy)]
struct Fragment {
    tri: u32,
    z: f64,
    bary: [f64; 3],
}

const NO_TRI: u32 = u32::MAX;

struct PreparedTri {
    u: [f64; 3],
    v: [f64; 3],
    inv_z: [f64; 3],
    normals: [Vec3; 3],
    area2: f64,
    x_range: (usize, usize),
}

/// Edge function: twice the signed area of (a, b, p) in screen space.
#[inline]
fn edge(au: f64, av: f64, bu: f64, bv: f64, pu: f64, pv: f64) -> f64 {
    (bu - au) * (pv - av) - (bv - av) * (pu - au)
}

/// Top-left fill rule for an edge with direction `(du, dv)` in a y-down
/// screen with positive interior orientation: left edges point up, top
/// edges point right.
#[inline]
fn is_top_left(du: f64, dv: f64) -> bool {
    dv < 0.0 || (dv == 0.0 && du > 0.0)
}

/// Rasterizes a mesh under a pose: z-buffered perspective projection with
/// pixel centers at integer + 0.5, back-face culling, barycentrically
/// interpolated (perspective-correct) and renormalized vertex normals.
pub fn rasterize(mesh: &MeshModel, pose: &Pose, k: &CameraIntrinsics) -> RenderBuffers {
    let (w, h) = (k.width as usize, k.height as usize);

    let cam_pts: Vec<Vec3> = mesh.vertices().iter().map(|p| pose.transform(p)).collect();
    let cam_normals: Vec<Vec3> = mesh
        .normals()
        .iter()
        .map(|n| pose.rotation.rotate(n))
        .collect();

    // Prepare visible triangles and bucket them by the rows they touch.
    let mut prepared: Vec<PreparedTri> = Vec::new();
    let mut row_lists: Vec<Vec<u32>> = vec![Vec::new(); h];
    for tri in mesh.triangles() {
        let p = [
            cam_pts[tri[0] as usize],
            cam_pts[tri[1] as usize],
            cam_pts[tri[2] as usize],
        ];
        if p.iter().any(|q| q.z <= NEAR_PLANE) {
            continue;
        }
        // Back-face culling: outward geometric normal vs view ray.
        let geom = (p[1] - p[0]).cross(&(p[2] - p[0]));
        if geom.dot(&(p[0] + p[1] + p[2])) >= 0.0 {
            continue;
        }

        let mut u = [0.0; 3];
        let mut v = [0.0; 3];
        for i in 0..3 {
            let (pu, pv) = k.project(&p[i]);
            u[i] = pu;
            v[i] = pv;
        }
        let mut inv_z = [1.0 / p[0].z, 1.0 / p[1].z, 1.0 / p[2].z];
        let mut normals = [
            cam_normals[tri[0] as usize],
            cam_normals[tri[1] as usize],
            cam_normals[tri[2] as usize],
        ];

        let mut area2 = edge(u[0], v[0], u[1], v[1], u[2], v[2]);
        if area2 == 0.0 {
            continue;
        }
        if area2 < 0.0 {
            u.swap(1, 2);
            v.swap(1, 2);
            inv_z.swap(1, 2);
            normals.swap(1, 2);
            area2 = -area2;
        }

        let (umin, umax) = (
            u[0].min(u[1]).min(u[2]),
            u[0].max(u[1]).max(u[2]),
        );
        let (vmin, vmax) = (
            v[0].min(v[1]).min(v[2]),
            v[0].max(v[1]).max(v[2]),
        );
        // Pixel centers at x + 0.5: candidates with center inside the bbox.
        let x0 = (umin - 0.5).ceil().max(0.0) as usize;
        let x1 = (umax - 0.5).floor().min(w as f64 - 1.0);
        let y0 = (vmin - 0.5).ceil().max(0.0) as usize;
        let y1 = (vmax - 0.5).floor().min(h as f64 - 1.0);
        if x1 < 0.0 || y1 < 0.0 || x0 > w - 1 || y0 > h - 1 || umax < 0.0 || vmax < 0.0 {
            continue;
        }
        let (x1, y1) = (x1 as usize, y1 as usize);
        if x0 > x1 || y0 > y1 {
            continue;
        }

        let idx = prepared.len() as u32;
        prepared.push(PreparedTri {
            u,
            v,
            inv_z,
            normals,
            area2,
            x_range: (x0, x1),
        });
        for row in row_lists.iter_mut().take(y1 + 1).skip(y0) {
            row.push(idx);
        }
    }

    // Visibility pass: rows are independent, so banding over rows keeps the
    // result identical for any thread count.
    let mut frags = vec![
        Fragment {
            tri: NO_TRI,
            z: f64::INFINITY,
            bary: [0.0; 3],
        };
        w * h
    ];
    frags
        .par_chunks_mut(w)
        .enumerate()
        .for_each(|(y, frag_row)| {
            let pv = y as f64 + 0.5;
            for &ti in &row_lists[y] {
                let t = &prepared[ti as usize];
                for (x, frag) in frag_row
                    .iter_mut()
                    .enumerate()
                    .take(t.x_range.1 + 1)
                    .skip(t.x_range.0)
                {
                    let pu = x as f64 + 0.5;
                    let e0 = edge(t.u[1], t.v[1], t.u[2], t.v[2], pu, pv);
                    let e1 = edge(t.u[2], t.v[2], t.u[0], t.v[0], pu, pv);
                    let e2 = edge(t.u[0], t.v[0], t.u[1], t.v[1], pu, pv);
                    let covered = [(e0, 1usize, 2usize), (e1, 2, 0), (e2, 0, 1)]
                        .into_iter()
                        .all(|(e, a, b)| {
                            e > 0.0
                                || (e == 0.0 && is_top_left(t.u[b] - t.u[a], t.v[b] - t.v[a]))
                        });
                    if !covered {
                        continue;
                    }
                    let bary = [e0 / t.area2, e1 / t.area2, e2 / t.area2];
                    let inv_z =
                        bary[0] * t.inv_z[0] + bary[1] * t.inv_z[1] + bary[2] * t.inv_z[2];
                    let z = 1.0 / inv_z;
                    if z < frag.z {
                        *frag = Fragment { tri: ti, z, bary };
                    }
                }
            }
        });

    // Shade pass: perspective-correct normal interpolation.
    let shaded: Vec<(bool, Vec3, f64)> = frags
        .par_iter()
        .map(|frag| {
            if frag.tri == NO_TRI {
                return (false, Vec3::zeros(), f64::INFINITY);
            }
            let t = &prepared[frag.tri as usize];
            let weights = [
                frag.bary[0] * t.inv_z[0],
                frag.bary[1] * t.inv_z[1],
                frag.bary[2] * t.inv_z[2],
            ];
            let wsum = weights[0] + weights[1] + weights[2];
            let n = (t.normals[0] * weights[0]
                + t.normals[1] * weights[1]
                + t.normals[2] * weights[2])
                / wsum;
            let norm = n.norm();
            let n = if norm > 0.0 {
                n / norm
            } else {
                Vec3::zeros()
            };
            (true, n, frag.z)
        })
        .collect();

    RenderBuffers {
        mask: Grid::from_vec(w, h, shaded.iter().map(|s| s.0).collect()),
        normals: Grid::from_vec(w, h, shaded.iter().map(|s| s.1).collect()),
        depth: Grid::from_vec(w, h, shaded.iter().map(|s| s.2).collect()),
    }
}

/// Shades rasterized buffers into a synthetic polarimetric quadruplet at the
/// canonical filter angles.
///
/// Per mask pixel: Lambertian unpolarized intensity
/// `ambient + albedo · max(0, n·l)`, DoP from the Fresnel curve selected by
/// `mode_map` at the true per-pixel viewing angle, AoP from the normal's
/// azimuth. Background pixels carry the constant ambient intensity,
/// unpolarized.
pub fn render_polarization(
    rb: &RenderBuffers,
    k: &CameraIntrinsics,
    material: &MaterialSpec,
    shading: &ShadingSpec,
    mode_map: &Grid<ReflectionMode>,
) -> Result<PolarQuadruplet, RasterError> {
    if !rb.mask.same_shape(mode_map) {
        return Err(RasterError::ShapeMismatch(
            rb.mask.width(),
            rb.mask.height(),
            mode_map.width(),
            mode_map.height(),
        ));
    }
    let (w, h) = rb.mask.shape();
    let decomps: Vec<PolarDecomposition> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (x, y) = (i % w, i / w);
            if !*rb.mask.get(x, y) {
                return PolarDecomposition {
                    i_un: shading.ambient,
                    rho: 0.0,
                    phi: 0.0,
                };
            }
            let n = rb.normals.get(x, y);
            let view = k.view_dir_unchecked(x as f64 + 0.5, y as f64 + 0.5);
            let theta_v = n.dot(&view).clamp(0.0, 1.0).acos().min(THETA_CAP);
            let mode = *mode_map.get(x, y);
            let rho = match mode {
                ReflectionMode::Diffuse => dop_diffuse(theta_v, material),
                ReflectionMode::Specular => dop_specular(theta_v, material),
            }
            .expect("capped viewing angle is in domain");
            let alpha = n.y.atan2(n.x);
            let phi = aop_from_azimuth(alpha, mode);
            let i_un = shading.ambient + shading.albedo * n.dot(&shading.light_dir).max(0.0);
            PolarDecomposition { i_un, rho, phi }
        })
        .collect();

    let image_at = |angle: f64| -> ScalarMap {
        Grid::from_vec(
            w,
            h,
            decomps.iter().map(|d| forward_intensity(d, angle)).collect(),
        )
    };
    let images = CANONICAL_FILTER_ANGLES.map(image_at);
    Ok(PolarQuadruplet::new(CANONICAL_FILTER_ANGLES, images).expect("shapes agree"))
}

/// Ground-truth analytic DoP maps for rendered buffers (convenience wrapper
/// over the inverted physical model).
pub fn analytic_dop_for_render(
    rb: &RenderBuffers,
    k: &CameraIntrinsics,
    material: &MaterialSpec,
) -> Grid<AnalyticDop> {
    crate::polarization::analytic_dop_maps(&rb.normals, &rb.mask, k, material)
}
