//! Triangle meshes: validation, ASCII OBJ ingestion, and the procedural
//! primitives used by synthetic experiments.

use super::GeometryError;
use crate::Vec3;
use rayon::prelude::*;
use std::collections::HashMap;
use std::path::Path;

const NORMAL_UNIT_TOL: f64 = 1e-6;

/// Triangle mesh in object coordinates (meters) with per-vertex unit normals.
#[derive(Debug, Clone)]
pub struct MeshModel {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
    normals: Vec<Vec3>,
    diameter: f64,
}

impl MeshModel {
    /// Validates and builds a mesh. Vertex normals must be unit length within
    /// 1e-6; triangle indices must be in range; the diameter (max pairwise
    /// vertex distance) must be positive.
    pub fn try_new(
        vertices: Vec<Vec3>,
        triangles: Vec<[u32; 3]>,
        normals: Vec<Vec3>,
    ) -> Result<Self, GeometryError> {
        if vertices.is_empty() || triangles.is_empty() {
            return Err(GeometryError::InvalidMesh(
                "mesh needs at least one vertex and one triangle".into(),
            ));
        }
        if normals.len() != vertices.len() {
            return Err(GeometryError::InvalidMesh(format!(
                "{} normals for {} vertices",
                normals.len(),
                vertices.len()
            )));
        }
        let n_verts = vertices.len() as u32;
        for (i, t) in triangles.iter().enumerate() {
            if t.iter().any(|&ix| ix >= n_verts) {
                return Err(GeometryError::InvalidMesh(format!(
                    "triangle {i} references vertex out of range"
                )));
            }
        }
        for (i, n) in normals.iter().enumerate() {
            if (n.norm() - 1.0).abs() > NORMAL_UNIT_TOL {
                return Err(GeometryError::InvalidMesh(format!(
                    "vertex normal {i} has norm {}",
                    n.norm()
                )));
            }
        }
        let diameter = max_pairwise_distance(&vertices);
        if diameter <= 0.0 {
            return Err(GeometryError::InvalidMesh(
                "mesh diameter must be positive".into(),
            ));
        }
        Ok(Self {
            vertices,
            triangles,
            normals,
            diameter,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    /// Max pairwise vertex distance, meters.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }
}

fn max_pairwise_distance(vertices: &[Vec3]) -> f64 {
    vertices
        .par_iter()
        .enumerate()
        .map(|(i, a)| {
            let mut best: f64 = 0.0;
            for b in &vertices[i + 1..] {
                let d = (a - b).norm_squared();
                if d > best {
                    best = d;
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max)
        .sqrt()
}

/// Computes area-weighted vertex normals for meshes that ship without them.
fn vertex_normals_from_faces(vertices: &[Vec3], triangles: &[[u32; 3]]) -> Vec<Vec3> {
    let mut acc = vec![Vec3::zeros(); vertices.len()];
    for t in triangles {
        let [a, b, c] = [
            vertices[t[0] as usize],
            vertices[t[1] as usize],
            vertices[t[2] as usize],
        ];
        let face = (b - a).cross(&(c - a)); // length ∝ area
        for &ix in t {
            acc[ix as usize] += face;
        }
    }
    acc.into_iter()
        .map(|n| {
            let l = n.norm();
            if l > 0.0 {
                n / l
            } else {
                Vec3::new(0.0, 0.0, 1.0)
            }
        })
        .collect()
}

/// Parses ASCII OBJ text (v / vn / f records; faces are fan-triangulated).
///
/// Corners that pair a position with different normal indices are split into
/// distinct vertices so the result carries one normal per vertex. Meshes
/// without `vn` records get area-weighted normals computed from the faces.
pub fn parse_obj(text: &str) -> Result<MeshModel, GeometryError> {
    let mut positions: Vec<Vec3> = Vec::new();
    let mut obj_normals: Vec<Vec3> = Vec::new();
    // (position index, normal index or usize::MAX) -> output vertex index
    let mut remap: HashMap<(usize, usize), u32> = HashMap::new();
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut normal_ids: Vec<usize> = Vec::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();

    let parse3 = |parts: &[&str], what: &str, line_no: usize| -> Result<Vec3, GeometryError> {
        if parts.len() < 3 {
            return Err(GeometryError::InvalidMesh(format!(
                "line {line_no}: {what} needs three components"
            )));
        }
        let mut v = [0.0f64; 3];
        for (slot, raw) in v.iter_mut().zip(parts) {
            *slot = raw.parse::<f64>().map_err(|_| {
                GeometryError::InvalidMesh(format!("line {line_no}: bad {what} component '{raw}'"))
            })?;
        }
        Ok(Vec3::new(v[0], v[1], v[2]))
    };

    for (line_no, raw_line) in text.lines().enumerate() {
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let tag = it.next().unwrap();
        let rest: Vec<&str> = it.collect();
        match tag {
            "v" => positions.push(parse3(&rest, "vertex", line_no + 1)?),
            "vn" => obj_normals.push(parse3(&rest, "normal", line_no + 1)?),
            "f" => {
                if rest.len() < 3 {
                    return Err(GeometryError::InvalidMesh(format!(
                        "line {}: face needs at least three corners",
                        line_no + 1
                    )));
                }
                let mut corners = Vec::with_capacity(rest.len());
                for corner in &rest {
                    // v, v/vt, v//vn, v/vt/vn
                    let mut fields = corner.split('/');
                    let vi: usize = fields
                        .next()
                        .and_then(|s| s.parse::<usize>().ok())
                        .filter(|&ix| ix >= 1 && ix <= positions.len())
                        .ok_or_else(|| {
                            GeometryError::InvalidMesh(format!(
                                "line {}: bad face corner '{corner}'",
                                line_no + 1
                            ))
                        })?;
                    let _vt = fields.next();
                    let ni: usize = match fields.next().filter(|s| !s.is_empty()) {
                        Some(s) => s
                            .parse::<usize>()
                            .ok()
                            .filter(|&ix| ix >= 1 && ix <= obj_normals.len())
                            .ok_or_else(|| {
                                GeometryError::InvalidMesh(format!(
                                    "line {}: bad normal index in '{corner}'",
                                    line_no + 1
                                ))
                            })?,
                        None => usize::MAX,
                    };
                    let out_ix = *remap.entry((vi - 1, ni)).or_insert_with(|| {
                        vertices.push(positions[vi - 1]);
                        normal_ids.push(ni);
                        (vertices.len() - 1) as u32
                    });
                    corners.push(out_ix);
                }
                for i in 1..corners.len() - 1 {
                    triangles.push([corners[0], corners[i], corners[i + 1]]);
                }
            }
            _ => {} // vt, o, g, s, usemtl, mtllib are ignored
        }
    }

    if vertices.is_empty() {
        return Err(GeometryError::InvalidMesh("OBJ contains no faces".into()));
    }

    let normals = if obj_normals.is_empty() || normal_ids.iter().all(|&n| n == usize::MAX) {
        vertex_normals_from_faces(&vertices, &triangles)
    } else {
        let fallback = vertex_normals_from_faces(&vertices, &triangles);
        normal_ids
            .iter()
            .enumerate()
            .map(|(i, &ni)| {
                if ni == usize::MAX {
                    fallback[i]
                } else {
                    let n = obj_normals[ni - 1];
                    let l = n.norm();
                    if l > 0.0 {
                        n / l
                    } else {
                        fallback[i]
                    }
                }
            })
            .collect()
    };

    MeshModel::try_new(vertices, triangles, normals)
}

/// Loads an ASCII OBJ file.
pub fn load_obj(path: &Path) -> Result<MeshModel, GeometryError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| GeometryError::InvalidMesh(format!("cannot read {}: {e}", path.display())))?;
    parse_obj(&text)
}

/// Writes a mesh as ASCII OBJ with v/vn/f records.
pub fn write_obj(mesh: &MeshModel, path: &Path) -> Result<(), GeometryError> {
    use std::fmt::Write as _;
    let mut out = String::new();
    for v in mesh.vertices() {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    for n in mesh.normals() {
        let _ = writeln!(out, "vn {} {} {}", n.x, n.y, n.z);
    }
    for t in mesh.triangles() {
        let _ = writeln!(
            out,
            "f {0}//{0} {1}//{1} {2}//{2}",
            t[0] + 1,
            t[1] + 1,
            t[2] + 1
        );
    }
    std::fs::write(path, out)
        .map_err(|e| GeometryError::InvalidMesh(format!("cannot write {}: {e}", path.display())))
}

/// Procedurally generated test meshes. All are centered at the object-frame
/// origin, consistently wound (counter-clockwise seen from outside), and
/// carry exact analytic vertex normals.
pub mod primitives {
    use super::MeshModel;
    use crate::Vec3;
    use std::f64::consts::PI;

    /// UV sphere of radius `r` with `n_seg` longitudes and `n_rings` latitudes.
    pub fn sphere(r: f64, n_seg: u32, n_rings: u32) -> MeshModel {
        assert!(n_seg >= 3 && n_rings >= 2);
        let mut vertices = Vec::new();
        let mut normals = Vec::new();
        let mut triangles = Vec::new();

        let top = vertices.len() as u32;
        vertices.push(Vec3::new(0.0, 0.0, r));
        normals.push(Vec3::new(0.0, 0.0, 1.0));

        // Interior rings, excluding the poles.
        for ring in 1..n_rings {
            let theta = PI * ring as f64 / n_rings as f64;
            let (st, ct) = theta.sin_cos();
            for s in 0..n_seg {
                let phi = 2.0 * PI * s as f64 / n_seg as f64;
                let (sp, cp) = phi.sin_cos();
                let n = Vec3::new(cp * st, sp * st, ct);
                vertices.push(n * r);
                normals.push(n);
            }
        }

        let bottom = vertices.len() as u32;
        vertices.push(Vec3::new(0.0, 0.0, -r));
        normals.push(Vec3::new(0.0, 0.0, -1.0));

        let ring_start = |ring: u32| 1 + (ring - 1) * n_seg;

        // Top cap.
        for s in 0..n_seg {
            let a = ring_start(1) + s;
            let b = ring_start(1) + (s + 1) % n_seg;
            triangles.push([top, a, b]);
        }
        // Body quads.
        for ring in 1..n_rings - 1 {
            for s in 0..n_seg {
                let a = ring_start(ring) + s;
                let b = ring_start(ring) + (s + 1) % n_seg;
                let c = ring_start(ring + 1) + s;
                let d = ring_start(ring + 1) + (s + 1) % n_seg;
                triangles.push([a, c, d]);
                triangles.push([a, d, b]);
            }
        }
        // Bottom cap.
        for s in 0..n_seg {
            let a = ring_start(n_rings - 1) + s;
            let b = ring_start(n_rings - 1) + (s + 1) % n_seg;
            triangles.push([bottom, b, a]);
        }

        MeshModel::try_new(vertices, triangles, normals).expect("sphere primitive is valid")
    }

    /// Closed cylinder of radius `r` and height `h`, axis +z, `n_seg` sides.
    ///
    /// Side and cap rings use separate vertices so each vertex carries the
    /// exact surface normal of its facet family. Rotating the mesh about +z
    /// by a multiple of `2π/n_seg` maps its vertex set onto itself.
    pub fn cylinder(r: f64, h: f64, n_seg: u32) -> MeshModel {
        assert!(n_seg >= 3);
        let hz = 0.5 * h;
        let mut vertices = Vec::new();
        let mut normals = Vec::new();
        let mut triangles = Vec::new();

        let ring = |s: u32| {
            let phi = 2.0 * PI * s as f64 / n_seg as f64;
            let (sp, cp) = phi.sin_cos();
            (cp, sp)
        };

        // Side rings (radial normals).
        let side_bot = vertices.len() as u32;
        for s in 0..n_seg {
            let (cp, sp) = ring(s);
            vertices.push(Vec3::new(r * cp, r * sp, -hz));
            normals.push(Vec3::new(cp, sp, 0.0));
        }
        let side_top = vertices.len() as u32;
        for s in 0..n_seg {
            let (cp, sp) = ring(s);
            vertices.push(Vec3::new(r * cp, r * sp, hz));
            normals.push(Vec3::new(cp, sp, 0.0));
        }
        for s in 0..n_seg {
            let s1 = (s + 1) % n_seg;
            let (a, b) = (side_bot + s, side_bot + s1);
            let (c, d) = (side_top + s, side_top + s1);
            triangles.push([a, b, d]);
            triangles.push([a, d, c]);
        }

        // Cap rings (axial normals) plus center vertices.
        let cap_top = vertices.len() as u32;
        for s in 0..n_seg {
            let (cp, sp) = ring(s);
            vertices.push(Vec3::new(r * cp, r * sp, hz));
            normals.push(Vec3::new(0.0, 0.0, 1.0));
        }
        let top_center = vertices.len() as u32;
        vertices.push(Vec3::new(0.0, 0.0, hz));
        normals.push(Vec3::new(0.0, 0.0, 1.0));
        for s in 0..n_seg {
            triangles.push([top_center, cap_top + s, cap_top + (s + 1) % n_seg]);
        }

        let cap_bot = vertices.len() as u32;
        for s in 0..n_seg {
            let (cp, sp) = ring(s);
            vertices.push(Vec3::new(r * cp, r * sp, -hz));
            normals.push(Vec3::new(0.0, 0.0, -1.0));
        }
        let bot_center = vertices.len() as u32;
        vertices.push(Vec3::new(0.0, 0.0, -hz));
        normals.push(Vec3::new(0.0, 0.0, -1.0));
        for s in 0..n_seg {
            triangles.push([bot_center, cap_bot + (s + 1) % n_seg, cap_bot + s]);
        }

        MeshModel::try_new(vertices, triangles, normals).expect("cylinder primitive is valid")
    }

    /// A cup: a tapered double-walled open vessel with a bottom, built as a
    /// surface of revolution around +z, centered on the origin.
    ///
    /// `r_top` is the outer rim radius, `r_bottom` the outer base radius,
    /// `h` the height, `wall` the wall thickness.
    pub fn cup(r_top: f64, r_bottom: f64, h: f64, wall: f64, n_seg: u32) -> MeshModel {
        assert!(n_seg >= 3);
        assert!(wall > 0.0 && wall < r_bottom && wall < r_top);
        let hz = 0.5 * h;
        // Revolution profile as (radius, z) with matching 2D outward normals
        // (nr, nz); traversed so the surface is consistently wound.
        // Outer wall up, rim, inner wall down, inner bottom, under-bottom.
        let inner_floor_z = -hz + wall;
        let outer = profile_normal(r_bottom, -hz, r_top, hz);
        let inner = profile_normal(r_top - wall, hz, r_bottom - wall, inner_floor_z);
        let profile: Vec<((f64, f64), (f64, f64))> = vec![
            // ((r, z), (nr, nz))
            ((r_bottom, -hz), outer),
            ((r_top, hz), outer),
            ((r_top, hz), (0.0, 1.0)), // rim top
            ((r_top - wall, hz), (0.0, 1.0)),
            ((r_top - wall, hz), inner),
            ((r_bottom - wall, inner_floor_z), inner),
            ((r_bottom - wall, inner_floor_z), (0.0, 1.0)), // inner floor
            ((0.0, inner_floor_z), (0.0, 1.0)),
            ((0.0, -hz), (0.0, -1.0)), // under-bottom
            ((r_bottom, -hz), (0.0, -1.0)),
        ];
        revolve(&profile, n_seg)
    }

    /// 2D outward normal of the profile segment from (r0, z0) to (r1, z1),
    /// pointing away from the axis for increasing z traversal.
    fn profile_normal(r0: f64, z0: f64, r1: f64, z1: f64) -> (f64, f64) {
        let dr = r1 - r0;
        let dz = z1 - z0;
        let len = (dr * dr + dz * dz).sqrt();
        (dz / len, -dr / len)
    }

    /// Profile sample: (radius, z) position with its (radial, axial) normal.
    type ProfilePoint = ((f64, f64), (f64, f64));

    /// Revolves a profile polyline (pairs of consecutive points form bands)
    /// around +z. Zero-radius points become fan centers.
    fn revolve(profile: &[ProfilePoint], n_seg: u32) -> MeshModel {
        let mut vertices = Vec::new();
        let mut normals = Vec::new();
        let mut triangles = Vec::new();

        // Emit one ring (or a single axis vertex) per profile point.
        let mut ring_starts = Vec::with_capacity(profile.len());
        for &((r, z), (nr, nz)) in profile {
            let start = vertices.len() as u32;
            if r == 0.0 {
                vertices.push(Vec3::new(0.0, 0.0, z));
                normals.push(Vec3::new(0.0, 0.0, nz.signum()));
            } else {
                for s in 0..n_seg {
                    let phi = 2.0 * PI * s as f64 / n_seg as f64;
                    let (sp, cp) = phi.sin_cos();
                    vertices.push(Vec3::new(r * cp, r * sp, z));
                    normals.push(Vec3::new(nr * cp, nr * sp, nz).normalize());
                }
            }
            ring_starts.push((start, r == 0.0));
        }

        for w in 0..profile.len() / 2 {
            let (a_start, a_axis) = ring_starts[2 * w];
            let (b_start, b_axis) = ring_starts[2 * w + 1];
            for s in 0..n_seg {
                let s1 = (s + 1) % n_seg;
                match (a_axis, b_axis) {
                    (false, false) => {
                        let (a, b) = (a_start + s, a_start + s1);
                        let (c, d) = (b_start + s, b_start + s1);
                        triangles.push([a, b, d]);
                        triangles.push([a, d, c]);
                    }
                    (false, true) => {
                        triangles.push([a_start + s, a_start + s1, b_start]);
                    }
                    (true, false) => {
                        triangles.push([a_start, b_start + s1, b_start + s]);
                    }
                    (true, true) => {}
                }
            }
        }

        // The winding above assumes profile traversal with outward normals on
        // the left; fix any band wound against its own normals.
        orient_to_normals(&mut triangles, &vertices, &normals);
        MeshModel::try_new(vertices, triangles, normals).expect("revolved primitive is valid")
    }

    /// Flips triangles whose geometric normal opposes their vertex normals.
    fn orient_to_normals(triangles: &mut [[u32; 3]], vertices: &[Vec3], normals: &[Vec3]) {
        for t in triangles.iter_mut() {
            let [a, b, c] = [
                vertices[t[0] as usize],
                vertices[t[1] as usize],
                vertices[t[2] as usize],
            ];
            let face = (b - a).cross(&(c - a));
            let vn = normals[t[0] as usize] + normals[t[1] as usize] + normals[t[2] as usize];
            if face.dot(&vn) < 0.0 {
                t.swap(1, 2);
            }
        }
    }

    /// Two-triangle square quad of side `size` in the xy-plane, facing -z
    /// (toward the camera when posed at a positive depth with identity
    /// rotation).
    pub fn facing_quad(size: f64) -> MeshModel {
        let s = 0.5 * size;
        let n = Vec3::new(0.0, 0.0, -1.0);
        let vertices = vec![
            Vec3::new(-s, -s, 0.0),
            Vec3::new(s, -s, 0.0),
            Vec3::new(s, s, 0.0),
            Vec3::new(-s, s, 0.0),
        ];
        let normals = vec![n; 4];
        // Wound so the geometric normal is -z.
        let triangles = vec![[0, 2, 1], [0, 3, 2]];
        MeshModel::try_new(vertices, triangles, normals).expect("quad primitive is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sphere_diameter_and_normals() {
        let m = primitives::sphere(0.05, 24, 12);
        assert_abs_diff_eq!(m.diameter(), 0.1, epsilon = 1e-12);
        for (v, n) in m.vertices().iter().zip(m.normals()) {
            assert_abs_diff_eq!(v.normalize(), *n, epsilon = 1e-12);
        }
    }

    #[test]
    fn cylinder_vertex_set_closes_under_segment_rotation() {
        let m = primitives::cylinder(0.03, 0.1, 16);
        let rot = crate::geometry::RotationMatrix::from_axis_angle(
            Vec3::new(0.0, 0.0, 1.0),
            2.0 * std::f64::consts::PI / 16.0,
        );
        for v in m.vertices() {
            let rotated = rot.rotate(v);
            let nearest = m
                .vertices()
                .iter()
                .map(|w| (rotated - w).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(nearest < 1e-12, "rotated vertex strays by {nearest}");
        }
    }

    #[test]
    fn cup_is_consistently_wound() {
        let m = primitives::cup(0.04, 0.032, 0.1, 0.004, 24);
        // Every face normal must agree with its vertex normals.
        for t in m.triangles() {
            let [a, b, c] = [
                m.vertices()[t[0] as usize],
                m.vertices()[t[1] as usize],
                m.vertices()[t[2] as usize],
            ];
            let face = (b - a).cross(&(c - a));
            let vn = m.normals()[t[0] as usize];
            assert!(
                face.dot(&vn) >= 0.0,
                "face winding opposes vertex normal: {t:?}"
            );
        }
    }

    #[test]
    fn obj_round_trip() {
        let m = primitives::cylinder(0.02, 0.06, 12);
        let dir = std::env::temp_dir().join(format!("polarforge-mesh-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("cyl.obj");
        write_obj(&m, &path).unwrap();
        let back = load_obj(&path).unwrap();
        assert_eq!(back.vertices().len(), m.vertices().len());
        assert_eq!(back.triangles().len(), m.triangles().len());
        assert_abs_diff_eq!(back.diameter(), m.diameter(), epsilon = 1e-12);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn obj_without_normals_gets_face_normals() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n";
        let m = parse_obj(text).unwrap();
        for n in m.normals() {
            assert_abs_diff_eq!(*n, Vec3::new(0.0, 0.0, 1.0), epsilon = 1e-12);
        }
    }

    #[test]
    fn obj_quad_triangulates() {
        let text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
        let m = parse_obj(text).unwrap();
        assert_eq!(m.triangles().len(), 2);
    }

    #[test]
    fn obj_bad_face_index_rejected() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n";
        assert!(parse_obj(text).is_err());
    }

    #[test]
    fn mesh_invariants_enforced() {
        let verts = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ];
        let bad_normals = vec![Vec3::new(0.0, 0.0, 2.0); 3];
        assert!(MeshModel::try_new(verts.clone(), vec![[0, 1, 2]], bad_normals).is_err());
        let ok_normals = vec![Vec3::new(0.0, 0.0, 1.0); 3];
        assert!(MeshModel::try_new(verts.clone(), vec![[0, 1, 3]], ok_normals.clone()).is_err());
        assert!(MeshModel::try_new(verts, vec![[0, 1, 2]], ok_normals).is_ok());
    }
}
