//! Quadruplet archives: four PFM intensity images plus a self-describing
//! `meta.json`, with optional ground-truth render buffers alongside.

use crate::formats::{IntrinsicsJson, MaterialJson, PoseJson};
use crate::pfm::{read_pfm, write_pfm_color, write_pfm_scalar};
use crate::{Result, WorkbenchError, write_atomic};
use polarforge_core::grid::Grid;
use polarforge_core::polarization::{CANONICAL_FILTER_ANGLES, PolarQuadruplet};
use polarforge_core::raster::RenderBuffers;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// Canonical image member names in filter-angle order.
pub const IMAGE_KEYS: [&str; 4] = ["I000", "I045", "I090", "I135"];

/// Ground-truth buffer file names written next to the quadruplet.
pub const MASK_FILE: &str = "mask.pfm";
pub const NORMALS_FILE: &str = "normals.pfm";
pub const DEPTH_FILE: &str = "depth.pfm";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ArchiveMeta {
    pub width: usize,
    pub height: usize,
    pub intrinsics: IntrinsicsJson,
    pub pose_gt: PoseJson,
    pub material: MaterialJson,
    /// Filter angles in degrees; canonical 0/45/90/135 unless overridden.
    pub filter_angles_deg: [f64; 4],
    /// Member name → PFM file name.
    pub images: BTreeMap<String, String>,
    /// Mesh path (relative to the working directory), when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<String>,
}

/// A quadruplet stored at 32-bit float precision (the archive's native
/// precision: round trips are bitwise).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadrupletArchive {
    pub images: [Grid<f32>; 4],
    pub meta: ArchiveMeta,
}

impl QuadrupletArchive {
    /// Quantizes a rendered (f64) quadruplet into archive form.
    pub fn from_quadruplet(
        quad: &PolarQuadruplet,
        intrinsics: IntrinsicsJson,
        pose_gt: PoseJson,
        material: MaterialJson,
        mesh: Option<String>,
    ) -> Self {
        let images = [0, 1, 2, 3].map(|i| quad.images[i].map(|&v| v as f32));
        let meta = ArchiveMeta {
            width: quad.width(),
            height: quad.height(),
            intrinsics,
            pose_gt,
            material,
            filter_angles_deg: quad.filter_angles.map(|a| a.to_degrees()),
            images: IMAGE_KEYS
                .iter()
                .map(|k| (k.to_string(), format!("{k}.pfm")))
                .collect(),
            mesh,
        };
        Self { images, meta }
    }

    /// Filter angles in radians.
    pub fn filter_angles(&self) -> [f64; 4] {
        self.meta.filter_angles_deg.map(|a| a.to_radians())
    }

    /// Widens back to the f64 quadruplet used by the physics pipeline.
    pub fn to_quadruplet(&self) -> PolarQuadruplet {
        let images = [0, 1, 2, 3].map(|i| self.images[i].map(|&v| v as f64));
        PolarQuadruplet::new(self.filter_angles(), images).expect("archive shapes agree")
    }
}

/// Writes the four images and `meta.json` into `dir`.
pub fn write_archive(dir: &Path, archive: &QuadrupletArchive) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (key, image) in IMAGE_KEYS.iter().zip(&archive.images) {
        let file = archive.meta.images.get(*key).ok_or_else(|| {
            WorkbenchError::CorruptArchive(format!("meta lacks image member '{key}'"))
        })?;
        write_pfm_scalar(&dir.join(file), image)?;
    }
    let meta = serde_json::to_string_pretty(&archive.meta)?;
    write_atomic(&dir.join("meta.json"), meta.as_bytes())?;
    Ok(())
}

/// Reads and validates an archive directory. Self-describing: nothing
/// beyond the directory path is needed.
pub fn read_archive(dir: &Path) -> Result<QuadrupletArchive> {
    let meta_path = dir.join("meta.json");
    let meta_text = std::fs::read_to_string(&meta_path).map_err(|e| {
        WorkbenchError::CorruptArchive(format!("{}: {e}", meta_path.display()))
    })?;
    let meta: ArchiveMeta = serde_json::from_str(&meta_text)
        .map_err(|e| WorkbenchError::CorruptArchive(format!("meta.json: {e}")))?;

    // Material must satisfy the reference table for named materials.
    meta.material.to_material()?;
    let k = meta.intrinsics.to_intrinsics()?;
    if (k.width as usize, k.height as usize) != (meta.width, meta.height) {
        return Err(WorkbenchError::CorruptArchive(format!(
            "intrinsics are {}x{} but the archive is {}x{}",
            k.width, k.height, meta.width, meta.height
        )));
    }

    let mut images = Vec::with_capacity(4);
    for key in IMAGE_KEYS {
        let file = meta.images.get(key).ok_or_else(|| {
            WorkbenchError::CorruptArchive(format!("meta.json lacks image member '{key}'"))
        })?;
        let image = read_pfm(&dir.join(file))?.into_scalar()?;
        if image.shape() != (meta.width, meta.height) {
            return Err(WorkbenchError::CorruptArchive(format!(
                "{file}: {}x{} does not match meta {}x{}",
                image.width(),
                image.height(),
                meta.width,
                meta.height
            )));
        }
        images.push(image);
    }
    let images: [Grid<f32>; 4] = images.try_into().expect("four members collected");

    // Filter angles must be pairwise distinct (canonical unless overridden).
    let angles = meta.filter_angles_deg;
    for a in 0..4 {
        for b in a + 1..4 {
            if angles[a] == angles[b] {
                return Err(WorkbenchError::CorruptArchive(
                    "filter angles are not pairwise distinct".into(),
                ));
            }
        }
    }

    Ok(QuadrupletArchive { images, meta })
}

/// Writes ground-truth render buffers (mask / normals / depth) next to an
/// archive.
pub fn write_gt_buffers(dir: &Path, rb: &RenderBuffers) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_pfm_scalar(
        &dir.join(MASK_FILE),
        &rb.mask.map(|&m| if m { 1.0f32 } else { 0.0 }),
    )?;
    write_pfm_color(
        &dir.join(NORMALS_FILE),
        &rb.normals.map(|n| [n.x as f32, n.y as f32, n.z as f32]),
    )?;
    write_pfm_scalar(&dir.join(DEPTH_FILE), &rb.depth.map(|&d| d as f32))?;
    Ok(())
}

/// Reads the ground-truth mask written by [`write_gt_buffers`].
pub fn read_gt_mask(dir: &Path) -> Result<Grid<bool>> {
    let img = read_pfm(&dir.join(MASK_FILE))?.into_scalar()?;
    Ok(img.map(|&v| v > 0.5))
}

/// Canonical filter angles in degrees, for metadata defaults.
pub fn canonical_angles_deg() -> [f64; 4] {
    CANONICAL_FILTER_ANGLES.map(|a| a.to_degrees())
}

#[cfg(test)]
mod tests {
    use super::*;
    use polarforge_core::geometry::{Pose, RotationMatrix};
    use polarforge_core::Vec3;

    fn meta_fixture() -> (IntrinsicsJson, PoseJson, MaterialJson) {
        (
            IntrinsicsJson {
                fx: 100.0,
                fy: 100.0,
                cx: 4.0,
                cy: 3.0,
                width: 8,
                height: 6,
            },
            PoseJson::from_pose(&Pose::new(
                RotationMatrix::identity(),
                Vec3::new(0.0, 0.0, 1.0),
            )),
            MaterialJson {
                name: "glass".into(),
                eta: 1.52,
            },
        )
    }

    fn archive_fixture() -> QuadrupletArchive {
        let (k, p, m) = meta_fixture();
        let images = [0u32, 1, 2, 3].map(|i| {
            Grid::from_fn(8, 6, |x, y| (x * 31 + y * 7 + i as usize * 3) as f64 * 0.01)
        });
        let quad = PolarQuadruplet::new(CANONICAL_FILTER_ANGLES, images).unwrap();
        QuadrupletArchive::from_quadruplet(&quad, k, p, m, Some("mesh.obj".into()))
    }

    #[test]
    fn archive_round_trip_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let archive = archive_fixture();
        write_archive(dir.path(), &archive).unwrap();
        let back = read_archive(dir.path()).unwrap();
        assert_eq!(archive.images, back.images);
        assert_eq!(archive.meta, back.meta);
    }

    #[test]
    fn missing_member_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let archive = archive_fixture();
        write_archive(dir.path(), &archive).unwrap();
        std::fs::remove_file(dir.path().join("I090.pfm")).unwrap();
        assert!(matches!(
            read_archive(dir.path()),
            Err(WorkbenchError::CorruptArchive(_))
        ));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let archive = archive_fixture();
        write_archive(dir.path(), &archive).unwrap();
        // Overwrite one member with a smaller image.
        write_pfm_scalar(&dir.path().join("I045.pfm"), &Grid::filled(4, 4, 0.0f32)).unwrap();
        assert!(matches!(
            read_archive(dir.path()),
            Err(WorkbenchError::CorruptArchive(_))
        ));
    }

    #[test]
    fn material_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut archive = archive_fixture();
        archive.meta.material.eta = 2.0; // named "glass" must carry 1.52
        write_archive(dir.path(), &archive).unwrap();
        assert!(read_archive(dir.path()).is_err());
    }
}
