//! JSON data-transfer types shared by scene files, archive metadata, and
//! the CLI, with validated conversions to the core domain types.

use crate::{Result, WorkbenchError};
use polarforge_core::geometry::{CameraIntrinsics, Pose, RotationMatrix};
use polarforge_core::polarization::MaterialSpec;
use polarforge_core::raster::ShadingSpec;
use polarforge_core::{Mat3, Vec3};
use serde::{Deserialize, Serialize};

/// Pose as row-major rotation plus translation: `{"R": [[...]], "t": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PoseJson {
    #[serde(rename = "R")]
    pub r: [[f64; 3]; 3],
    pub t: [f64; 3],
}

impl PoseJson {
    pub fn from_pose(p: &Pose) -> Self {
        let m = p.rotation.matrix();
        Self {
            r: [
                [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
                [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
                [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
            ],
            t: [p.translation.x, p.translation.y, p.translation.z],
        }
    }

    pub fn to_pose(&self) -> Result<Pose> {
        let m = Mat3::new(
            self.r[0][0],
            self.r[0][1],
            self.r[0][2],
            self.r[1][0],
            self.r[1][1],
            self.r[1][2],
            self.r[2][0],
            self.r[2][1],
            self.r[2][2],
        );
        let rotation = RotationMatrix::try_from_matrix(m)
            .map_err(|e| WorkbenchError::BadInput(e.to_string()))?;
        Ok(Pose::new(
            rotation,
            Vec3::new(self.t[0], self.t[1], self.t[2]),
        ))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct IntrinsicsJson {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl IntrinsicsJson {
    pub fn from_intrinsics(k: &CameraIntrinsics) -> Self {
        Self {
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
            width: k.width,
            height: k.height,
        }
    }

    pub fn to_intrinsics(&self) -> Result<CameraIntrinsics> {
        CameraIntrinsics::new(self.fx, self.fy, self.cx, self.cy, self.width, self.height)
            .map_err(|e| WorkbenchError::BadInput(e.to_string()))
    }
}

/// Refractive indices of the named reference materials.
pub const MATERIAL_TABLE: [(&str, f64); 3] =
    [("stainless steel", 2.75), ("glass", 1.52), ("plastics", 1.50)];

/// Table lookup for a named material.
pub fn table_eta(name: &str) -> Option<f64> {
    MATERIAL_TABLE
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, eta)| *eta)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MaterialJson {
    pub name: String,
    pub eta: f64,
}

impl MaterialJson {
    pub fn from_material(m: &MaterialSpec) -> Self {
        Self {
            name: m.name.clone(),
            eta: m.eta,
        }
    }

    /// Validates the refractive index, and for table-named materials also
    /// its agreement with the reference value.
    pub fn to_material(&self) -> Result<MaterialSpec> {
        if let Some(expected) = table_eta(&self.name) {
            if (self.eta - expected).abs() > 1e-12 {
                return Err(WorkbenchError::BadInput(format!(
                    "material '{}' must have eta = {expected}, got {}",
                    self.name, self.eta
                )));
            }
        }
        MaterialSpec::new(self.name.clone(), self.eta)
            .map_err(|e| WorkbenchError::BadInput(e.to_string()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ShadingJson {
    /// Unit direction from surface toward the light, camera frame.
    pub light_dir: [f64; 3],
    pub ambient: f64,
    pub albedo: f64,
}

impl ShadingJson {
    pub fn from_shading(s: &ShadingSpec) -> Self {
        Self {
            light_dir: [s.light_dir.x, s.light_dir.y, s.light_dir.z],
            ambient: s.ambient,
            albedo: s.albedo,
        }
    }

    pub fn to_shading(&self) -> Result<ShadingSpec> {
        ShadingSpec::new(
            Vec3::new(self.light_dir[0], self.light_dir[1], self.light_dir[2]),
            self.ambient,
            self.albedo,
        )
        .map_err(|e| WorkbenchError::BadInput(e.to_string()))
    }
}

/// One labelled pose in a gt/pred evaluation file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PoseRecordJson {
    pub id: String,
    #[serde(flatten)]
    pub pose: PoseJson,
}

/// Reads a JSON array of labelled poses.
pub fn read_pose_records(path: &std::path::Path) -> Result<Vec<PoseRecordJson>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| WorkbenchError::BadInput(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}
