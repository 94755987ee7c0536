//! Portable Float Map reading and writing.
//!
//! Header: `Pf` (scalar) or `PF` (3-channel), dimensions, then a scale whose
//! sign encodes endianness (negative = little-endian, as written here).
//! The raster holds `width × height` 32-bit floats per channel. Rows are
//! stored top-down in scanline order; readers and writers here agree, so
//! archives round-trip bitwise.

use crate::{Result, WorkbenchError, write_atomic};
use polarforge_core::grid::Grid;
use std::path::Path;

/// A decoded PFM raster.
#[derive(Debug, Clone, PartialEq)]
pub enum PfmImage {
    Scalar(Grid<f32>),
    Color(Grid<[f32; 3]>),
}

impl PfmImage {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            PfmImage::Scalar(g) => g.shape(),
            PfmImage::Color(g) => g.shape(),
        }
    }

    pub fn into_scalar(self) -> Result<Grid<f32>> {
        match self {
            PfmImage::Scalar(g) => Ok(g),
            PfmImage::Color(_) => Err(WorkbenchError::CorruptArchive(
                "expected a scalar PFM, found 3-channel".into(),
            )),
        }
    }

    pub fn into_color(self) -> Result<Grid<[f32; 3]>> {
        match self {
            PfmImage::Color(g) => Ok(g),
            PfmImage::Scalar(_) => Err(WorkbenchError::CorruptArchive(
                "expected a 3-channel PFM, found scalar".into(),
            )),
        }
    }
}

fn encode(header: &str, width: usize, height: usize, floats: impl Iterator<Item = f32>) -> Vec<u8> {
    let mut out = format!("{header}\n{width} {height}\n-1.0\n").into_bytes();
    for f in floats {
        out.extend_from_slice(&f.to_le_bytes());
    }
    out
}

/// Writes a scalar (`Pf`) image atomically.
pub fn write_pfm_scalar(path: &Path, image: &Grid<f32>) -> Result<()> {
    let bytes = encode(
        "Pf",
        image.width(),
        image.height(),
        image.as_slice().iter().copied(),
    );
    write_atomic(path, &bytes)
}

/// Writes a 3-channel (`PF`) image atomically.
pub fn write_pfm_color(path: &Path, image: &Grid<[f32; 3]>) -> Result<()> {
    let bytes = encode(
        "PF",
        image.width(),
        image.height(),
        image.as_slice().iter().flat_map(|px| px.iter().copied()),
    );
    write_atomic(path, &bytes)
}

/// Reads a PFM file, accepting both endiannesses.
pub fn read_pfm(path: &Path) -> Result<PfmImage> {
    let bytes = std::fs::read(path)
        .map_err(|e| WorkbenchError::CorruptArchive(format!("{}: {e}", path.display())))?;
    parse_pfm(&bytes).map_err(|e| {
        WorkbenchError::CorruptArchive(format!("{}: {e}", path.display()))
    })
}

fn parse_pfm(bytes: &[u8]) -> std::result::Result<PfmImage, String> {
    // Header: three whitespace-separated tokens (magic, width height, scale).
    let mut cursor = 0usize;
    let mut token = |bytes: &[u8]| -> std::result::Result<String, String> {
        while cursor < bytes.len() && bytes[cursor].is_ascii_whitespace() {
            cursor += 1;
        }
        let start = cursor;
        while cursor < bytes.len() && !bytes[cursor].is_ascii_whitespace() {
            cursor += 1;
        }
        if start == cursor {
            return Err("truncated header".into());
        }
        let tok = String::from_utf8_lossy(&bytes[start..cursor]).into_owned();
        // Consume exactly one whitespace separator after the token.
        if cursor < bytes.len() {
            cursor += 1;
        }
        Ok(tok)
    };

    let magic = token(bytes)?;
    let channels = match magic.as_str() {
        "Pf" => 1usize,
        "PF" => 3usize,
        other => return Err(format!("bad magic '{other}'")),
    };
    let width: usize = token(bytes)?
        .parse()
        .map_err(|_| "bad width".to_string())?;
    let height: usize = token(bytes)?
        .parse()
        .map_err(|_| "bad height".to_string())?;
    let scale: f64 = token(bytes)?
        .parse()
        .map_err(|_| "bad scale".to_string())?;
    if width == 0 || height == 0 {
        return Err("zero dimension".into());
    }
    let little_endian = scale < 0.0;

    let expected = width * height * channels * 4;
    let raster = &bytes[cursor..];
    if raster.len() != expected {
        return Err(format!(
            "raster holds {} bytes, expected {expected}",
            raster.len()
        ));
    }
    let mut floats = Vec::with_capacity(width * height * channels);
    for chunk in raster.chunks_exact(4) {
        let arr = [chunk[0], chunk[1], chunk[2], chunk[3]];
        floats.push(if little_endian {
            f32::from_le_bytes(arr)
        } else {
            f32::from_be_bytes(arr)
        });
    }
    Ok(if channels == 1 {
        PfmImage::Scalar(Grid::from_vec(width, height, floats))
    } else {
        let pixels: Vec<[f32; 3]> = floats
            .chunks_exact(3)
            .map(|c| [c[0], c[1], c[2]])
            .collect();
        PfmImage::Color(Grid::from_vec(width, height, pixels))
    })
}
