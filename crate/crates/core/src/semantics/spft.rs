//! SPFT patch-feature interchange file.
//!
//! Little-endian layout: `"SPFT"`, version `u32 = 1`, width, height,
//! patch_size, stride, patch count `B`, feature dim `F` (all `u32`), then
//! `B * F` `f32` values row-major.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::{FeatureSource, PatchFeatureSet, PatchGrid, BUILTIN_DESCRIPTOR_DIM, EXTERNAL_FEATURE_DIM};

const MAGIC: &[u8; 4] = b"SPFT";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpftHeader {
    pub width: u32,
    pub height: u32,
    pub patch_size: u32,
    pub stride: u32,
    pub patch_count: u32,
    pub dim: u32,
}

impl SpftHeader {
    pub fn for_grid(grid: &PatchGrid, dim: usize) -> Self {
        Self {
            width: grid.width as u32,
            height: grid.height as u32,
            patch_size: grid.patch_size as u32,
            stride: grid.stride as u32,
            patch_count: grid.len() as u32,
            dim: dim as u32,
        }
    }
}

fn format_err(reason: impl Into<String>) -> Error {
    Error::Format {
        format: "SPFT",
        reason: reason.into(),
    }
}

pub fn write_spft(path: impl AsRef<Path>, grid: &PatchGrid, features: &PatchFeatureSet) -> Result<()> {
    let path = path.as_ref();
    if features.patch_count() != grid.len() {
        return Err(Error::Dimension(format!(
            "{} feature rows for {} patches",
            features.patch_count(),
            grid.len()
        )));
    }
    let h = SpftHeader::for_grid(grid, features.dim);
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        out.write_all(MAGIC)?;
        for v in [VERSION, h.width, h.height, h.patch_size, h.stride, h.patch_count, h.dim] {
            out.write_all(&v.to_le_bytes())?;
        }
        for v in &features.rows {
            out.write_all(&(*v as f32).to_le_bytes())?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

/// Reads an SPFT file without validating it against a grid. Rows are returned
/// as stored.
pub fn read_spft(path: impl AsRef<Path>) -> Result<(SpftHeader, Vec<f64>)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut input = BufReader::new(file);
    let mut magic = [0u8; 4];
    input
        .read_exact(&mut magic)
        .map_err(|_| format_err("truncated header"))?;
    if &magic != MAGIC {
        return Err(format_err(format!("bad magic {magic:?}")));
    }
    let mut fields = [0u32; 7];
    for f in &mut fields {
        let mut buf = [0u8; 4];
        input
            .read_exact(&mut buf)
            .map_err(|_| format_err("truncated header"))?;
        *f = u32::from_le_bytes(buf);
    }
    if fields[0] != VERSION {
        return Err(format_err(format!("unsupported version {}", fields[0])));
    }
    let header = SpftHeader {
        width: fields[1],
        height: fields[2],
        patch_size: fields[3],
        stride: fields[4],
        patch_count: fields[5],
        dim: fields[6],
    };
    let count = header.patch_count as usize * header.dim as usize;
    let mut raw = Vec::with_capacity(count * 4);
    input
        .read_to_end(&mut raw)
        .map_err(|e| Error::io(path, e))?;
    if raw.len() != count * 4 {
        return Err(format_err(format!(
            "expected {} payload bytes, found {}",
            count * 4,
            raw.len()
        )));
    }
    let rows = raw
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    Ok((header, rows))
}

/// Loads SPFT features for `grid`, re-normalizing rows to unit length.
///
/// 4096-wide files are tagged [`FeatureSource::External`]; files holding the
/// builtin 192-wide descriptor (as written by the `features` command) keep
/// the [`FeatureSource::Builtin`] tag.
pub fn load_patch_features(path: impl AsRef<Path>, grid: &PatchGrid) -> Result<PatchFeatureSet> {
    let (header, rows) = read_spft(path)?;
    let expected = SpftHeader::for_grid(grid, header.dim as usize);
    if header != expected {
        return Err(Error::Dimension(format!(
            "SPFT header {header:?} does not match grid {expected:?}"
        )));
    }
    let source = match header.dim as usize {
        EXTERNAL_FEATURE_DIM => FeatureSource::External,
        BUILTIN_DESCRIPTOR_DIM => FeatureSource::Builtin,
        other => {
            return Err(Error::Dimension(format!(
                "feature dimension {other}, expected {EXTERNAL_FEATURE_DIM} or {BUILTIN_DESCRIPTOR_DIM}"
            )))
        }
    };
    let mut set = PatchFeatureSet {
        dim: header.dim as usize,
        rows,
        source,
    };
    set.normalize_rows();
    Ok(set)
}
