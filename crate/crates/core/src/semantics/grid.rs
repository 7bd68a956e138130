use crate::error::{Error, Result};

pub const DEFAULT_PATCH_SIZE: usize = 60;
pub const DEFAULT_STRIDE: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Patch {
    pub x: usize,
    pub y: usize,
    /// Row-major index of the patch centre pixel.
    pub center: usize,
}

/// Sliding-window patches of a fixed size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchGrid {
    pub width: usize,
    pub height: usize,
    pub patch_size: usize,
    pub stride: usize,
    pub patches: Vec<Patch>,
}

impl PatchGrid {
    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }
}

fn offsets(extent: usize, size: usize, stride: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..=extent - size).step_by(stride).collect();
    // snap the last window inward so the far border is covered
    if *out.last().expect("at least one offset") + size < extent {
        out.push(extent - size);
    }
    out
}

pub fn build_grid(width: usize, height: usize, patch_size: usize, stride: usize) -> Result<PatchGrid> {
    if stride == 0 || patch_size == 0 {
        return Err(Error::Param("patch size and stride must be positive".into()));
    }
    if patch_size > width.min(height) {
        return Err(Error::Dimension(format!(
            "image {width}x{height} is smaller than patch size {patch_size}"
        )));
    }
    let xs = offsets(width, patch_size, stride);
    let ys = offsets(height, patch_size, stride);
    let half = patch_size / 2;
    let patches = ys
        .iter()
        .flat_map(|&y| {
            xs.iter().map(move |&x| Patch {
                x,
                y,
                center: (y + half) * width + (x + half),
            })
        })
        .collect();
    Ok(PatchGrid {
        width,
        height,
        patch_size,
        stride,
        patches,
    })
}
