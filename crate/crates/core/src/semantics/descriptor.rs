use std::f64::consts::PI;

use rayon::prelude::*;

use crate::imgcore::ImageBuffer;

use super::{FeatureSource, PatchFeatureSet, PatchGrid};

const CELLS: usize = 4;
const ORIENTATIONS: usize = 8;
const COLOUR_BINS: usize = 4;

/// 4x4 cells x 8 orientations of gradient magnitude, then a 4x4x4 RGB histogram.
pub const BUILTIN_DESCRIPTOR_DIM: usize = CELLS * CELLS * ORIENTATIONS + COLOUR_BINS.pow(3);

/// Row width of externally produced conv-net features.
pub const EXTERNAL_FEATURE_DIM: usize = 4096;

fn gradients(lum: &[f64], w: usize, h: usize) -> (Vec<f64>, Vec<f64>) {
    let at = |x: isize, y: isize| {
        let x = x.clamp(0, w as isize - 1) as usize;
        let y = y.clamp(0, h as isize - 1) as usize;
        lum[y * w + x]
    };
    let mut mag = vec![0.0; w * h];
    let mut ang = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gx = 0.5 * (at(x + 1, y) - at(x - 1, y));
            let gy = 0.5 * (at(x, y + 1) - at(x, y - 1));
            let i = y as usize * w + x as usize;
            mag[i] = (gx * gx + gy * gy).sqrt();
            ang[i] = gy.atan2(gx).rem_euclid(2.0 * PI);
        }
    }
    (mag, ang)
}

/// Classical stand-in for conv-net patch features: an oriented gradient
/// histogram plus a coarse colour histogram, L2-normalized per patch.
pub fn builtin_patch_descriptor(img: &ImageBuffer, grid: &PatchGrid) -> PatchFeatureSet {
    let (w, h) = (img.width(), img.height());
    let lum = img.luminance().into_data();
    let (mag, ang) = gradients(&lum, w, h);
    let rgb = img.broadcast3();
    let size = grid.patch_size;

    let rows: Vec<Vec<f64>> = grid
        .patches
        .par_iter()
        .map(|patch| {
            let mut row = vec![0.0; BUILTIN_DESCRIPTOR_DIM];
            let (grad, colour) = row.split_at_mut(CELLS * CELLS * ORIENTATIONS);
            for dy in 0..size {
                for dx in 0..size {
                    let i = (patch.y + dy) * w + patch.x + dx;
                    let cell = (dy * CELLS / size) * CELLS + dx * CELLS / size;
                    if mag[i] > 0.0 {
                        let bin = ((ang[i] / (2.0 * PI) * ORIENTATIONS as f64) as usize).min(ORIENTATIONS - 1);
                        grad[cell * ORIENTATIONS + bin] += mag[i];
                    }
                    let px = rgb.pixel(i);
                    let q = |v: f64| ((v.clamp(0.0, 1.0) * COLOUR_BINS as f64) as usize).min(COLOUR_BINS - 1);
                    colour[(q(px[0]) * COLOUR_BINS + q(px[1])) * COLOUR_BINS + q(px[2])] += 1.0;
                }
            }
            let area = (size * size) as f64;
            colour.iter_mut().for_each(|c| *c /= area);
            row
        })
        .collect();

    let mut set = PatchFeatureSet {
        dim: BUILTIN_DESCRIPTOR_DIM,
        rows: rows.into_iter().flatten().collect(),
        source: FeatureSource::Builtin,
    };
    set.normalize_rows();
    set
}
