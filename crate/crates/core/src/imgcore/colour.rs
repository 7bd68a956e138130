use crate::error::{Error, Result};

use super::ImageBuffer;

/// Default luminance suppression applied to normalized CIELab.
pub const DEFAULT_SUPPRESS: f64 = 0.25;

const CHROMA_EPS: f64 = 1e-8;

// D65 reference white.
const WHITE: [f64; 3] = [0.95047, 1.0, 1.08883];

pub fn srgb_to_linear(v: f64) -> f64 {
    if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

pub fn linear_to_srgb(v: f64) -> f64 {
    if v <= 0.0031308 {
        v * 12.92
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    }
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

fn lab_f_inv(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA {
        t * t * t
    } else {
        3.0 * DELTA * DELTA * (t - 4.0 / 29.0)
    }
}

/// Linear sRGB to CIELab under D65.
pub fn linear_rgb_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let [r, g, b] = rgb;
    let x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
    let y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    let z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
    let fx = lab_f(x / WHITE[0]);
    let fy = lab_f(y / WHITE[1]);
    let fz = lab_f(z / WHITE[2]);
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

pub fn lab_to_linear_rgb(lab: [f64; 3]) -> [f64; 3] {
    let fy = (lab[0] + 16.0) / 116.0;
    let fx = fy + lab[1] / 500.0;
    let fz = fy - lab[2] / 200.0;
    let x = WHITE[0] * lab_f_inv(fx);
    let y = WHITE[1] * lab_f_inv(fy);
    let z = WHITE[2] * lab_f_inv(fz);
    [
        3.2404542 * x - 1.5371385 * y - 0.4985314 * z,
        -0.9692660 * x + 1.8760108 * y + 0.0415560 * z,
        0.0556434 * x - 0.2040259 * y + 1.0572252 * z,
    ]
}

/// Unit-norm RGB direction per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChromaticityField {
    pub vectors: Vec<[f64; 3]>,
    /// Set where the pixel norm was too small and the grey direction was substituted.
    pub fallback: Vec<bool>,
}

impl ChromaticityField {
    pub fn dot(&self, i: usize, j: usize) -> f64 {
        let a = self.vectors[i];
        let b = self.vectors[j];
        a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
    }
}

pub fn chromaticity(img: &ImageBuffer) -> Result<ChromaticityField> {
    if img.channels() != 3 {
        return Err(Error::Contract("chromaticity needs a 3-channel image".into()));
    }
    let grey = 1.0 / 3f64.sqrt();
    let mut vectors = Vec::with_capacity(img.pixel_count());
    let mut fallback = Vec::with_capacity(img.pixel_count());
    for px in img.data().chunks_exact(3) {
        let norm = (px[0] * px[0] + px[1] * px[1] + px[2] * px[2]).sqrt();
        if norm < CHROMA_EPS {
            vectors.push([grey; 3]);
            fallback.push(true);
        } else {
            vectors.push([px[0] / norm, px[1] / norm, px[2] / norm]);
            fallback.push(false);
        }
    }
    Ok(ChromaticityField { vectors, fallback })
}

/// Channel-normalized CIELab with a down-weighted lightness channel.
#[derive(Debug, Clone, PartialEq)]
pub struct LabField {
    pub values: Vec<[f64; 3]>,
    pub suppress: f64,
}

impl LabField {
    pub fn dist2(&self, i: usize, j: usize) -> f64 {
        let a = self.values[i];
        let b = self.values[j];
        (0..3).map(|c| (a[c] - b[c]).powi(2)).sum()
    }
}

/// CIELab per pixel, each channel min-max normalized over the image (flat
/// channels map to 0.5), then lightness scaled by `suppress`.
pub fn to_lab_suppressed(img: &ImageBuffer, suppress: f64) -> Result<LabField> {
    if img.channels() != 3 {
        return Err(Error::Contract("Lab conversion needs a 3-channel image".into()));
    }
    if !(suppress > 0.0 && suppress <= 1.0) {
        return Err(Error::Param(format!("suppress must be in (0, 1], got {suppress}")));
    }
    let mut values: Vec<[f64; 3]> = img
        .data()
        .chunks_exact(3)
        .map(|px| linear_rgb_to_lab([px[0], px[1], px[2]]))
        .collect();
    for c in 0..3 {
        let (lo, hi) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v[c]), hi.max(v[c])));
        let span = hi - lo;
        for v in &mut values {
            v[c] = if span > 1e-12 { (v[c] - lo) / span } else { 0.5 };
        }
    }
    for v in &mut values {
        v[0] *= suppress;
    }
    Ok(LabField { values, suppress })
}
