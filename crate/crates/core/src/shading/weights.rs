use crate::error::{Error, Result};
use crate::imgcore::{ChromaticityField, ImageBuffer};
use crate::semantics::SemanticField;

/// Weights on unordered pixel pairs of the 8-connected (3x3) neighbourhood.
#[derive(Debug, Clone, PartialEq)]
pub struct PairWeights {
    pub pairs: Vec<(usize, usize)>,
    pub weights: Vec<f64>,
}

impl PairWeights {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.pairs.iter().zip(&self.weights).map(|(&(i, j), &w)| (i, j, w))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            pairs: self.pairs.clone(),
            weights: self.weights.iter().map(|w| w * factor).collect(),
        }
    }
}

/// Every unordered pair of distinct pixels inside some 3x3 window, each once,
/// with `i < j`.
pub fn neighbor_pairs_3x3(width: usize, height: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(4 * width * height);
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            if x + 1 < width {
                pairs.push((i, i + 1));
            }
            if y + 1 < height {
                if x > 0 {
                    pairs.push((i, i + width - 1));
                }
                pairs.push((i, i + width));
                if x + 1 < width {
                    pairs.push((i, i + width + 1));
                }
            }
        }
    }
    pairs
}

/// Retinex weights: chromaticity agreement times a dark-pixel boost,
/// `exp(-(1 - <c_i, c_j>)^2 / t_c^2) * (1 + exp(-(p_i^2 + p_j^2) / t_b^2))`
/// with `p` the mean of the linear channels.
pub fn weights_local(img: &ImageBuffer, chroma: &ChromaticityField, t_c: f64, t_b: f64) -> Result<PairWeights> {
    if !(t_c > 0.0 && t_b > 0.0) {
        return Err(Error::Param(format!("t_c and t_b must be positive, got {t_c}, {t_b}")));
    }
    if chroma.vectors.len() != img.pixel_count() {
        return Err(Error::Dimension("chromaticity field does not match image".into()));
    }
    let lum = img.luminance().into_data();
    let pairs = neighbor_pairs_3x3(img.width(), img.height());
    let weights = pairs
        .iter()
        .map(|&(i, j)| {
            let colour = (-(1.0 - chroma.dot(i, j)).powi(2) / (t_c * t_c)).exp();
            let dark = 1.0 + (-(lum[i] * lum[i] + lum[j] * lum[j]) / (t_b * t_b)).exp();
            colour * dark
        })
        .collect();
    Ok(PairWeights { pairs, weights })
}

/// Object-proposal weights `exp(-(1 - <g_i, g_j>)^2 / t_m^2)` on the full
/// (unreduced) semantic vectors.
pub fn weights_mid(field: &SemanticField, width: usize, height: usize, t_m: f64) -> Result<PairWeights> {
    if !(t_m > 0.0) {
        return Err(Error::Param(format!("t_m must be positive, got {t_m}")));
    }
    if field.pattern_of.len() != width * height {
        return Err(Error::Dimension("semantic field does not match image".into()));
    }
    let pairs = neighbor_pairs_3x3(width, height);
    let weights = pairs
        .iter()
        .map(|&(i, j)| (-(1.0 - field.full_dot(i, j)).powi(2) / (t_m * t_m)).exp())
        .collect();
    Ok(PairWeights { pairs, weights })
}
