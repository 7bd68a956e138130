use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::PatchFeatureSet;

pub const DEFAULT_NEIGHBORS: usize = 10;

/// Relative Tikhonov weight added to each local Gram matrix.
const LLE_REGULARIZATION: f64 = 1e-3;

/// Per-patch nearest neighbours in feature space with affine LLE weights.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborTable {
    pub neighbors: Vec<Vec<usize>>,
    /// `weights[b][m]` belongs to patch `neighbors[b][m]`; each row sums to one.
    pub weights: Vec<Vec<f64>>,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `k` nearest patches by Euclidean distance, self excluded, ties to the lower index.
pub fn knn(features: &PatchFeatureSet, k: usize) -> Result<Vec<Vec<usize>>> {
    let count = features.patch_count();
    if count <= k {
        return Err(Error::Param(format!(
            "need more than {k} patches for {k}-NN, have {count}"
        )));
    }
    Ok((0..count)
        .map(|b| {
            let fb = features.row(b);
            let mut cand: Vec<(f64, usize)> = (0..count)
                .filter(|&a| a != b)
                .map(|a| (dist2(fb, features.row(a)), a))
                .collect();
            cand.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            cand.truncate(k);
            cand.into_iter().map(|(_, a)| a).collect()
        })
        .collect())
}

/// Affine reconstruction weights of every patch from its neighbours.
pub fn lle_weights(features: &PatchFeatureSet, neighbors: &[Vec<usize>]) -> Result<NeighborTable> {
    let mut weights = Vec::with_capacity(neighbors.len());
    for (b, nbrs) in neighbors.iter().enumerate() {
        let k = nbrs.len();
        if k == 0 {
            return Err(Error::Param(format!("patch {b} has no neighbours")));
        }
        let fb = features.row(b);
        let diffs: Vec<Vec<f64>> = nbrs
            .iter()
            .map(|&a| fb.iter().zip(features.row(a)).map(|(x, y)| x - y).collect())
            .collect();
        let mut gram = DMatrix::from_fn(k, k, |r, c| {
            diffs[r].iter().zip(&diffs[c]).map(|(x, y)| x * y).sum::<f64>()
        });
        let trace = gram.trace();
        let lambda = if trace > 0.0 {
            LLE_REGULARIZATION * trace / k as f64
        } else {
            // all neighbours coincide with f_b; any affine weights are exact
            1.0
        };
        for d in 0..k {
            gram[(d, d)] += lambda;
        }
        let ones = DVector::from_element(k, 1.0);
        let sol = gram
            .clone()
            .cholesky()
            .map(|c| c.solve(&ones))
            .or_else(|| gram.lu().solve(&ones))
            .ok_or_else(|| Error::Contract(format!("singular LLE system at patch {b}")))?;
        let total = sol.sum();
        weights.push(sol.iter().map(|w| w / total).collect());
    }
    Ok(NeighborTable {
        neighbors: neighbors.to_vec(),
        weights,
    })
}
