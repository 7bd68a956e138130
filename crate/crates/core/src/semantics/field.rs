use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

use super::ProposalSet;

pub const DEFAULT_REDUCED_DIM: usize = 8;

/// Per-pixel proposal-membership features.
///
/// Pixels sharing the same set of proposals share one feature vector, so
/// vectors are stored once per distinct membership pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticField {
    pub proposal_count: usize,
    pub reduced_dim: usize,
    /// Pattern index of every pixel.
    pub pattern_of: Vec<u32>,
    /// Score-weighted, L2-normalized membership vectors (length `proposal_count`).
    pub full: Vec<Vec<f64>>,
    /// PCA projections of the centred full vectors (length `reduced_dim`).
    pub reduced: Vec<Vec<f64>>,
    /// Covariance eigenvalues in decreasing order.
    pub eigenvalues: Vec<f64>,
    /// Per-pixel mean of the full vectors.
    pub mean: Vec<f64>,
    /// Principal axes, one per reduced dimension.
    pub axes: Vec<Vec<f64>>,
}

impl SemanticField {
    pub fn full(&self, i: usize) -> &[f64] {
        &self.full[self.pattern_of[i] as usize]
    }

    pub fn reduced(&self, i: usize) -> &[f64] {
        &self.reduced[self.pattern_of[i] as usize]
    }

    /// `<g_i, g_j>` of the full vectors.
    pub fn full_dot(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.pattern_of[i], self.pattern_of[j]);
        if a == b {
            // identical membership: unit vectors (or both zero)
            return self.full[a as usize].iter().map(|v| v * v).sum();
        }
        self.full[a as usize]
            .iter()
            .zip(&self.full[b as usize])
            .map(|(x, y)| x * y)
            .sum()
    }

    pub fn reduced_dist2(&self, i: usize, j: usize) -> f64 {
        self.reduced(i)
            .iter()
            .zip(self.reduced(j))
            .map(|(x, y)| (x - y) * (x - y))
            .sum()
    }
}

/// Builds score-weighted membership vectors per pixel and their top-`d` PCA
/// projection (covariance over all pixels, mean-centred).
pub fn semantic_field(props: &ProposalSet, width: usize, height: usize, d: usize) -> Result<SemanticField> {
    let p_count = props.len();
    if p_count == 0 {
        return Err(Error::Param("semantic field needs at least one proposal".into()));
    }
    if d > p_count {
        return Err(Error::Param(format!(
            "reduced dimension {d} exceeds proposal count {p_count}"
        )));
    }
    if (props.width, props.height) != (width, height) {
        return Err(Error::Dimension(format!(
            "proposals are {}x{}, field requested for {width}x{height}",
            props.width, props.height
        )));
    }
    let n = width * height;
    let mut membership: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (c, prop) in props.proposals.iter().enumerate() {
        for px in prop.pixels() {
            membership[px].push(c as u32);
        }
    }

    let mut index: HashMap<Vec<u32>, u32> = HashMap::new();
    let mut full: Vec<Vec<f64>> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    let mut pattern_of = Vec::with_capacity(n);
    for members in membership {
        let next = full.len() as u32;
        let id = *index.entry(members.clone()).or_insert_with(|| {
            let mut g = vec![0.0; p_count];
            for &c in &members {
                g[c as usize] = props.proposals[c as usize].score;
            }
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                g.iter_mut().for_each(|v| *v /= norm);
            }
            full.push(g);
            counts.push(0);
            next
        });
        counts[id as usize] += 1;
        pattern_of.push(id);
    }

    let mut mean = vec![0.0; p_count];
    for (g, &cnt) in full.iter().zip(&counts) {
        for (m, v) in mean.iter_mut().zip(g) {
            *m += cnt as f64 * v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let mut cov = DMatrix::<f64>::zeros(p_count, p_count);
    for (g, &cnt) in full.iter().zip(&counts) {
        let centred: Vec<f64> = g.iter().zip(&mean).map(|(v, m)| v - m).collect();
        for r in 0..p_count {
            if centred[r] == 0.0 {
                continue;
            }
            let scale = cnt as f64 * centred[r];
            for c in 0..p_count {
                cov[(r, c)] += scale * centred[c];
            }
        }
    }
    cov /= n as f64;

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..p_count).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let axes: Vec<Vec<f64>> = order[..d]
        .iter()
        .map(|&k| {
            let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            // fix the sign so the largest-magnitude component is positive
            let pivot = v
                .iter()
                .copied()
                .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
            if pivot < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect();
    let reduced = full
        .iter()
        .map(|g| {
            axes.iter()
                .map(|axis| axis.iter().zip(g.iter().zip(&mean)).map(|(a, (v, m))| a * (v - m)).sum())
                .collect()
        })
        .collect();

    Ok(SemanticField {
        proposal_count: p_count,
        reduced_dim: d,
        pattern_of,
        full,
        reduced,
        eigenvalues,
        mean,
        axes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantics::Proposal;

    fn props() -> ProposalSet {
        // 4x2 image: A covers left half, B covers right half, C covers top row
        let a = Proposal::from_mask(&[true, true, false, false, true, true, false, false], 0.9);
        let b = Proposal::from_mask(&[false, false, true, true, false, false, true, true], 0.6);
        let c = Proposal::from_mask(&[true, true, true, true, false, false, false, false], 0.3);
        ProposalSet { width: 4, height: 2, proposals: vec![a, b, c] }
    }

    #[test]
    fn one_hot_for_single_membership() {
        let f = semantic_field(&props(), 4, 2, 2).unwrap();
        // pixel 4 is only in A
        assert_eq!(f.full(4), &[1.0, 0.0, 0.0]);
        assert_eq!(f.full(6), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn identical_membership_identical_features() {
        let f = semantic_field(&props(), 4, 2, 2).unwrap();
        assert_eq!(f.full(0), f.full(1));
        assert_eq!(f.reduced(0), f.reduced(1));
        assert!((f.full_dot(0, 1) - 1.0).abs() < 1e-12);
        for i in 0..8 {
            for j in 0..8 {
                let d = f.full_dot(i, j);
                assert!((-1e-12..=1.0 + 1e-12).contains(&d));
            }
        }
    }

    #[test]
    fn uncovered_pixel_is_zero() {
        let mut p = props();
        p.proposals.truncate(1);
        let f = semantic_field(&p, 4, 2, 1).unwrap();
        assert!(f.full(2).iter().all(|&v| v == 0.0));
        assert_eq!(f.full_dot(2, 0), 0.0);
    }

    #[test]
    fn reduced_dim_bounded_by_proposals() {
        assert!(semantic_field(&props(), 4, 2, 4).is_err());
        assert!(semantic_field(&props(), 2, 4, 2).is_err());
    }

    #[test]
    fn reconstruction_error_equals_discarded_eigenvalues() {
        // dense check: mean squared PCA reconstruction error over pixels
        let mut proposals = Vec::new();
        let (w, h) = (6, 5);
        for k in 0..7usize {
            let mask: Vec<bool> = (0..w * h).map(|i| (i * (k + 3) + k) % 5 < 2 + k % 3).collect();
            proposals.push(Proposal::from_mask(&mask, 0.2 + 0.1 * k as f64));
        }
        let set = ProposalSet { width: w, height: h, proposals };
        for d in 1..=7 {
            let f = semantic_field(&set, w, h, d).unwrap();
            let mut err = 0.0;
            for i in 0..w * h {
                let g = f.full(i);
                let z = f.reduced(i);
                for t in 0..7 {
                    let rec = f.mean[t] + (0..d).map(|a| f.axes[a][t] * z[a]).sum::<f64>();
                    err += (g[t] - rec).powi(2);
                }
            }
            err /= (w * h) as f64;
            let discarded: f64 = f.eigenvalues[d..].iter().sum();
            assert!((err - discarded).abs() < 1e-6, "d={d}: {err} vs {discarded}");
        }
    }
}
