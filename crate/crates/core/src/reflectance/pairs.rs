use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imgcore::LabField;
use crate::semantics::{RepresentativeSet, SemanticField};

/// 11x11 window.
pub const WINDOW_RADIUS: usize = 5;
pub const DEFAULT_SAMPLE_COUNT: usize = 20;
/// Local and mid-level pairs lighter than this are dropped.
pub const MIN_PAIR_WEIGHT: f64 = 1e-4;

const MAX_SAMPLE_COUNT: usize = (2 * WINDOW_RADIUS + 1) * (2 * WINDOW_RADIUS + 1) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairLabel {
    Local,
    Mid,
    Global,
}

/// Weighted first differences `v_ij (z_i - z_j)`, one row per pair and channel.
///
/// Acts on channel-stacked vectors: entry `c * n + i` is channel `c` of pixel `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseL1Matrix {
    pub label: PairLabel,
    /// Pixel count.
    pub n: usize,
    pub pairs: Vec<(usize, usize)>,
    pub weights: Vec<f64>,
}

impl PairwiseL1Matrix {
    pub fn empty(label: PairLabel, n: usize) -> Self {
        Self {
            label,
            n,
            pairs: Vec::new(),
            weights: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.pairs.iter().zip(&self.weights).map(|(&(i, j), &v)| (i, j, v))
    }

    /// `M z` for a `channels * n` vector; output is `channels * len()`.
    pub fn apply(&self, z: &[f64], channels: usize) -> Vec<f64> {
        assert_eq!(z.len(), channels * self.n);
        let m = self.len();
        let mut out = vec![0.0; channels * m];
        for c in 0..channels {
            let zc = &z[c * self.n..(c + 1) * self.n];
            for (k, (i, j, v)) in self.iter().enumerate() {
                out[c * m + k] = v * (zc[i] - zc[j]);
            }
        }
        out
    }

    /// `M^T y`.
    pub fn apply_transpose(&self, y: &[f64], channels: usize) -> Vec<f64> {
        let m = self.len();
        assert_eq!(y.len(), channels * m);
        let mut out = vec![0.0; channels * self.n];
        for c in 0..channels {
            let oc = &mut out[c * self.n..(c + 1) * self.n];
            for (k, (i, j, v)) in self.iter().enumerate() {
                let t = v * y[c * m + k];
                oc[i] += t;
                oc[j] -= t;
            }
        }
        out
    }

    /// Explicit sparse form, `channels * len()` by `channels * n`.
    pub fn to_csr(&self, channels: usize) -> crate::linalg::CsrMatrix {
        let m = self.len();
        let mut t = crate::linalg::TripletBuilder::new(channels * m, channels * self.n);
        for c in 0..channels {
            for (k, (i, j, v)) in self.iter().enumerate() {
                t.push(c * m + k, c * self.n + i, v);
                t.push(c * m + k, c * self.n + j, -v);
            }
        }
        t.build()
    }

    /// `sum |M z|`.
    pub fn l1(&self, z: &[f64], channels: usize) -> f64 {
        self.apply(z, channels).iter().map(|v| v.abs()).sum()
    }
}

/// `exp(-|r_i - r_j|^2 / 2t^2)`, times `exp(-|g_i - g_j|^2 / 2t^2)` when a
/// semantic pair is given.
pub fn pair_weight(r_i: &[f64], r_j: &[f64], t: f64, extra: Option<(&[f64], &[f64])>) -> f64 {
    let d2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let denom = 2.0 * t * t;
    let base = (-d2(r_i, r_j) / denom).exp();
    match extra {
        Some((g_i, g_j)) => base * (-d2(g_i, g_j) / denom).exp(),
        None => base,
    }
}

/// Unordered pixel pairs `(i, j)`, `i < j`, from sampling up to `sample_count`
/// partners per pixel inside its 11x11 window without replacement.
///
/// Every pixel draws from its own ChaCha stream, so the result depends only
/// on `seed` and not on thread scheduling.
pub fn sample_window_pairs(width: usize, height: usize, sample_count: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    if sample_count > MAX_SAMPLE_COUNT {
        return Err(Error::Param(format!(
            "sample count {sample_count} exceeds the {MAX_SAMPLE_COUNT} window neighbours"
        )));
    }
    let r = WINDOW_RADIUS as isize;
    let mut pairs: Vec<(usize, usize)> = (0..width * height)
        .into_par_iter()
        .flat_map_iter(|i| {
            let (x, y) = ((i % width) as isize, (i / width) as isize);
            let mut window = Vec::with_capacity(MAX_SAMPLE_COUNT);
            for dy in -r..=r {
                for dx in -r..=r {
                    let (nx, ny) = (x + dx, y + dy);
                    if (dx, dy) != (0, 0) && nx >= 0 && ny >= 0 && (nx as usize) < width && (ny as usize) < height {
                        window.push(ny as usize * width + nx as usize);
                    }
                }
            }
            let chosen: Vec<usize> = if sample_count >= window.len() {
                window
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                let mut idx = rand::seq::index::sample(&mut rng, window.len(), sample_count).into_vec();
                idx.sort_unstable();
                idx.into_iter().map(|k| window[k]).collect()
            };
            chosen.into_iter().map(move |j| (i.min(j), i.max(j)))
        })
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    Ok(pairs)
}

fn weighted(
    label: PairLabel,
    n: usize,
    pairs: Vec<(usize, usize)>,
    weight: impl Fn(usize, usize) -> f64 + Sync,
) -> PairwiseL1Matrix {
    let (pairs, weights): (Vec<_>, Vec<_>) = pairs
        .into_par_iter()
        .map(|(i, j)| ((i, j), weight(i, j)))
        .filter(|&(_, v)| v >= MIN_PAIR_WEIGHT)
        .unzip();
    PairwiseL1Matrix { label, n, pairs, weights }
}

fn check_lab(lab: &LabField, width: usize, height: usize) -> Result<()> {
    if lab.values.len() != width * height {
        return Err(Error::Dimension(format!(
            "Lab field has {} pixels, image is {width}x{height}",
            lab.values.len()
        )));
    }
    Ok(())
}

/// Local sparsity pairs over sampled 11x11 neighbourhoods.
pub fn build_a(lab: &LabField, width: usize, height: usize, t: f64, sample_count: usize, seed: u64) -> Result<PairwiseL1Matrix> {
    check_lab(lab, width, height)?;
    let pairs = sample_window_pairs(width, height, sample_count, seed)?;
    Ok(weighted(PairLabel::Local, width * height, pairs, |i, j| {
        pair_weight(&lab.values[i], &lab.values[j], t, None)
    }))
}

/// Object-level pairs: local colour weight times reduced-semantic agreement.
pub fn build_b(
    lab: &LabField,
    field: &SemanticField,
    width: usize,
    height: usize,
    t: f64,
    sample_count: usize,
    seed: u64,
) -> Result<PairwiseL1Matrix> {
    check_lab(lab, width, height)?;
    if field.pattern_of.len() != width * height {
        return Err(Error::Dimension("semantic field does not match image".into()));
    }
    let pairs = sample_window_pairs(width, height, sample_count, seed)?;
    Ok(weighted(PairLabel::Mid, width * height, pairs, |i, j| {
        pair_weight(&lab.values[i], &lab.values[j], t, Some((field.reduced(i), field.reduced(j))))
    }))
}

/// Scene-level pairs between every two representative pixels.
///
/// Fewer than two representatives give an empty matrix.
pub fn build_c(reps: &RepresentativeSet, lab: &LabField, t: f64) -> PairwiseL1Matrix {
    let n = lab.values.len();
    let mut pixels: Vec<usize> = reps.pixels().collect();
    pixels.sort_unstable();
    pixels.dedup();
    if pixels.len() < 2 {
        log::warn!("fewer than two representative pixels; global prior disabled");
        return PairwiseL1Matrix::empty(PairLabel::Global, n);
    }
    let mut pairs = Vec::with_capacity(pixels.len() * (pixels.len() - 1) / 2);
    let mut weights = Vec::with_capacity(pairs.capacity());
    for (a, &i) in pixels.iter().enumerate() {
        for &j in &pixels[a + 1..] {
            pairs.push((i, j));
            weights.push(pair_weight(&lab.values[i], &lab.values[j], t, None));
        }
    }
    PairwiseL1Matrix {
        label: PairLabel::Global,
        n,
        pairs,
        weights,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgcore::{to_lab_suppressed, ImageBuffer};
    use crate::semantics::{semantic_field, Proposal, ProposalSet, Representative};

    fn lab_of(img: &ImageBuffer) -> LabField {
        to_lab_suppressed(img, 0.25).unwrap()
    }

    #[test]
    fn weight_scale() {
        assert_eq!(pair_weight(&[0.1, 0.2, 0.3], &[0.1, 0.2, 0.3], 0.05, None), 1.0);
        let t = 0.05;
        let d = t * 2f64.sqrt();
        assert!((pair_weight(&[0.0, 0.0, 0.0], &[d, 0.0, 0.0], t, None) - (-1.0f64).exp()).abs() < 1e-12);
        let w = pair_weight(&[0.4; 3], &[0.4; 3], t, Some((&[0.0, 0.0], &[0.0, d])));
        assert!((w - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn single_pixel_is_empty() {
        let img = ImageBuffer::filled(1, 1, 3, 0.5).unwrap();
        let a = build_a(&lab_of(&img), 1, 1, 0.05, 20, 0).unwrap();
        assert!(a.is_empty());
    }

    #[test]
    fn constant_image_has_unit_weights() {
        let img = ImageBuffer::filled(9, 7, 3, 0.5).unwrap();
        let a = build_a(&lab_of(&img), 9, 7, 0.05, 20, 3).unwrap();
        assert!(!a.is_empty());
        assert!(a.weights.iter().all(|&v| v == 1.0));
        assert!(a.len() <= 63 * 20);
    }

    #[test]
    fn full_window_matches_enumeration() {
        let pairs = sample_window_pairs(5, 5, 120, 0).unwrap();
        // within an 11x11 window every pixel of a 5x5 image is a neighbour
        let expected: Vec<(usize, usize)> = (0..25).flat_map(|i| (i + 1..25).map(move |j| (i, j))).collect();
        assert_eq!(pairs, expected);
        let pairs = sample_window_pairs(14, 3, 120, 0).unwrap();
        let oracle: Vec<(usize, usize)> = (0..42usize)
            .flat_map(|i| (i + 1..42).map(move |j| (i, j)))
            .filter(|&(i, j)| (i % 14).abs_diff(j % 14) <= 5)
            .collect();
        assert_eq!(pairs, oracle);
    }

    #[test]
    fn sampling_is_seeded() {
        let a = sample_window_pairs(20, 20, 10, 7).unwrap();
        assert_eq!(a, sample_window_pairs(20, 20, 10, 7).unwrap());
        assert_ne!(a, sample_window_pairs(20, 20, 10, 8).unwrap());
        assert!(a.len() <= 400 * 10);
        assert!(a.iter().all(|&(i, j)| i < j));
        assert!(sample_window_pairs(4, 4, 121, 0).is_err());
    }

    #[test]
    fn transpose_is_adjoint() {
        let img = ImageBuffer::from_fn(6, 5, 3, |x, y, c| 0.1 + 0.02 * (x * y + c) as f64).unwrap();
        let a = build_a(&lab_of(&img), 6, 5, 0.3, 8, 1).unwrap();
        let z: Vec<f64> = (0..90).map(|i| (i as f64 * 0.7).sin()).collect();
        let y: Vec<f64> = (0..3 * a.len()).map(|i| (i as f64 * 0.3).cos()).collect();
        let lhs: f64 = a.apply(&z, 3).iter().zip(&y).map(|(p, q)| p * q).sum();
        let rhs: f64 = a.apply_transpose(&y, 3).iter().zip(&z).map(|(p, q)| p * q).sum();
        assert!((lhs - rhs).abs() < 1e-10);
        let csr = a.to_csr(3);
        for r in 0..csr.rows() {
            let row: Vec<f64> = csr.row(r).map(|(_, v)| v).collect();
            assert_eq!(row.len(), 2);
            assert_eq!(row[0], -row[1]);
        }
    }

    fn two_objects() -> (ImageBuffer, ProposalSet) {
        let img = ImageBuffer::filled(3, 3, 3, 0.4).unwrap();
        let left: Vec<bool> = (0..9).map(|i| i % 3 == 0).collect();
        let rest: Vec<bool> = left.iter().map(|b| !b).collect();
        let props = ProposalSet {
            width: 3,
            height: 3,
            proposals: vec![Proposal::from_mask(&left, 1.0), Proposal::from_mask(&rest, 1.0)],
        };
        (img, props)
    }

    #[test]
    fn mid_weights_follow_formula() {
        let (img, props) = two_objects();
        let lab = lab_of(&img);
        let field = semantic_field(&props, 3, 3, 2).unwrap();
        let a = build_a(&lab, 3, 3, 0.5, 120, 0).unwrap();
        let b = build_b(&lab, &field, 3, 3, 0.5, 120, 0).unwrap();
        assert_eq!(a.len(), 36);
        for (i, j, v) in b.iter() {
            let d2: f64 = field.reduced(i).iter().zip(field.reduced(j)).map(|(p, q)| (p - q).powi(2)).sum();
            assert!((v - (-d2 / 0.5).exp()).abs() < 1e-12);
            let same = (i % 3 == 0) == (j % 3 == 0);
            assert_eq!(v == 1.0, same);
        }
        for (i, j, v) in a.iter() {
            let vb = b.iter().find(|&(p, q, _)| (p, q) == (i, j)).map_or(0.0, |e| e.2);
            assert!(vb <= v);
        }
    }

    #[test]
    fn single_proposal_constant_image() {
        let img = ImageBuffer::filled(4, 4, 3, 0.4).unwrap();
        let props = ProposalSet {
            width: 4,
            height: 4,
            proposals: vec![Proposal::from_mask(&[true; 16], 0.9)],
        };
        let field = semantic_field(&props, 4, 4, 1).unwrap();
        let b = build_b(&lab_of(&img), &field, 4, 4, 0.05, 120, 0).unwrap();
        assert_eq!(b.len(), 120);
        assert!(b.weights.iter().all(|&v| v == 1.0));
    }

    fn reps(pixels: &[usize]) -> RepresentativeSet {
        RepresentativeSet {
            entries: pixels.iter().enumerate().map(|(p, &pixel)| Representative { pixel, proposal: p }).collect(),
        }
    }

    #[test]
    fn global_pairs() {
        let img = ImageBuffer::from_fn(5, 4, 3, |x, y, c| 0.05 * (x + y + c) as f64).unwrap();
        let lab = lab_of(&img);
        assert!(build_c(&reps(&[3]), &lab, 0.05).is_empty());
        assert_eq!(build_c(&reps(&[3, 7]), &lab, 0.05).len(), 1);
        let ten = build_c(&reps(&[0, 2, 4, 6, 8, 10, 12, 14, 16, 18]), &lab, 0.05);
        assert_eq!(ten.len(), 45);
        for (i, j, v) in ten.iter() {
            assert!(i < j);
            assert_eq!(v, pair_weight(&lab.values[j], &lab.values[i], 0.05, None));
        }
    }
}
