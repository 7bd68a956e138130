use crate::error::{Error, Result};
use crate::imgcore::{Domain, ImageBuffer};
use crate::linalg::{dot, pcg_observed, CgOptions, CgReport, CsrMatrix, LinearOperator, TripletBuilder};
use crate::semantics::{NeighborTable, PatchGrid};

use super::matting::{matting_laplacian, DEFAULT_MATTING_EPS};
use super::weights::PairWeights;

/// Weights of the Stage-1 energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShadingParams {
    pub lambda_g: f64,
    pub lambda_m: f64,
    pub lambda_l: f64,
    /// Weight of the mean anchor `(sum sigma - n * target)^2`.
    pub gauge_weight: f64,
    pub matting_eps: f64,
}

impl Default for ShadingParams {
    fn default() -> Self {
        Self {
            lambda_g: 0.02,
            lambda_m: 0.02,
            lambda_l: 2.0,
            gauge_weight: 1e-6,
            matting_eps: DEFAULT_MATTING_EPS,
        }
    }
}

/// Everything the Stage-1 energy is built from. Absent terms contribute nothing.
#[derive(Debug, Clone, Copy)]
pub struct StageOneInputs<'a> {
    /// Log-domain input image, 3 channels.
    pub log_image: &'a ImageBuffer,
    /// Patch grid with LLE neighbours for the patch-consistency term.
    pub patches: Option<(&'a PatchGrid, &'a NeighborTable)>,
    /// Linear 3-channel base image of the matting Laplacian.
    pub laplacian_base: Option<&'a ImageBuffer>,
    pub local: Option<&'a PairWeights>,
    pub mid: Option<&'a PairWeights>,
}

/// `Psi(sigma) = sigma^T M sigma - 2 rhs^T sigma + constant + gauge`.
#[derive(Debug, Clone)]
pub struct ShadingSystem {
    pub n: usize,
    /// Prior terms only; the gauge is applied implicitly.
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub constant: f64,
    pub gauge_weight: f64,
    pub target: f64,
}

impl ShadingSystem {
    /// Right-hand side including the gauge contribution.
    pub fn full_rhs(&self) -> Vec<f64> {
        let g = self.gauge_weight * self.n as f64 * self.target;
        self.rhs.iter().map(|r| r + g).collect()
    }

    pub fn energy(&self, sigma: &[f64]) -> f64 {
        let mut m = vec![0.0; self.n];
        self.matrix.mul_vec(sigma, &mut m);
        let anchor = sigma.iter().sum::<f64>() - self.n as f64 * self.target;
        dot(sigma, &m) - 2.0 * dot(&self.rhs, sigma) + self.constant + self.gauge_weight * anchor * anchor
    }

    /// Dense system matrix with the gauge folded in.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = self.matrix.to_dense();
        for row in &mut d {
            row.iter_mut().for_each(|v| *v += self.gauge_weight);
        }
        d
    }
}

impl LinearOperator for ShadingSystem {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matrix.mul_vec(x, y);
        let s = self.gauge_weight * x.iter().sum::<f64>();
        y.iter_mut().for_each(|v| *v += s);
    }

    fn diagonal(&self) -> Vec<f64> {
        self.matrix.diagonal().into_iter().map(|d| d + self.gauge_weight).collect()
    }
}

#[derive(Debug, Clone)]
pub struct StageOneResult {
    /// Log shading, 1 channel.
    pub sigma: ImageBuffer,
    /// Log reflectance `log I - sigma`, 3 channels.
    pub rho: ImageBuffer,
    pub report: CgReport,
    pub energy: f64,
}

fn check_pairs(w: &PairWeights, n: usize, what: &str) -> Result<()> {
    if w.pairs.iter().any(|&(i, j)| i >= n || j >= n) {
        return Err(Error::Dimension(format!("{what} weights reference pixels outside the image")));
    }
    Ok(())
}

/// Assembles the Stage-1 quadratic in log-shading `sigma`.
///
/// Terms: patch consistency `(sigma_b - sum_a w_ab sigma_a)^2` at patch centres
/// plus `sigma^T L sigma` (both under `lambda_g`), proposal smoothness
/// `w^m (sigma_i - sigma_j)^2` under `lambda_m`, and the retinex term
/// `w^l ((y_i - sigma_i) - (y_j - sigma_j))^2` under `lambda_l` where `y` is
/// the mean of the log channels.
pub fn assemble_stage1(inputs: &StageOneInputs<'_>, params: &ShadingParams) -> Result<ShadingSystem> {
    let img = inputs.log_image;
    if img.domain() != Domain::Log {
        return Err(Error::Contract("Stage 1 expects a log-domain image".into()));
    }
    let n = img.pixel_count();
    let y = img.luminance().into_data();
    let mut t = TripletBuilder::new(n, n);
    let mut rhs = vec![0.0; n];
    let mut constant = 0.0;

    if params.lambda_g > 0.0 {
        if let Some((grid, table)) = inputs.patches {
            if grid.width != img.width() || grid.height != img.height() {
                return Err(Error::Dimension("patch grid does not match image".into()));
            }
            if table.neighbors.len() != grid.len() {
                return Err(Error::Dimension("neighbour table does not match patch grid".into()));
            }
            for (b, patch) in grid.patches.iter().enumerate() {
                let mut row = vec![(patch.center, 1.0)];
                for (&a, &w) in table.neighbors[b].iter().zip(&table.weights[b]) {
                    row.push((grid.patches[a].center, -w));
                }
                for &(i, vi) in &row {
                    for &(j, vj) in &row {
                        t.push(i, j, params.lambda_g * vi * vj);
                    }
                }
            }
        }
        if let Some(base) = inputs.laplacian_base {
            if base.width() != img.width() || base.height() != img.height() {
                return Err(Error::Dimension("Laplacian base does not match image".into()));
            }
            let l = matting_laplacian(base, params.matting_eps)?;
            for r in 0..n {
                for (c, v) in l.row(r) {
                    t.push(r, c, params.lambda_g * v);
                }
            }
        }
    }
    if params.lambda_m > 0.0 {
        if let Some(mid) = inputs.mid {
            check_pairs(mid, n, "mid-level")?;
            for (i, j, w) in mid.iter() {
                t.push_pair(i, j, params.lambda_m * w);
            }
        }
    }
    if params.lambda_l > 0.0 {
        if let Some(local) = inputs.local {
            check_pairs(local, n, "local")?;
            for (i, j, w) in local.iter() {
                let lw = params.lambda_l * w;
                let dy = y[i] - y[j];
                t.push_pair(i, j, lw);
                rhs[i] += lw * dy;
                rhs[j] -= lw * dy;
                constant += lw * dy * dy;
            }
        }
    }

    let target = y.iter().sum::<f64>() / n as f64 / 2.0;
    let gauge = params.gauge_weight;
    Ok(ShadingSystem {
        n,
        matrix: t.build(),
        rhs,
        constant,
        gauge_weight: gauge,
        target,
    })
}

/// Minimizes the Stage-1 energy with Jacobi-preconditioned CG.
///
/// Starts from `init` when given, otherwise from the gauge target. A
/// non-converged solve still returns the last iterate; check `report.converged`.
pub fn solve_stage1(
    sys: &ShadingSystem,
    log_image: &ImageBuffer,
    init: Option<&[f64]>,
    opts: CgOptions,
) -> Result<StageOneResult> {
    if log_image.pixel_count() != sys.n || log_image.channels() != 3 {
        return Err(Error::Dimension("log image does not match shading system".into()));
    }
    let mut sigma = match init {
        Some(s) if s.len() == sys.n => s.to_vec(),
        Some(s) => {
            return Err(Error::Dimension(format!("initial sigma has {} entries, expected {}", s.len(), sys.n)))
        }
        None => vec![sys.target; sys.n],
    };
    let report = pcg_observed(sys, &sys.full_rhs(), &mut sigma, opts, |_| {});
    Ok(finish(sys, log_image, sigma, report))
}

fn finish(sys: &ShadingSystem, log_image: &ImageBuffer, sigma: Vec<f64>, report: CgReport) -> StageOneResult {
    let (w, h) = (log_image.width(), log_image.height());
    let energy = sys.energy(&sigma);
    let rho: Vec<f64> = log_image
        .data()
        .chunks_exact(3)
        .zip(&sigma)
        .flat_map(|(p, s)| [p[0] - s, p[1] - s, p[2] - s])
        .collect();
    StageOneResult {
        sigma: ImageBuffer::new(w, h, 1, sigma, Domain::Log).expect("finite sigma"),
        rho: ImageBuffer::new(w, h, 3, rho, Domain::Log).expect("finite rho"),
        report,
        energy,
    }
}
