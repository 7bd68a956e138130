use crate::error::{Error, Result};
use crate::imgcore::{Domain, ImageBuffer, DEFAULT_EPS};
use crate::linalg::{pcg, CgOptions, CsrMatrix, LinearOperator, TripletBuilder};

use super::pairs::PairwiseL1Matrix;

/// Soft threshold `sign(x) max(|x| - tau, 0)`.
pub fn shrink(x: &[f64], tau: f64) -> Vec<f64> {
    x.iter().map(|&v| v.signum() * (v.abs() - tau).max(0.0)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BregmanParams {
    pub gamma_l: f64,
    pub gamma_m: f64,
    pub gamma_g: f64,
    pub gamma_a: f64,
    pub theta: f64,
    pub outer_iters: usize,
    pub cg: CgOptions,
    /// Lower clamp of the final reflectance.
    pub eps: f64,
}

impl Default for BregmanParams {
    fn default() -> Self {
        Self {
            gamma_l: 20.0,
            gamma_m: 20.0,
            gamma_g: 2.0,
            gamma_a: 1.0,
            theta: 40.0,
            outer_iters: 4,
            cg: CgOptions::default(),
            eps: DEFAULT_EPS,
        }
    }
}

/// The z-subproblem `(gamma_a I + theta sum_k M_k^T M_k) z = rhs`, applied
/// channel by channel with one shared pixel Laplacian.
#[derive(Debug, Clone)]
pub struct ZSystem {
    pub n: usize,
    pub channels: usize,
    pub gamma_a: f64,
    /// `theta sum_k M_k^T M_k` on a single channel.
    pub laplacian: CsrMatrix,
}

impl ZSystem {
    pub fn new(n: usize, channels: usize, gamma_a: f64, theta: f64, terms: &[&PairwiseL1Matrix]) -> Self {
        let mut t = TripletBuilder::new(n, n);
        for m in terms {
            for (i, j, v) in m.iter() {
                t.push_pair(i, j, theta * v * v);
            }
        }
        Self {
            n,
            channels,
            gamma_a,
            laplacian: t.build(),
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let size = self.n * self.channels;
        let single = self.laplacian.to_dense();
        let mut d = vec![vec![0.0; size]; size];
        for c in 0..self.channels {
            for r in 0..self.n {
                for k in 0..self.n {
                    d[c * self.n + r][c * self.n + k] = single[r][k];
                }
                d[c * self.n + r][c * self.n + r] += self.gamma_a;
            }
        }
        d
    }
}

impl LinearOperator for ZSystem {
    fn dim(&self) -> usize {
        self.n * self.channels
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for ((xc, yc), _) in x.chunks_exact(self.n).zip(y.chunks_exact_mut(self.n)).zip(0..self.channels) {
            self.laplacian.mul_vec(xc, yc);
            for (yi, xi) in yc.iter_mut().zip(xc) {
                *yi += self.gamma_a * xi;
            }
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let d: Vec<f64> = self.laplacian.diagonal().into_iter().map(|v| v + self.gamma_a).collect();
        d.repeat(self.channels)
    }
}

#[derive(Debug, Clone)]
pub struct StageTwoResult {
    /// Linear reflectance clamped to `[eps, 1]`.
    pub reflectance: ImageBuffer,
    /// `I / R`.
    pub shading: ImageBuffer,
    /// Final unclamped iterate, channel-stacked.
    pub z: Vec<f64>,
    pub objective: f64,
    pub cg_iterations: usize,
    pub warnings: Vec<String>,
}

fn stack(img: &ImageBuffer) -> Vec<f64> {
    img.planes().concat()
}

/// `gamma_a |z - rho|^2 + sum_k gamma_k |M_k z|_1`.
pub fn objective(z: &[f64], rho: &[f64], channels: usize, terms: &[(&PairwiseL1Matrix, f64)], gamma_a: f64) -> f64 {
    let data: f64 = z.iter().zip(rho).map(|(a, b)| (a - b) * (a - b)).sum();
    gamma_a * data + terms.iter().map(|(m, g)| g * m.l1(z, channels)).sum::<f64>()
}

/// Split-Bregman minimization of the reflectance energy.
///
/// Each sweep solves the z-subproblem with `theta`-weighted couplings to the
/// split variables, shrinks `d_k = shrink(M_k z + b_k, gamma_k / 2 theta)` and
/// updates `b_k += M_k z - d_k`. Starts from `z = rho_star`, `d = b = 0`.
pub fn bregman_solve(
    a: &PairwiseL1Matrix,
    b: &PairwiseL1Matrix,
    c: &PairwiseL1Matrix,
    rho_star: &ImageBuffer,
    image: &ImageBuffer,
    params: &BregmanParams,
) -> Result<StageTwoResult> {
    rho_star.check_same_shape(image)?;
    if rho_star.domain() != Domain::Linear || image.domain() != Domain::Linear {
        return Err(Error::Contract("Stage 2 works on linear-domain images".into()));
    }
    if !(params.theta > 0.0 && params.gamma_a > 0.0) {
        return Err(Error::Param("theta and gamma_a must be positive".into()));
    }
    let n = image.pixel_count();
    let channels = image.channels();
    if [a, b, c].iter().any(|m| m.n != n) {
        return Err(Error::Dimension("pair matrix does not match image".into()));
    }
    let terms: Vec<(&PairwiseL1Matrix, f64)> = [(a, params.gamma_l), (b, params.gamma_m), (c, params.gamma_g)]
        .into_iter()
        .filter(|(m, g)| *g > 0.0 && !m.is_empty())
        .collect();
    let mats: Vec<&PairwiseL1Matrix> = terms.iter().map(|t| t.0).collect();
    let system = ZSystem::new(n, channels, params.gamma_a, params.theta, &mats);

    let rho = stack(rho_star);
    let mut z = rho.clone();
    let mut d: Vec<Vec<f64>> = terms.iter().map(|(m, _)| vec![0.0; m.len() * channels]).collect();
    let mut bv = d.clone();
    let mut warnings = Vec::new();
    let mut cg_iterations = 0;

    for sweep in 0..params.outer_iters {
        let mut rhs: Vec<f64> = rho.iter().map(|r| params.gamma_a * r).collect();
        for (k, (m, _)) in terms.iter().enumerate() {
            let diff: Vec<f64> = d[k].iter().zip(&bv[k]).map(|(p, q)| p - q).collect();
            for (r, v) in rhs.iter_mut().zip(m.apply_transpose(&diff, channels)) {
                *r += params.theta * v;
            }
        }
        let report = pcg(&system, &rhs, &mut z, params.cg);
        cg_iterations += report.iterations;
        if !report.converged {
            let msg = format!(
                "z-update did not converge in sweep {sweep}: residual {:.3e} of {:.3e}",
                report.residual_norm, report.rhs_norm
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
        for (k, (m, gamma)) in terms.iter().enumerate() {
            let mz = m.apply(&z, channels);
            let shifted: Vec<f64> = mz.iter().zip(&bv[k]).map(|(p, q)| p + q).collect();
            d[k] = shrink(&shifted, gamma / (2.0 * params.theta));
            for ((bk, mzk), dk) in bv[k].iter_mut().zip(&mz).zip(&d[k]) {
                *bk += mzk - dk;
            }
        }
    }

    let objective = objective(&z, &rho, channels, &terms, params.gamma_a);
    let (w, h) = (image.width(), image.height());
    let planes: Vec<Vec<f64>> = z
        .chunks_exact(n)
        .map(|p| p.iter().map(|v| v.clamp(params.eps, 1.0)).collect())
        .collect();
    let reflectance = ImageBuffer::from_planes(w, h, &planes, Domain::Linear)?;
    let shading = image.zip_map(&reflectance, |i, r| i / r)?;
    Ok(StageTwoResult {
        reflectance,
        shading,
        z,
        objective,
        cg_iterations,
        warnings,
    })
}
