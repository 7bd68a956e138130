use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imgcore::ImageBuffer;
use crate::linalg::{CsrMatrix, TripletBuilder};

pub const DEFAULT_MATTING_EPS: f64 = 1e-5;

const WINDOW: usize = 9;

/// Closed-form matting Laplacian over all 3x3 windows of a colour base image.
///
/// `L = sum_k (delta_ij - (1 + (c_i - mu_k)^T (Sigma_k + eps/9 I)^-1 (c_j - mu_k)) / 9)`
/// for `i, j` in window `k`. The quadratic form penalizes deviation from a
/// locally affine function of the base colours; rows sum to zero.
pub fn matting_laplacian(base: &ImageBuffer, eps: f64) -> Result<CsrMatrix> {
    if base.channels() != 3 {
        return Err(Error::Contract("matting Laplacian needs a 3-channel base".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::Param(format!("matting eps must be positive, got {eps}")));
    }
    let (w, h) = (base.width(), base.height());
    let n = w * h;
    if w < 3 || h < 3 {
        return Ok(CsrMatrix::zeros(n, n));
    }
    let colour = |i: usize| {
        let p = base.pixel(i);
        Vector3::new(p[0], p[1], p[2])
    };
    let rows: Vec<TripletBuilder> = (1..h - 1)
        .into_par_iter()
        .map(|cy| {
            let mut t = TripletBuilder::new(n, n);
            for cx in 1..w - 1 {
                let idx: [usize; WINDOW] = std::array::from_fn(|k| (cy + k / 3 - 1) * w + cx + k % 3 - 1);
                let cols: [Vector3<f64>; WINDOW] = std::array::from_fn(|k| colour(idx[k]));
                let mean = cols.iter().sum::<Vector3<f64>>() / WINDOW as f64;
                let mut cov = Matrix3::zeros();
                for c in &cols {
                    let d = c - mean;
                    cov += d * d.transpose();
                }
                cov /= WINDOW as f64;
                cov += Matrix3::identity() * (eps / WINDOW as f64);
                let inv = cov.try_inverse().unwrap_or_else(Matrix3::zeros);
                let centred: [Vector3<f64>; WINDOW] = std::array::from_fn(|k| cols[k] - mean);
                let projected: [Vector3<f64>; WINDOW] = std::array::from_fn(|k| inv * centred[k]);
                for a in 0..WINDOW {
                    for b in 0..WINDOW {
                        let affinity = (1.0 + centred[a].dot(&projected[b])) / WINDOW as f64;
                        let delta = if a == b { 1.0 } else { 0.0 };
                        t.push(idx[a], idx[b], delta - affinity);
                    }
                }
            }
            t
        })
        .collect();
    let mut all = TripletBuilder::new(n, n);
    for r in rows {
        all.extend(r);
    }
    Ok(all.build())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noisy(w: usize, h: usize, seed: u64) -> ImageBuffer {
        let mut s = seed;
        ImageBuffer::from_fn(w, h, 3, |_, _, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        })
        .unwrap()
    }

    fn quad(l: &CsrMatrix, x: &[f64]) -> f64 {
        let mut y = vec![0.0; x.len()];
        l.mul_vec(x, &mut y);
        x.iter().zip(&y).map(|(a, b)| a * b).sum()
    }

    #[test]
    fn constant_base_has_constant_null_space() {
        let base = ImageBuffer::filled(6, 5, 3, 0.3).unwrap();
        let l = matting_laplacian(&base, 1e-5).unwrap();
        let mut y = vec![0.0; 30];
        l.mul_vec(&vec![2.5; 30], &mut y);
        assert!(y.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn rows_sum_to_zero_and_symmetric() {
        let l = matting_laplacian(&noisy(7, 6, 1), 1e-5).unwrap();
        for r in 0..l.rows() {
            assert!(l.row(r).map(|(_, v)| v).sum::<f64>().abs() < 1e-10);
        }
        assert!(l.max_asymmetry() < 1e-10);
    }

    #[test]
    fn positive_semidefinite() {
        let l = matting_laplacian(&noisy(8, 8, 2), 1e-5).unwrap();
        let mut s = 99u64;
        for _ in 0..100 {
            let x: Vec<f64> = (0..64)
                .map(|_| {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
                    (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
                })
                .collect();
            assert!(quad(&l, &x) >= -1e-10);
        }
    }

    // Oracle: x^T L x equals the sum over windows of the ridge-regression
    // residual min_{a,b} sum_i (x_i - a.c_i - b)^2 + eps |a|^2.
    fn ridge_energy(base: &ImageBuffer, x: &[f64], eps: f64) -> f64 {
        let (w, h) = (base.width(), base.height());
        let mut total = 0.0;
        for cy in 1..h - 1 {
            for cx in 1..w - 1 {
                let mut m = nalgebra::Matrix4::<f64>::zeros();
                let mut rhs = nalgebra::Vector4::<f64>::zeros();
                let mut rows = Vec::new();
                for k in 0..9 {
                    let i = (cy + k / 3 - 1) * w + cx + k % 3 - 1;
                    let p = base.pixel(i);
                    let f = nalgebra::Vector4::new(p[0], p[1], p[2], 1.0);
                    m += f * f.transpose();
                    rhs += f * x[i];
                    rows.push((f, x[i]));
                }
                for d in 0..3 {
                    m[(d, d)] += eps;
                }
                let coef = m.lu().solve(&rhs).unwrap();
                let resid: f64 = rows.iter().map(|(f, xi)| (xi - f.dot(&coef)).powi(2)).sum();
                total += resid + eps * (coef[0] * coef[0] + coef[1] * coef[1] + coef[2] * coef[2]);
            }
        }
        total
    }

    #[test]
    fn quadratic_form_matches_windowed_ridge_residual() {
        let base = noisy(8, 7, 4);
        let l = matting_laplacian(&base, 1e-5).unwrap();
        let x: Vec<f64> = (0..56).map(|i| ((i * 37) % 11) as f64 / 11.0).collect();
        let e = quad(&l, &x);
        assert!((e - ridge_energy(&base, &x, 1e-5)).abs() < 1e-9 * e.max(1.0));
    }

    #[test]
    fn affine_function_of_base_has_near_zero_energy() {
        let base = noisy(8, 8, 3);
        let x: Vec<f64> = base.plane(0).iter().map(|r| 0.7 * r + 0.2).collect();
        // the regularizer bounds the energy by eps |a|^2 per window
        let l = matting_laplacian(&base, 1e-5).unwrap();
        assert!(quad(&l, &x) <= 1e-5 * 0.49 * 36.0);
        let tight = matting_laplacian(&base, 1e-12).unwrap();
        assert!(quad(&tight, &x) <= 1e-8, "{}", quad(&tight, &x));
    }

    #[test]
    fn tiny_image_is_zero() {
        let l = matting_laplacian(&ImageBuffer::filled(2, 5, 3, 0.1).unwrap(), 1e-5).unwrap();
        assert_eq!(l.nnz(), 0);
    }
}
