use intrinsic_core::imgcore::{chromaticity, to_log, ImageBuffer};
use intrinsic_core::linalg::{pcg, CgOptions, LinearOperator};
use intrinsic_core::reflectance::{bregman_solve, shrink, BregmanParams, PairLabel, PairwiseL1Matrix, ZSystem};
use intrinsic_core::shading::{assemble_stage1, matting_laplacian, solve_stage1, weights_local, ShadingParams, StageOneInputs};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_image(w: usize, h: usize, seed: u64) -> ImageBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ImageBuffer::from_fn(w, h, 3, |_, _, _| rng.gen_range(0.05..0.95)).unwrap()
}

fn dense_solve(a: Vec<Vec<f64>>, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let m = DMatrix::from_fn(n, n, |i, j| a[i][j]);
    m.cholesky().expect("positive definite").solve(&DVector::from_column_slice(b)).iter().copied().collect()
}

#[test]
fn stage1_matches_cholesky_on_rectangles() {
    for (w, h, seed) in [(6, 9, 1), (10, 7, 2)] {
        let img = random_image(w, h, seed);
        let local = weights_local(&img, &chromaticity(&img).unwrap(), 1e-4, 0.05).unwrap();
        let log_img = to_log(&img, 1e-4).unwrap();
        let inputs = StageOneInputs {
            log_image: &log_img,
            patches: None,
            laplacian_base: Some(&img),
            local: Some(&local),
            mid: None,
        };
        let sys = assemble_stage1(&inputs, &ShadingParams::default()).unwrap();
        let exact = dense_solve(sys.to_dense(), &sys.full_rhs());
        let opts = CgOptions {
            tol: 1e-12,
            max_iter: 5000,
        };
        let got = solve_stage1(&sys, &log_img, None, opts).unwrap();
        let err = got.sigma.data().iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{w}x{h}: {err}");
    }
}

#[test]
fn z_system_rayleigh_quotients_are_positive() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 30;
    let pairs: Vec<(usize, usize)> = (0..60).map(|_| (rng.gen_range(0..n), rng.gen_range(0..n))).filter(|(i, j)| i != j).collect();
    let m = PairwiseL1Matrix {
        label: PairLabel::Local,
        n,
        weights: pairs.iter().map(|_| rng.gen_range(0.0..1.0)).collect(),
        pairs,
    };
    let sys = ZSystem::new(n, 3, 0.5, 40.0, &[&m]);
    let mut y = vec![0.0; 3 * n];
    for _ in 0..100 {
        let x: Vec<f64> = (0..3 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        sys.apply(&x, &mut y);
        let q: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        assert!(q > 0.0);
    }
}

#[test]
fn matting_laplacian_on_structured_image() {
    let img = ImageBuffer::from_fn(20, 14, 3, |x, y, c| ((x * 3 + y * 5 + c * 7) % 11) as f64 / 10.0).unwrap();
    let lap = matting_laplacian(&img, 1e-5).unwrap();
    assert!(lap.max_asymmetry() < 1e-12);
    let mut y = vec![0.0; lap.rows()];
    lap.mul_vec(&vec![1.0; lap.rows()], &mut y);
    assert!(y.iter().all(|v| v.abs() <= 1e-10));
}

#[test]
fn empty_priors_keep_rho() {
    let rho = random_image(7, 5, 8);
    let empty = |label| PairwiseL1Matrix::empty(label, 35);
    let res = bregman_solve(
        &empty(PairLabel::Local),
        &empty(PairLabel::Mid),
        &empty(PairLabel::Global),
        &rho,
        &rho,
        &BregmanParams::default(),
    )
    .unwrap();
    let stacked: Vec<f64> = rho.planes().concat();
    assert_eq!(res.z, stacked);
}

#[test]
fn cg_residual_shrinks_on_spd_system() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 25;
    let pairs: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
    let m = PairwiseL1Matrix {
        label: PairLabel::Local,
        n,
        weights: vec![1.0; n - 1],
        pairs,
    };
    let sys = ZSystem::new(n, 1, 1.0, 10.0, &[&m]);
    let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut x = vec![0.0; n];
    let report = pcg(&sys, &b, &mut x, CgOptions::default());
    assert!(report.converged);
    assert!(report.residual_norm <= 1e-6 * report.rhs_norm);
}

proptest! {
    #[test]
    fn shrink_is_non_expansive(
        pair in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..40),
        tau in 0.0f64..3.0,
    ) {
        let (x, y): (Vec<f64>, Vec<f64>) = pair.into_iter().unzip();
        let (sx, sy) = (shrink(&x, tau), shrink(&y, tau));
        let d_out: f64 = sx.iter().zip(&sy).map(|(a, b)| (a - b).powi(2)).sum();
        let d_in: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
        prop_assert!(d_out <= d_in + 1e-12);
    }
}
