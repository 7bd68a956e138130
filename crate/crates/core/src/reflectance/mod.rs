//! Stage 2: L1 reflectance sparsity solved with Split-Bregman iterations.

mod bregman;
mod pairs;

pub use bregman::{bregman_solve, objective, shrink, BregmanParams, StageTwoResult, ZSystem};
pub use pairs::{
    build_a, build_b, build_c, pair_weight, sample_window_pairs, PairLabel, PairwiseL1Matrix, DEFAULT_SAMPLE_COUNT,
    MIN_PAIR_WEIGHT, WINDOW_RADIUS,
};
