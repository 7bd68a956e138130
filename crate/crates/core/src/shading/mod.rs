//! Stage 1: quadratic log-shading energy
//! `lambda_g (S_c + S_p) + lambda_m S_m + lambda_l S_l` plus a weak gauge term.

mod matting;
mod system;
mod weights;

pub use matting::{matting_laplacian, DEFAULT_MATTING_EPS};
pub use system::{assemble_stage1, solve_stage1, ShadingParams, ShadingSystem, StageOneInputs, StageOneResult};
pub use weights::{neighbor_pairs_3x3, weights_local, weights_mid, PairWeights};
