//! Single-image intrinsic decomposition into reflectance and shading.
//!
//! The engine alternates an L2 shading-smoothness solve with an L1
//! reflectance-sparsity solve (Split-Bregman), both guided by local,
//! object-level and scene-level priors built from patch descriptors and
//! region proposals.
//!
//! Module map:
//! - [`imgcore`]: image buffers, colour transforms, filtering and I/O.
//! - [`semantics`]: patch grids, patch descriptors, kNN/LLE weights, region
//!   proposals and the per-pixel semantic field.
//! - [`linalg`]: sparse matrices and the preconditioned conjugate gradient solver.
//! - [`shading`]: Stage 1 quadratic energy for log shading.
//! - [`reflectance`]: Stage 2 L1 energy and its Split-Bregman solver.
//! - [`pipeline`]: iteration driver, component merging and relighting.
//! - [`eval`]: WHDR and LMSE metrics.
//! - [`synthetic`]: Mondrian-style test scenes with known ground truth.

pub mod error;
pub mod eval;
pub mod imgcore;
pub mod linalg;
pub mod pipeline;
pub mod reflectance;
pub mod semantics;
pub mod shading;
pub mod synthetic;

pub use error::{Error, Result};
pub use imgcore::{Domain, ImageBuffer};
