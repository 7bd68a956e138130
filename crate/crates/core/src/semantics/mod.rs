//! Semantic features: fixed-grid patch descriptors with kNN/LLE weights and
//! region-proposal features with PCA reduction.

mod descriptor;
mod field;
mod grid;
mod neighbors;
mod proposals;
mod representative;
mod spft;
mod sppr;

pub use descriptor::{builtin_patch_descriptor, BUILTIN_DESCRIPTOR_DIM, EXTERNAL_FEATURE_DIM};
pub use field::{semantic_field, SemanticField, DEFAULT_REDUCED_DIM};
pub use grid::{build_grid, Patch, PatchGrid, DEFAULT_PATCH_SIZE, DEFAULT_STRIDE};
pub use neighbors::{knn, lle_weights, NeighborTable, DEFAULT_NEIGHBORS};
pub use proposals::{builtin_proposals, Proposal, ProposalSet, DEFAULT_MAX_PROPOSALS};
pub use representative::{representative_pixels, Representative, RepresentativeSet, DEFAULT_MAX_REPRESENTATIVES};
pub use spft::{load_patch_features, read_spft, write_spft, SpftHeader};
pub use sppr::{load_proposals, write_proposals};

/// Where a feature set came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum FeatureSource {
    External,
    Builtin,
}

/// One feature row per grid patch.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchFeatureSet {
    pub dim: usize,
    /// Row-major `patch_count x dim`.
    pub rows: Vec<f64>,
    pub source: FeatureSource,
}

impl PatchFeatureSet {
    pub fn patch_count(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.rows.len() / self.dim
        }
    }

    pub fn row(&self, b: usize) -> &[f64] {
        &self.rows[b * self.dim..(b + 1) * self.dim]
    }

    pub(crate) fn normalize_rows(&mut self) {
        let dim = self.dim;
        for row in self.rows.chunks_exact_mut(dim) {
            let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > 0.0 {
                row.iter_mut().for_each(|v| *v /= n);
            }
        }
    }
}
