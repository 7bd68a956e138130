//! Alternating Stage-1 / Stage-2 decomposition, merging, relighting and the
//! on-disk result bundle.

mod bundle;
mod merge;
mod params;
mod run;

pub use bundle::{read_bundle, write_bundle, Bundle, BundleMetadata, IterationSummary, BUNDLE_VERSION};
pub use merge::{
    merge_components, recolor_illumination, relight_intensity, rescale_unit, MergedComponents, Recolored,
    StageComponents,
};
pub use params::{IterationParams, Variant};
pub use run::{adaptive_grid, run_decomposition, DecompositionResult, FeatureBackend, FeatureSummary, IterationRecord, Timings};

/// Default decay length of the recolouring kernel, as a fraction of the image diagonal.
pub const DEFAULT_DECAY_FRACTION: f64 = 0.15;
pub const DEFAULT_PERCENTILE: f64 = 95.0;
pub const DEFAULT_RELIGHT_SCALE: f64 = 0.5;
