use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{from_log, read_pfm, save_png, write_pfm, Domain, ImageBuffer};

use super::merge::{MergedComponents, StageComponents};
use super::params::IterationParams;
use super::run::{DecompositionResult, FeatureSummary};

pub const BUNDLE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationSummary {
    pub iteration: usize,
    pub params: IterationParams,
    pub stage1_energy: f64,
    pub stage1_cg_iterations: usize,
    pub stage1_converged: bool,
    pub stage2_objective: f64,
    pub stage2_cg_iterations: usize,
    pub pairs_local: usize,
    pub pairs_mid: usize,
    pub pairs_global: usize,
}

/// Contents of `metadata.json`. Wall-clock timings live in `timings.json`
/// so that the rest of a bundle is reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMetadata {
    pub format_version: u32,
    pub source: Option<String>,
    pub width: usize,
    pub height: usize,
    pub params: IterationParams,
    pub iterations: Vec<IterationSummary>,
    pub features: FeatureSummary,
    pub warnings: Vec<String>,
}

/// Scales a non-negative field by its maximum for display.
fn normalized(img: &ImageBuffer) -> Result<ImageBuffer> {
    let hi = img.min_max().1;
    if hi > 0.0 {
        img.map(|v| v / hi)
    } else {
        Ok(img.clone())
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes PNG previews, PFM float dumps, per-iteration history under
/// `iters/NN/`, `metadata.json` and `timings.json` into `dir`.
pub fn write_bundle(result: &DecompositionResult, dir: impl AsRef<Path>, source: Option<&str>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let last = result.last();
    let merged = &result.merged;

    write_pfm(&result.image, dir.join("input.pfm"))?;
    save_png(&last.reflectance, dir.join("reflectance.png"))?;
    save_png(&normalized(&last.shading)?, dir.join("shading.png"))?;
    save_png(&merged.reflectance, dir.join("merged_reflectance.png"))?;
    save_png(&normalized(&merged.shading)?, dir.join("merged_shading.png"))?;
    save_png(&normalized(&merged.illumination)?, dir.join("illum_color.png"))?;
    write_pfm(&last.reflectance, dir.join("reflectance.pfm"))?;
    write_pfm(&last.shading, dir.join("shading.pfm"))?;
    write_pfm(&last.sigma, dir.join("sigma.pfm"))?;
    write_pfm(&last.rho, dir.join("rho.pfm"))?;
    write_pfm(&merged.reflectance, dir.join("merged_reflectance.pfm"))?;
    write_pfm(&merged.shading, dir.join("merged_shading.pfm"))?;
    write_pfm(&merged.illumination, dir.join("illum_color.pfm"))?;

    let mut iterations = Vec::with_capacity(result.history.len());
    for (i, rec) in result.history.iter().enumerate() {
        let sub = dir.join("iters").join(format!("{:02}", i + 1));
        fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        write_pfm(&rec.sigma, sub.join("sigma.pfm"))?;
        write_pfm(&rec.rho, sub.join("rho.pfm"))?;
        write_pfm(&rec.reflectance, sub.join("reflectance.pfm"))?;
        write_pfm(&rec.shading, sub.join("shading.pfm"))?;
        save_png(&rec.reflectance, sub.join("reflectance.png"))?;
        save_png(&normalized(&rec.shading)?, sub.join("shading.png"))?;
        iterations.push(IterationSummary {
            iteration: i + 1,
            params: rec.params,
            stage1_energy: rec.stage1_energy,
            stage1_cg_iterations: rec.stage1_iterations,
            stage1_converged: rec.stage1_converged,
            stage2_objective: rec.stage2_objective,
            stage2_cg_iterations: rec.stage2_iterations,
            pairs_local: rec.pair_counts[0],
            pairs_mid: rec.pair_counts[1],
            pairs_global: rec.pair_counts[2],
        });
    }

    let meta = BundleMetadata {
        format_version: BUNDLE_VERSION,
        source: source.map(str::to_string),
        width: result.image.width(),
        height: result.image.height(),
        params: result.params,
        iterations,
        features: result.features.clone(),
        warnings: result.warnings.clone(),
    };
    write_json(&dir.join("metadata.json"), &meta)?;
    write_json(&dir.join("timings.json"), &result.timings)
}

/// Float components of a bundle, as needed for relighting.
#[derive(Debug, Clone)]
pub struct Bundle {
    pub dir: PathBuf,
    pub metadata: BundleMetadata,
    pub image: ImageBuffer,
    pub reflectance: ImageBuffer,
    pub shading: ImageBuffer,
    /// Stage-1 reflectance, linear.
    pub rho: ImageBuffer,
    /// Stage-1 shading, linear, 1 channel.
    pub sigma: ImageBuffer,
    pub merged: MergedComponents,
}

impl Bundle {
    pub fn components(&self) -> StageComponents<'_> {
        StageComponents {
            image: &self.image,
            reflectance: &self.reflectance,
            shading: &self.shading,
            rho: &self.rho,
            sigma: &self.sigma,
        }
    }
}

pub fn read_bundle(dir: impl AsRef<Path>) -> Result<Bundle> {
    let dir = dir.as_ref();
    let meta_path = dir.join("metadata.json");
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let metadata: BundleMetadata = serde_json::from_str(&text)?;
    if metadata.format_version != BUNDLE_VERSION {
        return Err(Error::Format {
            format: "bundle",
            reason: format!("unsupported version {}", metadata.format_version),
        });
    }
    let load = |name: &str| read_pfm(dir.join(name));
    let image = load("input.pfm")?;
    if (image.width(), image.height()) != (metadata.width, metadata.height) {
        return Err(Error::Dimension("bundle images do not match metadata".into()));
    }
    let rho = from_log(&load("rho.pfm")?.with_domain(Domain::Log))?;
    let sigma = from_log(&load("sigma.pfm")?.with_domain(Domain::Log))?;
    let bundle = Bundle {
        dir: dir.to_path_buf(),
        reflectance: load("reflectance.pfm")?,
        shading: load("shading.pfm")?,
        merged: MergedComponents {
            reflectance: load("merged_reflectance.pfm")?,
            shading: load("merged_shading.pfm")?,
            illumination: load("illum_color.pfm")?,
        },
        metadata,
        image,
        rho,
        sigma,
    };
    for other in [&bundle.reflectance, &bundle.shading, &bundle.rho, &bundle.merged.shading] {
        bundle.image.check_same_shape(other)?;
    }
    Ok(bundle)
}
