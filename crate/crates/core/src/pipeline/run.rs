use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{chromaticity, from_log, gaussian_filter, to_lab_suppressed, to_log, Domain, ImageBuffer};
use crate::reflectance::{bregman_solve, build_a, build_b, build_c, PairLabel, PairwiseL1Matrix};
use crate::semantics::{
    build_grid, builtin_patch_descriptor, builtin_proposals, knn, lle_weights, load_patch_features, load_proposals,
    read_spft, representative_pixels, semantic_field, FeatureSource, NeighborTable, PatchGrid, ProposalSet,
    RepresentativeSet, SemanticField,
};
use crate::shading::{assemble_stage1, solve_stage1, weights_local, weights_mid, PairWeights, StageOneInputs};

use super::merge::{merge_components, MergedComponents, StageComponents};
use super::params::IterationParams;

/// Where semantic features come from. `None` selects the builtin extractor.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeatureBackend {
    pub features: Option<PathBuf>,
    pub proposals: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub patch_source: Option<FeatureSource>,
    pub patch_size: Option<usize>,
    pub stride: Option<usize>,
    pub patches: usize,
    pub proposal_source: FeatureSource,
    pub proposals: usize,
    pub reduced_dim: usize,
    pub representatives: usize,
}

/// One Stage-1 / Stage-2 round.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub params: IterationParams,
    /// Log shading, 1 channel.
    pub sigma: ImageBuffer,
    /// Log reflectance, 3 channels.
    pub rho: ImageBuffer,
    pub reflectance: ImageBuffer,
    pub shading: ImageBuffer,
    pub stage1_energy: f64,
    pub stage1_iterations: usize,
    pub stage1_converged: bool,
    pub stage2_objective: f64,
    pub stage2_iterations: usize,
    /// Rows per channel of the local, mid-level and global pair matrices.
    pub pair_counts: [usize; 3],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub features_s: f64,
    pub stage1_s: Vec<f64>,
    pub stage2_s: Vec<f64>,
    pub merge_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone)]
pub struct DecompositionResult {
    /// Linear input image.
    pub image: ImageBuffer,
    /// Effective parameters of the first iteration.
    pub params: IterationParams,
    pub history: Vec<IterationRecord>,
    pub merged: MergedComponents,
    pub features: FeatureSummary,
    pub warnings: Vec<String>,
    pub timings: Timings,
}

impl DecompositionResult {
    pub fn last(&self) -> &IterationRecord {
        self.history.last().expect("at least one iteration")
    }

    /// Final reflectance (Stage 2 of the last iteration).
    pub fn reflectance(&self) -> &ImageBuffer {
        &self.last().reflectance
    }

    pub fn shading(&self) -> &ImageBuffer {
        &self.last().shading
    }
}

struct Semantics {
    patches: Option<(PatchGrid, NeighborTable)>,
    field: Option<SemanticField>,
    reps: RepresentativeSet,
    summary: FeatureSummary,
}

/// Largest grid (starting from the configured size, halving down to 8 px)
/// with more patches than neighbours.
pub fn adaptive_grid(w: usize, h: usize, params: &IterationParams) -> Option<PatchGrid> {
    let mut size = params.patch_size.min(w).min(h);
    let mut stride = params.stride.min(size).max(1);
    loop {
        if size < 8 {
            return None;
        }
        if let Ok(grid) = build_grid(w, h, size, stride) {
            if grid.len() > params.neighbors {
                return Some(grid);
            }
        }
        if size <= 8 {
            return None;
        }
        size /= 2;
        stride = (size / 2).max(1);
    }
}

fn patch_prior(
    img: &ImageBuffer,
    backend: &FeatureBackend,
    params: &IterationParams,
    warnings: &mut Vec<String>,
) -> Result<Option<(PatchGrid, NeighborTable, FeatureSource)>> {
    let (w, h) = (img.width(), img.height());
    let (grid, features) = match &backend.features {
        Some(path) => {
            let (header, _) = read_spft(path)?;
            if (header.width as usize, header.height as usize) != (w, h) {
                return Err(Error::Dimension(format!(
                    "{} was computed for a {}x{} image, input is {w}x{h}",
                    path.display(),
                    header.width,
                    header.height
                )));
            }
            let grid = build_grid(w, h, header.patch_size as usize, header.stride as usize)?;
            let features = load_patch_features(path, &grid)?;
            (grid, features)
        }
        None => match adaptive_grid(w, h, params) {
            Some(grid) => {
                let features = builtin_patch_descriptor(img, &grid);
                (grid, features)
            }
            None => {
                warnings.push(format!(
                    "image {w}x{h} too small for {} patch neighbours; patch consistency prior disabled",
                    params.neighbors
                ));
                return Ok(None);
            }
        },
    };
    let source = features.source;
    let k = params.neighbors.min(features.patch_count().saturating_sub(1));
    if k == 0 {
        warnings.push("fewer than two patches; patch consistency prior disabled".into());
        return Ok(None);
    }
    if k < params.neighbors {
        warnings.push(format!("only {} patches; neighbour count lowered to {k}", features.patch_count()));
    }
    let neighbors = knn(&features, k)?;
    let table = lle_weights(&features, &neighbors)?;
    Ok(Some((grid, table, source)))
}

fn semantics(
    img: &ImageBuffer,
    backend: &FeatureBackend,
    params: &IterationParams,
    warnings: &mut Vec<String>,
) -> Result<Semantics> {
    let (w, h) = (img.width(), img.height());
    let patches = patch_prior(img, backend, params, warnings)?;
    let (props, proposal_source): (ProposalSet, _) = match &backend.proposals {
        Some(path) => (load_proposals(path, w, h)?, FeatureSource::External),
        None => (builtin_proposals(img, params.max_proposals), FeatureSource::Builtin),
    };
    let (field, reduced_dim) = if props.is_empty() {
        warnings.push("no region proposals; mid-level priors disabled".into());
        (None, 0)
    } else {
        let d = params.d.min(props.len());
        if d < params.d {
            warnings.push(format!("only {} proposals; reduced dimension lowered to {d}", props.len()));
        }
        (Some(semantic_field(&props, w, h, d)?), d)
    };
    let reps = representative_pixels(&props, img, params.max_representatives);
    if reps.len() < 2 {
        warnings.push("fewer than two representative pixels; global prior disabled".into());
    }
    let summary = FeatureSummary {
        patch_source: patches.as_ref().map(|p| p.2),
        patch_size: patches.as_ref().map(|p| p.0.patch_size),
        stride: patches.as_ref().map(|p| p.0.stride),
        patches: patches.as_ref().map_or(0, |p| p.0.len()),
        proposal_source,
        proposals: props.len(),
        reduced_dim,
        representatives: reps.len(),
    };
    Ok(Semantics {
        patches: patches.map(|(g, t, _)| (g, t)),
        field,
        reps,
        summary,
    })
}

/// Runs `k` alternating Stage-1 / Stage-2 iterations and merges the result.
///
/// Iteration 1 uses the blurred input as Laplacian base; later iterations use
/// the previous Stage-2 reflectance. Stage-2 pair weights are recomputed from
/// the current Stage-1 reflectance every iteration, and the weight schedule
/// is applied between iterations.
pub fn run_decomposition(img: &ImageBuffer, backend: &FeatureBackend, params: &IterationParams) -> Result<DecompositionResult> {
    params.validate()?;
    if img.domain() != Domain::Linear {
        return Err(Error::Contract("decomposition expects a linear-domain image".into()));
    }
    let start = Instant::now();
    let img = img.broadcast3();
    let (w, h) = (img.width(), img.height());
    let n = w * h;
    let mut warnings = Vec::new();

    let sem = semantics(&img, backend, params, &mut warnings)?;
    let local: PairWeights = weights_local(&img, &chromaticity(&img)?, params.t_c, params.t_b)?;
    let mid: Option<PairWeights> = sem.field.as_ref().map(|f| weights_mid(f, w, h, params.t_m)).transpose()?;
    let log_img = to_log(&img, params.eps)?;
    let mut timings = Timings {
        features_s: start.elapsed().as_secs_f64(),
        ..Timings::default()
    };

    let mut p = *params;
    let mut history: Vec<IterationRecord> = Vec::with_capacity(params.k);
    for iter in 0..params.k {
        if iter > 0 {
            p = p.schedule_update();
        }
        let t1 = Instant::now();
        let blurred;
        let base = match history.last() {
            Some(prev) => &prev.reflectance,
            None => {
                blurred = gaussian_filter(&img, p.base_blur);
                &blurred
            }
        };
        let inputs = StageOneInputs {
            log_image: &log_img,
            patches: sem.patches.as_ref().map(|(g, t)| (g, t)),
            laplacian_base: Some(base),
            local: Some(&local),
            mid: mid.as_ref(),
        };
        let system = assemble_stage1(&inputs, &p.shading())?;
        let init = history.last().map(|r| r.sigma.data());
        let s1 = solve_stage1(&system, &log_img, init, p.cg())?;
        if !s1.report.converged {
            warnings.push(format!(
                "iteration {}: Stage 1 stopped after {} CG steps with relative residual {:.3e}",
                iter + 1,
                s1.report.iterations,
                s1.report.residual_norm / s1.report.rhs_norm.max(f64::MIN_POSITIVE)
            ));
        }
        timings.stage1_s.push(t1.elapsed().as_secs_f64());

        let t2 = Instant::now();
        let rho_lin = from_log(&s1.rho)?;
        let lab = to_lab_suppressed(&rho_lin, p.suppress)?;
        let a = if p.gamma_l > 0.0 {
            build_a(&lab, w, h, p.t, p.sample_count, p.seed)?
        } else {
            PairwiseL1Matrix::empty(PairLabel::Local, n)
        };
        let b = match (&sem.field, p.gamma_m > 0.0) {
            (Some(field), true) => build_b(&lab, field, w, h, p.t, p.sample_count, p.seed)?,
            _ => PairwiseL1Matrix::empty(PairLabel::Mid, n),
        };
        let c = if p.gamma_g > 0.0 && sem.reps.len() >= 2 {
            build_c(&sem.reps, &lab, p.t)
        } else {
            PairwiseL1Matrix::empty(PairLabel::Global, n)
        };
        let s2 = bregman_solve(&a, &b, &c, &rho_lin, &img, &p.bregman())?;
        warnings.extend(s2.warnings.iter().map(|w| format!("iteration {}: {w}", iter + 1)));
        timings.stage2_s.push(t2.elapsed().as_secs_f64());
        log::debug!(
            "iteration {}: stage 1 energy {:.6e} ({} CG), stage 2 objective {:.6e} ({} CG)",
            iter + 1,
            s1.energy,
            s1.report.iterations,
            s2.objective,
            s2.cg_iterations
        );

        history.push(IterationRecord {
            params: p,
            sigma: s1.sigma,
            rho: s1.rho,
            reflectance: s2.reflectance,
            shading: s2.shading,
            stage1_energy: s1.energy,
            stage1_iterations: s1.report.iterations,
            stage1_converged: s1.report.converged,
            stage2_objective: s2.objective,
            stage2_iterations: s2.cg_iterations,
            pair_counts: [a.len(), b.len(), c.len()],
        });
    }

    let tm = Instant::now();
    let last = history.last().expect("k >= 1");
    let rho = from_log(&last.rho)?;
    let sigma = from_log(&last.sigma)?;
    let merged = merge_components(
        &StageComponents {
            image: &img,
            reflectance: &last.reflectance,
            shading: &last.shading,
            rho: &rho,
            sigma: &sigma,
        },
        params.merge_blur,
        params.eps,
    )?;
    timings.merge_s = tm.elapsed().as_secs_f64();
    timings.total_s = start.elapsed().as_secs_f64();

    Ok(DecompositionResult {
        image: img,
        params: *params,
        history,
        merged,
        features: sem.summary,
        warnings,
        timings,
    })
}
