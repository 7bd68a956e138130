use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use intrinsic_core::eval::{lmse, mean_value, parse_iiw_json, whdr, MetricRecord, MetricReport};
use intrinsic_core::imgcore::{load_image, read_pfm, save_png, ImageBuffer};
use intrinsic_core::pipeline::{
    adaptive_grid, read_bundle, recolor_illumination, relight_intensity as relight, run_decomposition, write_bundle,
    FeatureBackend, IterationParams,
};
use intrinsic_core::semantics::{
    build_grid, builtin_patch_descriptor, builtin_proposals, write_proposals, write_spft, DEFAULT_PATCH_SIZE, DEFAULT_STRIDE,
};
use rayon::prelude::*;

use crate::{DecomposeArgs, EvalCommand, FeaturesArgs, RelightColorArgs, RelightIntensityArgs};

/// Process outcome short of an error.
pub enum Status {
    Ok,
    /// Finished, but the solver or feature stage reported warnings.
    Warnings,
}

impl From<Status> for std::process::ExitCode {
    fn from(s: Status) -> Self {
        match s {
            Status::Ok => Self::SUCCESS,
            Status::Warnings => Self::from(2),
        }
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "image".into(), |s| s.to_string_lossy().into_owned())
}

fn params_from(args: &DecomposeArgs) -> Result<IterationParams> {
    let mut p = IterationParams::for_variant(args.variant);
    if let Some(k) = args.k {
        p.k = k;
    }
    if let Some(seed) = args.seed {
        p.seed = seed;
    }
    for item in &args.params {
        let (name, value) = item
            .split_once('=')
            .with_context(|| format!("--param expects NAME=VALUE, got {item:?}"))?;
        p.set(name.trim(), value.trim())?;
    }
    p.validate()?;
    Ok(p)
}

fn decompose_one(input: &Path, out: &Path, backend: &FeatureBackend, params: &IterationParams) -> Result<bool> {
    let img = load_image(input).with_context(|| format!("loading {}", input.display()))?;
    let result = run_decomposition(&img, backend, params).with_context(|| format!("decomposing {}", input.display()))?;
    write_bundle(&result, out, Some(&input.display().to_string()))
        .with_context(|| format!("writing bundle {}", out.display()))?;
    for w in &result.warnings {
        log::warn!("{}: {w}", input.display());
    }
    log::info!("{} -> {} in {:.2}s", input.display(), out.display(), result.timings.total_s);
    Ok(!result.warnings.is_empty())
}

pub fn decompose(args: DecomposeArgs) -> Result<Status> {
    let params = params_from(&args)?;
    let backend = FeatureBackend {
        features: args.features.clone(),
        proposals: args.proposals.clone(),
    };
    let batch = args.inputs.len() > 1;
    if batch && (backend.features.is_some() || backend.proposals.is_some()) {
        bail!("--features and --proposals apply to a single input image");
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = args.jobs {
        ensure!(jobs > 0, "--jobs must be positive");
        pool = pool.num_threads(jobs);
    }
    let pool = pool.build()?;
    let targets: Vec<(PathBuf, PathBuf)> = args
        .inputs
        .iter()
        .map(|p| {
            let out = if batch { args.out.join(stem(p)) } else { args.out.clone() };
            (p.clone(), out)
        })
        .collect();
    let warned: Vec<bool> = pool.install(|| {
        targets
            .par_iter()
            .map(|(input, out)| decompose_one(input, out, &backend, &params))
            .collect::<Result<_>>()
    })?;
    Ok(if warned.iter().any(|&w| w) { Status::Warnings } else { Status::Ok })
}

fn parse_ab(text: &str) -> Result<[f64; 2]> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    ensure!(parts.len() == 2, "--ab expects two comma-separated numbers, got {text:?}");
    let num = |s: &str| s.parse::<f64>().with_context(|| format!("--ab: {s:?} is not a number"));
    Ok([num(parts[0])?, num(parts[1])?])
}

pub fn relight_color(args: RelightColorArgs) -> Result<Status> {
    let shift = parse_ab(&args.ab)?;
    let bundle = read_bundle(&args.bundle).with_context(|| format!("reading bundle {}", args.bundle.display()))?;
    let out = recolor_illumination(&bundle.merged, shift, args.percentile, args.decay)?;
    let path = args.out.unwrap_or_else(|| args.bundle.join("relight_color.png"));
    save_png(&out.image, &path)?;
    println!("{}", path.display());
    Ok(if out.warnings.is_empty() { Status::Ok } else { Status::Warnings })
}

pub fn relight_intensity(args: RelightIntensityArgs) -> Result<Status> {
    let bundle = read_bundle(&args.bundle).with_context(|| format!("reading bundle {}", args.bundle.display()))?;
    let p = &bundle.metadata.params;
    let out = relight(&bundle.components(), p.merge_blur, args.scale, p.eps)?;
    let path = args.out.unwrap_or_else(|| args.bundle.join("relight_intensity.png"));
    save_png(&out, &path)?;
    println!("{}", path.display());
    Ok(Status::Ok)
}

fn load_any(path: &Path) -> Result<ImageBuffer> {
    let img = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pfm")) {
        read_pfm(path)?
    } else {
        load_image(path)?
    };
    Ok(img)
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| ["png", "ppm", "pgm", "pfm"].contains(&e.to_ascii_lowercase().as_str()))
}

/// Pairs each image in `pred` with its partner path. A file `pred` gives one pair.
fn pairs(pred: &Path, other: &Path, partner: impl Fn(&Path, &Path) -> PathBuf) -> Result<Vec<(PathBuf, PathBuf)>> {
    if !pred.is_dir() {
        return Ok(vec![(pred.to_path_buf(), other.to_path_buf())]);
    }
    ensure!(other.is_dir(), "{} is a directory, so {} must be one too", pred.display(), other.display());
    let mut files: Vec<PathBuf> = fs::read_dir(pred)
        .with_context(|| format!("listing {}", pred.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| p.is_file() && is_image(p));
    files.sort();
    Ok(files
        .into_iter()
        .map(|p| {
            let q = partner(&p, other);
            (p, q)
        })
        .collect())
}

fn write_csv(path: &Path, records: &[MetricRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["image", "metric", "value", "count"])?;
    for r in records {
        let value = r.report.value.map_or_else(String::new, |v| v.to_string());
        w.write_record([r.image.as_str(), &r.report.metric, &value, &r.report.count.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn emit(records: Vec<MetricRecord>, batch: bool, csv_path: Option<&Path>) -> Result<Status> {
    let mut rows = records;
    if batch {
        let reports: Vec<MetricReport> = rows.iter().map(|r| r.report.clone()).collect();
        let metric = reports.first().map_or_else(String::new, |r| r.metric.clone());
        let params = reports.first().map(|r| r.params.clone()).unwrap_or_default();
        rows.push(MetricRecord {
            image: "mean".into(),
            report: MetricReport {
                metric,
                value: mean_value(&reports),
                count: reports.len(),
                params,
            },
        });
    }
    for r in &rows {
        println!("{}", serde_json::to_string(r)?);
    }
    if let Some(path) = csv_path {
        write_csv(path, &rows)?;
    }
    let undefined = rows.iter().any(|r| r.report.value.is_none());
    Ok(if undefined { Status::Warnings } else { Status::Ok })
}

pub fn eval(cmd: EvalCommand) -> Result<Status> {
    match cmd {
        EvalCommand::Whdr { pred, judgements, delta, csv } => {
            let items = pairs(&pred, &judgements, |p, dir| dir.join(format!("{}.json", stem(p))))?;
            let mut records = Vec::with_capacity(items.len());
            for (p, j) in &items {
                let set = parse_iiw_json(j).with_context(|| format!("reading {}", j.display()))?;
                let img = load_any(p)?;
                records.push(MetricRecord {
                    image: p.display().to_string(),
                    report: whdr(&img, &set, delta)?,
                });
            }
            emit(records, pred.is_dir(), csv.as_deref())
        }
        EvalCommand::Lmse { pred, gt, window, step, csv } => {
            let items = pairs(&pred, &gt, |p, dir| dir.join(p.file_name().unwrap_or_default()))?;
            let mut records = Vec::with_capacity(items.len());
            for (p, g) in &items {
                let (a, b) = (load_any(p)?, load_any(g)?);
                let report = lmse(&a, &b, window, step).with_context(|| format!("{} vs {}", p.display(), g.display()))?;
                records.push(MetricRecord {
                    image: p.display().to_string(),
                    report,
                });
            }
            emit(records, pred.is_dir(), csv.as_deref())
        }
    }
}

pub fn features(args: FeaturesArgs) -> Result<Status> {
    ensure!(
        args.out_spft.is_some() || args.out_sppr.is_some(),
        "nothing to do: give --out-spft and/or --out-sppr"
    );
    let img = load_image(&args.image).with_context(|| format!("loading {}", args.image.display()))?;
    if let Some(path) = &args.out_spft {
        let (w, h) = (img.width(), img.height());
        let grid = match (args.patch_size, args.stride) {
            (Some(size), Some(stride)) => build_grid(w, h, size, stride)?,
            _ => match build_grid(w, h, DEFAULT_PATCH_SIZE, DEFAULT_STRIDE) {
                Ok(grid) => grid,
                Err(_) => adaptive_grid(w, h, &IterationParams::default())
                    .with_context(|| format!("image {w}x{h} is too small for a patch grid"))?,
            },
        };
        let feats = builtin_patch_descriptor(&img, &grid);
        write_spft(path, &grid, &feats)?;
        log::info!("{} patches -> {}", grid.len(), path.display());
    }
    if let Some(path) = &args.out_sppr {
        let props = builtin_proposals(&img, args.max_proposals);
        write_proposals(path, &props)?;
        log::info!("{} proposals -> {}", props.len(), path.display());
    }
    Ok(Status::Ok)
}
