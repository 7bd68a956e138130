mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use intrinsic_core::pipeline::{Variant, DEFAULT_DECAY_FRACTION, DEFAULT_PERCENTILE, DEFAULT_RELIGHT_SCALE};

/// Intrinsic image decomposition with semantic priors.
#[derive(Parser, Debug)]
#[command(name = "intrinsic", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Split images into reflectance and shading and write result bundles.
    Decompose(DecomposeArgs),
    /// Shift the illumination colour around the brightest shading.
    RelightColor(RelightColorArgs),
    /// Boost dark shading regions.
    RelightIntensity(RelightIntensityArgs),
    /// Score predicted reflectance.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Export builtin patch features and region proposals.
    Features(FeaturesArgs),
}

#[derive(Args, Debug)]
struct DecomposeArgs {
    /// Input PNG or PPM images.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Bundle directory. With several inputs each bundle goes to `<out>/<stem>`.
    #[arg(long)]
    out: PathBuf,
    /// External patch features (SPFT). Single input only.
    #[arg(long)]
    features: Option<PathBuf>,
    /// External region proposals (SPPR). Single input only.
    #[arg(long)]
    proposals: Option<PathBuf>,
    #[arg(long, default_value = "v7")]
    variant: Variant,
    /// Outer iterations.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Override any iteration parameter, e.g. `--param theta=30`.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    params: Vec<String>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args, Debug)]
struct RelightColorArgs {
    #[arg(long)]
    bundle: PathBuf,
    /// Lab chroma offset `a,b` applied at the light source.
    #[arg(long, value_name = "A,B", allow_hyphen_values = true)]
    ab: String,
    /// Shading-luminance percentile that marks the light source.
    #[arg(long, default_value_t = DEFAULT_PERCENTILE)]
    percentile: f64,
    /// Falloff length as a fraction of the image diagonal.
    #[arg(long, default_value_t = DEFAULT_DECAY_FRACTION)]
    decay: f64,
    /// Output PNG (default: `relight_color.png` in the bundle).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RelightIntensityArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long, default_value_t = DEFAULT_RELIGHT_SCALE)]
    scale: f64,
    /// Output PNG (default: `relight_intensity.png` in the bundle).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum EvalCommand {
    /// Weighted human disagreement rate against IIW-style judgements.
    Whdr {
        /// Reflectance image, or a directory of them.
        #[arg(long)]
        pred: PathBuf,
        /// Judgement JSON, or a directory holding `<stem>.json` per image.
        #[arg(long)]
        judgements: PathBuf,
        #[arg(long, default_value_t = intrinsic_core::eval::DEFAULT_DELTA)]
        delta: f64,
        /// Also write a CSV summary.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Local scale-invariant error against dense ground truth.
    Lmse {
        /// Reflectance image, or a directory of them.
        #[arg(long)]
        pred: PathBuf,
        /// Ground truth image, or a directory with matching file names.
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value_t = intrinsic_core::eval::DEFAULT_WINDOW)]
        window: usize,
        #[arg(long, default_value_t = intrinsic_core::eval::DEFAULT_STEP)]
        step: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct FeaturesArgs {
    image: PathBuf,
    #[arg(long)]
    out_spft: Option<PathBuf>,
    #[arg(long)]
    out_sppr: Option<PathBuf>,
    /// Patch size in pixels. Without it the default grid is used, shrunk as in
    /// `decompose` when the image is smaller than one patch.
    #[arg(long, requires = "stride")]
    patch_size: Option<usize>,
    #[arg(long, requires = "patch_size")]
    stride: Option<usize>,
    #[arg(long, default_value_t = intrinsic_core::semantics::DEFAULT_MAX_PROPOSALS)]
    max_proposals: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Decompose(args) => commands::decompose(args),
        Command::RelightColor(args) => commands::relight_color(args),
        Command::RelightIntensity(args) => commands::relight_intensity(args),
        Command::Eval(cmd) => commands::eval(cmd),
        Command::Features(args) => commands::features(args),
    };
    match outcome {
        Ok(status) => status.into(),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
