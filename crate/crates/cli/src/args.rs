use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "dgflow",
    version,
    about = "Energy-stable gradient flows for TV image restoration"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Grayscale TV denoising.
    Denoise(RunArgs),
    /// TV deblurring with a reflective convolution kernel (requires --kernel).
    Deblur(RunArgs),
    /// TV inpainting of the pixels marked in --mask.
    Inpaint(RunArgs),
    /// Coupled TV denoising of an RGB image.
    DenoiseColor(RunArgs),
    /// Non-convex TV^p denoising.
    Tvp(RunArgs),
    /// Runs several methods on one problem and writes their traces side by side.
    Compare(CompareArgs),
    /// Writes the built-in test images.
    Fixture(FixtureArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Denoise,
    Deblur,
    Inpaint,
    DenoiseColor,
    Tvp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Gonzalez,
    Meanvalue,
    ItohAbe,
    Euler,
    Lagged,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    /// Start from the (noisy) data.
    Data,
    /// Start from uniform random intensities (stream `seed + 1`).
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScalingArg {
    /// Intensities in [0, 1].
    Unit,
    /// Intensities in [0, 255].
    Byte,
}

/// The problem: data, model parameters and side inputs.
#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Key=value file supplying defaults for any long flag; flags win.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Input PGM/PPM. Without it the built-in shapes image is used.
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,

    /// Side length of the built-in image.
    #[arg(long, default_value_t = 32)]
    pub size: usize,

    /// Inpainting mask (PGM, nonzero = missing). Inpainting only.
    #[arg(long, value_name = "PATH")]
    pub mask: Option<PathBuf>,

    /// Blur kernel: `box7`, `boxN` for odd N, or a text matrix file. Deblurring only.
    #[arg(long, value_name = "SPEC")]
    pub kernel: Option<String>,

    #[arg(long)]
    pub alpha: Option<f64>,

    #[arg(long)]
    pub beta: Option<f64>,

    /// Exponent of the TV^p model.
    #[arg(long)]
    pub p: Option<f64>,

    /// Standard deviation of Gaussian noise added to the input.
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, value_enum, default_value_t = InitArg::Data)]
    pub init: InitArg,

    #[arg(long, value_enum)]
    pub scaling: Option<ScalingArg>,

    /// Maximum sample value of written images (255 or 65535).
    #[arg(long, default_value_t = 255)]
    pub maxval: u32,
}

/// How the flow is integrated and when it stops.
#[derive(Args, Debug, Clone)]
pub struct FlowArgs {
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,

    /// Gauss–Legendre nodes of the mean-value scheme.
    #[arg(long, default_value_t = 4)]
    pub quadrature_order: usize,

    #[arg(long)]
    pub tau: Option<f64>,

    /// Choose between trial steps tau and 2 tau each step.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    pub adaptive: Option<bool>,

    #[arg(long)]
    pub tau_min: Option<f64>,

    #[arg(long)]
    pub tau_max: Option<f64>,

    #[arg(long, default_value_t = 1000)]
    pub max_steps: usize,

    #[arg(long, default_value_t = 1e-6)]
    pub grad_tol: f64,

    /// Stop when the energy drops by less than this over 10 steps (0 = off).
    #[arg(long, default_value_t = 0.0)]
    pub stall_eps: f64,

    /// Inner solver tolerance (Newton residual, scalar roots).
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,

    /// Lagged diffusivity without the time-step term.
    #[arg(long)]
    pub fixed_point: bool,

    /// Record wall-clock times in the trace (makes traces non-reproducible).
    #[arg(long)]
    pub record_time: bool,
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    #[command(flatten)]
    pub flow: FlowArgs,

    /// Restored image.
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,

    /// Energy trace CSV.
    #[arg(long, value_name = "PATH")]
    pub trace: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct CompareArgs {
    #[arg(long, value_enum)]
    pub model: ModelArg,

    /// Method to run, as `scheme[:tau][:adaptive]`; repeat for each method.
    #[arg(long = "run", value_name = "SPEC", required = true)]
    pub runs: Vec<String>,

    /// Directory receiving one trace per run and summary.csv.
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,

    #[command(flatten)]
    pub problem: ModelArgs,

    #[command(flatten)]
    pub flow: FlowArgs,
}

#[derive(Args, Debug, Clone)]
pub struct FixtureArgs {
    /// Output image.
    #[arg(long, value_name = "PATH")]
    pub output: PathBuf,

    /// Also write the scratch mask here, and paint the scratches into the image.
    #[arg(long, value_name = "PATH")]
    pub mask: Option<PathBuf>,

    #[arg(long, default_value_t = 32)]
    pub size: usize,

    /// Three-channel variant.
    #[arg(long)]
    pub color: bool,

    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, default_value_t = 255)]
    pub maxval: u32,
}

const SWITCHES: &[&str] = &["fixed-point", "record-time", "color"];

/// Expands `--config FILE` into flags that are not already on the command
/// line. Lines are `key = value`; `#` starts a comment.
pub fn merge_config(argv: Vec<String>) -> Result<Vec<String>, String> {
    let mut path = None;
    for (k, a) in argv.iter().enumerate() {
        if a == "--config" {
            path = Some(argv.get(k + 1).ok_or("--config needs a path")?.clone());
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read {path}: {e}"))?;
    let given = |key: &str| {
        argv.iter().any(|a| {
            a.strip_prefix("--")
                .is_some_and(|f| f == key || f.starts_with(&format!("{key}=")))
        })
    };
    let mut out = argv.clone();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("{path}:{}: expected key=value", n + 1))?;
        let (key, value) = (key.trim().replace('_', "-"), value.trim());
        if key == "config" || given(&key) {
            continue;
        }
        if SWITCHES.contains(&key.as_str()) {
            match value {
                "true" => out.push(format!("--{key}")),
                "false" => {}
                _ => return Err(format!("{path}:{}: {key} must be true or false", n + 1)),
            }
        } else if key == "run" {
            for spec in value.split(',') {
                out.push("--run".into());
                out.push(spec.trim().into());
            }
        } else {
            out.push(format!("--{key}={value}"));
        }
    }
    Ok(out)
}
