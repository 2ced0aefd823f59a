use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gpdps::potts::PottsNorm;

/// Primal-dual experiments for non-convex saddle-point problems.
///
/// Every command also reads `--config FILE`: one `key = value` per line,
/// `#` comments, keys spelled like the long flags. Flags on the command line win.
#[derive(Debug, Parser)]
#[command(name = "gpdps", version, propagate_version = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Huber-Potts denoising of a PGM or synthetic image.
    #[command(args_override_self = true)]
    Potts(PottsArgs),
    /// Elliptic Nash equilibrium with a manufactured solution.
    #[command(args_override_self = true)]
    Nash(NashArgs),
    /// Step-length bounds and the testing-condition checker.
    #[command(args_override_self = true)]
    Steps(StepsArgs),
    /// Numerical oracle suite.
    #[command(args_override_self = true)]
    Verify(VerifyArgs),
    /// Writes a seeded piecewise-constant test image.
    #[command(name = "gen-image", args_override_self = true)]
    GenImage(GenImageArgs),
}

pub fn parse_norm(s: &str) -> Result<PottsNorm, String> {
    s.parse().map_err(|e: gpdps::Error| e.to_string())
}

fn parse_depth(s: &str) -> Result<u8, String> {
    match s {
        "8" => Ok(8),
        "16" => Ok(16),
        _ => Err(format!("depth must be 8 or 16, got {s}")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    #[value(name = "paper-p1")]
    PaperP1,
    #[value(name = "paper-pinf")]
    PaperPinf,
}

#[derive(Debug, Clone, Args)]
pub struct SyntheticArgs {
    /// Shapes drawn on synthetic images.
    #[arg(long, default_value_t = 5)]
    pub shapes: usize,
    /// Noise deviation for synthetic images.
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
}

#[derive(Debug, Clone, Args)]
pub struct PottsArgs {
    /// Input image (P2/P5).
    #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
    pub input: Option<PathBuf>,
    /// Generate the input instead: rows, columns, seed.
    #[arg(long, num_args = 3, value_names = ["N1", "N2", "SEED"])]
    pub synthetic: Option<Vec<u64>>,
    #[command(flatten)]
    pub gen: SyntheticArgs,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub gamma: f64,
    /// Jump norm: 1 or inf.
    #[arg(long, default_value = "1", value_parser = parse_norm)]
    pub p: PottsNorm,
    /// Grid spacing.
    #[arg(long, default_value_t = 1.0)]
    pub h: f64,
    /// Use published step lengths instead of the calculator.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[command(flatten)]
    pub calc: PottsCalcArgs,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub iters: u64,
    /// Iterations of a separate reference run used for error columns.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub reference_iters: Option<u64>,
    /// Log every k-th iteration.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub log_every: u64,
    #[arg(long, default_value = "potts_out.pgm")]
    pub out: PathBuf,
    #[arg(long, default_value = "potts_reference.pgm")]
    pub reference_out: PathBuf,
    #[arg(long, default_value = "potts_log.csv")]
    pub csv: PathBuf,
}

/// Calculator inputs beyond `alpha`, `gamma` and `p`; unset values take the
/// calculator defaults.
#[derive(Debug, Clone, Args)]
pub struct PottsCalcArgs {
    /// Expected largest jump between neighbouring pixels.
    #[arg(long)]
    pub dynamic_range: Option<f64>,
    /// Over-approximation of gamma for bounding the dual solution.
    #[arg(long)]
    pub gamma_bar: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long = "gtilde-g")]
    pub gtilde_g: Option<f64>,
    #[arg(long = "gtilde-f")]
    pub gtilde_f: Option<f64>,
    /// Bound on the norm of the discrete gradient.
    #[arg(long)]
    pub l: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct NashArgs {
    /// Interior nodes per direction, one column each.
    #[arg(long, value_delimiter = ',', default_value = "63,127", value_parser = clap::value_parser!(u64).range(3..))]
    pub sizes: Vec<u64>,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub iters: u64,
    #[arg(long, default_value_t = 0.99)]
    pub tau: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub omega: f64,
    /// Control cost of both players.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Lower control bound.
    #[arg(long, default_value_t = -0.5, allow_negative_numbers = true)]
    pub a: f64,
    /// Upper control bound.
    #[arg(long, default_value_t = 0.5)]
    pub b: f64,
    #[arg(long, default_value = "nash.csv")]
    pub csv: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Regime {
    Constant,
    Accelerated,
    Linear,
    Potts,
}

#[derive(Debug, Clone, Args)]
pub struct StepsArgs {
    #[arg(value_enum)]
    pub regime: Regime,
    #[arg(long, required_if_eq("regime", "potts"))]
    pub alpha: Option<f64>,
    #[arg(long, required_if_eq("regime", "potts"))]
    pub gamma: Option<f64>,
    #[arg(long, default_value = "1", value_parser = parse_norm)]
    pub p: PottsNorm,
    #[command(flatten)]
    pub calc: PottsCalcArgs,
    #[arg(long, default_value_t = 1.0)]
    pub rk: f64,
    /// `L_x` at the dual solution.
    #[arg(long, default_value_t = 0.0)]
    pub lx: f64,
    /// `L_y` at the primal solution.
    #[arg(long, default_value_t = 0.0)]
    pub ly: f64,
    #[arg(long, default_value_t = 0.0)]
    pub lyx: f64,
    #[arg(long, default_value_t = 0.0)]
    pub lambda_x: f64,
    #[arg(long, default_value_t = 0.0)]
    pub lambda_y: f64,
    #[arg(long, default_value_t = 0.0)]
    pub xi_x: f64,
    #[arg(long, default_value_t = 0.0)]
    pub xi_y: f64,
    #[arg(long, default_value_t = 1.0)]
    pub theta_x: f64,
    #[arg(long, default_value_t = 1.0)]
    pub theta_y: f64,
    #[arg(long = "gamma-g", default_value_t = 0.0)]
    pub gamma_g: f64,
    #[arg(long = "gamma-f", default_value_t = 0.0)]
    pub gamma_f: f64,
    #[arg(long, default_value_t = 0.0)]
    pub rho_x: f64,
    #[arg(long, default_value_t = 0.0)]
    pub rho_y: f64,
    /// Initial or constant primal step; defaults to the computed bound.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Dual step; defaults to the largest admissible value.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Run the testing-condition checker on the generated steps.
    #[arg(long = "check-48")]
    pub check_48: bool,
    /// Number of step triples checked.
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub check_n: u64,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Run only these checks (comma separated).
    #[arg(long, value_delimiter = ',', value_parser = clap::builder::PossibleValuesParser::new(crate::verify_cmd::CHECKS))]
    pub only: Vec<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Samples per three-point check.
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub samples: u64,
    /// Extra three-point base point `x1,..:y1,..`.
    #[arg(long = "point")]
    pub points: Vec<String>,
    /// Also write the report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GenImageArgs {
    /// Rows and columns.
    #[arg(long, num_args = 2, value_names = ["N1", "N2"], default_values_t = [64, 64])]
    pub size: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub gen: SyntheticArgs,
    /// Write the noise-free image.
    #[arg(long)]
    pub clean: bool,
    /// Plain-text P2 instead of binary P5.
    #[arg(long)]
    pub ascii: bool,
    /// Bits per sample: 8 or 16.
    #[arg(long, default_value_t = 16, value_parser = parse_depth)]
    pub depth: u8,
    #[arg(long)]
    pub out: PathBuf,
}
