//! `quadreg`: represent, register and benchmark point clouds with quadric
//! primitives.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use quadreg::Error;

/// Exit status of a registration that ran but did not find a transform.
pub const EXIT_FAILED: u8 = 2;
/// Exit status for unreadable or malformed input.
pub const EXIT_INPUT: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "quadreg", version, about = "Quadric-based global point cloud registration")]
pub struct Cli {
    /// TOML configuration; unspecified keys keep their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every randomized step (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Include wall-clock timings in JSON output (makes it nondeterministic).
    #[arg(long, global = true)]
    pub timings: bool,
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Reduce a cloud to its quadric representation.
    Represent(RepresentArgs),
    /// Register a source cloud onto a target cloud.
    Register(RegisterArgs),
    /// Generate synthetic scene pairs with ground truth.
    Synth(SynthArgs),
    /// Register every pair of a pair list and report metrics.
    Bench(BenchArgs),
    /// Build loop-closure or odometry pairs from a trajectory.
    Pairs(PairsArgs),
    /// Print the effective configuration as TOML.
    Config,
}

#[derive(Args, Debug)]
pub struct RepresentArgs {
    /// Input cloud (.ply or .pcd).
    pub cloud: PathBuf,
    /// Per-point semantic labels, one integer per line.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Output file; `.json` selects JSON, anything else the text format.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct RegisterArgs {
    /// Source cloud (.ply/.pcd) or representation text from `represent`.
    pub source: PathBuf,
    /// Target cloud (.ply/.pcd) or representation text.
    pub target: PathBuf,
    #[arg(long)]
    pub source_labels: Option<PathBuf>,
    #[arg(long)]
    pub target_labels: Option<PathBuf>,
    /// Result JSON; printed to stdout when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Synthetic scene parameters (TOML); defaults are used when omitted.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Number of scene pairs; pair k uses seed `seed + k`.
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    /// Output directory (created if missing).
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Pair list JSON from `pairs` or `synth`.
    #[arg(long)]
    pub pairs: PathBuf,
    /// Directory with one cloud per frame, named `{frame:06}.ply` or `.pcd`
    /// and optionally `{frame:06}.labels`.
    #[arg(long)]
    pub clouds: PathBuf,
    /// Report JSON.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Per-pair CSV for plotting.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PairMode {
    Loop,
    Odo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Easy,
    Medium,
    Hard,
}

#[derive(Args, Debug)]
pub struct PairsArgs {
    /// KITTI-style pose file.
    #[arg(long)]
    pub poses: PathBuf,
    #[arg(long, value_enum)]
    pub mode: PairMode,
    /// Loop difficulty preset; overridden by --d-min/--d-max.
    #[arg(long, value_enum)]
    pub difficulty: Option<Preset>,
    #[arg(long)]
    pub d_min: Option<f64>,
    #[arg(long)]
    pub d_max: Option<f64>,
    /// Minimum frame separation for loop pairs.
    #[arg(long, default_value_t = 100)]
    pub t_gap: usize,
    /// Target frame distance for odometry pairs, meters.
    #[arg(long, default_value_t = 5.0)]
    pub distance: f64,
    /// Keep at most this many pairs, spread uniformly by index.
    #[arg(long)]
    pub max_pairs: Option<usize>,
    /// Pair list JSON; printed to stdout when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

/// Whether an error stems from the inputs rather than from registration.
fn is_input_error(err: &anyhow::Error) -> bool {
    err.chain().any(|e| {
        matches!(
            e.downcast_ref::<Error>(),
            Some(Error::Parse { .. } | Error::Io { .. } | Error::InvalidInput(_) | Error::Config(_))
        ) || e.is::<std::io::Error>()
            || e.is::<serde_json::Error>()
            || e.is::<toml::de::Error>()
    })
}

/// The error chain joined by `: `, skipping causes already spelled out by
/// their parent's message.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let msg = cause.to_string();
        if !out.ends_with(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(if is_input_error(&e) { EXIT_INPUT } else { EXIT_FAILED })
        }
    }
}
