//! `topolip`: persistence diagrams, diagram distances, TopoLip reports,
//! closed-form bounds and empirical Lipschitz simulations from the command
//! line.
//!
//! Exit codes: 0 success, 2 usage or parameter error, 3 unusable input file,
//! 4 internal error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use topolip_core::Error;

#[derive(Debug, Parser)]
#[command(name = "topolip", version, about = "Layer-wise topological Lipschitz analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-layer persistence diagrams of a trace, written as CSV plus index.json.
    Ph(PhArgs),
    /// Wasserstein and bottleneck distances between two diagram files.
    Dist(DistArgs),
    /// Full TopoLip report of a trace.
    Run(RunArgs),
    /// Closed-form Lipschitz bounds for a preset or explicit parameters.
    Bounds(BoundsArgs),
    /// Empirical Lipschitz estimate of a mean-field map.
    Simulate(SimulateArgs),
    /// Compare two bound reports (files or preset names).
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
struct Output {
    /// Write the JSON result to this file instead of stdout.
    #[arg(long, conflicts_with = "out_dir")]
    out: Option<PathBuf>,
    /// Write results into this directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SamplingArgs {
    /// JSON config file: a pipeline config, or any report that embeds one
    /// under "config". Flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    max_points: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_dim: Option<usize>,
    /// Filtration cap; defaults to each layer's diameter.
    #[arg(long)]
    max_scale: Option<f64>,
}

#[derive(Debug, Args)]
struct PhArgs {
    /// Trace directory or manifest file.
    trace: PathBuf,
    #[command(flatten)]
    sampling: SamplingArgs,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Essential {
    Drop,
    Cap,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Combine {
    Sum,
    Max,
}

#[derive(Debug, Args)]
struct DistArgs {
    diagram_a: PathBuf,
    diagram_b: PathBuf,
    /// Wasserstein exponent; repeat for several.
    #[arg(long = "p", default_values_t = vec![1.0, 2.0])]
    p: Vec<f64>,
    #[arg(long, value_enum, default_value_t = Essential::Drop)]
    essential: Essential,
    #[arg(long, value_enum, default_value_t = Combine::Sum)]
    combine: Combine,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Trace directory or manifest file.
    trace: PathBuf,
    #[command(flatten)]
    sampling: SamplingArgs,
    /// Wasserstein exponent; repeat for several. Defaults to 1 and 2.
    #[arg(long = "p")]
    p: Vec<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    grid_size: Option<usize>,
    #[arg(long, value_enum)]
    essential: Option<Essential>,
    #[arg(long, value_enum)]
    combine: Option<Combine>,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    Attention,
    Convolution,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BlockArg {
    Transformer,
    Bottleneck,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    /// Start from a built-in configuration.
    #[arg(long)]
    preset: Option<String>,
    /// List the built-in presets and exit.
    #[arg(long)]
    list: bool,
    #[arg(long, value_enum)]
    kind: Option<Kind>,
    #[arg(long, value_enum)]
    block: Option<BlockArg>,
    #[arg(long, allow_hyphen_values = true)]
    sigma: Option<f64>,
    #[arg(long)]
    d: Option<usize>,
    /// Number of attention heads.
    #[arg(long = "heads", visible_alias = "M")]
    heads: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    t: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    s: Option<f64>,
    /// Half filter width; the filter side is 2k+1.
    #[arg(long)]
    k: Option<usize>,
    /// Channel counts; repeat for a ladder.
    #[arg(long = "channels", visible_alias = "C")]
    channels: Vec<usize>,
    #[arg(long, allow_hyphen_values = true)]
    gamma_inf: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    bn_lip: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    w1_norm: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    w2_norm: Option<f64>,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
enum MapKind {
    Identity,
    Attention,
    Conv,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = MapKind::Attention)]
    map: MapKind,
    /// Atom dimension for attention and identity maps.
    #[arg(long, default_value_t = 4)]
    d: usize,
    /// Atoms per measure.
    #[arg(long, default_value_t = 32)]
    n: usize,
    #[arg(long, default_value_t = 0.05, allow_hyphen_values = true)]
    sigma: f64,
    /// Support radius multiplier; defaults to 2 sqrt(d) (ball) or 2 (box).
    #[arg(long, allow_hyphen_values = true)]
    t: Option<f64>,
    /// Operator-norm slack for the attention bound; defaults to 3 sigma.
    #[arg(long, allow_hyphen_values = true)]
    s: Option<f64>,
    /// Channel count used for the conv weight variance and bound.
    #[arg(long = "channels", visible_alias = "C", default_value_t = 4)]
    channels: usize,
    #[arg(long, default_value_t = 0)]
    k: usize,
    /// Side of the square grid conv atoms live on.
    #[arg(long, default_value_t = 4)]
    grid: usize,
    #[arg(long, default_value_t = 200, allow_hyphen_values = true)]
    pairs: i64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Bound report JSON file or preset name.
    a: String,
    /// Bound report JSON file or preset name.
    b: String,
    #[command(flatten)]
    output: Output,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Dimension(_) | Error::Parameter(_) | Error::Usage(_) => 2,
        Error::Ingestion { .. } => 3,
        Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 2,
        Error::Io { .. } | Error::Json(_) => 4,
    }
}

fn configure_threads() -> Result<(), Error> {
    let Ok(raw) = std::env::var("TOPOLIP_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| Error::Parameter(format!("TOPOLIP_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Parameter(format!("cannot size the thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Ph(a) => commands::ph(a),
        Command::Dist(a) => commands::dist(a),
        Command::Run(a) => commands::run(a),
        Command::Bounds(a) => commands::bounds(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Compare(a) => commands::compare(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("topolip: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
