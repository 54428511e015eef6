//! `biquad`: build, inspect, apply and check bilinear quadrature rules.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Bilinear quadrature rules from the command line.
///
/// Exit status is 0 on success, 1 when a validation check fails and 2 on
/// usage, configuration or input errors.
#[derive(Debug, Parser)]
#[command(name = "biquad", version, about)]
struct Cli {
    /// Worker threads for the optimizer and benchmarks (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimize a rule and write it to a file.
    Build(BuildArgs),
    /// Build rules for a range of degrees and print one row per degree.
    Table(TableArgs),
    /// Print a summary of a rule file.
    Info(RuleArg),
    /// Approximate projection coefficients from function values at the rule's points.
    Project(ProjectArgs),
    /// Re-check exactness and σ of a rule file.
    Validate(RuleArg),
    /// Transport a rule through an affine map.
    Pushforward(PushforwardArgs),
    /// Mean relative projection error of a rule on a random function ensemble.
    Bench(BenchArgs),
    /// Gauss, trapezoid, circle lower-bound and Lobatto recovery checks.
    Theorems(TheoremArgs),
}

#[derive(Debug, Args)]
struct SpaceArgs {
    /// triangle, square, disk, interval or circle.
    #[arg(long)]
    domain: String,

    /// Interval endpoints `a,b` (interval domain only; default -1,1).
    #[arg(long, allow_hyphen_values = true)]
    bounds: Option<String>,

    /// Inner product: l2 or h1.
    #[arg(long, default_value = "l2")]
    ip: String,

    /// H¹ coefficient A(x): one, 1+x^2 or exp.
    #[arg(long, default_value = "one")]
    h1_weight: String,
}

#[derive(Debug, Args)]
struct OptArgs {
    /// JSON optimizer configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long)]
    seed: Option<u64>,

    /// Number of multistart runs.
    #[arg(long)]
    starts: Option<usize>,
}

#[derive(Debug, Args)]
struct BuildArgs {
    #[command(flatten)]
    space: SpaceArgs,

    /// Total degree n (frequency for the circle).
    #[arg(long)]
    degree: usize,

    #[command(flatten)]
    opt: OptArgs,

    #[arg(short, long)]
    output: PathBuf,

    /// Print the row as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct TableArgs {
    #[command(flatten)]
    space: SpaceArgs,

    #[arg(long, default_value_t = 0)]
    min_degree: usize,

    #[arg(long)]
    max_degree: usize,

    #[command(flatten)]
    opt: OptArgs,

    /// Save each built rule as `<domain>-<n>.rule` in this directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,

    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct RuleArg {
    #[arg(long)]
    rule: PathBuf,
}

#[derive(Debug, Args)]
struct ProjectArgs {
    #[arg(long)]
    rule: PathBuf,

    /// File of whitespace- or comma-separated values, `-` for stdin.
    #[arg(long)]
    values: PathBuf,
}

#[derive(Debug, Args)]
struct PushforwardArgs {
    #[arg(long)]
    rule: PathBuf,

    /// Target triangle `x0,y0,x1,y1,x2,y2` for a triangle rule.
    #[arg(long, allow_hyphen_values = true, conflicts_with_all = ["linear", "translation"])]
    vertices: Option<String>,

    /// Row-major linear part of the map.
    #[arg(long, allow_hyphen_values = true, requires = "translation")]
    linear: Option<String>,

    #[arg(long, allow_hyphen_values = true, requires = "linear")]
    translation: Option<String>,

    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    rule: PathBuf,

    /// pprime<N>, c or tp.
    #[arg(long)]
    ensemble: String,

    #[arg(long, default_value_t = biquad_core::bench::DEFAULT_SAMPLES)]
    count: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Exactness degree of the reference rule for exact coefficients.
    #[arg(long, default_value_t = biquad_core::bench::DEFAULT_REF_DEGREE)]
    ref_degree: usize,

    /// Also write the report as JSON to this file.
    #[arg(short, long)]
    output: Option<PathBuf>,

    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct TheoremArgs {
    #[command(flatten)]
    opt: OptArgs,

    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match commands::run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
