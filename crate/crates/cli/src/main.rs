mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use thiserror::Error;

use output::Table;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unparseable or invalid input; exit code 2.
    #[error("{0}")]
    Input(String),
    /// A check that ran to completion and found a violation; exit code 1.
    #[error("{0}")]
    Assertion(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Assertion(_) => 1,
        }
    }
}

/// What a command produced: a summary for stdout, a full-precision report
/// and a table for `--out`, and whether every assertion held.
pub struct Outcome {
    pub summary: Value,
    pub full: Value,
    pub table: Table,
    pub ok: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "gconvex", version, about = "g-expectations, g-convexity checks and Jensen verification")]
pub struct Cli {
    /// Format of the file written by --out.
    #[arg(long, value_enum, default_value = "json", global = true)]
    pub format: Format,
    /// File receiving the full report (json) or the data table (csv).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for Monte Carlo paths.
    #[arg(long, env = "GCONVEX_SEED", default_value_t = 42, global = true)]
    pub seed: u64,
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide g-convexity, g-concavity or g-affinity of h under a generator.
    Check(CheckArgs),
    /// Solve the BSDE for a terminal payoff.
    Solve(SolveArgs),
    /// Run a batch of Jensen scenarios from a TOML file (the bundled catalog by default).
    Suite(SuiteArgs),
    /// Tabulate the g-convex envelope of phi.
    Envelope(EnvelopeArgs),
    /// Report generator flags and the characterization tests.
    Classify(ClassifyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ScanArgs {
    /// Horizon T; the scan uses t in {0, T/2, T}.
    #[arg(long = "T", default_value_t = 1.0)]
    pub horizon: f64,
    /// Dimension of z.
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    /// y scan as lo,hi,points.
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    pub y_range: Option<(f64, f64, usize)>,
    /// Scan of each z coordinate as lo,hi,points.
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    pub z_range: Option<(f64, f64, usize)>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub gen: String,
    /// Candidate h as an expression in y.
    #[arg(long, required_unless_present = "h_table", conflicts_with = "h_table")]
    pub h: Option<String>,
    /// Candidate h as a CSV of `y,value` rows on a uniform grid.
    #[arg(long)]
    pub h_table: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "convex")]
    pub mode: ModeArg,
    /// Expected decision; a mismatch exits with code 1.
    #[arg(long, value_enum)]
    pub expect: Option<DecisionArg>,
    #[command(flatten)]
    pub scan: ScanArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Convex,
    Concave,
    Affine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum DecisionArg {
    GConvex,
    GConcave,
    GAffine,
    Neither,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Pde,
    Mc,
    Both,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub gen: String,
    /// Terminal payoff as an expression in x.
    #[arg(long)]
    pub payoff: String,
    #[arg(long = "T", default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long, value_enum, default_value = "pde")]
    pub method: MethodArg,
    /// Starting point x0.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub x0: f64,
    /// Spatial nodes of the PDE grid.
    #[arg(long, default_value_t = 401)]
    pub nx: usize,
    /// PDE time steps; chosen from the stability relation when absent.
    #[arg(long)]
    pub nt: Option<usize>,
    /// PDE domain as lo,hi; the drift-widened Gaussian box when absent.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub domain: Option<(f64, f64)>,
    /// Monte Carlo paths.
    #[arg(long, default_value_t = 20_000)]
    pub paths: usize,
    /// Monte Carlo time steps.
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    /// Polynomial degree of the regression basis.
    #[arg(long, default_value_t = 4)]
    pub degree: usize,
    /// Time rows written to the surface table.
    #[arg(long, default_value_t = 101)]
    pub rows: usize,
}

#[derive(Debug, Args)]
pub struct SuiteArgs {
    /// Batch TOML; the bundled catalog when absent.
    pub batch: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EnvelopeArgs {
    #[arg(long)]
    pub gen: String,
    /// Function to envelope, as an expression in y.
    #[arg(long)]
    pub phi: String,
    /// Tabulation grid as lo,hi,points.
    #[arg(long, value_parser = parse_range, default_value = "-5,5,401", allow_hyphen_values = true)]
    pub grid: (f64, f64, usize),
    /// Candidate slopes as lo,hi,points; derived from phi when absent.
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    pub slopes: Option<(f64, f64, usize)>,
    #[command(flatten)]
    pub scan: ScanArgs,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub gen: String,
    /// Constant c of the periodicity test.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub shift: f64,
    #[command(flatten)]
    pub scan: ScanArgs,
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => Ok((num(a)?, num(b)?)),
        _ => Err(format!("expected lo,hi, got '{s}'")),
    }
}

fn parse_range(s: &str) -> Result<(f64, f64, usize), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b, n] => Ok((num(a)?, num(b)?, n.parse().map_err(|_| format!("bad point count '{n}'"))?)),
        _ => Err(format!("expected lo,hi,points, got '{s}'")),
    }
}

fn num(s: &str) -> Result<f64, String> {
    s.parse().map_err(|_| format!("bad number '{s}'"))
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Check(a) => commands::check(a),
        Command::Solve(a) => commands::solve(a, cli.seed),
        Command::Suite(a) => commands::suite(a),
        Command::Envelope(a) => commands::envelope(a),
        Command::Classify(a) => commands::classify(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(&CliError::Input(format!("cannot start {n} workers: {e}")));
        }
    }
    let outcome = match run(&cli) {
        Ok(o) => o,
        Err(e) => return fail(&e),
    };
    if let Some(path) = &cli.out {
        let contents = match cli.format {
            Format::Json => output::file_json(&outcome.full),
            Format::Csv => outcome.table.to_csv(),
        };
        if let Err(e) = output::write_file(path, &contents) {
            return fail(&e);
        }
    }
    print_json(output::round_summary(outcome.summary));
    if outcome.ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("error: {e}");
    print_json(json!({ "error": e.to_string(), "exit_code": e.code() }));
    ExitCode::from(e.code())
}

fn print_json(v: Value) {
    println!("{}", serde_json::to_string_pretty(&v).expect("JSON values serialize"));
}
