//! `covloc` command-line driver.

mod commands;
mod rows;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use covloc::Variant;

#[derive(Debug, Parser)]
#[command(name = "covloc", version, about = "Multi-period stochastic covering location toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a random instance.
    Generate(GenerateArgs),
    /// Run the Lagrangian heuristic and emit one row per (instance, variant).
    Solve(SolveArgs),
    /// Enumerate small instances: OPT, EVPI and VMS.
    Exact(ExactArgs),
    /// Write the MILP as MPS or CPLEX-LP text.
    Export(ExportArgs),
    /// Score a first-stage solution (or a solve/exact JSON output).
    Evaluate(EvaluateArgs),
    /// Compile a special-case file into an instance.
    Reduce(ReduceArgs),
    /// Aggregate solve CSVs into mean-gap summaries.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Mps,
    Lp,
}

/// Generator shape shared by `generate` and `solve`.
#[derive(Debug, Clone, Args)]
pub struct ShapeArgs {
    /// Number of locations and demand points.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of periods.
    #[arg(long = "T")]
    pub periods: Option<usize>,
    /// Number of scenarios.
    #[arg(long = "S")]
    pub scenarios: Option<usize>,
    /// Generator seed; COVLOC_SEED overrides it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Consecutive seeds to generate, starting at the seed.
    #[arg(long, default_value_t = 1)]
    pub count: u64,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub shape: ShapeArgs,
    /// Output file, or directory when generating several instances. Stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Instance files; when empty, instances come from the generator flags.
    pub instances: Vec<PathBuf>,
    #[command(flatten)]
    pub shape: ShapeArgs,
    /// Comma-separated variants, or `all`.
    #[arg(long, default_value = "1.iii", value_parser = parse_variants)]
    pub variant: VariantList,
    /// CSV is appended to; JSON is overwritten. Stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct ExactArgs {
    pub instances: Vec<PathBuf>,
    /// Maximum number of first-stage plans to enumerate.
    #[arg(long, default_value_t = covloc::exact::DEFAULT_BUDGET)]
    pub budget: u64,
    /// Seconds allowed per enumeration.
    #[arg(long = "time-limit", default_value_t = 600.0)]
    pub time_limit: f64,
    /// Skip the wait-and-see and static solves.
    #[arg(long = "opt-only")]
    pub opt_only: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    pub instance: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Mps)]
    pub format: Format,
    /// Linking rows between surplus and shortage indicators.
    #[arg(long, default_value = "ww")]
    pub linking: String,
    /// Write the model in operating-level variables instead of the cumulative form.
    #[arg(long)]
    pub operating: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    pub instance: PathBuf,
    /// JSON with `z` and `zp`, or any object holding `first_stage` (and optionally `second_stage`).
    #[arg(long)]
    pub solution: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReduceArgs {
    pub case: PathBuf,
    /// Instance output; the offset is printed as JSON on stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// CSV files written by `solve`.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone)]
pub struct VariantList(pub Vec<Variant>);

fn parse_variants(s: &str) -> Result<VariantList, String> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(VariantList(Variant::ALL.to_vec()));
    }
    let mut out: Vec<Variant> = s.split(',').map(|p| p.trim().parse()).collect::<Result<_, _>>()?;
    out.dedup();
    if out.is_empty() {
        return Err("no variant given".into());
    }
    Ok(VariantList(out))
}

fn emit_error(kind: &str, message: &str) {
    let line = serde_json::json!({ "error": kind, "message": message });
    eprintln!("{line}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            emit_error("usage", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Solve(a) => commands::solve(&a),
        Command::Exact(a) => commands::exact(&a),
        Command::Export(a) => commands::export(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Reduce(a) => commands::reduce(&a),
        Command::Report(a) => commands::report(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let chain: Vec<String> = e.chain().map(ToString::to_string).collect();
            emit_error("failed", &chain.join(": "));
            ExitCode::FAILURE
        }
    }
}
