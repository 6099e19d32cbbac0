use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dualtraj::Method;

mod commands;
mod plot;

/// Global-optimal discrete trajectories of quadratic ODE systems.
#[derive(Debug, Parser)]
#[command(name = "dualtraj", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate with an explicit method and report the trapezoidal objective.
    Integrate(IntegrateArgs),
    /// Minimize the trapezoidal least-squares objective.
    Solve(SolveArgs),
    /// Classify the system by the spectrum of its dual matrix pencil.
    Classify(ClassifyArgs),
    /// Run rk45, rk23 and a dual solve seeded by rk45, then compare.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Built-in system name (logistic, memristor, lorenz) or a system file.
    #[arg(long)]
    pub system: String,
    /// Number of grid steps.
    #[arg(long)]
    pub n: Option<usize>,
    /// Time horizon.
    #[arg(long = "T", id = "T")]
    pub horizon: Option<f64>,
    /// Initial state, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub y0: Option<Vec<f64>>,
    /// Built-in system parameter override, repeatable.
    #[arg(long = "param", value_name = "KEY=VAL", value_parser = parse_param)]
    pub params: Vec<(String, f64)>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker thread cap (defaults to all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RkTolerances {
    #[arg(long, default_value_t = dualtraj::integrate::DEFAULT_RTOL)]
    pub rtol: f64,
    #[arg(long, default_value_t = dualtraj::integrate::DEFAULT_ATOL)]
    pub atol: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum IntegrateMethod {
    Rk45,
    Rk23,
    ModifiedEuler,
}

#[derive(Debug, Args)]
pub struct IntegrateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value = "rk45")]
    pub method: IntegrateMethod,
    #[command(flatten)]
    pub tol: RkTolerances,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Start {
    Zero,
    Rk45,
    File(PathBuf),
}

fn parse_start(s: &str) -> Result<Start, String> {
    match s {
        "zero" => Ok(Start::Zero),
        "rk45" => Ok(Start::Rk45),
        _ => match s.strip_prefix("file:") {
            Some(p) if !p.is_empty() => Ok(Start::File(PathBuf::from(p))),
            _ => Err(format!("expected zero, rk45 or file:PATH, got `{s}`")),
        },
    }
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected KEY=VAL, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|_| format!("`{v}` is not a number"))?;
    Ok((k.trim().to_string(), v))
}

#[derive(Debug, Args)]
pub struct SolverFlags {
    /// primal-dual, levmarq or hybrid
    #[arg(long, default_value = "primal-dual")]
    pub method: Method,
    #[arg(long)]
    pub rho0: Option<f64>,
    #[arg(long)]
    pub rho_shrink: Option<f64>,
    #[arg(long)]
    pub rho_min: Option<f64>,
    /// Stop at rho-min instead of finishing with an unperturbed phase.
    #[arg(long)]
    pub no_unperturbed_finish: bool,
    /// Inner convergence tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Iteration cap per continuation phase.
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Centre of the perturbation term: the start trajectory or the origin.
    #[arg(long, value_enum, default_value = "start")]
    pub anchor: AnchorArg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AnchorArg {
    Start,
    Origin,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub solver: SolverFlags,
    /// Initial trajectory: zero, rk45 or file:PATH (a trajectory CSV).
    #[arg(long, default_value = "zero", value_parser = parse_start)]
    pub start: Start,
    /// Skip the SVG plots.
    #[arg(long)]
    pub no_plot: bool,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Number of sampled pencil directions.
    #[arg(long, default_value_t = dualtraj::classify::DEFAULT_BUDGET)]
    pub budget: usize,
    #[arg(long, default_value_t = dualtraj::classify::DEFAULT_CLASSIFY_TOL)]
    pub tol: f64,
    /// Write the retained eigenvalue samples to this CSV.
    #[arg(long)]
    pub samples: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub solver: SolverFlags,
    #[command(flatten)]
    pub tol: RkTolerances,
    /// Skip the rk23 run and the divergence curve.
    #[arg(long)]
    pub no_rk23: bool,
    #[arg(long)]
    pub no_plot: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Integrate(a) => commands::integrate(a),
        Command::Solve(a) => commands::solve(a),
        Command::Classify(a) => commands::classify(a),
        Command::Compare(a) => commands::compare(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code_for(&e))
        }
    }
}
