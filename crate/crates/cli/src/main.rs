//! `optcal`: plan, simulate, fit, benchmark and tile Ramsey calibrations.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use optcal::fisher::VarianceModel;
use optcal::planner::ShotAllocation;
use optcal::signal::{ModelFamily, Param};

use commands::{Common, SweepKind};
use config::{FitBlock, PlanBlock, RunConfig, SimulateBlock, TileBlock};
use error::{CliError, EXIT_USAGE};

#[derive(Parser)]
#[command(name = "optcal", version, about = "Optimal Ramsey calibration schedules")]
struct Cli {
    /// JSON run configuration with per-command blocks; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Top-level seed for every random draw.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for output files.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// More log output (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal measurement plan for a parameter guess.
    #[command(after_help = config::PLAN_KEYS)]
    Plan(PlanArgs),
    /// Sample shot outcomes for a plan or a chain protocol.
    #[command(after_help = config::SIMULATE_KEYS)]
    Simulate(SimulateArgs),
    /// Least-squares fit of sample files.
    #[command(after_help = config::FIT_KEYS)]
    Fit(FitArgs),
    /// Monte Carlo benchmark sweeps.
    #[command(after_help = config::SWEEP_KEYS)]
    Sweep(SweepArgs),
    /// Tile a coupling graph into crosstalk experiments.
    #[command(after_help = config::TILE_KEYS)]
    Tile(TileArgs),
}

#[derive(Args, Default)]
struct ModelArgs {
    /// Model family: two-param, five-param or pure-decay.
    #[arg(long, value_parser = parse_with::<ModelFamily>)]
    model: Option<ModelFamily>,
    #[arg(long, allow_negative_numbers = true)]
    omega: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    offset: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    phase: Option<f64>,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Free parameters, comma separated (omega, gamma, A, B, phi).
    #[arg(long, value_delimiter = ',', value_parser = parse_with::<Param>)]
    free: Option<Vec<Param>>,
    /// Quadratures to measure: x, y or xy.
    #[arg(long)]
    quadratures: Option<String>,
    /// Total shot budget.
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    max_times: Option<usize>,
    #[arg(long)]
    merge_tolerance: Option<f64>,
    #[arg(long)]
    restarts: Option<usize>,
    /// Per-shot variance: unit-shot or binomial.
    #[arg(long, value_parser = parse_with::<VarianceModel>)]
    variance: Option<VarianceModel>,
    /// free, equal or equal-pinned.
    #[arg(long, value_parser = parse_allocation)]
    shot_allocation: Option<ShotAllocation>,
    /// Time bounds as `lo,hi`.
    #[arg(long, value_parser = parse_pair)]
    time_bounds: Option<(f64, f64)>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Plan file written by `plan`.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Chain parameter file; samples every protocol experiment.
    #[arg(long)]
    chain: Option<PathBuf>,
    /// Per-qubit strategy for chain runs.
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    n_times: Option<usize>,
    #[arg(long)]
    budget_per_qubit: Option<u64>,
    /// csv or json.
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Sample files (CSV or JSON).
    #[arg(long, num_args = 1..)]
    samples: Vec<PathBuf>,
    /// Parameters held at their initial values, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_with::<Param>)]
    frozen: Option<Vec<Param>>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(value_enum)]
    kind: SweepKind,
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Args)]
struct TileArgs {
    /// Graph file `{"n": .., "edges": [[a, b], ..]}`.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// path, grid, heavy-hex or random.
    #[arg(long)]
    generator: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    distance: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    /// greedy or exhaustive.
    #[arg(long)]
    effort: Option<String>,
    #[arg(long)]
    node_limit: Option<u64>,
}

fn parse_with<T: std::str::FromStr<Err = optcal::Error>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: optcal::Error| e.to_string())
}

fn parse_allocation(s: &str) -> Result<ShotAllocation, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| format!("unknown shot allocation `{s}`"))
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected `lo,hi`")?;
    let f = |v: &str| v.trim().parse::<f64>().map_err(|e| e.to_string());
    Ok((f(a)?, f(b)?))
}

impl ModelArgs {
    fn fields(
        &self,
    ) -> (
        Option<ModelFamily>,
        Option<f64>,
        Option<f64>,
        Option<f64>,
        Option<f64>,
        Option<f64>,
    ) {
        (
            self.model,
            self.omega,
            self.gamma,
            self.amplitude,
            self.offset,
            self.phase,
        )
    }
}

macro_rules! with_model {
    ($block:ident { $($field:ident: $value:expr),* $(,)? }, $m:expr) => {{
        let (model, omega, gamma, amplitude, offset, phase) = $m.fields();
        $block { model, omega, gamma, amplitude, offset, phase, $($field: $value),* }
    }};
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(n) = cli.threads.or(cfg.threads) {
        if n == 0 {
            return Err(CliError::usage("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(CliError::runtime)?;
    }
    let common = Common {
        seed: cli.seed.or(cfg.seed).unwrap_or(0),
        out_dir: cli.out_dir.or(cfg.out_dir.take()).unwrap_or_else(|| PathBuf::from(".")),
    };
    match cli.command {
        Command::Plan(a) => {
            let flags = with_model!(
                PlanBlock {
                    free: a.free,
                    quadratures: a
                        .quadratures
                        .as_deref()
                        .map(commands::parse_quadratures)
                        .transpose()
                        .map_err(CliError::usage)?,
                    shots: a.shots,
                    max_times: a.max_times,
                    merge_tolerance: a.merge_tolerance,
                    restarts: a.restarts,
                    variance: a.variance,
                    shot_allocation: a.shot_allocation,
                    time_bounds: a.time_bounds,
                },
                a.model
            );
            commands::plan(cfg.plan.unwrap_or_default(), flags, &common)
        }
        Command::Simulate(a) => {
            let flags = with_model!(
                SimulateBlock {
                    plan: a.plan,
                    chain: a.chain,
                    strategy: a.strategy,
                    n_times: a.n_times,
                    budget_per_qubit: a.budget_per_qubit,
                    format: a.format,
                },
                a.model
            );
            commands::simulate(cfg.simulate.unwrap_or_default(), flags, &common)
        }
        Command::Fit(a) => {
            let flags = with_model!(
                FitBlock {
                    samples: Some(a.samples),
                    frozen: a.frozen,
                },
                a.model
            );
            commands::fit(cfg.fit.unwrap_or_default(), flags, &common)
        }
        Command::Sweep(a) => {
            let seed = cli.seed.or(cfg.seed);
            commands::sweep(a.kind, &mut cfg, a.trials, seed, &common)
        }
        Command::Tile(a) => {
            let flags = TileBlock {
                graph: a.graph,
                generator: a.generator,
                n: a.n,
                width: a.width,
                height: a.height,
                distance: a.distance,
                p: a.p,
                effort: a.effort,
                node_limit: a.node_limit,
            };
            commands::tile_cmd(cfg.tile.unwrap_or_default(), flags, &common)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
