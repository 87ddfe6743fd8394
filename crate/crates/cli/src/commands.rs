use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use optcal::crosstalk::{effective_frequency, ChainParams};
use optcal::estimator::EstimateResult;
use optcal::fisher::VarianceModel;
use optcal::harness::{BudgetSweep, CrosstalkSweep, RobustnessSweep, ShotRatioSweep, SweepResult, SweepSpec};
use optcal::planner::{default_variance, ShotAllocation, StrategyKind};
use optcal::sampler::sample_multi_with;
use optcal::signal::{ModelFamily, Param, Quadrature, RamseyModel};
use optcal::{
    build_chain_protocol, build_strategy, crb, fisher_matrix, fit_least_squares, load_graph, optimize_plan, sample,
    tile, validate_plan, CouplingGraph, Model, Plan, PlannerConfig, Samples,
};
use serde::{Deserialize, Serialize};

use crate::config::{self, FitBlock, PlanBlock, RunConfig, SimulateBlock, TileBlock};
use crate::error::CliError;

/// Settings shared by every command.
pub struct Common {
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Common {
    fn path(&self, name: &str) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.out_dir)
            .map_err(|e| CliError::runtime(e).context(format!("creating {}", self.out_dir.display())))?;
        Ok(self.out_dir.join(name))
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::runtime(e).context(format!("writing {}", path.display())))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(CliError::runtime)?;
    writeln!(w).and_then(|_| w.flush()).map_err(CliError::runtime)
}

/// Parses `x`, `y` or `xy`.
pub fn parse_quadratures(s: &str) -> Result<Vec<Quadrature>, String> {
    let mut out = Vec::new();
    for c in s.chars().filter(|c| !matches!(c, ',' | ' ')) {
        let q: Quadrature = c.to_string().parse().map_err(|e: optcal::Error| e.to_string())?;
        if !out.contains(&q) {
            out.push(q);
        }
    }
    if out.is_empty() {
        return Err("no quadrature given".into());
    }
    Ok(out)
}

pub fn parse_strategy(name: &str, n_times: Option<usize>) -> Result<StrategyKind, CliError> {
    match name {
        "single-time-xy" => Ok(StrategyKind::SingleTimeXY),
        "two-time-optimal-x" => Ok(StrategyKind::TwoTimeOptimalX),
        "equally-spaced-x" => Ok(StrategyKind::EquallySpacedX {
            n_times: n_times.unwrap_or(20),
        }),
        other => Err(CliError::usage(format!(
            "unknown strategy `{other}` (single-time-xy, two-time-optimal-x, equally-spaced-x)"
        ))),
    }
}

fn default_free(model: &Model) -> Vec<Param> {
    match model.family() {
        ModelFamily::PureDecay => vec![Param::Amplitude, Param::Gamma],
        _ => vec![Param::Omega, Param::Gamma],
    }
}

/// What `plan` writes and `simulate` reads.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanFile {
    pub guess: Model,
    pub free: Vec<Param>,
    pub variance: VarianceModel,
    pub plan: Plan,
    /// Predicted standard deviation per free parameter.
    pub crb_std: BTreeMap<Param, f64>,
}

pub fn plan(cfg: PlanBlock, flags: PlanBlock, common: &Common) -> Result<(), CliError> {
    let model = cfg.model_block().merge(flags.model_block()).build()?;
    let free = flags.free.or(cfg.free).unwrap_or_else(|| default_free(&model));
    let default_alloc = match model.family() {
        ModelFamily::PureDecay => ShotAllocation::EqualPinned,
        _ => ShotAllocation::Free,
    };
    let base = PlannerConfig::default();
    let planner = PlannerConfig {
        max_times: flags.max_times.or(cfg.max_times).unwrap_or(base.max_times),
        total_shots: flags.shots.or(cfg.shots).unwrap_or(base.total_shots),
        merge_tolerance: flags
            .merge_tolerance
            .or(cfg.merge_tolerance)
            .unwrap_or(base.merge_tolerance),
        quadratures: flags.quadratures.or(cfg.quadratures).unwrap_or(base.quadratures),
        optimizer_restarts: flags.restarts.or(cfg.restarts).unwrap_or(base.optimizer_restarts),
        time_bounds: flags.time_bounds.or(cfg.time_bounds),
        variance: flags.variance.or(cfg.variance),
        shots: flags.shot_allocation.or(cfg.shot_allocation).unwrap_or(default_alloc),
        seed: common.seed,
        ..base
    };
    planner.validate()?;
    let plan = optimize_plan(&model, &free, &planner)?;
    let variance = planner.variance.unwrap_or_else(|| default_variance(&model));
    let bound = crb(&fisher_matrix(&model, &free, &plan, variance)?)?;
    let crb_std: BTreeMap<Param, f64> = bound
        .labels
        .iter()
        .zip(&bound.per_param_variance_bound)
        .map(|(&p, &v)| (p, v.sqrt()))
        .collect();

    let path = common.path("plan.json")?;
    write_json(
        &path,
        &PlanFile {
            guess: model,
            free,
            variance,
            plan: plan.clone(),
            crb_std: crb_std.clone(),
        },
    )?;
    println!(
        "plan for {} ({} shots), {variance:?} variance",
        model.describe(),
        plan.total_shots()
    );
    println!("{:>12}  {:>10}  {:>8}", "time", "quadrature", "shots");
    for e in &plan.entries {
        println!("{:>12.6}  {:>10}  {:>8}", e.time, e.quadrature.to_string(), e.shots);
    }
    for (p, s) in &crb_std {
        println!("CRB std {p}: {s:.6e}");
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn read_samples(path: &Path) -> Result<Samples, CliError> {
    let r = open(path)?;
    let is_json = path.extension().is_some_and(|e| e == "json");
    let res = if is_json {
        Samples::from_json_reader(r)
    } else {
        Samples::from_csv_reader(r)
    };
    res.map_err(|e| CliError::from(e).context(path.display()))
}

fn write_samples(path: &Path, data: &Samples, json: bool) -> Result<(), CliError> {
    let mut w = create(path)?;
    if json {
        data.to_json_writer(&mut w)?;
    } else {
        data.to_csv_writer(&mut w)?;
    }
    w.flush().map_err(CliError::runtime)
}

pub fn simulate(cfg: SimulateBlock, flags: SimulateBlock, common: &Common) -> Result<(), CliError> {
    let format = flags
        .format
        .clone()
        .or(cfg.format.clone())
        .unwrap_or_else(|| "csv".into());
    let json = match format.as_str() {
        "csv" => false,
        "json" => true,
        other => return Err(CliError::usage(format!("unknown format `{other}` (csv, json)"))),
    };
    let ext = if json { "json" } else { "csv" };
    if let Some(chain_path) = flags.chain.clone().or(cfg.chain.clone()) {
        return simulate_chain(&chain_path, cfg, flags, common, json, ext);
    }

    let truth = cfg.model_block().merge(flags.model_block()).build()?;
    let plan_path = flags
        .plan
        .or(cfg.plan)
        .ok_or_else(|| CliError::usage("--plan or --chain is required"))?;
    let file: PlanFile = serde_json::from_reader(open(&plan_path)?)
        .map_err(|e| CliError::usage(format!("{}: {e}", plan_path.display())))?;
    if file.guess.family() != truth.family() {
        return Err(CliError::usage(format!(
            "plan {} was made for the {} model but the true parameters describe a {} model",
            plan_path.display(),
            file.guess.family(),
            truth.family()
        )));
    }
    let data = sample(&truth, &file.plan, common.seed)?;
    let path = common.path(&format!("samples.{ext}"))?;
    write_samples(&path, &data, json)?;
    println!(
        "{} shots of {} → {}",
        data.total_shots(),
        truth.describe(),
        path.display()
    );
    Ok(())
}

fn simulate_chain(
    chain_path: &Path,
    cfg: SimulateBlock,
    flags: SimulateBlock,
    common: &Common,
    json: bool,
    ext: &str,
) -> Result<(), CliError> {
    let chain: ChainParams<f64> = serde_json::from_reader(open(chain_path)?)
        .map_err(|e| CliError::usage(format!("{}: {e}", chain_path.display())))?;
    chain.validate().map_err(CliError::config)?;
    let fixed: Option<Plan> = match flags.plan.or(cfg.plan) {
        Some(p) => {
            let file: PlanFile =
                serde_json::from_reader(open(&p)?).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?;
            Some(file.plan)
        }
        None => None,
    };
    let strategy = parse_strategy(
        flags.strategy.or(cfg.strategy).as_deref().unwrap_or("single-time-xy"),
        flags.n_times.or(cfg.n_times),
    )?;
    let budget = flags.budget_per_qubit.or(cfg.budget_per_qubit).unwrap_or(10_000);
    let dir = common.path("samples")?;
    fs::create_dir_all(&dir).map_err(CliError::runtime)?;
    let mut written = 0;
    for (e, exp) in build_chain_protocol(chain.n_qubits())?.iter().enumerate() {
        let plan_for = |i: usize| match &fixed {
            Some(p) => Ok(p.clone()),
            None => {
                let w = effective_frequency(&chain, &exp.roles, i)?;
                build_strategy(&strategy, &RamseyModel::two_param(w, chain.gammas[i]), budget, None)
            }
        };
        let sets = sample_multi_with(exp, e as u64, &chain, plan_for, common.seed)?;
        for (i, set) in sets.iter().enumerate() {
            if let Some(set) = set {
                write_samples(&dir.join(format!("exp{}_q{i}.{ext}", e + 1)), set, json)?;
                written += 1;
            }
        }
    }
    println!(
        "{written} sample sets for a {}-qubit chain → {}",
        chain.n_qubits(),
        dir.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct FitRecord {
    samples: PathBuf,
    estimate: EstimateResult<f64>,
}

pub fn fit(cfg: FitBlock, flags: FitBlock, common: &Common) -> Result<(), CliError> {
    let init = cfg.model_block().merge(flags.model_block()).build()?;
    let frozen = flags.frozen.or(cfg.frozen).unwrap_or_default();
    let files = flags
        .samples
        .filter(|v| !v.is_empty())
        .or(cfg.samples)
        .ok_or_else(|| CliError::usage("--samples is required"))?;
    let mut records = Vec::new();
    for path in files {
        let data = read_samples(&path)?;
        let estimate =
            fit_least_squares(&init, &data, &frozen).map_err(|e| CliError::from(e).context(path.display()))?;
        let values: Vec<String> = estimate.params.iter().map(|(p, v)| format!("{p}={v:.6}")).collect();
        let status = if estimate.converged {
            "converged"
        } else {
            "NOT converged"
        };
        println!(
            "{}: {} ({status}, mse {:.3e})",
            path.display(),
            values.join(", "),
            estimate.objective
        );
        records.push(FitRecord {
            samples: path,
            estimate,
        });
    }
    let out = common.path("fit.json")?;
    write_json(&out, &records)?;
    println!("wrote {}", out.display());
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepKind {
    RmseVsBudget,
    Robustness,
    CrosstalkScaling,
    ShotRatio,
}

impl SweepKind {
    fn name(self) -> &'static str {
        match self {
            SweepKind::RmseVsBudget => "rmse-vs-budget",
            SweepKind::Robustness => "robustness",
            SweepKind::CrosstalkScaling => "crosstalk-scaling",
            SweepKind::ShotRatio => "shot-ratio",
        }
    }
}

pub fn sweep(
    kind: SweepKind,
    cfg: &mut RunConfig,
    trials: Option<usize>,
    seed: Option<u64>,
    common: &Common,
) -> Result<(), CliError> {
    let block = cfg.sweep.take();
    let spec = match kind {
        SweepKind::RmseVsBudget => {
            let mut s: BudgetSweep = config::sweep_block(block)?;
            s.trials = trials.unwrap_or(s.trials);
            s.seed = seed.unwrap_or(s.seed);
            SweepSpec::RmseVsBudget(s)
        }
        SweepKind::Robustness => {
            let mut s: RobustnessSweep = config::sweep_block(block)?;
            s.trials = trials.unwrap_or(s.trials);
            s.seed = seed.unwrap_or(s.seed);
            SweepSpec::Robustness(s)
        }
        SweepKind::CrosstalkScaling => {
            let mut s: CrosstalkSweep = config::sweep_block(block)?;
            s.trials = trials.unwrap_or(s.trials);
            s.seed = seed.unwrap_or(s.seed);
            SweepSpec::CrosstalkScaling(s)
        }
        SweepKind::ShotRatio => {
            if trials.is_some() {
                return Err(CliError::usage("the shot-ratio sweep has no trials"));
            }
            let mut s: ShotRatioSweep = config::sweep_block(block)?;
            s.planner.seed = seed.unwrap_or(s.planner.seed);
            SweepSpec::ShotRatio(s)
        }
    };
    spec.validate()?;
    let result: SweepResult = spec.run()?;
    let csv = common.path(&format!("{}.csv", kind.name()))?;
    let mut w = create(&csv)?;
    result.to_csv_writer(&mut w)?;
    w.flush().map_err(CliError::runtime)?;
    let sidecar = common.path(&format!("{}.json", kind.name()))?;
    write_json(&sidecar, &result.sidecar(&spec))?;
    let flagged = result.rows.iter().filter(|r| r.flagged()).count();
    println!(
        "{} rows ({flagged} flagged) → {} + {}",
        result.rows.len(),
        csv.display(),
        sidecar.display()
    );
    Ok(())
}

pub fn tile_cmd(cfg: TileBlock, flags: TileBlock, common: &Common) -> Result<(), CliError> {
    let generator = flags.generator.or(cfg.generator);
    let graph_path = flags.graph.or(cfg.graph);
    let need = |v: Option<usize>, name: &str| v.ok_or_else(|| CliError::usage(format!("--{name} is required")));
    let graph = match (graph_path, generator.as_deref()) {
        (Some(_), Some(_)) => return Err(CliError::usage("give either --graph or --generator, not both")),
        (Some(p), None) => {
            let text =
                fs::read_to_string(&p).map_err(|e| CliError::usage(format!("cannot read {}: {e}", p.display())))?;
            load_graph(&text).map_err(|e| CliError::from(e).context(p.display()))?
        }
        (None, Some("path")) => CouplingGraph::path(need(flags.n.or(cfg.n), "n")?)?,
        (None, Some("grid")) => CouplingGraph::grid(
            need(flags.width.or(cfg.width), "width")?,
            need(flags.height.or(cfg.height), "height")?,
        )?,
        (None, Some("heavy-hex")) => CouplingGraph::heavy_hex(need(flags.distance.or(cfg.distance), "distance")?)?,
        (None, Some("random")) => CouplingGraph::random(
            need(flags.n.or(cfg.n), "n")?,
            flags.p.or(cfg.p).ok_or_else(|| CliError::usage("--p is required"))?,
            common.seed,
        )?,
        (None, Some(other)) => {
            return Err(CliError::usage(format!(
                "unknown generator `{other}` (path, grid, heavy-hex, random)"
            )))
        }
        (None, None) => return Err(CliError::usage("--graph or --generator is required")),
    };
    let effort = config::effort(
        flags.effort.or(cfg.effort).as_deref(),
        flags.node_limit.or(cfg.node_limit),
    )?;
    let plan = tile(&graph, effort)?;
    if plan.exhaustive_complete == Some(false) {
        log::warn!("exhaustive search hit its node limit; the plan may not be minimal");
    }
    let violations = validate_plan(&graph, &plan);
    let path = common.path("tiling.json")?;
    write_json(&path, &plan)?;
    println!(
        "{} qubits, {} couplings, max degree {}: {} experiments",
        graph.n,
        graph.edges.len(),
        graph.max_degree(),
        plan.len()
    );
    for (k, e) in plan.experiments.iter().enumerate() {
        let roles: String = e
            .roles
            .iter()
            .map(|r| {
                serde_json::to_value(r)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_owned))
                    .unwrap_or_default()
            })
            .collect();
        println!("  {}: {roles} ({} targets)", k + 1, e.targets.len());
    }
    if generator.as_deref() == Some("heavy-hex") && plan.len() != 4 {
        println!("note: heavy-hex tiled in {} experiments, not 4", plan.len());
    }
    println!("wrote {}", path.display());
    if violations.is_empty() {
        println!("validation: ok");
        Ok(())
    } else {
        for v in &violations {
            println!("validation: {v}");
        }
        Err(CliError::runtime(anyhow::anyhow!(
            "{} tiling violations",
            violations.len()
        )))
    }
}
