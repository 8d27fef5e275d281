//! The `misgrid` command line.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use misgrid_core::attack::{cic, AttackSettings, PloadMethod, Strategy};
use misgrid_core::construct::{build_scenario, WeightRange};
use misgrid_core::diffusion::SeedSet;
use misgrid_core::milp::GeneratorResponse;
use misgrid_core::rng::stream;
use misgrid_core::{Params, Scenario};
use serde::Serialize;

use crate::edgelist::parse_edge_list;
use crate::error::{AppError, IngestError};
use crate::experiments::{cls_experiment, run_strategy, sweep_capacity, sweep_seeds, to_csv, with_capacity};
use crate::matpower::read_grid;
use crate::scenario::{load_scenario, ScenarioDoc};

#[derive(Debug, Parser)]
#[command(name = "misgrid", version, about = "Misinformation attacks on social-network-coupled power grids")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Couple a MATPOWER case with a social edge list and write a scenario.
    BuildScenario(BuildArgs),
    /// Select seeds with one strategy and evaluate the attack.
    Attack(AttackArgs),
    /// Failed-node percentage per strategy and capacity factor.
    SweepCapacity(SweepCapacityArgs),
    /// Failed-node percentage per strategy and seed budget.
    SweepSeeds(SweepSeedsArgs),
    /// Yield against the round load shedding is applied in.
    Cls(ClsArgs),
    /// Summarize a scenario and the impact of attacking each bus.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct Source {
    /// Scenario document written by build-scenario.
    #[arg(long, conflicts_with_all = ["case", "edgelist"])]
    pub scenario: Option<PathBuf>,
    /// MATPOWER case (with --edgelist, builds the scenario on the fly).
    #[arg(long, requires = "edgelist")]
    pub case: Option<PathBuf>,
    /// Social edge list.
    #[arg(long, requires = "case")]
    pub edgelist: Option<PathBuf>,
    /// Fractional demand increase of an influenced customer.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Moving-average factor of the outage rule.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long = "rng-seed", default_value_t = 0)]
    pub rng_seed: u64,
}

#[derive(Debug, Args)]
pub struct Tuning {
    /// Live-edge samples per influence estimate.
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    /// Exact pload method: auto, exhaustive, milp or heuristic.
    #[arg(long, default_value = "auto", value_parser = parse_pload)]
    pub pload: PloadMethod,
    /// Generator response in the impact model: uniform or headroom.
    #[arg(long, default_value = "uniform", value_parser = parse_response)]
    pub response: GeneratorResponse,
    /// Branch-and-bound node budget.
    #[arg(long, default_value_t = 20_000)]
    pub node_budget: usize,
}

impl Tuning {
    fn settings(&self) -> AttackSettings {
        AttackSettings {
            trials: self.samples,
            node_budget: self.node_budget,
            pload: self.pload,
            response: self.response,
            ..AttackSettings::default()
        }
    }
}

fn parse_pload(s: &str) -> Result<PloadMethod, String> {
    match s {
        "auto" => Ok(PloadMethod::Auto),
        "exhaustive" => Ok(PloadMethod::Exhaustive),
        "milp" => Ok(PloadMethod::Milp),
        "heuristic" => Ok(PloadMethod::Heuristic),
        _ => Err(format!("unknown pload method {s:?}")),
    }
}

fn parse_response(s: &str) -> Result<GeneratorResponse, String> {
    match s {
        "uniform" => Ok(GeneratorResponse::Uniform),
        "headroom" => Ok(GeneratorResponse::Headroom),
        _ => Err(format!("unknown generator response {s:?}")),
    }
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse().map_err(|e: misgrid_core::Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub case: PathBuf,
    #[arg(long)]
    pub edgelist: PathBuf,
    #[arg(long, default_value_t = 0.25)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Line capacity as a multiple of the base flow.
    #[arg(long, default_value_t = 1.1)]
    pub capacity: f64,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long = "rng-seed", default_value_t = 0)]
    pub rng_seed: u64,
    /// Lower end of the uniform edge weights.
    #[arg(long, default_value_t = 0.0)]
    pub weight_lo: f64,
    /// Upper end of the uniform edge weights.
    #[arg(long, default_value_t = 1.0)]
    pub weight_hi: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    #[command(flatten)]
    pub source: Source,
    #[command(flatten)]
    pub tuning: Tuning,
    #[arg(long, value_parser = parse_strategy)]
    pub strategy: Strategy,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub capacity: Option<f64>,
    /// Evaluation trials.
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Summary JSON destination (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-trial records as JSON lines.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepCapacityArgs {
    #[command(flatten)]
    pub source: Source,
    #[command(flatten)]
    pub tuning: Tuning,
    #[arg(long, value_delimiter = ',', default_value = "random,gsa,spa-c,spa-s", value_parser = parse_strategy)]
    pub strategy: Vec<Strategy>,
    #[arg(long, value_delimiter = ',', default_value = "1.1,1.2,1.3,1.4,1.5")]
    pub capacity: Vec<f64>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepSeedsArgs {
    #[command(flatten)]
    pub source: Source,
    #[command(flatten)]
    pub tuning: Tuning,
    #[arg(long, value_delimiter = ',', default_value = "random,gsa,spa-c,spa-s", value_parser = parse_strategy)]
    pub strategy: Vec<Strategy>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8")]
    pub k: Vec<usize>,
    #[arg(long, default_value_t = 1.3)]
    pub capacity: f64,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClsArgs {
    #[command(flatten)]
    pub source: Source,
    #[command(flatten)]
    pub tuning: Tuning,
    #[arg(long, default_value = "spa-s", value_parser = parse_strategy)]
    pub strategy: Strategy,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub capacity: Option<f64>,
    /// Rounds with line removals the cascade must have.
    #[arg(long, default_value_t = 2)]
    pub min_depth: usize,
    /// Diffusion draws to try before giving up.
    #[arg(long, default_value_t = 200)]
    pub attempts: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub source: Source,
    #[command(flatten)]
    pub tuning: Tuning,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String, IngestError> {
    std::fs::read_to_string(path).map_err(|source| IngestError::Io { path: path.display().to_string(), source })
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), AppError> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn build(case: &Path, edgelist: &Path, params: Params, weights: WeightRange) -> Result<Scenario, AppError> {
    let imported = read_grid(&read(case)?, false)?;
    for w in &imported.warnings {
        eprintln!("warning: {}: {w}", case.display());
    }
    let social = parse_edge_list(&read(edgelist)?)?;
    Ok(build_scenario(imported.grid, &social, weights, params)?)
}

impl Source {
    fn load(&self) -> Result<Scenario, AppError> {
        let mut scenario = match (&self.scenario, &self.case, &self.edgelist) {
            (Some(path), _, _) => load_scenario(path)?,
            (None, Some(case), Some(edges)) => {
                let params = Params { rng_seed: self.rng_seed, ..Params::default() };
                build(case, edges, params, WeightRange::default())?
            }
            _ => return Err(AppError::Usage("give --scenario, or --case with --edgelist".into())),
        };
        if let Some(d) = self.delta {
            scenario.params.delta = d;
        }
        if let Some(a) = self.alpha {
            scenario.params.alpha = a;
        }
        scenario.params.validate()?;
        Ok(scenario)
    }
}

#[derive(Serialize)]
struct AttackSummary {
    strategy: String,
    k: usize,
    seeds: Vec<u64>,
    fell_back: bool,
    predicted_failures: Option<usize>,
    trials: usize,
    mean_failed_pct: f64,
    stderr: f64,
    mean_failed: f64,
    mean_influenced: f64,
    mean_yield: f64,
}

#[derive(Serialize)]
struct TraceLine {
    trial: u64,
    influenced: usize,
    attacked: Vec<u64>,
    failed: Vec<u64>,
    failed_fraction: f64,
    #[serde(rename = "yield")]
    yield_: f64,
    rounds: usize,
}

#[derive(Serialize)]
struct ImpactLine {
    bus: u64,
    reachable: bool,
    pload: Vec<u64>,
    nodes: Vec<u64>,
    seeds: Vec<u64>,
}

#[derive(Serialize)]
struct Report {
    buses: usize,
    lines: usize,
    demand_buses: usize,
    generator_buses: usize,
    total_demand: f64,
    users: usize,
    social_edges: usize,
    params: crate::scenario::ParamsDoc,
    impacts: Vec<ImpactLine>,
}

fn bus_labels(s: &Scenario, buses: impl IntoIterator<Item = usize>) -> Vec<u64> {
    buses.into_iter().map(|b| s.grid.bus(b).label).collect()
}

fn user_labels(s: &Scenario, users: impl IntoIterator<Item = usize>) -> Vec<u64> {
    users.into_iter().map(|u| s.social.label(u)).collect()
}

/// Execute one parsed command.
pub fn run(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::BuildScenario(a) => {
            let params = Params {
                delta: a.delta,
                alpha: a.alpha,
                capacity_factor: a.capacity,
                k: a.k,
                rng_seed: a.rng_seed,
                ..Params::default()
            };
            params.validate()?;
            let scenario = build(&a.case, &a.edgelist, params, WeightRange { lo: a.weight_lo, hi: a.weight_hi })?;
            emit(a.out.as_deref(), &(ScenarioDoc::from_scenario(&scenario).to_json() + "\n"))
        }
        Command::Attack(a) => {
            let mut scenario = a.source.load()?;
            if let Some(c) = a.capacity {
                scenario = with_capacity(&scenario, c)?;
            }
            let k = a.k.unwrap_or(scenario.params.k);
            let (selection, outcome) =
                run_strategy(&scenario, a.strategy, k, &a.tuning.settings(), a.trials, a.source.rng_seed)?;
            if let Some(path) = &a.trace {
                let mut text = String::new();
                for t in &outcome.trials {
                    let line = TraceLine {
                        trial: t.index,
                        influenced: t.influenced,
                        attacked: bus_labels(&scenario, t.attacked.iter().copied()),
                        failed: bus_labels(&scenario, t.failed.iter().copied()),
                        failed_fraction: t.failed_fraction,
                        yield_: t.yield_,
                        rounds: t.rounds,
                    };
                    text.push_str(&serde_json::to_string(&line).expect("trace lines serialize"));
                    text.push('\n');
                }
                std::fs::write(path, text)?;
            }
            let summary = AttackSummary {
                strategy: a.strategy.to_string(),
                k,
                seeds: user_labels(&scenario, selection.seeds.iter()),
                fell_back: selection.fell_back,
                predicted_failures: selection.predicted_failures,
                trials: a.trials,
                mean_failed_pct: 100.0 * outcome.mean_failed_fraction,
                stderr: 100.0 * outcome.failed_fraction_stderr,
                mean_failed: outcome.mean_failed,
                mean_influenced: outcome.mean_influenced,
                mean_yield: outcome.mean_yield,
            };
            emit(a.out.as_deref(), &(serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n"))
        }
        Command::SweepCapacity(a) => {
            if a.strategy.is_empty() || a.capacity.is_empty() || a.trials == 0 {
                return Err(AppError::Usage("strategies, factors and trials must be non-empty".into()));
            }
            let scenario = a.source.load()?;
            let k = a.k.unwrap_or(scenario.params.k);
            let rows = sweep_capacity(&scenario, &a.strategy, &a.capacity, k, &a.tuning.settings(), a.trials, a.source.rng_seed);
            for r in rows.iter().filter(|r| !r.error.is_empty()) {
                eprintln!("warning: {} at {}: {}", r.strategy, r.capacity_factor, r.error);
            }
            emit(a.out.as_deref(), &to_csv(&rows)?)
        }
        Command::SweepSeeds(a) => {
            if a.strategy.is_empty() || a.k.is_empty() || a.trials == 0 {
                return Err(AppError::Usage("strategies, budgets and trials must be non-empty".into()));
            }
            let scenario = with_capacity(&a.source.load()?, a.capacity)?;
            let rows = sweep_seeds(&scenario, &a.strategy, &a.k, &a.tuning.settings(), a.trials, a.source.rng_seed)?;
            emit(a.out.as_deref(), &to_csv(&rows)?)
        }
        Command::Cls(a) => {
            let mut scenario = a.source.load()?;
            if let Some(c) = a.capacity {
                scenario = with_capacity(&scenario, c)?;
            }
            let k = a.k.unwrap_or(scenario.params.k);
            let run = cls_experiment(&scenario, a.strategy, k, &a.tuning.settings(), a.min_depth, a.attempts, a.source.rng_seed)?;
            let Some(run) = run else {
                return Err(AppError::Diagnostic(format!(
                    "no cascade with {} or more rounds in {} draws",
                    a.min_depth, a.attempts
                )));
            };
            emit(a.out.as_deref(), &to_csv(&run.rows)?)
        }
        Command::Report(a) => {
            let scenario = a.source.load()?;
            let mut rng = stream(a.source.rng_seed, "report");
            let impacts = cic(&scenario, &scenario.grid, &SeedSet::new(), &a.tuning.settings(), &mut rng)?;
            let report = Report {
                buses: scenario.grid.bus_count(),
                lines: scenario.grid.line_count(),
                demand_buses: scenario.grid.demand_buses().len(),
                generator_buses: scenario.grid.generator_buses().len(),
                total_demand: scenario.grid.total_demand(),
                users: scenario.social.node_count(),
                social_edges: scenario.social.edge_count(),
                params: ScenarioDoc::from_scenario(&scenario).params,
                impacts: impacts
                    .iter()
                    .map(|c| ImpactLine {
                        bus: scenario.grid.bus(c.bus).label,
                        reachable: c.reachable,
                        pload: bus_labels(&scenario, c.pload.iter().copied()),
                        nodes: bus_labels(&scenario, c.nodes.iter().copied()),
                        seeds: user_labels(&scenario, c.seeds.iter().copied()),
                    })
                    .collect(),
            };
            emit(a.out.as_deref(), &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"))
        }
    }
}
