//! Experiment drivers: strategy evaluation, capacity and budget sweeps, and
//! the load-shedding replay. Cells and trials run on the rayon pool; every
//! random draw comes from a named sub-stream of one seed, so results do not
//! depend on scheduling.

use misgrid_core::attack::{evaluate_trial, select_seeds, AttackOutcome, AttackSettings, Selection, Strategy};
use misgrid_core::construct::set_line_capacities;
use misgrid_core::diffusion::SeedSet;
use misgrid_core::powerflow::run_cascade;
use misgrid_core::protect::{attacked_state, cls_replay};
use misgrid_core::rng::{derive_seed, indexed_stream, stream};
use misgrid_core::{Result, Scenario};
use rayon::prelude::*;
use serde::Serialize;

/// Copy of `scenario` with capacities recalibrated to `factor`.
pub fn with_capacity(scenario: &Scenario, factor: f64) -> Result<Scenario> {
    let mut s = scenario.clone();
    set_line_capacities(&mut s.grid, factor)?;
    s.params.capacity_factor = factor;
    Ok(s)
}

/// Evaluate `seeds` over `trials` diffusion and cascade realizations in
/// parallel. The same `seed` gives the same realizations for every seed set.
pub fn evaluate_parallel(scenario: &Scenario, seeds: &SeedSet, trials: usize, seed: u64) -> Result<AttackOutcome> {
    let runs = (0..trials as u64)
        .into_par_iter()
        .map(|i| evaluate_trial(scenario, seeds, seed, i))
        .collect::<Result<Vec<_>>>()?;
    AttackOutcome::summarize(seeds.clone(), runs)
}

/// Select seeds with `strategy` and evaluate them.
pub fn run_strategy(
    scenario: &Scenario,
    strategy: Strategy,
    k: usize,
    settings: &AttackSettings,
    trials: usize,
    seed: u64,
) -> Result<(Selection, AttackOutcome)> {
    let mut rng = stream(derive_seed(seed, "select", k as u64), strategy.name());
    let selection = select_seeds(strategy, scenario, k, settings, &mut rng)?;
    let outcome = evaluate_parallel(scenario, &selection.seeds, trials, derive_seed(seed, "evaluate", 0))?;
    Ok((selection, outcome))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityRow {
    pub strategy: String,
    pub capacity_factor: f64,
    pub mean_failed_pct: Option<f64>,
    pub stderr: Option<f64>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedsRow {
    pub strategy: String,
    pub k: usize,
    pub mean_failed_pct: Option<f64>,
    pub stderr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClsRow {
    pub round: usize,
    #[serde(rename = "yield")]
    pub yield_: f64,
}

/// One row per `(strategy, factor)`, strategy-major. A failing cell fills
/// the error column instead of aborting the sweep.
pub fn sweep_capacity(
    scenario: &Scenario,
    strategies: &[Strategy],
    factors: &[f64],
    k: usize,
    settings: &AttackSettings,
    trials: usize,
    seed: u64,
) -> Vec<CapacityRow> {
    let cells: Vec<(Strategy, f64)> = strategies.iter().flat_map(|&s| factors.iter().map(move |&f| (s, f))).collect();
    cells
        .into_par_iter()
        .map(|(strategy, factor)| {
            let result = with_capacity(scenario, factor).and_then(|s| run_strategy(&s, strategy, k, settings, trials, seed));
            match result {
                Ok((_, o)) => CapacityRow {
                    strategy: strategy.to_string(),
                    capacity_factor: factor,
                    mean_failed_pct: Some(100.0 * o.mean_failed_fraction),
                    stderr: Some(100.0 * o.failed_fraction_stderr),
                    error: String::new(),
                },
                Err(e) => CapacityRow {
                    strategy: strategy.to_string(),
                    capacity_factor: factor,
                    mean_failed_pct: None,
                    stderr: None,
                    error: e.to_string(),
                },
            }
        })
        .collect()
}

/// One row per `(strategy, k)`, strategy-major, at the scenario's capacity.
pub fn sweep_seeds(
    scenario: &Scenario,
    strategies: &[Strategy],
    budgets: &[usize],
    settings: &AttackSettings,
    trials: usize,
    seed: u64,
) -> Result<Vec<SeedsRow>> {
    let cells: Vec<(Strategy, usize)> = strategies.iter().flat_map(|&s| budgets.iter().map(move |&k| (s, k))).collect();
    cells
        .into_par_iter()
        .map(|(strategy, k)| {
            let (_, o) = run_strategy(scenario, strategy, k, settings, trials, seed)?;
            Ok(SeedsRow {
                strategy: strategy.to_string(),
                k,
                mean_failed_pct: Some(100.0 * o.mean_failed_fraction),
                stderr: Some(100.0 * o.failed_fraction_stderr),
            })
        })
        .collect()
}

/// Result of the load-shedding experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ClsRun {
    pub selection: Selection,
    /// Index of the diffusion realization that produced the cascade.
    pub attempt: u64,
    /// Rounds of the uncontrolled cascade that removed lines.
    pub depth: usize,
    pub rows: Vec<ClsRow>,
}

/// Select seeds, then draw diffusion realizations until one triggers a
/// cascade removing lines in at least `min_depth` rounds, and replay it
/// with shedding before each round. `None` when `attempts` draws fail.
pub fn cls_experiment(
    scenario: &Scenario,
    strategy: Strategy,
    k: usize,
    settings: &AttackSettings,
    min_depth: usize,
    attempts: u64,
    seed: u64,
) -> Result<Option<ClsRun>> {
    let mut rng = stream(derive_seed(seed, "select", k as u64), strategy.name());
    let selection = select_seeds(strategy, scenario, k, settings, &mut rng)?;
    for attempt in 0..attempts {
        let mut draw = indexed_stream(seed, "cls", attempt);
        let attacked = attacked_state(scenario, &selection.seeds, &mut draw)?;
        let depth = run_cascade(&mut attacked.clone(), scenario.params.alpha)?.depth();
        if depth < min_depth {
            continue;
        }
        let rows = cls_replay(&attacked, scenario.params.alpha)?
            .into_iter()
            .map(|(round, yield_)| ClsRow { round, yield_ })
            .collect();
        return Ok(Some(ClsRun { selection, attempt, depth, rows }));
    }
    Ok(None)
}

/// Serialize rows as CSV with a header line.
pub fn to_csv<T: Serialize>(rows: &[T]) -> std::result::Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_headers() {
        let rows = [ClsRow { round: 1, yield_: 0.5 }, ClsRow { round: 2, yield_: 0.25 }];
        assert_eq!(to_csv(&rows).unwrap(), "round,yield\n1,0.5\n2,0.25\n");
        let row = CapacityRow { strategy: "gsa".into(), capacity_factor: 1.1, mean_failed_pct: None, stderr: None, error: "x".into() };
        assert_eq!(to_csv(&[row]).unwrap(), "strategy,capacity_factor,mean_failed_pct,stderr,error\ngsa,1.1,,,x\n");
    }
}
