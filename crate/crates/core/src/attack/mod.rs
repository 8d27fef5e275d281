//! Seed selection strategies and the Monte-Carlo evaluation of an attack.

mod impact;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

pub use impact::{cic, minimum_attack_sets, CascadeImpact, PloadMethod, EXACT_MAX_BUSES, EXHAUSTIVE_MAX_CANDIDATES};

use crate::diffusion::{Diffuser, LiveEdgeSamples, SeedSet, TargetedGreedy};
use crate::milp::{build_spac_milp, solve_milp, GeneratorResponse, Status};
use crate::model::{failed_nodes, BusId, PowerGrid, Scenario, UserId};
use crate::powerflow::{apply_demand_changes, run_cascade};
use crate::rng::indexed_stream;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Strategy {
    Random,
    Gsa,
    SpaC,
    SpaS,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Random, Strategy::Gsa, Strategy::SpaC, Strategy::SpaS];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::Gsa => "gsa",
            Strategy::SpaC => "spa-c",
            Strategy::SpaS => "spa-s",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == lower || st.name().replace('-', "_") == lower)
            .ok_or_else(|| Error::Invalid(alloc::format!("unknown strategy {s:?}")))
    }
}

/// Knobs shared by the strategies.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackSettings {
    /// Live-edge samples behind every influence estimate.
    pub trials: usize,
    /// Fraction of an attack set's users the seeds must reach in expectation.
    pub coverage_goal: f64,
    /// Branch-and-bound node budget per MILP.
    pub node_budget: usize,
    pub pload: PloadMethod,
    pub response: GeneratorResponse,
    /// Live-edge samples behind each expected-yield estimate.
    pub yield_samples: usize,
}

impl Default for AttackSettings {
    fn default() -> Self {
        AttackSettings {
            trials: 2000,
            coverage_goal: 0.9,
            node_budget: 20_000,
            pload: PloadMethod::Auto,
            response: GeneratorResponse::default(),
            yield_samples: 200,
        }
    }
}

/// Seeds chosen by a strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub strategy: Strategy,
    pub seeds: SeedSet,
    /// SPA-C found no usable certificate and ran GSA instead.
    pub fell_back: bool,
    /// Bus failures the strategy expects (SPA-C objective, SPA-S tally).
    pub predicted_failures: Option<usize>,
}

fn excluded(scenario: &Scenario) -> Vec<UserId> {
    scenario.params.utility_user.into_iter().collect()
}

/// `k` seeds aimed at the users of `k` uniformly chosen demand buses.
pub fn random_attack<R: Rng + ?Sized>(scenario: &Scenario, k: usize, settings: &AttackSettings, rng: &mut R) -> Result<SeedSet> {
    let demand = scenario.grid.demand_buses();
    let picked: Vec<BusId> = demand.choose_multiple(rng, k.min(demand.len())).copied().collect();
    let targets = scenario.project_to_users(&picked);
    let samples = LiveEdgeSamples::sample(&scenario.social, settings.trials, rng);
    Ok(TargetedGreedy::new(&samples, &targets).excluding(&excluded(scenario)).run(k, 1.0).seeds)
}

/// Influence maximization over every user coupled to a bus.
pub fn gsa<R: Rng + ?Sized>(scenario: &Scenario, k: usize, settings: &AttackSettings, rng: &mut R) -> Result<SeedSet> {
    let skip = excluded(scenario);
    let targets: Vec<UserId> = scenario.coupling.users().into_iter().filter(|u| !skip.contains(u)).collect();
    let samples = LiveEdgeSamples::sample(&scenario.social, settings.trials, rng);
    Ok(TargetedGreedy::new(&samples, &targets).excluding(&excluded(scenario)).run(k, 1.0).seeds)
}

/// Pick the certificates that jointly fail the most buses within `k` seeds.
pub fn spa_c<R: Rng + ?Sized>(scenario: &Scenario, k: usize, settings: &AttackSettings, rng: &mut R) -> Result<Selection> {
    let impacts = cic(scenario, &scenario.grid, &SeedSet::new(), settings, rng)?;
    let useful: Vec<&CascadeImpact> = impacts.iter().filter(|c| c.reachable && !c.nodes.is_empty()).collect();
    let fallback = |rng: &mut R| -> Result<Selection> {
        Ok(Selection { strategy: Strategy::SpaC, seeds: gsa(scenario, k, settings, rng)?, fell_back: true, predicted_failures: None })
    };
    if useful.is_empty() {
        return fallback(rng);
    }
    let seed_sets: Vec<Vec<UserId>> = useful.iter().map(|c| c.seeds.clone()).collect();
    let failure_sets: Vec<Vec<BusId>> = useful.iter().map(|c| c.nodes.iter().copied().collect()).collect();
    let model = build_spac_milp(&seed_sets, &failure_sets, k)?;
    let solution = solve_milp(&model.lp, settings.node_budget)?;
    if !solution.has_point() || !matches!(solution.status, Status::Optimal | Status::BudgetExceeded) {
        return fallback(rng);
    }
    let seeds = SeedSet::from_users(model.seeds(&solution));
    let predicted = model.failed(&solution).len();
    if seeds.is_empty() && predicted == 0 {
        return fallback(rng);
    }
    Ok(Selection { strategy: Strategy::SpaC, seeds, fell_back: false, predicted_failures: Some(predicted) })
}

/// Greedy sequential planning: repeatedly commit the attack with the largest
/// cascade that still fits the remaining budget, replay it on a residual
/// grid, and recompute. Leftover budget goes to [`yield_greedy`].
pub fn spa_s<R: Rng + ?Sized>(scenario: &Scenario, k: usize, settings: &AttackSettings, rng: &mut R) -> Result<Selection> {
    let alpha = scenario.params.alpha;
    let mut residual = scenario.grid.clone();
    let mut seeds = SeedSet::new();
    let mut predicted = 0usize;
    loop {
        let mut impacts = cic(scenario, &residual, &seeds, settings, rng)?;
        impacts.retain(|c| c.reachable && !c.nodes.is_empty() && seeds.len() + c.seeds.len() <= k);
        impacts.sort_by(|a, b| {
            b.nodes.len().cmp(&a.nodes.len()).then(a.seeds.len().cmp(&b.seeds.len())).then(a.bus.cmp(&b.bus))
        });
        let Some(best) = impacts.into_iter().next() else { break };
        seeds.extend(best.seeds.iter().copied());
        let changes: Vec<(BusId, f64)> = best.pload.iter().map(|&b| (b, scenario.params.delta_for(b))).collect();
        apply_demand_changes(&mut residual, &changes)?;
        let before = failed_nodes(&residual);
        run_cascade(&mut residual, alpha)?;
        let after = failed_nodes(&residual);
        predicted += after.difference(&before).count();
        residual.isolate_buses(&after);
        if seeds.len() >= k {
            break;
        }
    }
    if seeds.len() < k {
        let extra = yield_greedy(scenario, &seeds, k - seeds.len(), settings, rng)?;
        seeds.extend(extra.iter());
    }
    Ok(Selection { strategy: Strategy::SpaS, seeds, fell_back: false, predicted_failures: Some(predicted) })
}

/// Final yield of the cascade after inflating the demand of `buses`.
fn attack_yield(scenario: &Scenario, buses: &[BusId]) -> Result<f64> {
    let mut grid = scenario.grid.clone();
    let changes: Vec<(BusId, f64)> = buses.iter().map(|&b| (b, scenario.params.delta_for(b))).collect();
    apply_demand_changes(&mut grid, &changes)?;
    Ok(run_cascade(&mut grid, scenario.params.alpha)?.final_yield)
}

/// Add up to `budget` users to `seeds`, each time the one that most lowers
/// the expected yield of the attack launched by the whole seed set. The
/// expectation runs over one batch of live-edge samples; stops early when
/// no user lowers it. Returns only the added users.
pub fn yield_greedy<R: Rng + ?Sized>(
    scenario: &Scenario,
    seeds: &SeedSet,
    budget: usize,
    settings: &AttackSettings,
    rng: &mut R,
) -> Result<SeedSet> {
    let samples = LiveEdgeSamples::sample(&scenario.social, settings.yield_samples, rng);
    let skip = excluded(scenario);
    let mut cache: BTreeMap<Vec<BusId>, f64> = BTreeMap::new();
    let mut expected = |set: &[UserId]| -> Result<f64> {
        let mut total = 0.0;
        for r in 0..samples.len() {
            let buses = scenario.project_to_buses(&samples.reached(r, set));
            total += match cache.get(&buses) {
                Some(&y) => y,
                None => {
                    let y = attack_yield(scenario, &buses)?;
                    cache.insert(buses, y);
                    y
                }
            };
        }
        Ok(total / samples.len() as f64)
    };
    let mut chosen: Vec<UserId> = seeds.as_slice().to_vec();
    let mut added = SeedSet::new();
    let mut current = expected(&chosen)?;
    for _ in 0..budget {
        let mut best: Option<(UserId, f64)> = None;
        for u in 0..scenario.social.node_count() {
            if chosen.contains(&u) || skip.contains(&u) {
                continue;
            }
            chosen.push(u);
            let y = expected(&chosen)?;
            chosen.pop();
            if y < current - 1e-12 && best.map_or(true, |(_, b)| y < b) {
                best = Some((u, y));
            }
        }
        let Some((u, y)) = best else { break };
        chosen.push(u);
        added.insert(u);
        current = y;
    }
    Ok(added)
}

/// Run `strategy` with budget `k`.
pub fn select_seeds<R: Rng + ?Sized>(
    strategy: Strategy,
    scenario: &Scenario,
    k: usize,
    settings: &AttackSettings,
    rng: &mut R,
) -> Result<Selection> {
    let plain = |seeds| Selection { strategy, seeds, fell_back: false, predicted_failures: None };
    match strategy {
        Strategy::Random => random_attack(scenario, k, settings, rng).map(plain),
        Strategy::Gsa => gsa(scenario, k, settings, rng).map(plain),
        Strategy::SpaC => spa_c(scenario, k, settings, rng),
        Strategy::SpaS => spa_s(scenario, k, settings, rng),
    }
}

/// One realization of the social diffusion followed by the grid cascade.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub index: u64,
    /// Users activated by the diffusion, seeds included.
    pub influenced: usize,
    /// Demand buses whose user was activated.
    pub attacked: Vec<BusId>,
    /// Demand buses failed by the cascade.
    pub failed: BTreeSet<BusId>,
    /// `failed` as a fraction of all demand buses.
    pub failed_fraction: f64,
    pub yield_: f64,
    pub rounds: usize,
}

/// Run trial `index`: the diffusion and cascade draw from the stream
/// `(seed, "trial", index)`.
pub fn evaluate_trial(scenario: &Scenario, seeds: &SeedSet, seed: u64, index: u64) -> Result<TrialOutcome> {
    let mut rng = indexed_stream(seed, "trial", index);
    let mut diffuser = Diffuser::new(&scenario.social);
    let active = diffuser.run(seeds.as_slice(), &mut rng).to_vec();
    let mut attacked = scenario.project_to_buses(&active);
    attacked.sort_unstable();
    let mut grid: PowerGrid = scenario.grid.clone();
    let changes: Vec<(BusId, f64)> = attacked.iter().map(|&b| (b, scenario.params.delta_for(b))).collect();
    apply_demand_changes(&mut grid, &changes)?;
    let outcome = run_cascade(&mut grid, scenario.params.alpha)?;
    let demand_buses = grid.demand_buses().len().max(1);
    Ok(TrialOutcome {
        index,
        influenced: active.len(),
        attacked,
        failed_fraction: outcome.failed_nodes.len() as f64 / demand_buses as f64,
        failed: outcome.failed_nodes,
        yield_: outcome.final_yield,
        rounds: outcome.rounds.len(),
    })
}

/// Summary of many independent trials.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackOutcome {
    pub seeds: SeedSet,
    pub trials: Vec<TrialOutcome>,
    pub mean_influenced: f64,
    pub mean_failed: f64,
    pub mean_failed_fraction: f64,
    /// Standard error of `mean_failed_fraction`.
    pub failed_fraction_stderr: f64,
    pub mean_yield: f64,
}

impl AttackOutcome {
    /// Aggregate trials that were run elsewhere (for example in parallel).
    pub fn summarize(seeds: SeedSet, mut trials: Vec<TrialOutcome>) -> Result<Self> {
        if trials.is_empty() {
            return Err(Error::invalid("need at least one trial"));
        }
        trials.sort_by_key(|t| t.index);
        let n = trials.len() as f64;
        let mean = |f: &dyn Fn(&TrialOutcome) -> f64| trials.iter().map(f).sum::<f64>() / n;
        let mean_failed_fraction = mean(&|t| t.failed_fraction);
        let var = if trials.len() > 1 {
            trials.iter().map(|t| { let d = t.failed_fraction - mean_failed_fraction; d * d }).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Ok(AttackOutcome {
            mean_influenced: mean(&|t| t.influenced as f64),
            mean_failed: mean(&|t| t.failed.len() as f64),
            mean_failed_fraction,
            failed_fraction_stderr: libm::sqrt(var / n),
            mean_yield: mean(&|t| t.yield_),
            seeds,
            trials,
        })
    }
}

/// Evaluate `seeds` over `trials` realizations.
pub fn evaluate_attack(scenario: &Scenario, seeds: &SeedSet, trials: usize, seed: u64) -> Result<AttackOutcome> {
    let runs = (0..trials as u64).map(|i| evaluate_trial(scenario, seeds, seed, i)).collect::<Result<Vec<_>>>()?;
    AttackOutcome::summarize(seeds.clone(), runs)
}

/// Human-readable label for a strategy result.
pub fn describe(selection: &Selection) -> String {
    let mut s = alloc::format!("{} seeds={:?}", selection.strategy, selection.seeds.as_slice());
    if selection.fell_back {
        s.push_str(" (fallback)");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        assert_eq!("SPA_S".parse::<Strategy>().unwrap(), Strategy::SpaS);
        assert!("bogus".parse::<Strategy>().is_err());
    }
}
