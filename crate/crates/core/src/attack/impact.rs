//! Cascading impact of every live demand bus: the smallest set of demand
//! changes that disconnects it, the failures that set causes, and the social
//! seeds needed to trigger it.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::AttackSettings;
use crate::diffusion::{LiveEdgeSamples, SeedSet, TargetedGreedy};
use crate::milp::{build_cic_milp, solve_milp, CicOptions, ImpactFlows, Status};
use crate::model::{failed_nodes, BusId, PowerGrid, Scenario, UserId};
use crate::powerflow::{apply_demand_changes, balance_all, find_islands, run_cascade};
use crate::Result;

/// Largest island solved exactly.
pub const EXACT_MAX_BUSES: usize = 60;
/// Largest candidate count enumerated exhaustively.
pub const EXHAUSTIVE_MAX_CANDIDATES: usize = 22;

/// How the minimum attack set of each bus is found.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PloadMethod {
    /// Exhaustive for small islands, MILP for mid-size ones, heuristic above
    /// [`EXACT_MAX_BUSES`].
    #[default]
    Auto,
    /// Enumerate every attack subset of the island (one pass for all
    /// targets). Falls back to the MILP above [`EXHAUSTIVE_MAX_CANDIDATES`].
    Exhaustive,
    /// Branch-and-bound on the CIC model, one solve per target.
    Milp,
    /// Greedy construction and pruning on the affine flow response.
    Heuristic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeImpact {
    pub bus: BusId,
    /// `false` when no attack set within the model disconnects `bus`.
    pub reachable: bool,
    /// Minimum attack set, ascending.
    pub pload: Vec<BusId>,
    /// Demand buses failed by the cascade that `pload` triggers.
    pub nodes: BTreeSet<BusId>,
    /// Additional seeds needed to influence the users of `pload`.
    pub seeds: Vec<UserId>,
}

impl CascadeImpact {
    fn unreachable(bus: BusId) -> Self {
        CascadeImpact { bus, reachable: false, pload: Vec::new(), nodes: BTreeSet::new(), seeds: Vec::new() }
    }
}

/// Minimum attack set per target bus, `None` when unreachable.
pub fn minimum_attack_sets(
    grid: &PowerGrid,
    targets: &[BusId],
    options: &CicOptions,
    settings: &AttackSettings,
) -> Result<BTreeMap<BusId, Option<Vec<BusId>>>> {
    let mut out = BTreeMap::new();
    for island in find_islands(grid) {
        let here: Vec<BusId> = targets.iter().copied().filter(|t| island.binary_search(t).is_ok()).collect();
        if here.is_empty() {
            continue;
        }
        let flows = ImpactFlows::compute(grid, island[0], options)?;
        let exact = island.len() <= EXACT_MAX_BUSES;
        let small = flows.candidates.len() <= EXHAUSTIVE_MAX_CANDIDATES;
        let method = match settings.pload {
            PloadMethod::Auto if exact && small => PloadMethod::Exhaustive,
            PloadMethod::Auto if exact => PloadMethod::Milp,
            PloadMethod::Auto => PloadMethod::Heuristic,
            PloadMethod::Exhaustive if !small => PloadMethod::Milp,
            m => m,
        };
        match method {
            PloadMethod::Exhaustive => out.extend(enumerate_attack_sets(grid, &flows, &here)),
            PloadMethod::Milp => {
                for &t in &here {
                    let model = build_cic_milp(grid, t, options)?;
                    let s = solve_milp(&model.lp, settings.node_budget)?;
                    let set = (s.status == Status::Optimal).then(|| model.attack_set(&s.values));
                    out.insert(t, set);
                }
            }
            _ => {
                for &t in &here {
                    out.insert(t, greedy_attack_set(grid, &flows, t));
                }
            }
        }
    }
    Ok(out)
}

/// Buses of `flows.island` cut off from every generator once the lines
/// flagged in `failable` are removed.
fn cut_off(grid: &PowerGrid, flows: &ImpactFlows, failable: &[bool], scratch: &mut Vec<usize>) -> Vec<BusId> {
    scratch.clear();
    scratch.resize(grid.bus_count(), 0);
    let mut stack: Vec<BusId> = flows.generators.clone();
    for &g in &stack {
        scratch[g] = 1;
    }
    // adjacency restricted to the island's live, surviving lines
    while let Some(b) = stack.pop() {
        for &l in grid.incident_lines(b) {
            let line = grid.line(l);
            if !line.alive {
                continue;
            }
            let k = match flows.lines.binary_search(&l) {
                Ok(k) => k,
                Err(_) => continue,
            };
            if failable[k] {
                continue;
            }
            let other = if line.from == b { line.to } else { line.from };
            if scratch[other] == 0 {
                scratch[other] = 1;
                stack.push(other);
            }
        }
    }
    flows.island.iter().copied().filter(|&b| scratch[b] == 0).collect()
}

fn failable_lines(flows: &ImpactFlows, flow: &[f64]) -> Vec<bool> {
    flow.iter()
        .enumerate()
        .map(|(k, &f)| {
            let q = flows.alpha * f + (flows.base[k] - flows.alpha * flows.base_flow[k]);
            q.abs() >= flows.capacity[k] * (1.0 - 1e-9)
        })
        .collect()
}

/// One Gray-code pass over every attack subset of the island's candidates.
/// A target is disconnected by a subset when the lines that subset can
/// overload in one round separate it from every generator; the smallest
/// such subset wins, ties going to the lexicographically smallest.
fn enumerate_attack_sets(grid: &PowerGrid, flows: &ImpactFlows, targets: &[BusId]) -> BTreeMap<BusId, Option<Vec<BusId>>> {
    let mut best: BTreeMap<BusId, Option<Vec<BusId>>> = targets.iter().map(|&t| (t, None)).collect();
    if flows.generators.is_empty() {
        for v in best.values_mut() {
            *v = Some(Vec::new());
        }
        return best;
    }
    let n = flows.candidates.len();
    let nl = flows.lines.len();
    let limit = flows.uplift_limit * (1.0 + 1e-9) + 1e-9;
    let mut flow = flows.base_flow.clone();
    let mut chosen = vec![false; n];
    let mut size = 0usize;
    let mut uplift = 0.0;
    let mut scratch = Vec::new();
    let mut last_mask: Option<Vec<bool>> = None;
    let mut last_cut: Vec<BusId> = Vec::new();

    for step in 0u64..(1u64 << n) {
        if step > 0 {
            let c = step.trailing_zeros() as usize;
            let sign = if chosen[c] { -1.0 } else { 1.0 };
            chosen[c] = !chosen[c];
            if chosen[c] {
                size += 1;
            } else {
                size -= 1;
            }
            uplift += sign * flows.increase[c];
            let row = &flows.flow_sensitivity[c * nl..(c + 1) * nl];
            for (f, s) in flow.iter_mut().zip(row) {
                *f += sign * s;
            }
        }
        if uplift > limit {
            continue;
        }
        let mask = failable_lines(flows, &flow);
        if last_mask.as_ref() != Some(&mask) {
            last_cut = cut_off(grid, flows, &mask, &mut scratch);
            last_mask = Some(mask);
        }
        for b in &last_cut {
            let Some(entry) = best.get_mut(b) else { continue };
            let better = match entry {
                None => true,
                Some(cur) => {
                    size < cur.len() || (size == cur.len() && subset(flows, &chosen).as_slice() < cur.as_slice())
                }
            };
            if better {
                *entry = Some(subset(flows, &chosen));
            }
        }
    }
    best
}

fn subset(flows: &ImpactFlows, chosen: &[bool]) -> Vec<BusId> {
    flows.candidates.iter().zip(chosen).filter(|(_, &c)| c).map(|(&b, _)| b).collect()
}

/// Greedy attack set for one target: add the candidate that most raises the
/// distance-weighted line loading around the target until it is cut off,
/// then drop members that are not needed.
fn greedy_attack_set(grid: &PowerGrid, flows: &ImpactFlows, target: BusId) -> Option<Vec<BusId>> {
    if flows.generators.is_empty() {
        return Some(Vec::new());
    }
    let n = flows.candidates.len();
    let nl = flows.lines.len();
    let mut scratch = Vec::new();
    let weight = line_weights(grid, flows, target);
    let flow_of = |chosen: &[bool]| -> Vec<f64> {
        let mut f = flows.base_flow.clone();
        for c in (0..n).filter(|&c| chosen[c]) {
            for (k, v) in f.iter_mut().enumerate() {
                *v += flows.flow_sensitivity[c * nl + k];
            }
        }
        f
    };
    let uplift_of = |chosen: &[bool]| -> f64 { (0..n).filter(|&c| chosen[c]).map(|c| flows.increase[c]).sum() };
    let limit = flows.uplift_limit * (1.0 + 1e-9) + 1e-9;
    let cuts = |chosen: &[bool], scratch: &mut Vec<usize>| -> bool {
        uplift_of(chosen) <= limit && cut_off(grid, flows, &failable_lines(flows, &flow_of(chosen)), scratch).contains(&target)
    };
    let score = |chosen: &[bool]| -> f64 {
        flow_of(chosen)
            .iter()
            .enumerate()
            .map(|(k, &f)| {
                let q = flows.alpha * f + (flows.base[k] - flows.alpha * flows.base_flow[k]);
                let cap = flows.capacity[k].max(1e-12);
                weight[k] * (q.abs() / cap).min(1.0)
            })
            .sum()
    };

    let mut chosen = vec![false; n];
    let mut current = score(&chosen);
    while !cuts(&chosen, &mut scratch) {
        let mut best: Option<(usize, f64)> = None;
        for c in 0..n {
            if chosen[c] {
                continue;
            }
            chosen[c] = true;
            if uplift_of(&chosen) <= limit {
                let s = score(&chosen);
                if s > current + 1e-12 && best.map_or(true, |(_, b)| s > b) {
                    best = Some((c, s));
                }
            }
            chosen[c] = false;
        }
        let (c, s) = best?;
        chosen[c] = true;
        current = s;
    }
    for c in (0..n).rev() {
        if chosen[c] {
            chosen[c] = false;
            if !cuts(&chosen, &mut scratch) {
                chosen[c] = true;
            }
        }
    }
    Some(subset(flows, &chosen))
}

/// `2^-hops` from the target to the nearer end of each island line.
fn line_weights(grid: &PowerGrid, flows: &ImpactFlows, target: BusId) -> Vec<f64> {
    let mut hops = vec![usize::MAX; grid.bus_count()];
    hops[target] = 0;
    let mut queue = alloc::collections::VecDeque::from([target]);
    while let Some(b) = queue.pop_front() {
        for nb in grid.live_neighbors(b) {
            if hops[nb] == usize::MAX {
                hops[nb] = hops[b] + 1;
                queue.push_back(nb);
            }
        }
    }
    flows
        .lines
        .iter()
        .map(|&l| {
            let line = grid.line(l);
            let h = hops[line.from].min(hops[line.to]).min(60);
            libm::pow(0.5, h as f64)
        })
        .collect()
}

/// Run the impact calculator on `grid` (a possibly damaged copy of the
/// scenario grid) with `current` seeds already chosen.
pub fn cic<R: Rng + ?Sized>(
    scenario: &Scenario,
    grid: &PowerGrid,
    current: &SeedSet,
    settings: &AttackSettings,
    rng: &mut R,
) -> Result<Vec<CascadeImpact>> {
    let mut grid = grid.clone();
    balance_all(&mut grid);
    let failed = failed_nodes(&grid);
    let targets: Vec<BusId> = grid.demand_buses().into_iter().filter(|b| !failed.contains(b)).collect();
    let mut options = CicOptions::from_params(&scenario.params);
    options.response = settings.response;
    let sets = minimum_attack_sets(&grid, &targets, &options, settings)?;

    let samples = LiveEdgeSamples::sample(&scenario.social, settings.trials, rng);
    let excluded: Vec<UserId> = scenario.params.utility_user.into_iter().collect();
    let mut impacts = Vec::with_capacity(targets.len());
    for &bus in &targets {
        let Some(Some(pload)) = sets.get(&bus) else {
            impacts.push(CascadeImpact::unreachable(bus));
            continue;
        };
        let mut replay = grid.clone();
        let changes: Vec<(BusId, f64)> = pload.iter().map(|&b| (b, options.delta_for(b))).collect();
        apply_demand_changes(&mut replay, &changes)?;
        let outcome = run_cascade(&mut replay, scenario.params.alpha)?;
        let nodes = outcome.newly_failed();

        let targets_s = scenario.project_to_users(pload);
        let seeds = TargetedGreedy::new(&samples, &targets_s)
            .with_initial(current.as_slice())
            .excluding(&excluded)
            .run(targets_s.len(), settings.coverage_goal)
            .seeds;
        impacts.push(CascadeImpact { bus, reachable: true, pload: pload.clone(), nodes, seeds: seeds.into() });
    }
    Ok(impacts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Generator, Load};
    use crate::powerflow::prepare_base_state;

    fn chain() -> PowerGrid {
        let mut grid = PowerGrid::new();
        let g = grid.add_bus(0);
        let a = grid.add_bus(1);
        let b = grid.add_bus(2);
        grid.set_generator(g, Generator { output: 2.0, min: 0.0, max: 10.0 }).unwrap();
        grid.set_load(a, Load::new(1.0)).unwrap();
        grid.set_load(b, Load::new(1.0)).unwrap();
        grid.add_line(g, a, 1.0, 2.6).unwrap();
        grid.add_line(a, b, 1.0, 1.2).unwrap();
        prepare_base_state(&mut grid).unwrap();
        grid
    }

    #[test]
    fn methods_agree_on_chain() {
        let grid = chain();
        let opts = CicOptions::default();
        for method in [PloadMethod::Exhaustive, PloadMethod::Milp, PloadMethod::Heuristic] {
            let settings = AttackSettings { pload: method, ..AttackSettings::default() };
            let sets = minimum_attack_sets(&grid, &[1, 2], &opts, &settings).unwrap();
            assert_eq!(sets[&2], Some(vec![2]), "{method:?}");
            assert_eq!(sets[&1], None, "{method:?}");
        }
    }
}
