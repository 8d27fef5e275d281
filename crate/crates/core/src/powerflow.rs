//! Linearized DC power flow, island balancing, and the moving-average
//! cascading-failure loop.
//!
//! Flows follow the convention of the line orientation: `flow > 0` means power
//! moves from `from` to `to`. Angles satisfy `theta_from - theta_to =
//! reactance * flow` on every live line, with one reference bus per island
//! pinned at zero.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{Cholesky, DenseMatrix};
use crate::model::{failed_nodes, BusId, LineId, PowerGrid};
use crate::{compute_yield, Error, Result};

/// Relative slack on the overload test, so that a line loaded exactly at its
/// capacity (up to solver round-off) does not trip.
pub const OVERLOAD_TOLERANCE: f64 = 1e-6;

/// `true` when `|flow|` exceeds `capacity`.
pub fn is_overloaded(flow: f64, capacity: f64) -> bool {
    flow.abs() > capacity * (1.0 + OVERLOAD_TOLERANCE) + 1e-12
}

/// Connected components over live lines, each ascending, ordered by their
/// smallest bus.
pub fn find_islands(grid: &PowerGrid) -> Vec<Vec<BusId>> {
    let n = grid.bus_count();
    let mut island_of = vec![usize::MAX; n];
    let mut islands = Vec::new();
    for start in 0..n {
        if island_of[start] != usize::MAX {
            continue;
        }
        let id = islands.len();
        island_of[start] = id;
        let mut members = vec![start];
        let mut stack = vec![start];
        while let Some(b) = stack.pop() {
            for &l in grid.incident_lines(b) {
                let line = grid.line(l);
                if !line.alive {
                    continue;
                }
                let other = if line.from == b { line.to } else { line.from };
                if island_of[other] == usize::MAX {
                    island_of[other] = id;
                    members.push(other);
                    stack.push(other);
                }
            }
        }
        members.sort_unstable();
        islands.push(members);
    }
    islands
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IslandState {
    /// No generator: every demand was dropped to zero.
    Dead,
    /// Generation was redispatched to meet the full demand.
    Supplied,
    /// Demand exceeded generation capacity and was scaled down.
    Curtailed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IslandBalance {
    pub state: IslandState,
    /// Total generation after balancing (MW).
    pub supply: f64,
    /// Total demand after balancing (MW).
    pub demand: f64,
}

/// Match supply and demand inside one island.
///
/// With enough capacity, generators move toward the demand proportionally to
/// their headroom (`max - output` when ramping up, `output - min` when ramping
/// down). If the demand is below the sum of minimum outputs the minimums are
/// relaxed and every unit scales down proportionally. Without enough capacity
/// all units run at maximum and demands are scaled down uniformly.
pub fn balance_island(grid: &mut PowerGrid, island: &[BusId]) -> IslandBalance {
    let demand: f64 = island.iter().map(|&b| grid.demand(b)).sum();
    let gens: Vec<BusId> = island.iter().copied().filter(|&b| grid.is_generator(b)).collect();

    if gens.is_empty() {
        for &b in island {
            if let Some(load) = grid.bus_mut(b).load.as_mut() {
                load.demand = 0.0;
            }
        }
        return IslandBalance { state: IslandState::Dead, supply: 0.0, demand: 0.0 };
    }

    for &b in &gens {
        let g = grid.bus_mut(b).generator.as_mut().expect("generator bus");
        g.output = g.output.clamp(g.min, g.max);
    }
    let gen = |grid: &PowerGrid, b: BusId| grid.bus(b).generator.expect("generator bus");
    let capacity: f64 = gens.iter().map(|&b| gen(grid, b).max).sum();

    if capacity < demand {
        for &b in &gens {
            let g = grid.bus_mut(b).generator.as_mut().expect("generator bus");
            g.output = g.max;
        }
        let scale = if demand > 0.0 { capacity / demand } else { 0.0 };
        for &b in island {
            if let Some(load) = grid.bus_mut(b).load.as_mut() {
                load.demand *= scale;
            }
        }
        return IslandBalance { state: IslandState::Curtailed, supply: capacity, demand: capacity };
    }

    let supply: f64 = gens.iter().map(|&b| gen(grid, b).output).sum();
    if supply < demand {
        let headroom: f64 = gens.iter().map(|&b| gen(grid, b).max - gen(grid, b).output).sum();
        let raise = demand - supply;
        for &b in &gens {
            let g = grid.bus_mut(b).generator.as_mut().expect("generator bus");
            g.output = (g.output + raise * (g.max - g.output) / headroom).min(g.max);
        }
    } else if supply > demand {
        let excess = supply - demand;
        let room: f64 = gens.iter().map(|&b| gen(grid, b).output - gen(grid, b).min).sum();
        if room >= excess && room > 0.0 {
            for &b in &gens {
                let g = grid.bus_mut(b).generator.as_mut().expect("generator bus");
                g.output = (g.output - excess * (g.output - g.min) / room).max(g.min);
            }
        } else {
            let floor: f64 = gens.iter().map(|&b| gen(grid, b).min).sum();
            for &b in &gens {
                let g = grid.bus_mut(b).generator.as_mut().expect("generator bus");
                g.output = if floor > 0.0 { g.min * demand / floor } else { 0.0 };
            }
        }
    }
    IslandBalance { state: IslandState::Supplied, supply: demand, demand }
}

/// Balance every island of the grid.
pub fn balance_all(grid: &mut PowerGrid) -> Vec<IslandBalance> {
    find_islands(grid)
        .iter()
        .map(|island| balance_island(grid, island))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct IslandSlack {
    pub reference: BusId,
    /// Net injection left over in the island; zero for a balanced island.
    pub mismatch: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSolution {
    /// Per-line flow (MW); zero on dead lines.
    pub flows: Vec<f64>,
    /// Per-bus angle, zero at each island's reference bus.
    pub angles: Vec<f64>,
    pub islands: Vec<IslandSlack>,
}

impl FlowSolution {
    /// Copy the flows onto the grid's lines.
    pub fn apply(&self, grid: &mut PowerGrid) {
        for (line, &f) in grid.lines_mut().iter_mut().zip(&self.flows) {
            line.flow = f;
        }
    }
}

/// Factorized reduced susceptance matrix of one island (two or more buses),
/// with the island's first bus as the angle reference.
#[derive(Debug, Clone)]
pub(crate) struct IslandSolver {
    local: Vec<usize>,
    factor: Cholesky,
}

impl IslandSolver {
    pub fn new(grid: &PowerGrid, island: &[BusId]) -> Result<Self> {
        let mut local = vec![usize::MAX; grid.bus_count()];
        for (i, &b) in island.iter().enumerate() {
            local[b] = i;
        }
        let n = island.len() - 1;
        let mut susceptance = DenseMatrix::zeros(n);
        for &b in island {
            for &l in grid.incident_lines(b) {
                let line = grid.line(l);
                // Visit each line once, from its `from` end.
                if !line.alive || line.from != b {
                    continue;
                }
                let y = 1.0 / line.reactance;
                let (i, j) = (local[line.from], local[line.to]);
                if i > 0 {
                    susceptance.add(i - 1, i - 1, y);
                }
                if j > 0 {
                    susceptance.add(j - 1, j - 1, y);
                }
                if i > 0 && j > 0 {
                    susceptance.add(i - 1, j - 1, -y);
                    susceptance.add(j - 1, i - 1, -y);
                }
            }
        }
        Ok(IslandSolver { local, factor: Cholesky::factor(susceptance)? })
    }

    /// Angles of the island's buses (in island order) for net injections
    /// given per island bus.
    pub fn angles(&self, injections: &[f64]) -> Vec<f64> {
        let mut theta = vec![0.0];
        theta.extend(self.factor.solve(&injections[1..]));
        theta
    }

    /// Flow on `line` (which must lie inside the island) for island angles.
    pub fn flow(&self, grid: &PowerGrid, angles: &[f64], line: LineId) -> f64 {
        let l = grid.line(line);
        (angles[self.local[l.from]] - angles[self.local[l.to]]) / l.reactance
    }
}

/// Solve the DC flow of every island with at least two buses.
///
/// Each island must already be balanced: its net injection may not exceed
/// `1e-6 * max(1, island demand)`.
pub fn solve_dc_flow(grid: &PowerGrid) -> Result<FlowSolution> {
    let mut flows = vec![0.0; grid.line_count()];
    let mut angles = vec![0.0; grid.bus_count()];
    let mut slacks = Vec::new();

    for island in find_islands(grid) {
        let reference = island[0];
        let mismatch: f64 = island.iter().map(|&b| grid.injection(b)).sum();
        let demand: f64 = island.iter().map(|&b| grid.demand(b)).sum();
        if mismatch.abs() > 1e-6 * demand.max(1.0) {
            return Err(Error::Unbalanced { reference, mismatch });
        }
        slacks.push(IslandSlack { reference, mismatch });
        if island.len() == 1 {
            continue;
        }
        let solver = IslandSolver::new(grid, &island)?;
        let injections: Vec<f64> = island.iter().map(|&b| grid.injection(b)).collect();
        for (&b, theta) in island.iter().zip(solver.angles(&injections)) {
            angles[b] = theta;
        }
    }

    for (l, line) in grid.lines().iter().enumerate() {
        if line.alive {
            flows[l] = (angles[line.from] - angles[line.to]) / line.reactance;
        }
    }
    Ok(FlowSolution { flows, angles, islands: slacks })
}

/// Balance, solve, write the flows, and set the moving averages to the
/// resulting base flows. Used to establish the pre-attack operating point.
pub fn prepare_base_state(grid: &mut PowerGrid) -> Result<FlowSolution> {
    balance_all(grid);
    let solution = solve_dc_flow(grid)?;
    solution.apply(grid);
    grid.reset_moving_average();
    Ok(solution)
}

/// Inflate the demand of every bus in `attacked` by the same fraction.
pub fn apply_demand_change(grid: &mut PowerGrid, attacked: &[BusId], delta: f64) -> Result<()> {
    let changes: Vec<(BusId, f64)> = attacked.iter().map(|&b| (b, delta)).collect();
    apply_demand_changes(grid, &changes)
}

/// Inflate `d_i <- d_i^0 (1 + delta_i)` for each `(bus, delta_i)`, recording
/// `d_i^0` in [`Load::original`](crate::Load). Buses already under attack keep
/// their inflated demand. The nominal cap of an attacked bus is raised to the
/// inflated demand.
pub fn apply_demand_changes(grid: &mut PowerGrid, changes: &[(BusId, f64)]) -> Result<()> {
    for &(bus, delta) in changes {
        grid.check_bus(bus)?;
        if !grid.is_demand(bus) {
            return Err(Error::invalid(alloc::format!("bus {bus} has no demand to change")));
        }
        if !(delta > 0.0) {
            return Err(Error::invalid("demand change must be positive"));
        }
    }
    for &(bus, delta) in changes {
        let load = grid.bus_mut(bus).load.as_mut().expect("checked above");
        if load.attacked {
            continue;
        }
        load.original = load.demand;
        load.demand *= 1.0 + delta;
        load.nominal = load.nominal.max(load.demand);
        load.attacked = true;
    }
    Ok(())
}

/// One iteration of the cascade loop.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    /// 1-based round number.
    pub index: usize,
    pub removed_lines: Vec<LineId>,
    /// Demand buses that lost their last path to a generator this round.
    pub failed_buses: Vec<BusId>,
    pub flows: Vec<f64>,
    /// Number of islands the round was solved on.
    pub islands: usize,
    /// Largest `|avg_flow| / capacity` over the lines live in this round.
    pub max_loading: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeOutcome {
    /// S1, in removal order.
    pub failed_lines: Vec<LineId>,
    /// S2: every demand bus without a path to a generator at the end.
    pub failed_nodes: BTreeSet<BusId>,
    /// Demand buses that were already disconnected before the first round.
    pub initially_failed: BTreeSet<BusId>,
    pub rounds: Vec<RoundRecord>,
    /// Total demand when the cascade started (MW).
    pub initial_demand: f64,
    /// Served demand at stability over `initial_demand`.
    pub final_yield: f64,
}

impl CascadeOutcome {
    /// Number of rounds that removed at least one line.
    pub fn depth(&self) -> usize {
        self.rounds.iter().filter(|r| !r.removed_lines.is_empty()).count()
    }

    /// Failures caused by this cascade.
    pub fn newly_failed(&self) -> BTreeSet<BusId> {
        self.failed_nodes.difference(&self.initially_failed).copied().collect()
    }
}

/// Incremental driver of the cascade loop, for callers that need to
/// intervene between rounds.
#[derive(Debug, Clone)]
pub struct Cascade {
    alpha: f64,
    max_rounds: usize,
    initial_demand: f64,
    initially_failed: BTreeSet<BusId>,
    failed: BTreeSet<BusId>,
    failed_lines: Vec<LineId>,
    rounds: Vec<RoundRecord>,
    stable: bool,
}

impl Cascade {
    /// Start a cascade on `grid` in its current (post-attack) state. The
    /// moving averages stored on the lines are the initial values.
    pub fn new(grid: &PowerGrid, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::invalid("alpha must lie in (0, 1]"));
        }
        let failed = failed_nodes(grid);
        Ok(Cascade {
            alpha,
            max_rounds: 10 * grid.line_count().max(1),
            initial_demand: grid.total_demand(),
            initially_failed: failed.clone(),
            failed,
            failed_lines: Vec::new(),
            rounds: Vec::new(),
            stable: false,
        })
    }

    pub fn with_max_rounds(mut self, max_rounds: usize) -> Self {
        self.max_rounds = max_rounds;
        self
    }

    pub fn is_stable(&self) -> bool {
        self.stable
    }

    pub fn rounds(&self) -> &[RoundRecord] {
        &self.rounds
    }

    pub fn initial_demand(&self) -> f64 {
        self.initial_demand
    }

    /// Run one round. Returns `true` once a round removes no line.
    pub fn step(&mut self, grid: &mut PowerGrid) -> Result<bool> {
        if self.stable {
            return Ok(true);
        }
        if self.rounds.len() >= self.max_rounds {
            return Err(Error::CascadeDidNotTerminate { rounds: self.rounds.len() });
        }
        let islands = balance_all(grid).len();
        let solution = solve_dc_flow(grid)?;
        solution.apply(grid);

        let alpha = self.alpha;
        let mut removed = Vec::new();
        let mut max_loading = 0.0f64;
        for (id, line) in grid.lines_mut().iter_mut().enumerate() {
            if !line.alive {
                continue;
            }
            line.avg_flow = alpha * line.flow + (1.0 - alpha) * line.avg_flow;
            let loading = if line.capacity > 0.0 {
                line.avg_flow.abs() / line.capacity
            } else if line.avg_flow.abs() > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            max_loading = max_loading.max(loading);
            if is_overloaded(line.avg_flow, line.capacity) {
                removed.push(id);
            }
        }
        for &id in &removed {
            let line = grid.line_mut(id);
            line.alive = false;
            line.flow = 0.0;
        }
        let now_failed = failed_nodes(grid);
        let new_failures: Vec<BusId> = now_failed.difference(&self.failed).copied().collect();
        self.failed = now_failed;
        self.failed_lines.extend_from_slice(&removed);
        self.stable = removed.is_empty();
        self.rounds.push(RoundRecord {
            index: self.rounds.len() + 1,
            removed_lines: removed,
            failed_buses: new_failures,
            flows: solution.flows,
            islands,
            max_loading,
        });
        Ok(self.stable)
    }

    /// Step until stable and summarize.
    pub fn run(mut self, grid: &mut PowerGrid) -> Result<CascadeOutcome> {
        while !self.step(grid)? {}
        self.finish(grid)
    }

    /// Summarize the cascade in the grid's current state.
    pub fn finish(self, grid: &PowerGrid) -> Result<CascadeOutcome> {
        let final_yield = if self.initial_demand > 0.0 {
            compute_yield(grid, self.initial_demand)?
        } else {
            1.0
        };
        Ok(CascadeOutcome {
            failed_lines: self.failed_lines,
            failed_nodes: failed_nodes(grid),
            initially_failed: self.initially_failed,
            rounds: self.rounds,
            initial_demand: self.initial_demand,
            final_yield,
        })
    }
}

/// Run the cascade on `grid` until a round removes no line.
pub fn run_cascade(grid: &mut PowerGrid, alpha: f64) -> Result<CascadeOutcome> {
    Cascade::new(grid, alpha)?.run(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Generator, Load};

    fn gen(max: f64) -> Generator {
        Generator { output: 0.0, min: 0.0, max }
    }

    #[test]
    fn two_bus_flow() {
        let mut g = PowerGrid::new();
        let a = g.add_bus(1);
        let b = g.add_bus(2);
        g.set_generator(a, Generator { output: 1.0, min: 0.0, max: 5.0 }).unwrap();
        g.set_load(b, Load::new(1.0)).unwrap();
        g.add_line(a, b, 1.0, 2.0).unwrap();
        let s = solve_dc_flow(&g).unwrap();
        assert!((s.flows[0] - 1.0).abs() < 1e-12);
        assert!((s.angles[a] - s.angles[b] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn islands_trivial_cases() {
        let mut g = PowerGrid::new();
        for i in 0..4 {
            g.add_bus(i);
        }
        for (a, b) in [(0, 1), (1, 2), (2, 3)] {
            g.add_line(a, b, 1.0, 1.0).unwrap();
        }
        assert_eq!(find_islands(&g), vec![vec![0, 1, 2, 3]]);
        for l in g.lines_mut() {
            l.alive = false;
        }
        assert_eq!(find_islands(&g), vec![vec![0], vec![1], vec![2], vec![3]]);
    }

    #[test]
    fn balance_feasible_curtailed_and_dead() {
        let mut g = PowerGrid::new();
        let a = g.add_bus(0);
        let b = g.add_bus(1);
        let c = g.add_bus(2);
        g.set_generator(a, gen(10.0)).unwrap();
        g.set_load(b, Load::new(4.0)).unwrap();
        g.add_line(a, b, 1.0, 1.0).unwrap();
        let r = balance_island(&mut g, &[a, b]);
        assert_eq!(r.state, IslandState::Supplied);
        assert!((g.generation(a) - 4.0).abs() < 1e-12);

        g.set_load(b, Load::new(6.0)).unwrap();
        g.set_load(c, Load::new(6.0)).unwrap();
        g.add_line(a, c, 1.0, 1.0).unwrap();
        let r = balance_island(&mut g, &[a, b, c]);
        assert_eq!(r.state, IslandState::Curtailed);
        assert!((g.demand(b) - 6.0 * 10.0 / 12.0).abs() < 1e-12);
        assert!((g.demand(c) - 5.0).abs() < 1e-12);

        let mut lone = PowerGrid::new();
        let d = lone.add_bus(9);
        lone.set_load(d, Load::new(5.0)).unwrap();
        assert_eq!(balance_island(&mut lone, &[d]).state, IslandState::Dead);
        assert_eq!(lone.demand(d), 0.0);
        assert_eq!(failed_nodes(&lone), BTreeSet::from([d]));
    }

    #[test]
    fn ramp_down_follows_headroom() {
        let mut g = PowerGrid::new();
        let a = g.add_bus(0);
        let b = g.add_bus(1);
        let d = g.add_bus(2);
        g.set_generator(a, Generator { output: 6.0, min: 2.0, max: 10.0 }).unwrap();
        g.set_generator(b, Generator { output: 4.0, min: 0.0, max: 10.0 }).unwrap();
        g.set_load(d, Load::new(7.0)).unwrap();
        g.add_line(a, d, 1.0, 9.0).unwrap();
        g.add_line(b, d, 1.0, 9.0).unwrap();
        balance_all(&mut g);
        // room 4 + 4, excess 3 split evenly
        assert!((g.generation(a) - 4.5).abs() < 1e-12);
        assert!((g.generation(b) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn demand_change_arithmetic() {
        let mut g = PowerGrid::new();
        let a = g.add_bus(0);
        let b = g.add_bus(1);
        let c = g.add_bus(2);
        g.set_load(b, Load::new(8.0)).unwrap();
        g.set_load(c, Load::new(3.0)).unwrap();
        let before = g.clone();
        apply_demand_change(&mut g, &[], 0.25).unwrap();
        assert_eq!(g, before);
        apply_demand_change(&mut g, &[b], 0.25).unwrap();
        assert_eq!(g.demand(b), 10.0);
        assert_eq!(g.demand(c), 3.0);
        assert_eq!(g.bus(b).load.unwrap().original, 8.0);
        assert!(apply_demand_change(&mut g, &[a], 0.25).is_err());
        assert!(apply_demand_change(&mut g, &[17], 0.25).is_err());
    }
}
