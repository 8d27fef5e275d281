//! Domain types shared by every module: the social graph, the power grid,
//! the coupling between demand buses and social accounts, and the scenario
//! that bundles them with the attack parameters.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Dense index of a bus in a [`PowerGrid`].
pub type BusId = usize;
/// Dense index of a user in a [`SocialGraph`].
pub type UserId = usize;
/// Dense index of a line in a [`PowerGrid`].
pub type LineId = usize;

// ---------------------------------------------------------------------------
// Social graph
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SocialEdge {
    pub from: UserId,
    pub to: UserId,
    /// Propagation probability along the edge.
    pub p: f64,
}

/// Directed social graph with per-edge propagation probabilities.
///
/// Users are dense ids `0..node_count()`; the external id of every user is
/// kept in [`SocialGraph::label`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SocialGraph {
    labels: Vec<u64>,
    edges: Vec<SocialEdge>,
    out: Vec<Vec<usize>>,
    inc: Vec<Vec<usize>>,
}

impl SocialGraph {
    /// A graph with `n` isolated users labelled `0..n`.
    pub fn with_nodes(n: usize) -> Self {
        Self::from_labels((0..n as u64).collect())
    }

    pub fn from_labels(labels: Vec<u64>) -> Self {
        let n = labels.len();
        SocialGraph {
            labels,
            edges: Vec::new(),
            out: vec![Vec::new(); n],
            inc: vec![Vec::new(); n],
        }
    }

    /// Add the directed edge `from -> to`. Self-loops, repeated ordered pairs
    /// and probabilities outside `[0, 1]` are rejected.
    pub fn add_edge(&mut self, from: UserId, to: UserId, p: f64) -> Result<usize> {
        self.check_user(from)?;
        self.check_user(to)?;
        if from == to {
            return Err(Error::invalid(format!("self-loop on user {from}")));
        }
        check_probability(p)?;
        if self.has_edge(from, to) {
            return Err(Error::invalid(format!("duplicate edge {from} -> {to}")));
        }
        let id = self.edges.len();
        self.edges.push(SocialEdge { from, to, p });
        self.out[from].push(id);
        self.inc[to].push(id);
        Ok(id)
    }

    pub fn set_weight(&mut self, edge: usize, p: f64) -> Result<()> {
        check_probability(p)?;
        let e = self
            .edges
            .get_mut(edge)
            .ok_or(Error::UnknownId { kind: "edge", id: edge })?;
        e.p = p;
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[SocialEdge] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> &SocialEdge {
        &self.edges[id]
    }

    pub fn label(&self, user: UserId) -> u64 {
        self.labels[user]
    }

    pub fn labels(&self) -> &[u64] {
        &self.labels
    }

    /// Ids of the edges leaving `user`.
    pub fn out_edges(&self, user: UserId) -> &[usize] {
        &self.out[user]
    }

    /// Ids of the edges entering `user`.
    pub fn in_edges(&self, user: UserId) -> &[usize] {
        &self.inc[user]
    }

    pub fn has_edge(&self, from: UserId, to: UserId) -> bool {
        self.out
            .get(from)
            .is_some_and(|es| es.iter().any(|&e| self.edges[e].to == to))
    }

    /// Neighbors of `user` ignoring edge direction, ascending and deduplicated.
    pub fn undirected_neighbors(&self, user: UserId) -> Vec<UserId> {
        let mut ns: Vec<UserId> = self.out[user]
            .iter()
            .map(|&e| self.edges[e].to)
            .chain(self.inc[user].iter().map(|&e| self.edges[e].from))
            .collect();
        ns.sort_unstable();
        ns.dedup();
        ns
    }

    /// Weakly connected components, each sorted, ordered by smallest member.
    pub fn weak_components(&self) -> Vec<Vec<UserId>> {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut comps = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut comp = vec![start];
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                let outs = self.out[u].iter().map(|&e| self.edges[e].to);
                let ins = self.inc[u].iter().map(|&e| self.edges[e].from);
                for v in outs.chain(ins) {
                    if !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                        queue.push_back(v);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }

    /// The subgraph induced by `nodes`; user `nodes[i]` becomes user `i`.
    pub fn induced_subgraph(&self, nodes: &[UserId]) -> Result<SocialGraph> {
        let mut index = BTreeMap::new();
        for (i, &u) in nodes.iter().enumerate() {
            self.check_user(u)?;
            if index.insert(u, i).is_some() {
                return Err(Error::invalid(format!("user {u} listed twice")));
            }
        }
        let mut sub = SocialGraph::from_labels(nodes.iter().map(|&u| self.labels[u]).collect());
        for (i, &u) in nodes.iter().enumerate() {
            for &e in &self.out[u] {
                let edge = self.edges[e];
                if let Some(&j) = index.get(&edge.to) {
                    sub.add_edge(i, j, edge.p)?;
                }
            }
        }
        Ok(sub)
    }

    fn check_user(&self, user: UserId) -> Result<()> {
        if user < self.node_count() {
            Ok(())
        } else {
            Err(Error::UnknownId { kind: "user", id: user })
        }
    }
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::invalid(format!("edge probability {p} outside [0, 1]")))
    }
}

// ---------------------------------------------------------------------------
// Power grid
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Generator {
    /// Current output (MW).
    pub output: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Load {
    /// Nominal demand cap (MW). Raised to the inflated value when the bus is
    /// attacked.
    pub nominal: f64,
    /// Demand before the most recent attack inflation (MW).
    pub original: f64,
    /// Current demand (MW).
    pub demand: f64,
    pub attacked: bool,
}

impl Load {
    pub fn new(demand: f64) -> Self {
        Load { nominal: demand, original: demand, demand, attacked: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    /// External bus number.
    pub label: u64,
    pub generator: Option<Generator>,
    pub load: Option<Load>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub from: BusId,
    pub to: BusId,
    /// Series reactance (per unit), strictly positive.
    pub reactance: f64,
    /// Thermal capacity (MW).
    pub capacity: f64,
    pub alive: bool,
    /// Flow from `from` to `to` at the last solve (MW, signed).
    pub flow: f64,
    /// Exponential moving average of `flow` used by the outage rule.
    pub avg_flow: f64,
}

/// Buses, generators, demands and lines of the transmission grid together
/// with its mutable operating state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PowerGrid {
    buses: Vec<Bus>,
    lines: Vec<Line>,
    incident: Vec<Vec<LineId>>,
}

impl PowerGrid {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_bus(&mut self, label: u64) -> BusId {
        self.buses.push(Bus { label, generator: None, load: None });
        self.incident.push(Vec::new());
        self.buses.len() - 1
    }

    pub fn set_generator(&mut self, bus: BusId, generator: Generator) -> Result<()> {
        self.check_bus(bus)?;
        let Generator { output, min, max } = generator;
        if !(0.0 <= min && min <= max) || !output.is_finite() {
            return Err(Error::invalid(format!(
                "generator at bus {bus}: bounds [{min}, {max}] output {output}"
            )));
        }
        self.buses[bus].generator = Some(generator);
        Ok(())
    }

    pub fn set_load(&mut self, bus: BusId, load: Load) -> Result<()> {
        self.check_bus(bus)?;
        if !(load.demand >= 0.0 && load.nominal >= 0.0 && load.demand.is_finite()) {
            return Err(Error::invalid(format!("negative demand at bus {bus}")));
        }
        self.buses[bus].load = Some(load);
        Ok(())
    }

    pub fn add_line(&mut self, from: BusId, to: BusId, reactance: f64, capacity: f64) -> Result<LineId> {
        self.check_bus(from)?;
        self.check_bus(to)?;
        if from == to {
            return Err(Error::invalid(format!("line loops on bus {from}")));
        }
        if !(reactance > 0.0 && reactance.is_finite()) {
            return Err(Error::invalid(format!("line {from}-{to}: reactance {reactance} must be > 0")));
        }
        if !(capacity >= 0.0) {
            return Err(Error::invalid(format!("line {from}-{to}: negative capacity")));
        }
        let id = self.lines.len();
        self.lines.push(Line {
            from,
            to,
            reactance,
            capacity,
            alive: true,
            flow: 0.0,
            avg_flow: 0.0,
        });
        self.incident[from].push(id);
        self.incident[to].push(id);
        Ok(id)
    }

    pub fn bus_count(&self) -> usize {
        self.buses.len()
    }

    pub fn line_count(&self) -> usize {
        self.lines.len()
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn bus(&self, id: BusId) -> &Bus {
        &self.buses[id]
    }

    pub fn bus_mut(&mut self, id: BusId) -> &mut Bus {
        &mut self.buses[id]
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn line(&self, id: LineId) -> &Line {
        &self.lines[id]
    }

    pub fn line_mut(&mut self, id: LineId) -> &mut Line {
        &mut self.lines[id]
    }

    pub fn lines_mut(&mut self) -> &mut [Line] {
        &mut self.lines
    }

    /// All lines touching `bus`, dead or alive.
    pub fn incident_lines(&self, bus: BusId) -> &[LineId] {
        &self.incident[bus]
    }

    pub fn live_line_count(&self) -> usize {
        self.lines.iter().filter(|l| l.alive).count()
    }

    /// Buses at the far end of live lines from `bus`, ascending, deduplicated.
    pub fn live_neighbors(&self, bus: BusId) -> Vec<BusId> {
        let mut ns: Vec<BusId> = self.incident[bus]
            .iter()
            .map(|&l| &self.lines[l])
            .filter(|l| l.alive)
            .map(|l| if l.from == bus { l.to } else { l.from })
            .collect();
        ns.sort_unstable();
        ns.dedup();
        ns
    }

    pub fn is_generator(&self, bus: BusId) -> bool {
        self.buses[bus].generator.is_some()
    }

    pub fn is_demand(&self, bus: BusId) -> bool {
        self.buses[bus].load.is_some()
    }

    /// The set D of demand buses, ascending.
    pub fn demand_buses(&self) -> Vec<BusId> {
        (0..self.buses.len()).filter(|&b| self.is_demand(b)).collect()
    }

    /// The set P of generator buses, ascending.
    pub fn generator_buses(&self) -> Vec<BusId> {
        (0..self.buses.len()).filter(|&b| self.is_generator(b)).collect()
    }

    pub fn demand(&self, bus: BusId) -> f64 {
        self.buses[bus].load.map_or(0.0, |l| l.demand)
    }

    pub fn generation(&self, bus: BusId) -> f64 {
        self.buses[bus].generator.map_or(0.0, |g| g.output)
    }

    /// Net injection `p_i - d_i` at `bus` (MW).
    pub fn injection(&self, bus: BusId) -> f64 {
        self.generation(bus) - self.demand(bus)
    }

    pub fn total_demand(&self) -> f64 {
        self.buses.iter().filter_map(|b| b.load).map(|l| l.demand).sum()
    }

    pub fn total_generation(&self) -> f64 {
        self.buses.iter().filter_map(|b| b.generator).map(|g| g.output).sum()
    }

    /// Take `buses` out of service: every incident line dies and their demand
    /// drops to zero.
    pub fn isolate_buses(&mut self, buses: &BTreeSet<BusId>) {
        for &b in buses {
            for &l in &self.incident[b] {
                self.lines[l].alive = false;
                self.lines[l].flow = 0.0;
            }
            if let Some(load) = self.buses[b].load.as_mut() {
                load.demand = 0.0;
            }
        }
    }

    /// Sets `avg_flow = flow` on every line.
    pub fn reset_moving_average(&mut self) {
        for l in &mut self.lines {
            l.avg_flow = l.flow;
        }
    }

    /// Check the structural invariants of the grid.
    pub fn validate(&self) -> Result<()> {
        for (i, b) in self.buses.iter().enumerate() {
            if let Some(g) = b.generator {
                if !(0.0 <= g.min && g.min <= g.max) {
                    return Err(Error::invalid(format!("generator bounds at bus {i}")));
                }
            }
            if let Some(l) = b.load {
                if l.demand < 0.0 || (!l.attacked && l.demand > l.nominal * (1.0 + 1e-9) + 1e-9) {
                    return Err(Error::invalid(format!("demand at bus {i} outside [0, nominal]")));
                }
            }
        }
        for (i, l) in self.lines.iter().enumerate() {
            if !(l.reactance > 0.0) || l.from >= self.buses.len() || l.to >= self.buses.len() {
                return Err(Error::invalid(format!("line {i} malformed")));
            }
        }
        Ok(())
    }

    pub(crate) fn check_bus(&self, bus: BusId) -> Result<()> {
        if bus < self.buses.len() {
            Ok(())
        } else {
            Err(Error::UnknownId { kind: "bus", id: bus })
        }
    }

    /// Marks every bus reachable from a generator over live lines.
    pub fn energized(&self) -> Vec<bool> {
        let mut seen = vec![false; self.buses.len()];
        let mut queue: VecDeque<BusId> = self.generator_buses().into();
        for &g in &queue {
            seen[g] = true;
        }
        while let Some(b) = queue.pop_front() {
            for &l in &self.incident[b] {
                let line = &self.lines[l];
                if !line.alive {
                    continue;
                }
                let other = if line.from == b { line.to } else { line.from };
                if !seen[other] {
                    seen[other] = true;
                    queue.push_back(other);
                }
            }
        }
        seen
    }
}

/// Demand buses with no live path to any generator; `|result|` is F(G_P).
pub fn failed_nodes(grid: &PowerGrid) -> BTreeSet<BusId> {
    let energized = grid.energized();
    grid.demand_buses().into_iter().filter(|&b| !energized[b]).collect()
}

/// Served demand (demand buses still connected to a generator) over
/// `original_total_demand`, clamped to `[0, 1]`.
pub fn compute_yield(grid: &PowerGrid, original_total_demand: f64) -> Result<f64> {
    if !(original_total_demand > 0.0) {
        return Err(Error::invalid("original total demand must be positive"));
    }
    let energized = grid.energized();
    let served: f64 = grid
        .demand_buses()
        .into_iter()
        .filter(|&b| energized[b])
        .map(|b| grid.demand(b))
        .sum();
    Ok((served / original_total_demand).clamp(0.0, 1.0))
}

// ---------------------------------------------------------------------------
// Coupling
// ---------------------------------------------------------------------------

/// One-to-one correspondence between demand buses and social accounts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Coupling {
    bus_to_user: BTreeMap<BusId, UserId>,
    user_to_bus: BTreeMap<UserId, BusId>,
}

impl Coupling {
    pub fn new() -> Self {
        Self::default()
    }

    /// Link `bus` with `user`; both must be currently unlinked.
    pub fn link(&mut self, bus: BusId, user: UserId) -> Result<()> {
        if self.bus_to_user.contains_key(&bus) {
            return Err(Error::invalid(format!("bus {bus} already coupled")));
        }
        if self.user_to_bus.contains_key(&user) {
            return Err(Error::invalid(format!("user {user} already coupled")));
        }
        self.bus_to_user.insert(bus, user);
        self.user_to_bus.insert(user, bus);
        Ok(())
    }

    pub fn user_of(&self, bus: BusId) -> Option<UserId> {
        self.bus_to_user.get(&bus).copied()
    }

    pub fn bus_of(&self, user: UserId) -> Option<BusId> {
        self.user_to_bus.get(&user).copied()
    }

    /// `(bus, user)` pairs ordered by bus.
    pub fn pairs(&self) -> impl Iterator<Item = (BusId, UserId)> + '_ {
        self.bus_to_user.iter().map(|(&b, &u)| (b, u))
    }

    /// The coupled users V_S^p, ascending.
    pub fn users(&self) -> Vec<UserId> {
        self.user_to_bus.keys().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.bus_to_user.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bus_to_user.is_empty()
    }

    /// Check that the coupling maps demand buses of `grid` onto users of
    /// `social`, and covers every demand bus.
    pub fn validate(&self, grid: &PowerGrid, social: &SocialGraph) -> Result<()> {
        for (&b, &u) in &self.bus_to_user {
            if b >= grid.bus_count() || !grid.is_demand(b) {
                return Err(Error::invalid(format!("coupled bus {b} is not a demand bus")));
            }
            if u >= social.node_count() {
                return Err(Error::UnknownId { kind: "user", id: u });
            }
        }
        if let Some(b) = grid.demand_buses().into_iter().find(|b| !self.bus_to_user.contains_key(b)) {
            return Err(Error::invalid(format!("demand bus {b} is not coupled")));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    /// Fractional demand increase of an influenced customer.
    pub delta: f64,
    /// Per-bus overrides of `delta`.
    pub delta_overrides: BTreeMap<BusId, f64>,
    /// Moving-average smoothing factor of the outage rule, in (0, 1].
    pub alpha: f64,
    /// Line capacity as a multiple of the base-case flow.
    pub capacity_factor: f64,
    /// Seed budget.
    pub k: usize,
    pub rng_seed: u64,
    /// The utility's own account, never used as a seed.
    pub utility_user: Option<UserId>,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            delta: 0.25,
            delta_overrides: BTreeMap::new(),
            alpha: 0.5,
            capacity_factor: 1.1,
            k: 5,
            rng_seed: 0,
            utility_user: None,
        }
    }
}

impl Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) || self.delta_overrides.values().any(|&d| !(d > 0.0)) {
            return Err(Error::invalid("delta must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::invalid("alpha must lie in (0, 1]"));
        }
        if !(self.capacity_factor >= 1.0) {
            return Err(Error::invalid("capacity factor must be at least 1"));
        }
        if self.k == 0 {
            return Err(Error::invalid("seed budget k must be at least 1"));
        }
        Ok(())
    }

    pub fn delta_for(&self, bus: BusId) -> f64 {
        self.delta_overrides.get(&bus).copied().unwrap_or(self.delta)
    }
}

/// The coupled social/power system together with the attack parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub social: SocialGraph,
    pub grid: PowerGrid,
    pub coupling: Coupling,
    pub params: Params,
}

impl Scenario {
    pub fn new(social: SocialGraph, grid: PowerGrid, coupling: Coupling, params: Params) -> Result<Self> {
        params.validate()?;
        grid.validate()?;
        coupling.validate(&grid, &social)?;
        if let Some(u) = params.utility_user {
            if u >= social.node_count() {
                return Err(Error::UnknownId { kind: "user", id: u });
            }
        }
        Ok(Scenario { social, grid, coupling, params })
    }

    /// Users the attacker may seed.
    pub fn candidate_users(&self) -> Vec<UserId> {
        (0..self.social.node_count())
            .filter(|&u| Some(u) != self.params.utility_user)
            .collect()
    }

    /// Demand buses whose coupled user is in `users`, ascending.
    pub fn project_to_buses<'a>(&self, users: impl IntoIterator<Item = &'a UserId>) -> Vec<BusId> {
        let mut buses: Vec<BusId> = users.into_iter().filter_map(|&u| self.coupling.bus_of(u)).collect();
        buses.sort_unstable();
        buses.dedup();
        buses
    }

    /// Coupled users of `buses`, ascending.
    pub fn project_to_users<'a>(&self, buses: impl IntoIterator<Item = &'a BusId>) -> Vec<UserId> {
        let mut users: Vec<UserId> = buses.into_iter().filter_map(|&b| self.coupling.user_of(b)).collect();
        users.sort_unstable();
        users.dedup();
        users
    }
}
