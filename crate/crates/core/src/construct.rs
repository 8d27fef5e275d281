//! Scenario construction: social subgraph sampling, edge weights, the
//! bus-to-user coupling, and proxy line capacities.

use alloc::collections::{BTreeSet, VecDeque};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::model::{BusId, Coupling, Params, PowerGrid, Scenario, SocialGraph, UserId};
use crate::powerflow::{balance_all, solve_dc_flow, FlowSolution};
use crate::rng::stream;
use crate::{Error, Result};

/// Induced subgraph on `n` weakly connected users, grown from a random start
/// by repeatedly absorbing a random frontier node.
pub fn sample_connected_subgraph<R: Rng + ?Sized>(
    social: &SocialGraph,
    n: usize,
    rng: &mut R,
) -> Result<SocialGraph> {
    if n == 0 {
        return Ok(SocialGraph::with_nodes(0));
    }
    let pool: Vec<UserId> = social
        .weak_components()
        .into_iter()
        .filter(|c| c.len() >= n)
        .flatten()
        .collect();
    let &start = pool.choose(rng).ok_or_else(|| {
        Error::Infeasible(format!("no weakly connected component with {n} users"))
    })?;

    let mut chosen = BTreeSet::from([start]);
    let mut frontier: Vec<UserId> = Vec::new();
    let mut queued = BTreeSet::from([start]);
    let push_neighbors = |u: UserId, frontier: &mut Vec<UserId>, queued: &mut BTreeSet<UserId>| {
        for v in social.undirected_neighbors(u) {
            if queued.insert(v) {
                frontier.push(v);
            }
        }
    };
    push_neighbors(start, &mut frontier, &mut queued);
    while chosen.len() < n {
        let i = rng.gen_range(0..frontier.len());
        let u = frontier.swap_remove(i);
        chosen.insert(u);
        push_neighbors(u, &mut frontier, &mut queued);
    }
    let nodes: Vec<UserId> = chosen.into_iter().collect();
    social.induced_subgraph(&nodes)
}

/// Give every directed edge an independent weight drawn from `[lo, hi]`.
pub fn assign_uniform_weights<R: Rng + ?Sized>(
    social: &mut SocialGraph,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Result<()> {
    if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
        return Err(Error::invalid("weight interval must satisfy 0 <= lo <= hi <= 1"));
    }
    for e in 0..social.edge_count() {
        let p = if lo == hi { lo } else { rng.gen_range(lo..=hi) };
        social.set_weight(e, p)?;
    }
    Ok(())
}

/// Map every demand bus to a distinct user.
///
/// Repeatedly links a random unlinked demand bus to a random unlinked user,
/// then walks the grid breadth-first from that bus, linking each unlinked
/// demand neighbor to an unlinked social neighbor of the user its parent was
/// linked to (a random unlinked user when there is none). Transit and
/// generator buses are walked through without being linked.
pub fn build_coupling<R: Rng + ?Sized>(
    grid: &PowerGrid,
    social: &SocialGraph,
    rng: &mut R,
) -> Result<Coupling> {
    let demand = grid.demand_buses();
    if social.node_count() < demand.len() {
        return Err(Error::Infeasible(format!(
            "{} users cannot cover {} demand buses",
            social.node_count(),
            demand.len()
        )));
    }
    let mut coupling = Coupling::new();
    let mut free_users: BTreeSet<UserId> = (0..social.node_count()).collect();
    let mut visited = vec![false; grid.bus_count()];

    let take_random = |free: &mut BTreeSet<UserId>, rng: &mut R| -> UserId {
        let i = rng.gen_range(0..free.len());
        let u = *free.iter().nth(i).expect("index in range");
        free.remove(&u);
        u
    };

    loop {
        let unlinked: Vec<BusId> = demand.iter().copied().filter(|&b| coupling.user_of(b).is_none()).collect();
        let Some(&root) = unlinked.choose(rng) else { break };
        let user = take_random(&mut free_users, rng);
        coupling.link(root, user)?;
        visited[root] = true;

        let mut queue = VecDeque::from([(root, user)]);
        while let Some((bus, anchor)) = queue.pop_front() {
            for next in grid.live_neighbors(bus) {
                if visited[next] {
                    continue;
                }
                visited[next] = true;
                if !grid.is_demand(next) || coupling.user_of(next).is_some() {
                    queue.push_back((next, anchor));
                    continue;
                }
                let near: Vec<UserId> = social
                    .undirected_neighbors(anchor)
                    .into_iter()
                    .filter(|u| free_users.contains(u))
                    .collect();
                let chosen = match near.choose(rng) {
                    Some(&u) => {
                        free_users.remove(&u);
                        u
                    }
                    None => take_random(&mut free_users, rng),
                };
                coupling.link(next, chosen)?;
                queue.push_back((next, chosen));
            }
        }
    }
    Ok(coupling)
}

/// Solve the base-case flow and set every line capacity to
/// `capacity_factor * |base flow|`. Lines that carry no base flow get
/// `capacity_factor` times 1% of the largest base flow instead. The grid is
/// left at the base operating point with moving averages equal to the flows.
pub fn set_line_capacities(grid: &mut PowerGrid, capacity_factor: f64) -> Result<FlowSolution> {
    if !(capacity_factor >= 1.0) {
        return Err(Error::invalid("capacity factor must be at least 1"));
    }
    balance_all(grid);
    let solution = solve_dc_flow(grid)?;
    solution.apply(grid);
    grid.reset_moving_average();
    let largest = solution.flows.iter().fold(0.0f64, |m, f| m.max(f.abs()));
    let floor = 0.01 * largest;
    let zero = 1e-9 * largest.max(1.0);
    for line in grid.lines_mut() {
        let base = line.flow.abs();
        line.capacity = capacity_factor * if base > zero { base } else { floor };
    }
    Ok(solution)
}

/// Interval of the uniform social edge weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightRange {
    pub lo: f64,
    pub hi: f64,
}

impl Default for WeightRange {
    fn default() -> Self {
        WeightRange { lo: 0.0, hi: 1.0 }
    }
}

/// Assemble a scenario from a grid and a full social network: sample as many
/// connected users as there are demand buses, weight their edges, couple
/// them to the grid, and calibrate capacities. Each step draws from its own
/// sub-stream of `params.rng_seed`.
pub fn build_scenario(
    mut grid: PowerGrid,
    social: &SocialGraph,
    weights: WeightRange,
    params: Params,
) -> Result<Scenario> {
    params.validate()?;
    grid.validate()?;
    let seed = params.rng_seed;
    let users = grid.demand_buses().len();
    let mut sub = sample_connected_subgraph(social, users, &mut stream(seed, "sample"))?;
    assign_uniform_weights(&mut sub, weights.lo, weights.hi, &mut stream(seed, "weights"))?;
    let coupling = build_coupling(&grid, &sub, &mut stream(seed, "coupling"))?;
    set_line_capacities(&mut grid, params.capacity_factor)?;
    Scenario::new(sub, grid, coupling, params)
}
