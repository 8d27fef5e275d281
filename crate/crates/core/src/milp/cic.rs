//! Minimum attack set that disconnects a target demand bus.
//!
//! The model is restricted to the target's island. With one attack round the
//! flow on every line is affine in the attack indicators `z`, so the flow
//! response is computed once ([`ImpactFlows`]) and reused for the big-M
//! bounds, for fixing lines that can never overload, and by the exhaustive
//! solver in the attack module.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{LinearProgram, Relation, Sense, VarId};
use crate::model::{BusId, LineId, Params, PowerGrid};
use crate::powerflow::{find_islands, IslandSolver};
use crate::{Error, Result};

/// How generators follow an attack-induced demand increase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GeneratorResponse {
    /// Every generator picks up the same amount.
    #[default]
    Uniform,
    /// Generators pick up the increase in proportion to their headroom,
    /// which is what the cascade simulator's balancing does.
    Headroom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CicOptions {
    pub delta: f64,
    pub delta_overrides: BTreeMap<BusId, f64>,
    /// Smoothing of the overload test: it is applied to
    /// `alpha * f + (1 - alpha) * avg_flow`, the value the simulator checks
    /// after one round. `1.0` tests the post-attack flow.
    pub alpha: f64,
    pub response: GeneratorResponse,
    /// Overrides the per-line certified big-M.
    pub big_m: Option<f64>,
}

impl Default for CicOptions {
    fn default() -> Self {
        CicOptions {
            delta: 0.25,
            delta_overrides: BTreeMap::new(),
            alpha: 1.0,
            response: GeneratorResponse::Uniform,
            big_m: None,
        }
    }
}

impl CicOptions {
    pub fn from_params(params: &Params) -> Self {
        CicOptions {
            delta: params.delta,
            delta_overrides: params.delta_overrides.clone(),
            alpha: params.alpha,
            ..CicOptions::default()
        }
    }

    pub fn delta_for(&self, bus: BusId) -> f64 {
        self.delta_overrides.get(&bus).copied().unwrap_or(self.delta)
    }
}

/// Affine response of the overload-tested line quantity to attacks inside
/// one island.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpactFlows {
    /// Buses of the island, ascending.
    pub island: Vec<BusId>,
    pub generators: Vec<BusId>,
    /// Live lines inside the island.
    pub lines: Vec<LineId>,
    /// Attackable demand buses: in the island, not yet attacked, demand > 0.
    pub candidates: Vec<BusId>,
    /// Demand increase (MW) of each candidate when attacked.
    pub increase: Vec<f64>,
    /// Flow of each line with no attack.
    pub base_flow: Vec<f64>,
    /// Tested quantity of each line with no attack.
    pub base: Vec<f64>,
    /// `flow_sensitivity[c * lines + l]`: flow change on line `l` when
    /// candidate `c` is attacked.
    pub flow_sensitivity: Vec<f64>,
    pub alpha: f64,
    pub capacity: Vec<f64>,
    /// Largest total demand increase the generators can follow.
    pub uplift_limit: f64,
    /// Share of an increase picked up by each generator.
    pub shares: Vec<f64>,
}

impl ImpactFlows {
    pub fn compute(grid: &PowerGrid, bus: BusId, options: &CicOptions) -> Result<Self> {
        grid.check_bus(bus)?;
        let island = find_islands(grid).into_iter().find(|isl| isl.binary_search(&bus).is_ok()).expect("every bus is in an island");
        let generators: Vec<BusId> = island.iter().copied().filter(|&b| grid.is_generator(b)).collect();
        let mut in_island = vec![false; grid.bus_count()];
        for &b in &island {
            in_island[b] = true;
        }
        let lines: Vec<LineId> = (0..grid.line_count())
            .filter(|&l| grid.line(l).alive && in_island[grid.line(l).from])
            .collect();
        let capacity = lines.iter().map(|&l| grid.line(l).capacity).collect();
        let alpha = options.alpha;

        let mut flows = ImpactFlows {
            island,
            generators,
            lines,
            candidates: Vec::new(),
            increase: Vec::new(),
            base_flow: Vec::new(),
            base: Vec::new(),
            flow_sensitivity: Vec::new(),
            alpha,
            capacity,
            uplift_limit: 0.0,
            shares: Vec::new(),
        };
        if flows.generators.is_empty() {
            flows.base_flow = vec![0.0; flows.lines.len()];
            flows.base = flows.base_flow.clone();
            return Ok(flows);
        }

        let gens: Vec<_> = flows.generators.iter().map(|&b| grid.bus(b).generator.expect("generator bus")).collect();
        let headroom: Vec<f64> = gens.iter().map(|g| (g.max - g.output).max(0.0)).collect();
        let total: f64 = headroom.iter().sum();
        let count = gens.len() as f64;
        match options.response {
            GeneratorResponse::Uniform => {
                flows.shares = vec![1.0 / count; gens.len()];
                flows.uplift_limit = count * headroom.iter().copied().fold(f64::INFINITY, f64::min);
            }
            GeneratorResponse::Headroom => {
                flows.shares = if total > 0.0 {
                    headroom.iter().map(|h| h / total).collect()
                } else {
                    vec![1.0 / count; gens.len()]
                };
                flows.uplift_limit = total;
            }
        }

        for &b in &flows.island {
            if let Some(load) = grid.bus(b).load {
                let delta = options.delta_for(b);
                if !load.attacked && load.demand > 0.0 && delta > 0.0 {
                    flows.candidates.push(b);
                    flows.increase.push(load.demand * delta);
                }
            }
        }

        if flows.island.len() < 2 {
            return Ok(flows);
        }
        let mismatch: f64 = flows.island.iter().map(|&b| grid.injection(b)).sum();
        let demand: f64 = flows.island.iter().map(|&b| grid.demand(b)).sum();
        if mismatch.abs() > 1e-6 * demand.max(1.0) {
            return Err(Error::Unbalanced { reference: flows.island[0], mismatch });
        }
        let solver = IslandSolver::new(grid, &flows.island)?;
        let injections: Vec<f64> = flows.island.iter().map(|&b| grid.injection(b)).collect();
        let angles = solver.angles(&injections);
        flows.base_flow = flows.lines.iter().map(|&l| solver.flow(grid, &angles, l)).collect();
        flows.base = flows
            .lines
            .iter()
            .zip(&flows.base_flow)
            .map(|(&l, &f)| alpha * f + (1.0 - alpha) * grid.line(l).avg_flow)
            .collect();

        let position: BTreeMap<BusId, usize> = flows.island.iter().enumerate().map(|(i, &b)| (b, i)).collect();
        let nl = flows.lines.len();
        flows.flow_sensitivity = vec![0.0; flows.candidates.len() * nl];
        for (c, (&bus, &inc)) in flows.candidates.iter().zip(&flows.increase).enumerate() {
            let mut inj = vec![0.0; flows.island.len()];
            inj[position[&bus]] -= inc;
            for (&g, &share) in flows.generators.iter().zip(&flows.shares) {
                inj[position[&g]] += inc * share;
            }
            let angles = solver.angles(&inj);
            for (k, &l) in flows.lines.iter().enumerate() {
                flows.flow_sensitivity[c * nl + k] = solver.flow(grid, &angles, l);
            }
        }
        Ok(flows)
    }

    pub fn sensitivity(&self, candidate: usize, line: usize) -> f64 {
        self.flow_sensitivity[candidate * self.lines.len() + line]
    }

    /// Range `[min, max]` of the flow on `line` over every attack subset.
    pub fn flow_range(&self, line: usize) -> (f64, f64) {
        let mut lo = self.base_flow[line];
        let mut hi = lo;
        for c in 0..self.candidates.len() {
            let s = self.sensitivity(c, line);
            if s > 0.0 {
                hi += s;
            } else {
                lo += s;
            }
        }
        (lo, hi)
    }

    /// Largest `|tested quantity|` on `line` over every attack subset.
    pub fn reach(&self, line: usize) -> f64 {
        let (lo, hi) = self.flow_range(line);
        let shift = self.base[line] - self.alpha * self.base_flow[line];
        (self.alpha * hi + shift).abs().max((self.alpha * lo + shift).abs())
    }

    /// `true` when some attack subset could push `line` to its capacity.
    pub fn can_overload(&self, line: usize) -> bool {
        self.reach(line) >= self.capacity[line] * (1.0 - 1e-9)
    }
}

/// A CIC model together with the handles needed to read its solution.
#[derive(Debug, Clone)]
pub struct CicModel {
    pub lp: LinearProgram,
    pub flows: ImpactFlows,
    pub target: BusId,
    /// Attack indicator of each candidate, aligned with `flows.candidates`.
    pub z: Vec<VarId>,
    /// Failure indicator of each line that can overload.
    pub y: Vec<(LineId, VarId)>,
    pub t: BTreeMap<BusId, VarId>,
    pub uplift: Option<VarId>,
}

impl CicModel {
    /// Candidates set to 1 in `values`.
    pub fn attack_set(&self, values: &[f64]) -> Vec<BusId> {
        self.flows
            .candidates
            .iter()
            .zip(&self.z)
            .filter(|(_, z)| values[z.0] > 0.5)
            .map(|(&b, _)| b)
            .collect()
    }
}

/// Build the minimum-attack MILP for disconnecting `target`.
///
/// Variables: `z` (attack) per candidate, `t` (disconnected) per
/// non-generator bus of the island with `t_target = 1`, `y`/`omega`
/// (overload and its direction) per line that can overload, `phi` (no
/// connection through a neighbor) per such line end, angles, flows, and the
/// generator uplift. Lines that can never overload are fixed intact; the
/// connection rule is written per line so parallel lines count separately.
pub fn build_cic_milp(grid: &PowerGrid, target: BusId, options: &CicOptions) -> Result<CicModel> {
    grid.check_bus(target)?;
    if !grid.is_demand(target) {
        return Err(Error::invalid(format!("bus {target} is not a demand bus")));
    }
    let flows = ImpactFlows::compute(grid, target, options)?;
    let mut lp = LinearProgram::new(Sense::Minimize);
    let z: Vec<VarId> = flows
        .candidates
        .iter()
        .map(|&b| {
            let v = lp.add_binary(format!("z_{b}"));
            lp.set_objective(v, 1.0);
            v
        })
        .collect();
    let mut model = CicModel { lp, flows, target, z, y: Vec::new(), t: BTreeMap::new(), uplift: None };
    let lp = &mut model.lp;
    let flows = &model.flows;

    if flows.generators.is_empty() {
        let t = lp.add_var(format!("t_{target}"), 1.0, 1.0, true);
        model.t.insert(target, t);
        return Ok(model);
    }
    if grid.is_generator(target) {
        lp.add_constraint("target_is_generator", Vec::new(), Relation::Ge, 1.0);
        return Ok(model);
    }

    let n_lines = flows.lines.len();
    let position: BTreeMap<BusId, usize> = flows.island.iter().enumerate().map(|(i, &b)| (b, i)).collect();
    let candidate_of: BTreeMap<BusId, usize> = flows.candidates.iter().enumerate().map(|(c, &b)| (b, c)).collect();

    let uplift_name = match options.response {
        GeneratorResponse::Uniform => "dp",
        GeneratorResponse::Headroom => "dd",
    };
    let per_unit = match options.response {
        GeneratorResponse::Uniform => 1.0 / flows.generators.len() as f64,
        GeneratorResponse::Headroom => 1.0,
    };
    let uplift = lp.add_continuous(uplift_name, 0.0, flows.uplift_limit * per_unit);
    model.uplift = Some(uplift);

    let theta: Vec<VarId> = flows
        .island
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            if i == 0 {
                lp.add_continuous(format!("theta_{b}"), 0.0, 0.0)
            } else {
                lp.add_continuous(format!("theta_{b}"), f64::NEG_INFINITY, f64::INFINITY)
            }
        })
        .collect();
    let f: Vec<VarId> = (0..n_lines)
        .map(|k| {
            let (lo, hi) = flows.flow_range(k);
            let pad = 1e-6 * lo.abs().max(hi.abs()).max(1.0);
            lp.add_continuous(format!("f_{}", flows.lines[k]), lo - pad, hi + pad)
        })
        .collect();

    // Flow balance: outflow - generator uplift + attack increase = p0 - d0.
    let mut balance: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); flows.island.len()];
    for (k, &l) in flows.lines.iter().enumerate() {
        let line = grid.line(l);
        balance[position[&line.from]].push((f[k], 1.0));
        balance[position[&line.to]].push((f[k], -1.0));
    }
    for (g, &b) in flows.generators.iter().enumerate() {
        let coeff = match options.response {
            GeneratorResponse::Uniform => 1.0,
            GeneratorResponse::Headroom => flows.shares[g],
        };
        balance[position[&b]].push((uplift, -coeff));
    }
    for (&b, &c) in &candidate_of {
        balance[position[&b]].push((model.z[c], flows.increase[c]));
    }
    for (i, row) in balance.into_iter().enumerate() {
        let b = flows.island[i];
        lp.add_constraint(format!("balance_{b}"), row, Relation::Eq, grid.injection(b));
    }
    for (k, &l) in flows.lines.iter().enumerate() {
        let line = grid.line(l);
        lp.add_constraint(
            format!("angle_{l}"),
            vec![(theta[position[&line.from]], 1.0), (theta[position[&line.to]], -1.0), (f[k], -line.reactance)],
            Relation::Eq,
            0.0,
        );
    }

    // Overload indicators on the tested quantity q = alpha f + (1 - alpha) avg.
    let alpha = flows.alpha;
    let mut y_of: Vec<Option<VarId>> = vec![None; n_lines];
    for k in 0..n_lines {
        if !flows.can_overload(k) {
            continue;
        }
        let l = flows.lines[k];
        let u = flows.capacity[k];
        let m = options.big_m.unwrap_or(u + flows.reach(k));
        let carry = flows.base[k] - alpha * flows.base_flow[k];
        let y = lp.add_binary(format!("y_{l}"));
        let w = lp.add_binary(format!("w_{l}"));
        lp.add_constraint(format!("over_pos_{l}"), vec![(f[k], alpha), (w, m), (y, -u)], Relation::Ge, -carry);
        lp.add_constraint(format!("over_neg_{l}"), vec![(f[k], -alpha), (w, -m), (y, -u)], Relation::Ge, carry - m);
        y_of[k] = Some(y);
        model.y.push((l, y));
    }

    for &b in &flows.island {
        if !grid.is_generator(b) {
            let t = if b == target {
                lp.add_var(format!("t_{b}"), 1.0, 1.0, true)
            } else {
                lp.add_binary(format!("t_{b}"))
            };
            model.t.insert(b, t);
        }
    }

    // Connection: deg_i t_i <= sum over incident lines of "no connection
    // through this line".
    for &i in &flows.island {
        let Some(&ti) = model.t.get(&i) else { continue };
        let mut row = Vec::new();
        let mut degree = 0.0;
        for (k, &l) in flows.lines.iter().enumerate() {
            let line = grid.line(l);
            let j = if line.from == i {
                line.to
            } else if line.to == i {
                line.from
            } else {
                continue;
            };
            degree += 1.0;
            match (model.t.get(&j), y_of[k]) {
                // Neighbor is a generator.
                (None, Some(y)) => row.push((y, -1.0)),
                (None, None) => {}
                (Some(&tj), None) => row.push((tj, -1.0)),
                (Some(&tj), Some(y)) => {
                    let phi = lp.add_binary(format!("phi_{l}_{i}"));
                    lp.add_constraint(format!("aux1_{l}_{i}"), vec![(phi, 1.0), (tj, -1.0)], Relation::Ge, 0.0);
                    lp.add_constraint(format!("aux2_{l}_{i}"), vec![(phi, 1.0), (y, -1.0)], Relation::Ge, 0.0);
                    lp.add_constraint(
                        format!("aux3_{l}_{i}"),
                        vec![(phi, 1.0), (tj, -1.0), (y, -1.0)],
                        Relation::Le,
                        0.0,
                    );
                    row.push((phi, -1.0));
                }
            }
        }
        if degree > 0.0 {
            row.push((ti, degree));
            lp.add_constraint(format!("connect_{i}"), row, Relation::Le, 0.0);
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{solve_milp, Status};
    use crate::model::{Generator, Load};
    use crate::powerflow::prepare_base_state;

    /// G - A - B with unit demands.
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
    fn chain_needs_one_attack() {
        let grid = chain();
        let model = build_cic_milp(&grid, 2, &CicOptions::default()).unwrap();
        let s = solve_milp(&model.lp, 1000).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert_eq!(s.objective, 1.0);
        assert_eq!(model.attack_set(&s.values), vec![2]);
    }

    #[test]
    fn line_response_is_affine() {
        let grid = chain();
        let flows = ImpactFlows::compute(&grid, 2, &CicOptions::default()).unwrap();
        assert_eq!(flows.candidates, vec![1, 2]);
        // attacking B adds 0.25 on both lines
        assert!((flows.sensitivity(1, 0) - 0.25).abs() < 1e-12);
        assert!((flows.sensitivity(1, 1) - 0.25).abs() < 1e-12);
        assert!((flows.sensitivity(0, 1)).abs() < 1e-12);
        assert!(flows.can_overload(1) && !flows.can_overload(0));
    }

    #[test]
    fn non_demand_target_is_rejected() {
        assert!(build_cic_milp(&chain(), 0, &CicOptions::default()).is_err());
    }

    #[test]
    fn disconnected_target_costs_nothing() {
        let mut grid = chain();
        grid.line_mut(1).alive = false;
        let model = build_cic_milp(&grid, 2, &CicOptions::default()).unwrap();
        let s = solve_milp(&model.lp, 10).unwrap();
        assert_eq!(s.objective, 0.0);
    }
}
