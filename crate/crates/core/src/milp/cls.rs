//! Controlled load shedding: the least demand to drop so that the DC flow of
//! the current topology respects every line capacity.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{LinearProgram, Relation, Sense, VarId};
use crate::model::{BusId, LineId, PowerGrid};
use crate::powerflow::find_islands;

#[derive(Debug, Clone)]
pub struct ClsModel {
    pub lp: LinearProgram,
    /// Shed load per demand bus.
    pub tau: BTreeMap<BusId, VarId>,
    /// Generator ramp-down per generator bus.
    pub beta: BTreeMap<BusId, VarId>,
    pub flow: BTreeMap<LineId, VarId>,
}

/// Build the shedding LP over the live topology of `grid`.
///
/// Variables are one angle per bus (zero at each island's first bus), one
/// flow per live line bounded by `[-margin * u, margin * u]`, shedding
/// `tau_i` in `[0, d_i]`, and ramp-down `beta_i` in `[0, p_i]`. Rows are bus
/// balance and the angle-flow relation; the objective is `min sum tau`.
/// Generator minimum outputs are not enforced.
pub fn build_cls_lp(grid: &PowerGrid, margin: f64) -> ClsModel {
    let mut lp = LinearProgram::new(Sense::Minimize);
    let mut theta = vec![VarId(usize::MAX); grid.bus_count()];
    for island in find_islands(grid) {
        for (i, &b) in island.iter().enumerate() {
            theta[b] = if i == 0 {
                lp.add_continuous(format!("theta_{b}"), 0.0, 0.0)
            } else {
                lp.add_continuous(format!("theta_{b}"), f64::NEG_INFINITY, f64::INFINITY)
            };
        }
    }
    let mut flow = BTreeMap::new();
    for (l, line) in grid.lines().iter().enumerate() {
        if line.alive {
            let cap = margin * line.capacity;
            flow.insert(l, lp.add_continuous(format!("f_{l}"), -cap, cap));
        }
    }
    let mut tau = BTreeMap::new();
    let mut beta = BTreeMap::new();
    for b in 0..grid.bus_count() {
        if grid.is_demand(b) {
            let v = lp.add_continuous(format!("tau_{b}"), 0.0, grid.demand(b).max(0.0));
            lp.set_objective(v, 1.0);
            tau.insert(b, v);
        }
        if grid.is_generator(b) {
            beta.insert(b, lp.add_continuous(format!("beta_{b}"), 0.0, grid.generation(b).max(0.0)));
        }
    }

    let mut rows: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); grid.bus_count()];
    for (&l, &f) in &flow {
        let line = grid.line(l);
        rows[line.from].push((f, 1.0));
        rows[line.to].push((f, -1.0));
        lp.add_constraint(
            format!("angle_{l}"),
            vec![(theta[line.from], 1.0), (theta[line.to], -1.0), (f, -line.reactance)],
            Relation::Eq,
            0.0,
        );
    }
    // outflow = (p - beta) - (d - tau)
    for (b, mut row) in rows.into_iter().enumerate() {
        if let Some(&v) = beta.get(&b) {
            row.push((v, 1.0));
        }
        if let Some(&v) = tau.get(&b) {
            row.push((v, -1.0));
        }
        lp.add_constraint(format!("balance_{b}"), row, Relation::Eq, grid.injection(b));
    }
    ClsModel { lp, tau, beta, flow }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::solve_lp;
    use crate::model::{Generator, Load};

    #[test]
    fn single_line_overload() {
        let mut grid = PowerGrid::new();
        let g = grid.add_bus(0);
        let d = grid.add_bus(1);
        grid.set_generator(g, Generator { output: 1.25, min: 0.0, max: 5.0 }).unwrap();
        grid.set_load(d, Load::new(1.25)).unwrap();
        grid.add_line(g, d, 1.0, 1.0).unwrap();
        let m = build_cls_lp(&grid, 1.0);
        let s = solve_lp(&m.lp).unwrap();
        assert!((s.value(m.tau[&d]) - 0.25).abs() < 1e-9);
        assert!((s.value(m.beta[&g]) - 0.25).abs() < 1e-9);
    }
}
