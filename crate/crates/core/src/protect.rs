//! Controlled load shedding between cascade rounds.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::Rng;

use crate::diffusion::{Diffuser, SeedSet};
use crate::milp::{build_cls_lp, solve_lp};
use crate::model::{BusId, PowerGrid, Scenario};
use crate::powerflow::{apply_demand_changes, balance_all, solve_dc_flow, Cascade};
use crate::{Error, Result};

/// Line limit used in the shedding LP, a hair under capacity so the
/// re-solved flow never trips the overload test through round-off.
pub const CLS_MARGIN: f64 = 1.0 - 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct ClsReport {
    /// Round the intervention preceded (0 when applied outside a replay).
    pub round: usize,
    /// Shed load per demand bus (MW), zero entries omitted.
    pub shed: BTreeMap<BusId, f64>,
    /// Ramp-down per generator bus (MW), zero entries omitted.
    pub ramp_down: BTreeMap<BusId, f64>,
    /// Demand served after shedding over demand before it.
    pub yield_after: f64,
}

impl ClsReport {
    pub fn total_shed(&self) -> f64 {
        self.shed.values().sum()
    }
}

/// Solve the shedding LP on a balanced copy of `grid`, apply it, and return
/// the new operating point with moving averages reset to its flows.
///
/// Generator minimum outputs are lowered where the LP ramps a unit below
/// them, so later balancing keeps the shed dispatch.
pub fn apply_cls(grid: &PowerGrid) -> Result<(PowerGrid, ClsReport)> {
    let mut grid = grid.clone();
    balance_all(&mut grid);
    let before = grid.total_demand();
    let model = build_cls_lp(&grid, CLS_MARGIN);
    let solution = solve_lp(&model.lp)?;
    if !solution.has_point() {
        return Err(Error::Numerical(alloc::format!("shedding LP returned {:?}", solution.status)));
    }
    let tiny = 1e-9;
    let mut shed = BTreeMap::new();
    for (&b, &v) in &model.tau {
        let t = solution.value(v).max(0.0);
        if t > tiny {
            let load = grid.bus_mut(b).load.as_mut().expect("demand bus");
            load.demand = (load.demand - t).max(0.0);
            shed.insert(b, t);
        }
    }
    let mut ramp_down = BTreeMap::new();
    for (&b, &v) in &model.beta {
        let r = solution.value(v).max(0.0);
        if r > tiny {
            let g = grid.bus_mut(b).generator.as_mut().expect("generator bus");
            g.output = (g.output - r).max(0.0);
            g.min = g.min.min(g.output);
            ramp_down.insert(b, r);
        }
    }
    balance_all(&mut grid);
    let flows = solve_dc_flow(&grid)?;
    flows.apply(&mut grid);
    grid.reset_moving_average();
    let after = grid.total_demand();
    let yield_after = if before > 0.0 { (after / before).clamp(0.0, 1.0) } else { 1.0 };
    Ok((grid, ClsReport { round: 0, shed, ramp_down, yield_after }))
}

/// Intervention round against final yield for one attacked state.
///
/// Row `r < R` replays the cascade from `attacked`, applies [`apply_cls`]
/// just before round `r`, and runs the rest of the cascade. The last row,
/// `R`, is the uncontrolled cascade, where `R` is its number of rounds
/// including the final quiet one. Yields are relative to the demand at the
/// start of the cascade.
pub fn cls_replay(attacked: &PowerGrid, alpha: f64) -> Result<Vec<(usize, f64)>> {
    let mut free = attacked.clone();
    let uncontrolled = Cascade::new(&free, alpha)?.run(&mut free)?;
    let total = uncontrolled.rounds.len().max(1);
    let mut rows = Vec::with_capacity(total);
    for r in 1..total {
        let mut grid = attacked.clone();
        let mut cascade = Cascade::new(&grid, alpha)?;
        for _ in 1..r {
            cascade.step(&mut grid)?;
        }
        let (mut shed, _) = apply_cls(&grid)?;
        while !cascade.step(&mut shed)? {}
        let outcome = cascade.finish(&shed)?;
        rows.push((r, outcome.final_yield));
    }
    rows.push((total, uncontrolled.final_yield));
    Ok(rows)
}

/// Draw one diffusion from `seeds`, apply the resulting attack, and run
/// [`cls_replay`] on it.
pub fn cls_experiment<R: Rng + ?Sized>(scenario: &Scenario, seeds: &SeedSet, rng: &mut R) -> Result<Vec<(usize, f64)>> {
    let attacked = attacked_state(scenario, seeds, rng)?;
    cls_replay(&attacked, scenario.params.alpha)
}

/// The scenario grid after one diffusion realization of `seeds`.
pub fn attacked_state<R: Rng + ?Sized>(scenario: &Scenario, seeds: &SeedSet, rng: &mut R) -> Result<PowerGrid> {
    let active = Diffuser::new(&scenario.social).run(seeds.as_slice(), rng).to_vec();
    let buses = scenario.project_to_buses(&active);
    let changes: Vec<(BusId, f64)> = buses.iter().map(|&b| (b, scenario.params.delta_for(b))).collect();
    let mut grid = scenario.grid.clone();
    apply_demand_changes(&mut grid, &changes)?;
    Ok(grid)
}
