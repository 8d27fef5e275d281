//! Budgeted selection of seed certificates covering the most bus failures.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;

use super::{LinearProgram, MilpSolution, Relation, Sense, VarId};
use crate::model::{BusId, UserId};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct SpacModel {
    pub lp: LinearProgram,
    pub x: BTreeMap<UserId, VarId>,
    pub y: BTreeMap<BusId, VarId>,
    /// `(certificate, bus) -> psi`.
    pub psi: BTreeMap<(usize, BusId), VarId>,
    seed_sets: Vec<Vec<UserId>>,
}

impl SpacModel {
    /// Buses marked failed in `solution`.
    pub fn failed(&self, solution: &MilpSolution) -> Vec<BusId> {
        self.y.iter().filter(|(_, &v)| solution.is_set(v)).map(|(&b, _)| b).collect()
    }

    /// Certificates that support some failed bus in `solution`.
    pub fn used_certificates(&self, solution: &MilpSolution) -> BTreeSet<usize> {
        self.psi
            .iter()
            .filter(|(&(_, j), &v)| solution.is_set(v) && solution.is_set(self.y[&j]))
            .map(|(&(l, _), _)| l)
            .collect()
    }

    /// Union of the certificates used by `solution`; every user in it is
    /// selected, so it never exceeds the budget.
    pub fn seeds(&self, solution: &MilpSolution) -> Vec<UserId> {
        let mut out = BTreeSet::new();
        for l in self.used_certificates(solution) {
            out.extend(self.seed_sets[l].iter().copied());
        }
        out.into_iter().collect()
    }
}

/// Build the set-selection MILP: maximize the number of buses `j` for which
/// some certificate `l` with `j` in `failure_sets[l]` has every user of
/// `seed_sets[l]` selected, using at most `k` users.
///
/// Only users that appear in some certificate get an `x` variable and only
/// buses that appear in some failure set get a `y`; the others are zero in
/// every optimum. The big-M of each certificate row is `max(|S_l|, 1)`.
pub fn build_spac_milp(seed_sets: &[Vec<UserId>], failure_sets: &[Vec<BusId>], k: usize) -> Result<SpacModel> {
    if seed_sets.len() != failure_sets.len() {
        return Err(Error::invalid("need one failure set per seed set"));
    }
    let seed_sets: Vec<Vec<UserId>> = seed_sets
        .iter()
        .map(|s| s.iter().copied().collect::<BTreeSet<_>>().into_iter().collect())
        .collect();
    let mut lp = LinearProgram::new(Sense::Maximize);
    let users: BTreeSet<UserId> = seed_sets.iter().flatten().copied().collect();
    let buses: BTreeSet<BusId> = failure_sets.iter().flatten().copied().collect();
    let x: BTreeMap<UserId, VarId> = users.iter().map(|&u| (u, lp.add_binary(format!("x_{u}")))).collect();
    let y: BTreeMap<BusId, VarId> = buses
        .iter()
        .map(|&b| {
            let v = lp.add_binary(format!("y_{b}"));
            lp.set_objective(v, 1.0);
            (b, v)
        })
        .collect();
    if !x.is_empty() {
        lp.add_constraint("budget", x.values().map(|&v| (v, 1.0)).collect(), Relation::Le, k as f64);
    }
    let mut psi = BTreeMap::new();
    for (l, (seeds, failures)) in seed_sets.iter().zip(failure_sets).enumerate() {
        let m = seeds.len().max(1) as f64;
        for &j in failures.iter().collect::<BTreeSet<_>>() {
            let p = lp.add_binary(format!("psi_{l}_{j}"));
            psi.insert((l, j), p);
            // M (2 - y_j - psi_lj) >= |S_l| - sum x_i
            let mut row: Vec<(VarId, f64)> = seeds.iter().map(|u| (x[u], 1.0)).collect();
            row.push((y[&j], -m));
            row.push((p, -m));
            lp.add_constraint(format!("cover_{l}_{j}"), row, Relation::Ge, seeds.len() as f64 - 2.0 * m);
        }
    }
    for &j in &buses {
        let row: Vec<(VarId, f64)> = psi.iter().filter(|(&(_, b), _)| b == j).map(|(_, &v)| (v, 1.0)).collect();
        lp.add_constraint(format!("select_{j}"), row, Relation::Eq, 1.0);
    }
    Ok(SpacModel { lp, x, y, psi, seed_sets })
}
