//! Best-bound branch-and-bound over the simplex relaxation.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::simplex::solve_with_bounds;
use super::{LinearProgram, MilpSolution, Sense, Status, CHECK_TOLERANCE};
use crate::Result;

const INT_TOL: f64 = 1e-6;

struct Node {
    /// Relaxation bound, in minimization form.
    bound: f64,
    seq: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // Max-heap on the reverse: smallest bound first, then oldest node.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Solve `lp` with its integer variables enforced, exploring at most
/// `node_budget` relaxations. Nodes are taken in best-bound order; the
/// branching variable is the most fractional one (smallest index on ties).
pub fn solve_milp(lp: &LinearProgram, node_budget: usize) -> Result<MilpSolution> {
    lp.validate()?;
    let sign = if lp.sense == Sense::Maximize { -1.0 } else { 1.0 };
    let integral = lp.has_integral_objective();
    let mut lower: Vec<f64> = lp.variables.iter().map(|v| v.lower).collect();
    let mut upper: Vec<f64> = lp.variables.iter().map(|v| v.upper).collect();
    for (j, v) in lp.variables.iter().enumerate() {
        if v.integer {
            lower[j] = libm::ceil(lower[j] - INT_TOL);
            upper[j] = libm::floor(upper[j] + INT_TOL);
        }
    }

    let mut heap = BinaryHeap::new();
    heap.push(Node { bound: f64::NEG_INFINITY, seq: 0, lower, upper });
    let mut seq = 1;
    let mut explored = 0;
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut unbounded = false;

    let prunes = |bound: f64, incumbent: &Option<(f64, Vec<f64>)>| -> bool {
        match incumbent {
            None => false,
            Some((best, _)) => {
                let bound = if integral { libm::ceil(bound - INT_TOL) } else { bound };
                bound >= best - 1e-9 * best.abs().max(1.0)
            }
        }
    };

    while let Some(node) = heap.pop() {
        if prunes(node.bound, &incumbent) {
            continue;
        }
        if explored >= node_budget {
            heap.push(node);
            break;
        }
        explored += 1;
        let relax = solve_with_bounds(lp, &node.lower, &node.upper)?;
        match relax.status {
            Status::Infeasible => continue,
            Status::Unbounded => {
                unbounded = true;
                break;
            }
            _ => {}
        }
        let bound = sign * relax.objective;
        if prunes(bound, &incumbent) {
            continue;
        }
        let branch = lp
            .variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.integer)
            .map(|(j, _)| (j, relax.values[j] - libm::floor(relax.values[j])))
            .filter(|&(_, frac)| frac > INT_TOL && frac < 1.0 - INT_TOL)
            .max_by(|a, b| {
                let da = (a.1 - 0.5).abs();
                let db = (b.1 - 0.5).abs();
                db.total_cmp(&da).then_with(|| b.0.cmp(&a.0))
            });
        match branch {
            None => {
                let mut values = relax.values;
                for (j, v) in lp.variables.iter().enumerate() {
                    if v.integer {
                        values[j] = libm::round(values[j]);
                    }
                }
                if lp.max_violation(&values, true) > CHECK_TOLERANCE {
                    // Re-solve the continuous part with the integers pinned.
                    let (mut lo, mut hi) = (node.lower, node.upper);
                    for (j, v) in lp.variables.iter().enumerate() {
                        if v.integer {
                            lo[j] = values[j];
                            hi[j] = values[j];
                        }
                    }
                    let pinned = solve_with_bounds(lp, &lo, &hi)?;
                    if pinned.status != Status::Optimal {
                        continue;
                    }
                    values = pinned.values;
                }
                let value = sign * lp.objective_value(&values);
                if incumbent.as_ref().map_or(true, |(best, _)| value < *best) {
                    incumbent = Some((value, values));
                }
            }
            Some((j, _)) => {
                let x = relax.values[j];
                let mut down = node.upper.clone();
                down[j] = libm::floor(x);
                heap.push(Node { bound, seq, lower: node.lower.clone(), upper: down });
                seq += 1;
                let mut up = node.lower;
                up[j] = libm::ceil(x);
                heap.push(Node { bound, seq, lower: up, upper: node.upper });
                seq += 1;
            }
        }
    }

    if unbounded {
        return Ok(MilpSolution::without_point(Status::Unbounded, explored));
    }
    let open = heap.iter().any(|n| !prunes(n.bound, &incumbent));
    match (incumbent, open) {
        (Some((_, values)), false) => Ok(MilpSolution {
            status: Status::Optimal,
            objective: lp.objective_value(&values),
            values,
            nodes: explored,
        }),
        (Some((_, values)), true) => Ok(MilpSolution {
            status: Status::BudgetExceeded,
            objective: lp.objective_value(&values),
            values,
            nodes: explored,
        }),
        (None, false) => Ok(MilpSolution::without_point(Status::Infeasible, explored)),
        (None, true) => Ok(MilpSolution::without_point(Status::BudgetExceeded, explored)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::Relation;
    use alloc::vec;

    #[test]
    fn knapsack() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        let a = lp.add_binary("a");
        let b = lp.add_binary("b");
        lp.set_objective(a, 3.0);
        lp.set_objective(b, 2.0);
        lp.add_constraint("cap", vec![(a, 1.0), (b, 1.0)], Relation::Le, 1.0);
        let s = solve_milp(&lp, 100).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert_eq!(s.objective, 3.0);
        assert!(s.is_set(a) && !s.is_set(b));
    }

    #[test]
    fn infeasible_binary() {
        let mut lp = LinearProgram::new(Sense::Minimize);
        let a = lp.add_binary("a");
        lp.add_constraint("lo", vec![(a, 1.0)], Relation::Ge, 1.0);
        lp.add_constraint("hi", vec![(a, 1.0)], Relation::Le, 0.0);
        assert_eq!(solve_milp(&lp, 100).unwrap().status, Status::Infeasible);
    }

    #[test]
    fn fractional_relaxation_needs_branching() {
        // max x + y s.t. 2x + 2y <= 3, binaries: relaxation 1.5, integer 1
        let mut lp = LinearProgram::new(Sense::Maximize);
        let x = lp.add_binary("x");
        let y = lp.add_binary("y");
        lp.set_objective(x, 1.0);
        lp.set_objective(y, 1.0);
        lp.add_constraint("c", vec![(x, 2.0), (y, 2.0)], Relation::Le, 3.0);
        let s = solve_milp(&lp, 100).unwrap();
        assert_eq!(s.objective, 1.0);
        assert!(s.nodes > 1);
    }

    #[test]
    fn budget_exhaustion_reports_status() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        let vars: Vec<_> = (0..6).map(|i| lp.add_binary(alloc::format!("v{i}"))).collect();
        for &v in &vars {
            lp.set_objective(v, 1.0);
        }
        lp.add_constraint("c", vars.iter().map(|&v| (v, 2.0)).collect(), Relation::Le, 7.0);
        let s = solve_milp(&lp, 1).unwrap();
        assert_eq!(s.status, Status::BudgetExceeded);
    }
}
