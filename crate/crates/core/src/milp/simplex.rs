//! Bounded-variable primal simplex on a dense tableau.
//!
//! Row `i` becomes `a_i x + s_i = b_i` with the slack bounded by the row's
//! relation (`<=`: `s >= 0`, `>=`: `s <= 0`, `=`: `s = 0`). Phase 1 adds an
//! artificial to every row whose residual does not fit its slack and
//! minimizes their sum; phase 2 optimizes the real objective from there.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{LinearProgram, MilpSolution, Relation, Sense, Status, CHECK_TOLERANCE};
use crate::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-9;
/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const STALL_LIMIT: usize = 50;
const REFACTOR_EVERY: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Place {
    Basic,
    Lower,
    Upper,
    /// A nonbasic free column, held at zero.
    Zero,
}

enum Step {
    Optimal,
    Unbounded,
    Moved,
}

struct Tableau {
    m: usize,
    cols: usize,
    /// Original columns, row-major `m x cols`.
    a: Vec<f64>,
    b: Vec<f64>,
    /// Current `B^-1 A`.
    t: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Value of every column; authoritative for nonbasic ones.
    x: Vec<f64>,
    place: Vec<Place>,
    basis: Vec<usize>,
    cost: Vec<f64>,
    reduced: Vec<f64>,
    first_artificial: usize,
    pivots: usize,
    since_refactor: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram, lower: &[f64], upper: &[f64]) -> Self {
        let n = lp.variables.len();
        let m = lp.constraints.len();
        let mut x: Vec<f64> = (0..n)
            .map(|j| {
                if lower[j].is_finite() {
                    lower[j]
                } else if upper[j].is_finite() {
                    upper[j]
                } else {
                    0.0
                }
            })
            .collect();
        let mut place: Vec<Place> = (0..n)
            .map(|j| {
                if lower[j].is_finite() {
                    Place::Lower
                } else if upper[j].is_finite() {
                    Place::Upper
                } else {
                    Place::Zero
                }
            })
            .collect();
        let mut lo = lower.to_vec();
        let mut hi = upper.to_vec();

        let mut dense = vec![0.0; m * n];
        for (i, c) in lp.constraints.iter().enumerate() {
            for &(v, a) in &c.coeffs {
                dense[i * n + v.0] += a;
            }
        }
        let mut residual = vec![0.0; m];
        let mut artificial_rows = Vec::new();
        let mut slack_value = vec![0.0; m];
        let mut slack_basic = vec![false; m];
        for (i, c) in lp.constraints.iter().enumerate() {
            let act: f64 = (0..n).map(|j| dense[i * n + j] * x[j]).sum();
            let r = c.rhs - act;
            let (slo, shi) = match c.relation {
                Relation::Le => (0.0, f64::INFINITY),
                Relation::Ge => (f64::NEG_INFINITY, 0.0),
                Relation::Eq => (0.0, 0.0),
            };
            lo.push(slo);
            hi.push(shi);
            let clamped = r.clamp(slo, shi);
            if (r - clamped).abs() <= FEAS_TOL * r.abs().max(1.0) && slo < shi {
                slack_value[i] = r;
                slack_basic[i] = true;
            } else {
                slack_value[i] = clamped;
                residual[i] = r - clamped;
                artificial_rows.push(i);
            }
        }
        for i in 0..m {
            x.push(slack_value[i]);
            place.push(if slack_basic[i] {
                Place::Basic
            } else if slack_value[i] == lo[n + i] {
                Place::Lower
            } else {
                Place::Upper
            });
        }
        let first_artificial = n + m;
        let cols = n + m + artificial_rows.len();
        let mut a = vec![0.0; m * cols];
        for i in 0..m {
            a[i * cols..i * cols + n].copy_from_slice(&dense[i * n..(i + 1) * n]);
            a[i * cols + n + i] = 1.0;
        }
        let mut basis: Vec<usize> = (0..m).map(|i| n + i).collect();
        for (k, &i) in artificial_rows.iter().enumerate() {
            let col = first_artificial + k;
            a[i * cols + col] = if residual[i] >= 0.0 { 1.0 } else { -1.0 };
            lo.push(0.0);
            hi.push(f64::INFINITY);
            x.push(residual[i].abs());
            place.push(Place::Basic);
            basis[i] = col;
        }
        let b = lp.constraints.iter().map(|c| c.rhs).collect();
        let mut tab = Tableau {
            m,
            cols,
            t: a.clone(),
            a,
            b,
            lower: lo,
            upper: hi,
            x,
            place,
            basis,
            cost: vec![0.0; cols],
            reduced: vec![0.0; cols],
            first_artificial,
            pivots: 0,
            since_refactor: 0,
        };
        // The basis is diagonal with +-1 entries.
        for i in 0..m {
            let s = tab.a[i * cols + tab.basis[i]];
            if s < 0.0 {
                for v in &mut tab.t[i * cols..(i + 1) * cols] {
                    *v = -*v;
                }
            }
        }
        tab
    }

    fn set_costs(&mut self, cost: Vec<f64>) {
        self.cost = cost;
        self.price();
    }

    fn price(&mut self) {
        let cols = self.cols;
        self.reduced.copy_from_slice(&self.cost);
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * cols..(i + 1) * cols];
                for (d, &v) in self.reduced.iter_mut().zip(row) {
                    *d -= cb * v;
                }
            }
        }
    }

    /// Rebuild `B^-1 A` and the basic values from the original columns.
    fn refactor(&mut self) -> Result<()> {
        let (m, cols) = (self.m, self.cols);
        let mut bmat = vec![0.0; m * m];
        for i in 0..m {
            for (k, &col) in self.basis.iter().enumerate() {
                bmat[i * m + k] = self.a[i * cols + col];
            }
        }
        let mut rhs = self.a.clone();
        let mut bvec: Vec<f64> = self.b.clone();
        for j in 0..cols {
            if self.place[j] != Place::Basic && self.x[j] != 0.0 {
                for i in 0..m {
                    bvec[i] -= self.a[i * cols + j] * self.x[j];
                }
            }
        }
        // Gauss-Jordan with partial pivoting on [B | A | b].
        for k in 0..m {
            let p = (k..m)
                .max_by(|&r, &s| bmat[r * m + k].abs().total_cmp(&bmat[s * m + k].abs()))
                .expect("non-empty range");
            if bmat[p * m + k].abs() < 1e-12 {
                return Err(Error::Numerical(format!("basis matrix singular at column {k}")));
            }
            if p != k {
                for c in 0..m {
                    bmat.swap(k * m + c, p * m + c);
                }
                for c in 0..cols {
                    rhs.swap(k * cols + c, p * cols + c);
                }
                bvec.swap(k, p);
            }
            let piv = bmat[k * m + k];
            for c in 0..m {
                bmat[k * m + c] /= piv;
            }
            for c in 0..cols {
                rhs[k * cols + c] /= piv;
            }
            bvec[k] /= piv;
            for r in 0..m {
                if r == k {
                    continue;
                }
                let f = bmat[r * m + k];
                if f == 0.0 {
                    continue;
                }
                for c in 0..m {
                    bmat[r * m + c] -= f * bmat[k * m + c];
                }
                for c in 0..cols {
                    rhs[r * cols + c] -= f * rhs[k * cols + c];
                }
                bvec[r] -= f * bvec[k];
            }
        }
        // After elimination bmat is the identity, so row k of the result is
        // the row of basic variable k.
        self.t = rhs;
        for (k, &col) in self.basis.iter().enumerate() {
            self.x[col] = bvec[k];
        }
        self.since_refactor = 0;
        self.price();
        Ok(())
    }

    fn choose_entering(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.cols {
            let d = self.reduced[j];
            let dir = match self.place[j] {
                Place::Basic => continue,
                _ if self.lower[j] == self.upper[j] => continue,
                Place::Lower if d < -COST_TOL => 1.0,
                Place::Upper if d > COST_TOL => -1.0,
                Place::Zero if d < -COST_TOL => 1.0,
                Place::Zero if d > COST_TOL => -1.0,
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            if best.map_or(true, |(_, _, s)| d.abs() > s) {
                best = Some((j, dir, d.abs()));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    fn step(&mut self, bland: bool) -> Result<(Step, f64)> {
        let Some((q, dir)) = self.choose_entering(bland) else {
            return Ok((Step::Optimal, 0.0));
        };
        let cols = self.cols;
        let flip = self.upper[q] - self.lower[q];
        let mut best: Option<(usize, f64, f64)> = None;
        for i in 0..self.m {
            let alpha = self.t[i * cols + q];
            if alpha.abs() <= PIVOT_TOL {
                continue;
            }
            let delta = -alpha * dir;
            let col = self.basis[i];
            let value = self.x[col];
            let ratio = if delta < 0.0 {
                if !self.lower[col].is_finite() {
                    continue;
                }
                ((value - self.lower[col]) / -delta).max(0.0)
            } else {
                if !self.upper[col].is_finite() {
                    continue;
                }
                ((self.upper[col] - value) / delta).max(0.0)
            };
            let better = match best {
                None => true,
                Some((r, best_ratio, _)) => {
                    if ratio < best_ratio - 1e-12 {
                        true
                    } else if ratio <= best_ratio + 1e-12 {
                        if bland {
                            col < self.basis[r]
                        } else {
                            alpha.abs() > self.t[r * cols + q].abs()
                        }
                    } else {
                        false
                    }
                }
            };
            if better {
                best = Some((i, ratio, delta));
            }
        }
        let (limit, leave) = match best {
            Some((r, ratio, delta)) if ratio < flip => (ratio, Some((r, delta))),
            _ => (flip, None),
        };
        if !limit.is_finite() {
            return Ok((Step::Unbounded, 0.0));
        }
        let t = limit;
        for i in 0..self.m {
            let alpha = self.t[i * cols + q];
            if alpha != 0.0 {
                let col = self.basis[i];
                self.x[col] -= alpha * dir * t;
            }
        }
        self.x[q] += dir * t;

        match leave {
            None => {
                // Bound flip of the entering column.
                self.place[q] = if dir > 0.0 { Place::Upper } else { Place::Lower };
                self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
            }
            Some((r, delta)) => {
                let out = self.basis[r];
                if delta < 0.0 {
                    self.place[out] = Place::Lower;
                    self.x[out] = self.lower[out];
                } else {
                    self.place[out] = Place::Upper;
                    self.x[out] = self.upper[out];
                }
                self.pivot(r, q);
            }
        }
        Ok((Step::Moved, t))
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let cols = self.cols;
        let piv = self.t[r * cols + q];
        for v in &mut self.t[r * cols..(r + 1) * cols] {
            *v /= piv;
        }
        let (before, rest) = self.t.split_at_mut(r * cols);
        let (prow, after) = rest.split_at_mut(cols);
        for row in before.chunks_exact_mut(cols).chain(after.chunks_exact_mut(cols)) {
            let f = row[q];
            if f != 0.0 {
                for (v, &p) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * p;
                }
                row[q] = 0.0;
            }
        }
        let f = self.reduced[q];
        if f != 0.0 {
            for (d, &p) in self.reduced.iter_mut().zip(prow.iter()) {
                *d -= f * p;
            }
            self.reduced[q] = 0.0;
        }
        self.place[q] = Place::Basic;
        self.basis[r] = q;
        self.pivots += 1;
        self.since_refactor += 1;
    }

    fn optimize(&mut self, max_iter: usize) -> Result<Step> {
        let mut stalled = 0;
        let mut bland = false;
        for _ in 0..max_iter {
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
            match self.step(bland)? {
                (Step::Moved, t) => {
                    if t <= 1e-12 {
                        stalled += 1;
                        if stalled >= STALL_LIMIT {
                            bland = true;
                        }
                    } else {
                        stalled = 0;
                    }
                }
                (done, _) => return Ok(done),
            }
        }
        Err(Error::Numerical(format!("simplex did not converge in {max_iter} iterations")))
    }

    fn drive_out_artificials(&mut self) {
        let cols = self.cols;
        for r in 0..self.m {
            if self.basis[r] < self.first_artificial {
                continue;
            }
            let entering = (0..self.first_artificial)
                .filter(|&j| self.place[j] != Place::Basic)
                .max_by(|&a, &b| self.t[r * cols + a].abs().total_cmp(&self.t[r * cols + b].abs()));
            if let Some(j) = entering {
                if self.t[r * cols + j].abs() > 1e-7 {
                    let out = self.basis[r];
                    self.place[out] = Place::Lower;
                    self.x[out] = 0.0;
                    let value = self.x[j];
                    self.pivot(r, j);
                    self.x[j] = value;
                }
            }
        }
    }
}

/// Solve the LP relaxation of `lp` (integrality flags are ignored).
pub fn solve_lp(lp: &LinearProgram) -> Result<MilpSolution> {
    lp.validate()?;
    let lower: Vec<f64> = lp.variables.iter().map(|v| v.lower).collect();
    let upper: Vec<f64> = lp.variables.iter().map(|v| v.upper).collect();
    solve_with_bounds(lp, &lower, &upper)
}

/// Simplex on `lp` with its variable bounds replaced by `lower`/`upper`.
pub(crate) fn solve_with_bounds(lp: &LinearProgram, lower: &[f64], upper: &[f64]) -> Result<MilpSolution> {
    let n = lp.variables.len();
    if (0..n).any(|j| lower[j] > upper[j]) {
        return Ok(MilpSolution::without_point(Status::Infeasible, 1));
    }
    let mut tab = Tableau::build(lp, lower, upper);
    let max_iter = 50 * (tab.m + tab.cols) + 1000;

    if tab.cols > tab.first_artificial {
        let mut c1 = vec![0.0; tab.cols];
        for c in &mut c1[tab.first_artificial..] {
            *c = 1.0;
        }
        tab.set_costs(c1);
        tab.optimize(max_iter)?;
        tab.refactor()?;
        let infeasibility: f64 = (tab.first_artificial..tab.cols).map(|j| tab.x[j].abs()).sum();
        let scale = tab.b.iter().fold(1.0f64, |s, v| s.max(v.abs()));
        if infeasibility > 1e-7 * scale {
            return Ok(MilpSolution::without_point(Status::Infeasible, 1));
        }
        for j in tab.first_artificial..tab.cols {
            tab.upper[j] = 0.0;
        }
        tab.drive_out_artificials();
    }

    let sign = if lp.sense == Sense::Maximize { -1.0 } else { 1.0 };
    let mut c2 = vec![0.0; tab.cols];
    for j in 0..n {
        c2[j] = sign * lp.objective[j];
    }
    tab.set_costs(c2);
    if let Step::Unbounded = tab.optimize(max_iter)? {
        return Ok(MilpSolution::without_point(Status::Unbounded, 1));
    }
    tab.refactor()?;

    let mut values: Vec<f64> = tab.x[..n].to_vec();
    for j in 0..n {
        // Snap values that sit on a bound within round-off.
        for bound in [lower[j], upper[j]] {
            if bound.is_finite() && (values[j] - bound).abs() <= 1e-11 * bound.abs().max(1.0) {
                values[j] = bound;
            }
        }
    }
    let bounded = LinearProgram {
        sense: lp.sense,
        variables: lp
            .variables
            .iter()
            .enumerate()
            .map(|(j, v)| super::Variable { lower: lower[j], upper: upper[j], ..v.clone() })
            .collect(),
        objective: Vec::new(),
        constraints: Vec::new(),
    };
    let bound_violation = bounded.max_violation(&values, false);
    let row_violation = lp
        .constraints
        .iter()
        .map(|c| c.violation(&values) / c.coeffs.iter().map(|&(v, a)| (a * values[v.0]).abs()).fold(c.rhs.abs(), f64::max).max(1.0))
        .fold(0.0f64, f64::max);
    let worst = bound_violation.max(row_violation);
    if worst > CHECK_TOLERANCE {
        return Err(Error::Numerical(format!(
            "simplex point violates the model by {worst:e} after {} pivots",
            tab.pivots
        )));
    }
    Ok(MilpSolution { status: Status::Optimal, objective: lp.objective_value(&values), values, nodes: 1 })
}
