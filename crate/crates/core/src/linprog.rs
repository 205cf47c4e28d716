//! Dense revised simplex for small linear programs.
//!
//! Problems are stated as `min c^T x` subject to `A x >= b`, `E x = f` and
//! optional per-variable bounds. Dual multipliers are reported for every
//! inequality and equality row.

use crate::error::{Error, Result};

const FEAS_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-10;
const PIV_TOL: f64 = 1e-9;
const DEGEN_STEP: f64 = 1e-12;
const REFACTOR_EVERY: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub ineq_a: Vec<Vec<f64>>,
    pub ineq_b: Vec<f64>,
    pub eq_a: Vec<Vec<f64>>,
    pub eq_b: Vec<f64>,
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpResult {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective_value: f64,
    pub ineq_duals: Vec<f64>,
    pub eq_duals: Vec<f64>,
}

impl LpResult {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

impl LpProblem {
    /// `n` free variables, zero objective, no constraints.
    pub fn new(n: usize) -> Self {
        LpProblem {
            objective: vec![0.0; n],
            ineq_a: Vec::new(),
            ineq_b: Vec::new(),
            eq_a: Vec::new(),
            eq_b: Vec::new(),
            lower: vec![None; n],
            upper: vec![None; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn set_objective(&mut self, c: Vec<f64>) {
        self.objective = c;
    }

    pub fn add_ge(&mut self, row: Vec<f64>, rhs: f64) {
        self.ineq_a.push(row);
        self.ineq_b.push(rhs);
    }

    pub fn add_le(&mut self, row: Vec<f64>, rhs: f64) {
        self.ineq_a.push(row.into_iter().map(|v| -v).collect());
        self.ineq_b.push(-rhs);
    }

    pub fn add_eq(&mut self, row: Vec<f64>, rhs: f64) {
        self.eq_a.push(row);
        self.eq_b.push(rhs);
    }

    pub fn set_bounds(&mut self, j: usize, lo: Option<f64>, hi: Option<f64>) {
        self.lower[j] = lo;
        self.upper[j] = hi;
    }

    pub fn set_nonneg(&mut self, range: std::ops::Range<usize>) {
        for j in range {
            self.lower[j] = Some(0.0);
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        let bad_len = self.ineq_a.iter().chain(self.eq_a.iter()).any(|r| r.len() != n)
            || self.ineq_a.len() != self.ineq_b.len()
            || self.eq_a.len() != self.eq_b.len()
            || self.lower.len() != n
            || self.upper.len() != n;
        if bad_len {
            return Err(Error::DimensionMismatch("lp rows and bounds must match objective length".into()));
        }
        let finite = self.objective.iter().all(|v| v.is_finite())
            && self.ineq_a.iter().flatten().all(|v| v.is_finite())
            && self.eq_a.iter().flatten().all(|v| v.is_finite())
            && self.ineq_b.iter().chain(self.eq_b.iter()).all(|v| v.is_finite())
            && self.lower.iter().chain(self.upper.iter()).flatten().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidInput("non-finite lp coefficient".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
enum VarMap {
    Shift { col: usize, lo: f64 },
    Flip { col: usize, hi: f64 },
    Split { pos: usize, neg: usize },
}

#[derive(Debug, Clone, Copy)]
enum RowOrigin {
    Ineq(usize),
    Eq(usize),
    Box,
}

struct StdForm {
    cols: Vec<Vec<f64>>,
    cost: Vec<f64>,
    rhs: Vec<f64>,
    origin: Vec<RowOrigin>,
    /// multiplier mapping a standard-row dual back to the original row
    row_factor: Vec<f64>,
    /// column index of a +1 unit column usable as initial basic variable
    unit_col: Vec<Option<usize>>,
    maps: Vec<VarMap>,
}

fn build_std(p: &LpProblem) -> std::result::Result<StdForm, ()> {
    let n = p.num_vars();
    let mut ncols = 0;
    let mut maps = Vec::with_capacity(n);
    let mut boxed = Vec::new();
    for j in 0..n {
        match (p.lower[j], p.upper[j]) {
            (Some(lo), hi) => {
                maps.push(VarMap::Shift { col: ncols, lo });
                if let Some(hi) = hi {
                    if hi < lo - FEAS_TOL {
                        return Err(());
                    }
                    boxed.push((ncols, hi - lo));
                }
                ncols += 1;
            }
            (None, Some(hi)) => {
                maps.push(VarMap::Flip { col: ncols, hi });
                ncols += 1;
            }
            (None, None) => {
                maps.push(VarMap::Split { pos: ncols, neg: ncols + 1 });
                ncols += 2;
            }
        }
    }
    let n_struct = ncols;

    let mut cost = vec![0.0; n_struct];
    for (j, m) in maps.iter().enumerate() {
        let c = p.objective[j];
        match *m {
            VarMap::Shift { col, .. } => cost[col] = c,
            VarMap::Flip { col, .. } => cost[col] = -c,
            VarMap::Split { pos, neg } => {
                cost[pos] = c;
                cost[neg] = -c;
            }
        }
    }

    let map_row = |row: &[f64], rhs: f64| -> (Vec<f64>, f64) {
        let mut out = vec![0.0; n_struct];
        let mut r = rhs;
        for (j, m) in maps.iter().enumerate() {
            let a = row[j];
            if a == 0.0 {
                continue;
            }
            match *m {
                VarMap::Shift { col, lo } => {
                    out[col] = a;
                    r -= a * lo;
                }
                VarMap::Flip { col, hi } => {
                    out[col] = -a;
                    r -= a * hi;
                }
                VarMap::Split { pos, neg } => {
                    out[pos] = a;
                    out[neg] = -a;
                }
            }
        }
        (out, r)
    };

    // rows: (coefficients, rhs, slack coefficient, origin)
    let mut rows: Vec<(Vec<f64>, f64, f64, RowOrigin, f64)> = Vec::new();
    for (i, row) in p.ineq_a.iter().enumerate() {
        let (a, r) = map_row(row, p.ineq_b[i]);
        rows.push((a, r, -1.0, RowOrigin::Ineq(i), 1.0));
    }
    for (i, row) in p.eq_a.iter().enumerate() {
        let (a, r) = map_row(row, p.eq_b[i]);
        rows.push((a, r, 0.0, RowOrigin::Eq(i), 1.0));
    }
    for &(col, width) in &boxed {
        let mut a = vec![0.0; n_struct];
        a[col] = 1.0;
        rows.push((a, width, 1.0, RowOrigin::Box, 1.0));
    }

    let mut kept = Vec::new();
    for (mut a, mut r, slack, origin, _) in rows {
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            let violated = match origin {
                RowOrigin::Ineq(_) => r > FEAS_TOL,
                _ => r.abs() > FEAS_TOL,
            };
            if violated {
                return Err(());
            }
            continue;
        }
        for v in a.iter_mut() {
            *v /= scale;
        }
        r /= scale;
        let slack = slack / scale;
        kept.push((a, r, slack, origin, 1.0 / scale));
    }

    let m = kept.len();
    let n_slack = kept.iter().filter(|k| k.2 != 0.0).count();
    let total = n_struct + n_slack;
    let mut cols = vec![vec![0.0; m]; total];
    let mut rhs = vec![0.0; m];
    let mut origin = Vec::with_capacity(m);
    let mut row_factor = Vec::with_capacity(m);
    let mut unit_col = vec![None; m];
    let mut next_slack = n_struct;
    for (i, (a, r, slack, o, inv_scale)) in kept.into_iter().enumerate() {
        let sign = if r < 0.0 { -1.0 } else { 1.0 };
        for (j, v) in a.iter().enumerate() {
            cols[j][i] = sign * v;
        }
        rhs[i] = sign * r;
        if slack != 0.0 {
            // rescale slack to unit magnitude; it is a free nonnegative variable
            let s = sign * slack.signum();
            cols[next_slack][i] = s;
            if s > 0.0 {
                unit_col[i] = Some(next_slack);
            }
            next_slack += 1;
        }
        origin.push(o);
        row_factor.push(sign * inv_scale);
    }
    cost.resize(total, 0.0);
    Ok(StdForm { cols, cost, rhs, origin, row_factor, unit_col, maps })
}

struct Simplex {
    m: usize,
    cols: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    is_art: Vec<bool>,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    since_refactor: usize,
    iterations: usize,
    max_iterations: usize,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

impl Simplex {
    fn col_times_binv(&self, col: &[f64], out: &mut [f64]) {
        let m = self.m;
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            let mut s = 0.0;
            for k in 0..m {
                s += row[k] * col[k];
            }
            out[i] = s;
        }
    }

    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for (k, &j) in self.basis.iter().enumerate() {
            for i in 0..m {
                a[i * m + k] = self.cols[j][i];
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let mut piv = c;
            let mut best = a[c * m + c].abs();
            for r in c + 1..m {
                let v = a[r * m + c].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best < 1e-13 {
                return Err(Error::NumericalFailure("singular basis".into()));
            }
            if piv != c {
                for k in 0..m {
                    a.swap(c * m + k, piv * m + k);
                    inv.swap(c * m + k, piv * m + k);
                }
            }
            let d = a[c * m + c];
            for k in 0..m {
                a[c * m + k] /= d;
                inv[c * m + k] /= d;
            }
            for r in 0..m {
                if r == c {
                    continue;
                }
                let f = a[r * m + c];
                if f == 0.0 {
                    continue;
                }
                for k in 0..m {
                    a[r * m + k] -= f * a[c * m + k];
                    inv[r * m + k] -= f * inv[c * m + k];
                }
            }
        }
        self.binv = inv;
        let mut xb = vec![0.0; m];
        self.col_times_binv(&self.rhs, &mut xb);
        for v in xb.iter_mut() {
            if *v < 0.0 && *v > -FEAS_TOL {
                *v = 0.0;
            }
        }
        self.xb = xb;
        self.since_refactor = 0;
        Ok(())
    }

    fn pivot(&mut self, r: usize, q: usize, alpha: &[f64]) {
        let m = self.m;
        let ar = alpha[r];
        let theta = self.xb[r] / ar;
        for i in 0..m {
            if i != r {
                self.xb[i] -= theta * alpha[i];
            }
        }
        self.xb[r] = theta;
        for k in 0..m {
            self.binv[r * m + k] /= ar;
        }
        for i in 0..m {
            if i == r || alpha[i] == 0.0 {
                continue;
            }
            let f = alpha[i];
            for k in 0..m {
                self.binv[i * m + k] -= f * self.binv[r * m + k];
            }
        }
        self.in_basis[self.basis[r]] = false;
        self.basis[r] = q;
        self.in_basis[q] = true;
        self.since_refactor += 1;
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (i, &j) in self.basis.iter().enumerate() {
            let cb = cost[j];
            if cb == 0.0 {
                continue;
            }
            for k in 0..m {
                y[k] += cb * self.binv[i * m + k];
            }
        }
        y
    }

    fn run(&mut self, cost: &[f64], phase_two: bool) -> Result<PhaseEnd> {
        let m = self.m;
        let n = self.cols.len();
        let mut bland = false;
        let mut degenerate = 0usize;
        let mut alpha = vec![0.0; m];
        loop {
            self.iterations += 1;
            if self.iterations > self.max_iterations {
                return Err(Error::NumericalFailure("simplex iteration limit exceeded".into()));
            }
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
            let y = self.duals(cost);
            let mut entering: Option<usize> = None;
            let mut best = -COST_TOL;
            for j in 0..n {
                if self.in_basis[j] || (phase_two && self.is_art[j]) {
                    continue;
                }
                let col = &self.cols[j];
                let mut d = cost[j];
                for k in 0..m {
                    d -= y[k] * col[k];
                }
                if bland {
                    if d < -COST_TOL {
                        entering = Some(j);
                        break;
                    }
                } else if d < best {
                    best = d;
                    entering = Some(j);
                }
            }
            let q = match entering {
                Some(q) => q,
                None => return Ok(PhaseEnd::Optimal),
            };
            self.col_times_binv(&self.cols[q].clone(), &mut alpha);

            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for i in 0..m {
                let a = alpha[i];
                let locked = phase_two && self.is_art[self.basis[i]];
                let ratio = if locked {
                    if a.abs() > PIV_TOL {
                        0.0
                    } else {
                        continue;
                    }
                } else if a > PIV_TOL {
                    self.xb[i].max(0.0) / a
                } else {
                    continue;
                };
                let better = match leave {
                    None => true,
                    Some(l) => {
                        if ratio < best_ratio - 1e-12 {
                            true
                        } else if ratio <= best_ratio + 1e-12 {
                            if bland {
                                self.basis[i] < self.basis[l]
                            } else {
                                a.abs() > alpha[l].abs()
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    leave = Some(i);
                    best_ratio = best_ratio.min(ratio);
                }
            }
            let r = match leave {
                Some(r) => r,
                None => return Ok(PhaseEnd::Unbounded),
            };
            if best_ratio <= DEGEN_STEP {
                degenerate += 1;
                if degenerate > 10 * m.max(1) {
                    bland = true;
                }
            } else {
                degenerate = 0;
            }
            if self.is_art[self.basis[r]] && phase_two {
                // artificial leaves at zero level regardless of sign of the pivot
                self.xb[r] = 0.0;
            }
            self.pivot(r, q, &alpha);
            for v in self.xb.iter_mut() {
                if *v < 0.0 && *v > -FEAS_TOL {
                    *v = 0.0;
                }
            }
        }
    }
}

/// Solve the linear program. Numerical breakdown is an `Err`, infeasibility
/// and unboundedness are reported through `LpResult::status`.
pub fn solve(p: &LpProblem) -> Result<LpResult> {
    p.validate()?;
    let n_orig = p.num_vars();
    let infeasible = || LpResult {
        status: LpStatus::Infeasible,
        x: Vec::new(),
        objective_value: f64::INFINITY,
        ineq_duals: Vec::new(),
        eq_duals: Vec::new(),
    };
    let std = match build_std(p) {
        Ok(s) => s,
        Err(()) => return Ok(infeasible()),
    };
    let m = std.rhs.len();
    let n_real = std.cols.len();

    let mut cols = std.cols.clone();
    let mut is_art = vec![false; n_real];
    let mut basis = Vec::with_capacity(m);
    for i in 0..m {
        match std.unit_col[i] {
            Some(j) => basis.push(j),
            None => {
                let mut c = vec![0.0; m];
                c[i] = 1.0;
                cols.push(c);
                is_art.push(true);
                basis.push(cols.len() - 1);
            }
        }
    }
    let n_all = cols.len();
    let mut in_basis = vec![false; n_all];
    for &j in &basis {
        in_basis[j] = true;
    }
    let mut sx = Simplex {
        m,
        cols,
        rhs: std.rhs.clone(),
        is_art,
        basis,
        in_basis,
        binv: Vec::new(),
        xb: Vec::new(),
        since_refactor: 0,
        iterations: 0,
        max_iterations: 20_000 + 50 * (m + n_all),
    };
    sx.refactor()?;

    let rhs_scale = 1.0 + std.rhs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if sx.is_art.iter().any(|&a| a) {
        let phase1: Vec<f64> = sx.is_art.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect();
        match sx.run(&phase1, false)? {
            PhaseEnd::Optimal => {}
            PhaseEnd::Unbounded => return Err(Error::NumericalFailure("phase one unbounded".into())),
        }
        let infeas: f64 = sx.basis.iter().zip(sx.xb.iter()).filter(|(j, _)| sx.is_art[**j]).map(|(_, v)| *v).sum();
        if infeas > FEAS_TOL * rhs_scale {
            return Ok(infeasible());
        }
        // drive zero-level artificials out of the basis where possible
        let mut alpha = vec![0.0; m];
        for r in 0..m {
            if !sx.is_art[sx.basis[r]] {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for j in 0..n_real {
                if sx.in_basis[j] {
                    continue;
                }
                let mut v = 0.0;
                for k in 0..m {
                    v += sx.binv[r * m + k] * sx.cols[j][k];
                }
                if v.abs() > 1e-7 && best.map_or(true, |(_, b)| v.abs() > b) {
                    best = Some((j, v.abs()));
                }
            }
            if let Some((j, _)) = best {
                let col = sx.cols[j].clone();
                sx.col_times_binv(&col, &mut alpha);
                sx.xb[r] = 0.0;
                sx.pivot(r, j, &alpha);
            }
        }
        sx.refactor()?;
    }

    let mut cost2 = std.cost.clone();
    cost2.resize(n_all, 0.0);
    let end = sx.run(&cost2, true)?;
    if let PhaseEnd::Unbounded = end {
        return Ok(LpResult {
            status: LpStatus::Unbounded,
            x: Vec::new(),
            objective_value: f64::NEG_INFINITY,
            ineq_duals: Vec::new(),
            eq_duals: Vec::new(),
        });
    }
    sx.refactor()?;

    let mut xs = vec![0.0; n_all];
    for (i, &j) in sx.basis.iter().enumerate() {
        xs[j] = sx.xb[i].max(0.0);
    }
    let mut x = vec![0.0; n_orig];
    for (j, mp) in std.maps.iter().enumerate() {
        x[j] = match *mp {
            VarMap::Shift { col, lo } => lo + xs[col],
            VarMap::Flip { col, hi } => hi - xs[col],
            VarMap::Split { pos, neg } => xs[pos] - xs[neg],
        };
    }
    let y = sx.duals(&cost2);
    let mut ineq_duals = vec![0.0; p.ineq_a.len()];
    let mut eq_duals = vec![0.0; p.eq_a.len()];
    for (i, o) in std.origin.iter().enumerate() {
        let v = y[i] * std.row_factor[i];
        match *o {
            RowOrigin::Ineq(k) => ineq_duals[k] = v,
            RowOrigin::Eq(k) => eq_duals[k] = v,
            RowOrigin::Box => {}
        }
    }
    let objective_value = p.objective.iter().zip(x.iter()).map(|(c, v)| c * v).sum();
    Ok(LpResult { status: LpStatus::Optimal, x, objective_value, ineq_duals, eq_duals })
}

/// Convenience: is `{A x >= b, E x = f, bounds}` nonempty?
pub fn feasible(p: &LpProblem) -> Result<bool> {
    let mut q = p.clone();
    q.objective = vec![0.0; p.num_vars()];
    Ok(solve(&q)?.is_optimal())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_bound() {
        let mut p = LpProblem::new(1);
        p.set_objective(vec![1.0]);
        p.add_ge(vec![1.0], 3.0);
        let r = solve(&p).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.x[0] - 3.0).abs() < 1e-12);
        assert!((r.ineq_duals[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut p = LpProblem::new(1);
        p.add_ge(vec![1.0], 3.0);
        p.add_ge(vec![-1.0], -2.0);
        assert_eq!(solve(&p).unwrap().status, LpStatus::Infeasible);

        let mut q = LpProblem::new(2);
        q.set_objective(vec![-1.0, 0.0]);
        q.add_ge(vec![1.0, 1.0], 1.0);
        q.set_nonneg(0..2);
        assert_eq!(solve(&q).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_duals_and_bounds() {
        // min x + 2y, x + y = 4, 0 <= x <= 3, y >= 0
        let mut p = LpProblem::new(2);
        p.set_objective(vec![1.0, 2.0]);
        p.add_eq(vec![1.0, 1.0], 4.0);
        p.set_bounds(0, Some(0.0), Some(3.0));
        p.set_bounds(1, Some(0.0), None);
        let r = solve(&p).unwrap();
        assert!((r.x[0] - 3.0).abs() < 1e-12 && (r.x[1] - 1.0).abs() < 1e-12);
        assert!((r.objective_value - 5.0).abs() < 1e-12);
        assert!((r.eq_duals[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's example cycles under naive Dantzig pivoting
        let mut p = LpProblem::new(4);
        p.set_objective(vec![-0.75, 150.0, -0.02, 6.0]);
        p.add_le(vec![0.25, -60.0, -0.04, 9.0], 0.0);
        p.add_le(vec![0.5, -90.0, -0.02, 3.0], 0.0);
        p.add_le(vec![0.0, 0.0, 1.0, 0.0], 1.0);
        p.set_nonneg(0..4);
        let r = solve(&p).unwrap();
        assert!(r.is_optimal());
        assert!((r.objective_value + 0.05).abs() < 1e-9);
    }
}
