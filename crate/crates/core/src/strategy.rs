//! Superhedging strategies along a single path: per-step feasible sets,
//! max-withdrawal and min-trading LPs, and the two-criteria frontier.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dot, max_abs, Matrix, Polyhedron, Vector};
use crate::linprog::{self, LpProblem, LpStatus};
use crate::market::{GeneratorLabel, MarketTree};
use crate::payoffs::Claim;
use crate::shp::ShpResult;
use crate::vop::{benson_solve, VopProblem};

const MEMBER_TOL: f64 = 1e-7;
const TIE_TOL: f64 = 1e-9;
// slack on the target set so that boundary portfolios from the previous
// step stay feasible under round-off
const TARGET_SLACK: f64 = 1e-8;

/// Everything a step needs besides the state itself.
#[derive(Clone, Copy)]
pub struct StepContext<'a> {
    pub tree: &'a MarketTree,
    pub claim: &'a Claim,
    pub shp: &'a ShpResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub alpha: f64,
    pub trade_cost: f64,
    pub v: Vector,
    pub z: Vector,
    pub labels: Vec<GeneratorLabel>,
}

impl FrontierPoint {
    pub fn objective(&self) -> [f64; 2] {
        [-self.alpha, self.trade_cost]
    }
}

/// Frontier at one node, tagged with the state version it was computed for.
/// Points are sorted by decreasing withdrawal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frontier {
    pub node: usize,
    pub version: u64,
    pub points: Vec<FrontierPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub node: usize,
    pub trade: Vector,
    pub withdrawal: Vector,
    pub chosen: FrontierPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyState {
    pub node: usize,
    pub v: Vector,
    pub withdrawals: Vector,
    pub history: Vec<StepRecord>,
    pub version: u64,
    /// Set once the step at a terminal node has been taken.
    pub finished: bool,
}

/// Solution of a single-step LP.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSolution {
    pub v: Vector,
    pub alpha: f64,
    pub z: Vector,
}

/// How a step is chosen in scripted replays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Choice {
    MaxCash,
    MinTrade,
    Index(usize),
}

impl StrategyState {
    /// Start at the root with endowment `x0`, which must superhedge.
    pub fn new(ctx: StepContext, x0: &[f64]) -> Result<StrategyState> {
        let root = ctx.tree.root().id;
        if x0.len() != ctx.tree.d {
            return Err(Error::DimensionMismatch("x0 length".into()));
        }
        if !within(ctx.shp.set(root), x0) {
            return Err(Error::InvalidInput("initial portfolio does not superhedge the claim".into()));
        }
        Ok(StrategyState {
            node: root,
            v: x0.to_vec(),
            withdrawals: vec![0.0; ctx.tree.d],
            history: Vec::new(),
            version: 0,
            finished: false,
        })
    }

    /// Units of the withdrawal portfolio taken out so far.
    pub fn total_alpha(&self) -> f64 {
        self.history.iter().map(|h| h.chosen.alpha).sum()
    }
}

fn within(set: &Polyhedron, x: &[f64]) -> bool {
    let h = set.hrep();
    h.a.iter().zip(&h.b).all(|(a, b)| dot(a, x) - b >= -MEMBER_TOL * (1.0 + b.abs()))
}

/// Spread weights when every generator trades the numeraire against one
/// risky asset, unit weights otherwise.
pub fn default_gamma(tree: &MarketTree, node: usize) -> Vector {
    let n = tree.node(node);
    let num = tree.numeraire;
    let pairs = n.labels.iter().all(|&(i, j)| i != j && (i == num || j == num));
    if !pairs {
        return vec![1.0; n.labels.len()];
    }
    let q = n.quotes_or_implied(num);
    n.labels
        .iter()
        .map(|&(i, j)| {
            let k = if i == num { j } else { i };
            q.ask[k] - q.bid[k]
        })
        .collect()
}

/// Rows `a v >= b` that the post-trade portfolio must satisfy.
fn target_rows(ctx: StepContext, node: usize) -> (Matrix, Vector) {
    let n = ctx.tree.node(node);
    let d = ctx.tree.d;
    let mut a: Matrix = Vec::new();
    let mut b: Vector = Vec::new();
    if n.is_terminal() {
        let x = ctx.claim.at(node);
        for i in 0..d {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            a.push(e);
            b.push(x[i]);
        }
        return (a, b);
    }
    for c in &n.succ {
        let h = ctx.shp.set(*c).hrep();
        for (row, rhs) in h.a.iter().zip(&h.b) {
            let dup = a.iter().zip(&b).any(|(r, s)| r.iter().zip(row).all(|(x, y)| (x - y).abs() <= 1e-12) && (s - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
            if !dup {
                a.push(row.clone());
                b.push(*rhs);
            }
        }
    }
    (a, b)
}

fn check_state(ctx: StepContext, state: &StrategyState) -> Result<()> {
    if state.finished {
        return Err(Error::InvalidInput("strategy already reached the horizon".into()));
    }
    if state.node >= ctx.tree.nodes.len() || state.v.len() != ctx.tree.d {
        return Err(Error::DimensionMismatch("state does not fit the tree".into()));
    }
    Ok(())
}

/// `({V} - K_t) ∩ ∩ SHP_{t+1}`, or `({V} - K_T) ∩ (X + R^d_+)` at the horizon.
pub fn step_feasible_set(ctx: StepContext, state: &StrategyState) -> Result<Polyhedron> {
    check_state(ctx, state)?;
    let (mut a, mut b) = target_rows(ctx, state.node);
    for w in &ctx.tree.node(state.node).dual_cone.generators {
        a.push(w.iter().map(|x| -x).collect());
        b.push(-dot(w, &state.v));
    }
    Polyhedron::from_hrep_dim(ctx.tree.d, a, b)
}

/// LP in `(v, alpha, z)` with `v + alpha y + K z = V`, `v` in the target set.
fn step_lp(ctx: StepContext, state: &StrategyState, y: &[f64], slack: f64) -> LpProblem {
    let d = ctx.tree.d;
    let gens = &ctx.tree.node(state.node).cone.generators;
    let s = gens.len();
    let nv = d + 1 + s;
    let mut lp = LpProblem::new(nv);
    lp.set_nonneg(d..nv);
    let (a, b) = target_rows(ctx, state.node);
    for (row, rhs) in a.into_iter().zip(b) {
        let mut r = row;
        r.resize(nv, 0.0);
        lp.add_ge(r, rhs - slack * (1.0 + rhs.abs()));
    }
    for i in 0..d {
        let mut r = vec![0.0; nv];
        r[i] = 1.0;
        r[d] = y[i];
        for (k, g) in gens.iter().enumerate() {
            r[d + 1 + k] = g[i];
        }
        lp.add_eq(r, state.v[i]);
    }
    lp
}

fn optimum(lp: &LpProblem, what: &str) -> Result<Vector> {
    let r = linprog::solve(lp)?;
    match r.status {
        LpStatus::Optimal => Ok(r.x),
        LpStatus::Unbounded => Err(Error::Arbitrage),
        LpStatus::Infeasible => Err(Error::InvariantViolation(format!("{what}: current portfolio does not superhedge"))),
    }
}

/// Among the feasible points of `lp`, the lexicographically smallest `v`.
fn lex_smallest_v(mut lp: LpProblem, d: usize) -> Result<Vector> {
    let nv = lp.num_vars();
    let mut x = Vec::new();
    for i in 0..d {
        let mut c = vec![0.0; nv];
        c[i] = 1.0;
        lp.set_objective(c.clone());
        x = optimum(&lp, "tie-break")?;
        let vi = x[i];
        lp.add_le(c, vi + TIE_TOL * (1.0 + vi.abs()));
    }
    Ok(x)
}

fn split(x: &[f64], d: usize) -> StepSolution {
    StepSolution { v: x[..d].to_vec(), alpha: x[d].max(0.0), z: x[d + 1..].iter().map(|v| v.max(0.0)).collect() }
}

fn check_vectors(ctx: StepContext, state: &StrategyState, y: Option<&[f64]>, gamma: Option<&[f64]>) -> Result<()> {
    check_state(ctx, state)?;
    if let Some(y) = y {
        if y.len() != ctx.tree.d || y.iter().any(|v| !v.is_finite() || *v < 0.0) || max_abs(y) == 0.0 {
            return Err(Error::InvalidInput("withdrawal portfolio must be nonnegative and nonzero".into()));
        }
    }
    if let Some(g) = gamma {
        if g.len() != ctx.tree.node(state.node).cone.generators.len() || g.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput("trade weights must be nonnegative, one per generator".into()));
        }
    }
    Ok(())
}

/// Runs `f` on the exact target set, then once more with slack if round-off
/// made the step infeasible.
fn with_slack<T>(f: impl Fn(f64) -> Result<T>) -> Result<T> {
    match f(0.0) {
        Err(Error::Arbitrage) => Err(Error::Arbitrage),
        Err(e) => {
            log::debug!("retrying step with slack after: {e}");
            f(TARGET_SLACK)
        }
        ok => ok,
    }
}

/// Withdraw as many units of `y` as possible while still superhedging.
pub fn max_withdrawal(ctx: StepContext, state: &StrategyState, y: &[f64]) -> Result<StepSolution> {
    check_vectors(ctx, state, Some(y), None)?;
    with_slack(|slack| max_withdrawal_with(ctx, state, y, slack))
}

fn max_withdrawal_with(ctx: StepContext, state: &StrategyState, y: &[f64], slack: f64) -> Result<StepSolution> {
    let d = ctx.tree.d;
    let mut lp = step_lp(ctx, state, y, slack);
    let mut c = vec![0.0; lp.num_vars()];
    c[d] = -1.0;
    lp.set_objective(c);
    let best = optimum(&lp, "max withdrawal")?[d];
    let mut row = vec![0.0; lp.num_vars()];
    row[d] = 1.0;
    lp.add_ge(row, best - TIE_TOL * (1.0 + best.abs()));
    Ok(split(&lex_smallest_v(lp, d)?, d))
}

/// Superhedge with the least weighted trading and no withdrawal.
pub fn min_trading(ctx: StepContext, state: &StrategyState, gamma: &[f64]) -> Result<StepSolution> {
    check_vectors(ctx, state, None, Some(gamma))?;
    with_slack(|slack| min_trading_with(ctx, state, gamma, slack))
}

fn min_trading_with(ctx: StepContext, state: &StrategyState, gamma: &[f64], slack: f64) -> Result<StepSolution> {
    let d = ctx.tree.d;
    let mut lp = step_lp(ctx, state, &vec![0.0; d], slack);
    let nv = lp.num_vars();
    lp.set_bounds(d, Some(0.0), Some(0.0));
    let mut c = vec![0.0; nv];
    c[d + 1..].copy_from_slice(gamma);
    lp.set_objective(c.clone());
    let best: f64 = dot(&c, &optimum(&lp, "min trading")?);
    lp.add_le(c, best + TIE_TOL * (1.0 + best.abs()));
    Ok(split(&lex_smallest_v(lp, d)?, d))
}

/// Vertices of the upper image of `min (-alpha, gamma^T z)`, each with a
/// deterministic preimage.
pub fn bicriteria_frontier(ctx: StepContext, state: &StrategyState, y: &[f64], gamma: &[f64]) -> Result<Frontier> {
    check_vectors(ctx, state, Some(y), Some(gamma))?;
    with_slack(|slack| frontier_with(ctx, state, y, gamma, slack))
}

fn frontier_with(ctx: StepContext, state: &StrategyState, y: &[f64], gamma: &[f64], slack: f64) -> Result<Frontier> {
    let d = ctx.tree.d;
    let lp = step_lp(ctx, state, y, slack);
    let nv = lp.num_vars();
    let mut b_mat = lp.ineq_a.clone();
    let mut b = lp.ineq_b.clone();
    for (row, rhs) in lp.eq_a.iter().zip(&lp.eq_b) {
        b_mat.push(row.clone());
        b.push(*rhs);
        b_mat.push(row.iter().map(|x| -x).collect());
        b.push(-rhs);
    }
    for j in d..nv {
        let mut e = vec![0.0; nv];
        e[j] = 1.0;
        b_mat.push(e);
        b.push(0.0);
    }
    let mut neg_alpha = vec![0.0; nv];
    neg_alpha[d] = -1.0;
    let mut cost = vec![0.0; nv];
    cost[d + 1..].copy_from_slice(gamma);
    let prob = VopProblem { p: vec![neg_alpha, cost.clone()], b_mat, b, ordering: vec![vec![1.0, 0.0], vec![0.0, 1.0]], c: vec![1.0, 1.0] };
    let sol = benson_solve(&prob).map_err(|e| match e {
        Error::Unbounded(_) => Error::Arbitrage,
        other => other,
    })?;
    let labels = ctx.tree.node(state.node).labels.clone();
    let mut points = Vec::new();
    for vert in sol.upper_image.points() {
        let (alpha, tc) = (-vert[0], vert[1]);
        let mut tie = lp.clone();
        let mut ra = vec![0.0; nv];
        ra[d] = 1.0;
        tie.add_ge(ra, alpha - TIE_TOL * (1.0 + alpha.abs()));
        tie.add_le(cost.clone(), tc + TIE_TOL * (1.0 + tc.abs()));
        let s = split(&lex_smallest_v(tie, d)?, d);
        points.push(FrontierPoint { alpha: s.alpha, trade_cost: dot(gamma, &s.z), v: s.v, z: s.z, labels: labels.clone() });
    }
    points.sort_by(|p, q| q.alpha.total_cmp(&p.alpha).then(p.trade_cost.total_cmp(&q.trade_cost)));
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-6 * (1.0 + a.abs().max(b.abs()));
    points.dedup_by(|q, p| close(p.alpha, q.alpha) && close(p.trade_cost, q.trade_cost));
    Ok(Frontier { node: state.node, version: state.version, points })
}

/// A user-specified withdrawal and trade, checked against the step's
/// constraints.
pub fn custom_point(ctx: StepContext, state: &StrategyState, y: &[f64], gamma: &[f64], alpha: f64, z: &[f64]) -> Result<FrontierPoint> {
    check_vectors(ctx, state, Some(y), Some(gamma))?;
    let node = ctx.tree.node(state.node);
    if z.len() != node.cone.generators.len() || z.iter().any(|v| !v.is_finite() || *v < 0.0) || !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::InvalidInput("custom choice needs alpha >= 0 and one nonnegative weight per generator".into()));
    }
    let v: Vector = (0..ctx.tree.d)
        .map(|i| state.v[i] - alpha * y[i] - node.cone.generators.iter().zip(z).map(|(g, w)| g[i] * w).sum::<f64>())
        .collect();
    let (a, b) = target_rows(ctx, state.node);
    let worst = a.iter().zip(&b).map(|(r, rhs)| (dot(r, &v) - rhs) / (1.0 + rhs.abs())).fold(f64::INFINITY, f64::min);
    if worst < -MEMBER_TOL {
        return Err(Error::InvalidInput(format!("custom choice leaves the superhedging set (violation {:.3e})", -worst)));
    }
    Ok(FrontierPoint { alpha, trade_cost: dot(gamma, z), v, z: z.to_vec(), labels: node.labels.clone() })
}

/// Index of the point a scripted choice refers to.
pub fn pick(frontier: &Frontier, choice: Choice) -> Result<usize> {
    let n = frontier.points.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty frontier".into()));
    }
    match choice {
        Choice::MaxCash => Ok(0),
        Choice::MinTrade => Ok(n - 1),
        Choice::Index(i) if i < n => Ok(i),
        Choice::Index(i) => Err(Error::InvalidInput(format!("frontier has {n} points, index {i} requested"))),
    }
}

/// Take frontier point `index` and move to `next` (None at the horizon).
pub fn advance(ctx: StepContext, state: &StrategyState, frontier: &Frontier, index: usize, y: &[f64], next: Option<usize>) -> Result<StrategyState> {
    check_state(ctx, state)?;
    if frontier.version != state.version || frontier.node != state.node {
        return Err(Error::StaleFrontier(format!("frontier was computed for version {}, state is at {}", frontier.version, state.version)));
    }
    let chosen = frontier.points.get(index).ok_or_else(|| Error::InvalidInput(format!("frontier has {} points, index {index} requested", frontier.points.len())))?;
    let node = ctx.tree.node(state.node);
    match (node.is_terminal(), next) {
        (true, None) => {}
        (false, Some(c)) if node.succ.contains(&c) => {}
        (true, Some(_)) => return Err(Error::InvalidInput("terminal node has no successor".into())),
        (false, _) => return Err(Error::InvalidInput(format!("next node must be a successor of node {}", state.node))),
    }
    let withdrawal: Vector = y.iter().map(|v| chosen.alpha * v).collect();
    let d = ctx.tree.d;
    let trade: Vector = (0..d).map(|i| node.cone.generators.iter().zip(&chosen.z).map(|(g, z)| g[i] * z).sum()).collect();
    let ok = match next {
        Some(_) => node.succ.iter().all(|c| within(ctx.shp.set(*c), &chosen.v)),
        None => chosen.v.iter().zip(ctx.claim.at(state.node)).all(|(v, x)| v - x >= -MEMBER_TOL),
    };
    if !ok {
        return Err(Error::InvariantViolation("chosen portfolio does not superhedge the next step".into()));
    }
    let mut out = state.clone();
    out.withdrawals.iter_mut().zip(&withdrawal).for_each(|(a, b)| *a += b);
    out.history.push(StepRecord { node: state.node, trade, withdrawal, chosen: chosen.clone() });
    out.v = chosen.v.clone();
    out.version += 1;
    match next {
        Some(c) => out.node = c,
        None => out.finished = true,
    }
    Ok(out)
}

/// Follow `path` (root to a terminal node) choosing one frontier point per
/// step.
pub fn replay(ctx: StepContext, x0: &[f64], path: &[usize], y: &[f64], choices: &[Choice]) -> Result<StrategyState> {
    if path.len() != ctx.tree.horizon + 1 || choices.len() != path.len() {
        return Err(Error::InvalidInput("path and choices need one entry per time step".into()));
    }
    if path[0] != ctx.tree.root().id {
        return Err(Error::InvalidInput("path must start at the root".into()));
    }
    let mut state = StrategyState::new(ctx, x0)?;
    for (t, choice) in choices.iter().enumerate() {
        let gamma = default_gamma(ctx.tree, state.node);
        let f = bicriteria_frontier(ctx, &state, y, &gamma)?;
        let k = pick(&f, *choice)?;
        state = advance(ctx, &state, &f, k, y, path.get(t + 1).copied())?;
    }
    Ok(state)
}
