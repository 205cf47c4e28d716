//! Event trees with bid-ask data, solvency cones, the liquidation map,
//! lattice builders and the no-arbitrage test.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, dual_cone, max_abs, Cone, Matrix, Vector};

const FRICTIONLESS_TOL: f64 = 1e-12;
const PROB_TOL: f64 = 1e-9;

/// `pi[i][j]`: units of asset i needed to buy one unit of asset j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BidAskMatrix {
    pub pi: Matrix,
}

impl BidAskMatrix {
    /// Exchange rates implied by cash quotes: buy j at its ask, pay by
    /// selling i at its bid.
    pub fn from_quotes(bid: &[f64], ask: &[f64]) -> BidAskMatrix {
        let d = bid.len();
        let pi = (0..d)
            .map(|i| (0..d).map(|j| if i == j { 1.0 } else { ask[j] / bid[i] }).collect())
            .collect();
        BidAskMatrix { pi }
    }

    pub fn dim(&self) -> usize {
        self.pi.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 || self.pi.iter().any(|r| r.len() != d) {
            return Err(Error::DimensionMismatch("bid-ask matrix must be square".into()));
        }
        for i in 0..d {
            if self.pi[i][i] != 1.0 {
                return Err(Error::InvariantViolation(format!("pi[{i}][{i}] must equal 1")));
            }
            for j in 0..d {
                let v = self.pi[i][j];
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::InvariantViolation(format!("pi[{i}][{j}] must be positive")));
                }
                for k in 0..d {
                    if v > self.pi[i][k] * self.pi[k][j] * (1.0 + 1e-12) {
                        return Err(Error::InvariantViolation(format!(
                            "pi[{i}][{j}] exceeds the indirect rate through asset {k}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Which exchange a solvency-cone generator encodes: `(i, j)` trades asset i
/// into one unit of j; `(i, i)` is disposal of asset i.
pub type GeneratorLabel = (usize, usize);

#[derive(Debug, Clone, PartialEq)]
pub struct SolvencyCone {
    pub cone: Cone,
    pub labels: Vec<GeneratorLabel>,
}

fn pair_order(d: usize, numeraire: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for k in 0..d {
        if k != numeraire {
            out.push((numeraire, k));
            out.push((k, numeraire));
        }
    }
    for i in 0..d {
        for j in i + 1..d {
            if i != numeraire && j != numeraire {
                out.push((i, j));
                out.push((j, i));
            }
        }
    }
    out
}

/// Solvency cone generated by `pi^{ij} e^i - e^j` and the unit vectors,
/// redundancy reduced. Exchange generators are scaled so the non-numeraire
/// asset of the pair carries coefficient +-1.
pub fn solvency_cone(pi: &BidAskMatrix, numeraire: usize) -> Result<SolvencyCone> {
    pi.validate()?;
    let d = pi.dim();
    let mut gens = Vec::new();
    let mut labels = Vec::new();
    for (i, j) in pair_order(d, numeraire) {
        let mut g = vec![0.0; d];
        g[i] = pi.pi[i][j];
        g[j] = -1.0;
        if j == numeraire {
            let s = pi.pi[i][j];
            g.iter_mut().for_each(|x| *x /= s);
        }
        gens.push(g);
        labels.push((i, j));
    }
    for i in 0..d {
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        gens.push(e);
        labels.push((i, i));
    }
    let full = Cone::new(d, gens.clone())?;
    let reduced = full.reduced()?;
    let mut kept_labels = Vec::new();
    for g in &reduced.generators {
        let idx = gens.iter().position(|h| h == g).expect("reduced generator comes from the input list");
        kept_labels.push(labels[idx]);
    }
    Ok(SolvencyCone { cone: reduced, labels: kept_labels })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Liquidation {
    /// q x d merge matrix
    pub p: Matrix,
    pub cone: Cone,
    /// original asset indices merged into each output coordinate
    pub groups: Vec<Vec<usize>>,
}

impl Liquidation {
    pub fn is_identity(&self) -> bool {
        self.groups.iter().all(|g| g.len() == 1)
    }

    /// Output coordinate holding original asset `i`.
    pub fn coordinate_of(&self, i: usize) -> usize {
        self.groups.iter().position(|g| g.contains(&i)).expect("every asset belongs to a group")
    }
}

/// Merge frictionless asset pairs so the image of the solvency cone is
/// line-free.
pub fn liquidation_map(cone: &Cone, pi: &BidAskMatrix) -> Result<Liquidation> {
    let d = pi.dim();
    let mut parent: Vec<usize> = (0..d).collect();
    fn find(p: &mut Vec<usize>, i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    for i in 0..d {
        for j in i + 1..d {
            if (pi.pi[i][j] * pi.pi[j][i] - 1.0).abs() <= FRICTIONLESS_TOL {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                let (lo, hi) = (a.min(b), a.max(b));
                parent[hi] = lo;
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..d {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    let groups: Vec<Vec<usize>> = groups.into_values().collect();
    let p: Matrix = groups
        .iter()
        .map(|g| {
            let rep = g[0];
            let mut row = vec![0.0; d];
            for &k in g {
                row[k] = if k == rep { 1.0 } else { pi.pi[rep][k] };
            }
            row
        })
        .collect();
    let q = groups.len();
    let mut gens = Vec::new();
    for g in &cone.generators {
        let img: Vector = p.iter().map(|r| geometry::dot(r, g)).collect();
        if max_abs(&img) > 1e-12 * max_abs(g).max(1.0) {
            gens.push(img);
        }
    }
    let image = Cone::new(q, gens)?.reduced()?;
    Ok(Liquidation { p, cone: image, groups })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quotes {
    pub bid: Vector,
    pub ask: Vector,
    pub mid: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketNode {
    pub id: usize,
    pub t: usize,
    pub parents: Vec<usize>,
    /// conditional probability of reaching this node from each parent
    pub parent_probs: Vec<f64>,
    pub prob: f64,
    pub bidask: BidAskMatrix,
    pub quotes: Option<Quotes>,
    pub coords: Option<Vec<usize>>,
    pub succ: Vec<usize>,
    pub succ_probs: Vec<f64>,
    pub cone: Cone,
    pub labels: Vec<GeneratorLabel>,
    pub dual_cone: Cone,
}

impl MarketNode {
    pub fn is_terminal(&self) -> bool {
        self.succ.is_empty()
    }

    /// Cash quotes; without explicit quotes they are read off the bid-ask
    /// matrix relative to the numeraire.
    pub fn quotes_or_implied(&self, numeraire: usize) -> Quotes {
        if let Some(q) = &self.quotes {
            return q.clone();
        }
        let d = self.bidask.dim();
        let ask: Vector = (0..d).map(|j| self.bidask.pi[numeraire][j]).collect();
        let bid: Vector = (0..d).map(|j| 1.0 / self.bidask.pi[j][numeraire]).collect();
        let mid = bid.iter().zip(&ask).map(|(b, a)| 0.5 * (a + b)).collect();
        Quotes { bid, ask, mid }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketTree {
    pub d: usize,
    pub horizon: usize,
    pub numeraire: usize,
    pub nodes: Vec<MarketNode>,
    pub levels: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParentField {
    One(usize),
    Many(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeJson {
    pub id: usize,
    pub t: usize,
    pub parent: Option<ParentField>,
    pub prob: f64,
    pub bidask: Matrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch_probs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quotes: Option<Quotes>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketJson {
    pub d: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub numeraire: usize,
    pub nodes: Vec<NodeJson>,
}

fn is_zero(v: &usize) -> bool {
    *v == 0
}

impl MarketTree {
    pub fn root(&self) -> &MarketNode {
        &self.nodes[self.levels[0][0]]
    }

    pub fn node(&self, id: usize) -> &MarketNode {
        &self.nodes[id]
    }

    pub fn terminals(&self) -> &[usize] {
        &self.levels[self.horizon]
    }

    pub fn lattice_node(&self, t: usize, coords: &[usize]) -> Option<usize> {
        self.levels.get(t)?.iter().copied().find(|&id| self.nodes[id].coords.as_deref() == Some(coords))
    }

    pub fn from_json(j: &MarketJson) -> Result<MarketTree> {
        let d = j.d;
        if d == 0 {
            return Err(Error::InvalidInput("d must be positive".into()));
        }
        if j.numeraire >= d {
            return Err(Error::InvalidInput("numeraire index out of range".into()));
        }
        let n = j.nodes.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&k| j.nodes[k].id);
        for (expect, &k) in order.iter().enumerate() {
            if j.nodes[k].id != expect {
                return Err(Error::InvalidInput(format!("node ids must be 0..{n} without gaps")));
            }
        }
        let mut nodes: Vec<MarketNode> = Vec::with_capacity(n);
        for &k in &order {
            let nj = &j.nodes[k];
            let bidask = BidAskMatrix { pi: nj.bidask.clone() };
            if bidask.dim() != d {
                return Err(Error::DimensionMismatch(format!("node {} bid-ask matrix is not {d}x{d}", nj.id)));
            }
            let sc = solvency_cone(&bidask, j.numeraire)?;
            let dual = dual_cone(&sc.cone)?;
            let parents = match &nj.parent {
                None => Vec::new(),
                Some(ParentField::One(p)) => vec![*p],
                Some(ParentField::Many(ps)) => ps.clone(),
            };
            if !(nj.prob.is_finite() && nj.prob > 0.0) {
                return Err(Error::InvalidInput(format!("node {} probability must be positive", nj.id)));
            }
            nodes.push(MarketNode {
                id: nj.id,
                t: nj.t,
                parents,
                parent_probs: Vec::new(),
                prob: nj.prob,
                bidask,
                quotes: nj.quotes.clone(),
                coords: nj.coords.clone(),
                succ: Vec::new(),
                succ_probs: Vec::new(),
                cone: sc.cone,
                labels: sc.labels,
                dual_cone: dual,
            });
        }
        let horizon = j.horizon;
        let mut levels = vec![Vec::new(); horizon + 1];
        for node in &nodes {
            if node.t > horizon {
                return Err(Error::InvalidInput(format!("node {} lies beyond the horizon", node.id)));
            }
            levels[node.t].push(node.id);
            for &p in &node.parents {
                if p >= n || nodes[p].t + 1 != node.t {
                    return Err(Error::InvalidInput(format!("node {} has an invalid parent {p}", node.id)));
                }
            }
            if (node.t == 0) != node.parents.is_empty() {
                return Err(Error::InvalidInput(format!("node {} parent structure inconsistent with its time", node.id)));
            }
        }
        if levels[0].len() != 1 {
            return Err(Error::InvalidInput("exactly one root node is required".into()));
        }
        // edge probabilities
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
        for node in &nodes {
            for &p in &node.parents {
                children[p].push(node.id);
            }
        }
        for k in &order {
            let nj = &j.nodes[*k];
            let id = nj.id;
            let pp: Vec<f64> = match &nj.branch_probs {
                Some(bp) => {
                    if bp.len() != nodes[id].parents.len() {
                        return Err(Error::InvalidInput(format!("node {id} branch_probs must align with parents")));
                    }
                    bp.clone()
                }
                None if nodes[id].parents.len() == 1 => vec![nodes[id].prob / nodes[nodes[id].parents[0]].prob],
                None => nodes[id].parents.iter().map(|&p| 1.0 / children[p].len() as f64).collect(),
            };
            if pp.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::InvalidInput(format!("node {id} branch probabilities must be positive")));
            }
            nodes[id].parent_probs = pp;
        }
        for id in 0..n {
            for (k, &p) in nodes[id].parents.clone().iter().enumerate() {
                let bp = nodes[id].parent_probs[k];
                nodes[p].succ.push(id);
                nodes[p].succ_probs.push(bp);
            }
        }
        for node in &nodes {
            if node.t < horizon {
                if node.succ.is_empty() {
                    return Err(Error::InvalidInput(format!("non-terminal node {} has no successor", node.id)));
                }
                let s: f64 = node.succ_probs.iter().sum();
                if (s - 1.0).abs() > PROB_TOL {
                    return Err(Error::InvalidInput(format!("branch probabilities out of node {} sum to {s}", node.id)));
                }
            }
            if !node.parents.is_empty() {
                let reach: f64 = node.parents.iter().zip(&node.parent_probs).map(|(&p, bp)| nodes[p].prob * bp).sum();
                if (reach - node.prob).abs() > PROB_TOL * node.prob.max(1.0) {
                    return Err(Error::InvalidInput(format!("node {} probability disagrees with its parents", node.id)));
                }
            }
            if let Some(q) = &node.quotes {
                if q.bid.len() != d || q.ask.len() != d || q.mid.len() != d {
                    return Err(Error::DimensionMismatch(format!("node {} quotes", node.id)));
                }
            }
        }
        Ok(MarketTree { d, horizon, numeraire: j.numeraire, nodes, levels })
    }

    pub fn to_json(&self) -> MarketJson {
        let nodes = self
            .nodes
            .iter()
            .map(|n| {
                let parent = match n.parents.len() {
                    0 => None,
                    1 => Some(ParentField::One(n.parents[0])),
                    _ => Some(ParentField::Many(n.parents.clone())),
                };
                NodeJson {
                    id: n.id,
                    t: n.t,
                    parent,
                    prob: n.prob,
                    bidask: n.bidask.pi.clone(),
                    branch_probs: if n.parents.len() > 1 { Some(n.parent_probs.clone()) } else { None },
                    quotes: n.quotes.clone(),
                    coords: n.coords.clone(),
                }
            })
            .collect();
        MarketJson { d: self.d, horizon: self.horizon, numeraire: self.numeraire, nodes }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BuilderKind {
    Crr,
    Correlated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Compounding {
    /// bond grows by `1 + r dt` per step
    #[default]
    Periodic,
    /// bond grows by `(1 + r)^dt` per step
    Effective,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeSpec {
    pub kind: BuilderKind,
    pub s0: Vector,
    pub sigma: Vector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<Matrix>,
    #[serde(default)]
    pub r: f64,
    #[serde(default)]
    pub compounding: Compounding,
    pub lambda: Vector,
    #[serde(default)]
    pub lambda0: f64,
    pub n: usize,
    #[serde(default = "one")]
    pub maturity: f64,
    /// optional per-step branch weights (lexicographic over moves); uniform when absent
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch_weights: Option<Vec<f64>>,
}

fn one() -> f64 {
    1.0
}

impl TreeSpec {
    pub fn dt(&self) -> f64 {
        self.maturity / self.n as f64
    }

    fn growth(&self) -> f64 {
        match self.compounding {
            Compounding::Periodic => 1.0 + self.r * self.dt(),
            Compounding::Effective => (1.0 + self.r).powf(self.dt()),
        }
    }

    /// Bond price at step t (face value 1 at maturity).
    pub fn bond(&self, t: usize) -> f64 {
        self.growth().powi(-((self.n - t) as i32))
    }

    fn validate(&self) -> Result<()> {
        let k = self.s0.len();
        if self.n == 0 {
            return Err(Error::InvalidInput("n must be at least 1".into()));
        }
        if k == 0 || self.sigma.len() != k || self.lambda.len() != k {
            return Err(Error::DimensionMismatch("s0, sigma and lambda must have one entry per risky asset".into()));
        }
        if self.lambda.iter().chain(std::iter::once(&self.lambda0)).any(|l| !(0.0..1.0).contains(l)) {
            return Err(Error::InvalidInput("transaction costs must lie in [0, 1)".into()));
        }
        if self.s0.iter().any(|s| *s <= 0.0) || self.sigma.iter().any(|s| *s < 0.0) || !(self.maturity > 0.0) {
            return Err(Error::InvalidInput("prices and maturity must be positive, volatilities nonnegative".into()));
        }
        if let Some(rho) = &self.rho {
            if rho.len() != k || rho.iter().any(|r| r.len() != k) {
                return Err(Error::DimensionMismatch("rho must be k x k".into()));
            }
            for i in 0..k {
                if (rho[i][i] - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidInput("rho must have unit diagonal".into()));
                }
                for j in 0..k {
                    if (rho[i][j] - rho[j][i]).abs() > 1e-12 {
                        return Err(Error::InvalidInput("rho must be symmetric".into()));
                    }
                }
            }
        }
        if let Some(w) = &self.branch_weights {
            let s: f64 = w.iter().sum();
            if w.len() != 1 << k || w.iter().any(|x| *x <= 0.0) || (s - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidInput("branch_weights must be 2^k positive numbers summing to 1".into()));
            }
        }
        Ok(())
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Recombining lattice with k risky coordinates; `prices(t, coords)` gives
/// the risky mid prices.
fn build_lattice(spec: &TreeSpec, prices: &dyn Fn(usize, &[usize]) -> Vector) -> Result<MarketTree> {
    let k = spec.s0.len();
    let d = k + 1;
    let moves: Vec<Vec<usize>> = (0..1usize << k).map(|m| (0..k).map(|i| (m >> (k - 1 - i)) & 1).collect()).collect();
    let weights: Vec<f64> = spec.branch_weights.clone().unwrap_or_else(|| vec![1.0 / moves.len() as f64; moves.len()]);
    let mut nodes_json = Vec::new();
    let mut index: BTreeMap<(usize, Vec<usize>), usize> = BTreeMap::new();
    let mut reach: Vec<f64> = Vec::new();
    for t in 0..=spec.n {
        let count = (t + 1).pow(k as u32);
        for idx in 0..count {
            let mut coords = vec![0; k];
            let mut rest = idx;
            for i in (0..k).rev() {
                coords[i] = rest % (t + 1);
                rest /= t + 1;
            }
            let id = nodes_json.len();
            index.insert((t, coords.clone()), id);
            let mut parents = Vec::new();
            let mut bps = Vec::new();
            let mut prob = 0.0;
            if t > 0 {
                for (mi, mv) in moves.iter().enumerate() {
                    if coords.iter().zip(mv).any(|(c, m)| c < m || c - m > t - 1) {
                        continue;
                    }
                    let pc: Vec<usize> = coords.iter().zip(mv).map(|(c, m)| c - m).collect();
                    let pid = index[&(t - 1, pc)];
                    parents.push(pid);
                    bps.push(weights[mi]);
                    prob += reach[pid] * weights[mi];
                }
            } else {
                prob = 1.0;
            }
            if spec.branch_weights.is_none() {
                // exact binomial weights avoid accumulated rounding
                prob = coords.iter().map(|&c| binomial(t, c) / 2f64.powi(t as i32)).product();
            }
            reach.push(prob);
            let s = prices(t, &coords);
            let b = spec.bond(t);
            let mut bid = vec![b * (1.0 - spec.lambda0)];
            let mut ask = vec![b * (1.0 + spec.lambda0)];
            let mut mid = vec![b];
            for i in 0..k {
                bid.push(s[i] * (1.0 - spec.lambda[i]));
                ask.push(s[i] * (1.0 + spec.lambda[i]));
                mid.push(s[i]);
            }
            let pi = BidAskMatrix::from_quotes(&bid, &ask);
            let parent = match parents.len() {
                0 => None,
                1 => Some(ParentField::One(parents[0])),
                _ => Some(ParentField::Many(parents.clone())),
            };
            nodes_json.push(NodeJson {
                id,
                t,
                parent,
                prob,
                bidask: pi.pi,
                branch_probs: if parents.len() > 1 { Some(bps) } else { None },
                quotes: Some(Quotes { bid, ask, mid }),
                coords: Some(coords),
            });
        }
    }
    MarketTree::from_json(&MarketJson { d, horizon: spec.n, numeraire: 0, nodes: nodes_json })
}

/// Binomial lattice for a bond and one stock with constant proportional costs.
pub fn build_crr(spec: &TreeSpec) -> Result<MarketTree> {
    spec.validate()?;
    if spec.s0.len() != 1 {
        return Err(Error::InvalidInput("the binomial builder takes exactly one risky asset".into()));
    }
    let step = spec.sigma[0] * spec.dt().sqrt();
    let s0 = spec.s0[0];
    build_lattice(spec, &|t, c| vec![s0 * (step * (2.0 * c[0] as f64 - t as f64)).exp()])
}

/// Cholesky factor of the log-price covariance.
pub fn cholesky_factor(spec: &TreeSpec) -> Result<DMatrix<f64>> {
    let k = spec.s0.len();
    let rho = spec.rho.clone().unwrap_or_else(|| (0..k).map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect());
    let sigma = DMatrix::from_fn(k, k, |i, j| rho[i][j] * spec.sigma[i] * spec.sigma[j]);
    sigma
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::InvalidInput("correlation matrix is not positive definite".into()))
}

/// Recombining multi-asset lattice: each risky coordinate of the
/// decorrelated process moves by +-sqrt(dt) per step.
pub fn build_correlated(spec: &TreeSpec) -> Result<MarketTree> {
    spec.validate()?;
    let k = spec.s0.len();
    let g = cholesky_factor(spec)?;
    let ginv = g.clone().try_inverse().ok_or_else(|| Error::InvalidInput("singular covariance".into()))?;
    let dt = spec.dt();
    let rc = spec.growth().ln() / dt;
    let drift = nalgebra::DVector::from_fn(k, |i, _| rc - 0.5 * spec.sigma[i] * spec.sigma[i]);
    let alpha = &ginv * drift;
    let y0 = &ginv * nalgebra::DVector::from_fn(k, |i, _| spec.s0[i].ln());
    let sq = dt.sqrt();
    build_lattice(spec, &|t, c| {
        let y = nalgebra::DVector::from_fn(k, |i, _| y0[i] + t as f64 * alpha[i] * dt + (2.0 * c[i] as f64 - t as f64) * sq);
        let x = &g * y;
        (0..k).map(|i| x[i].exp()).collect()
    })
}

pub fn build(spec: &TreeSpec) -> Result<MarketTree> {
    match spec.kind {
        BuilderKind::Crr => build_crr(spec),
        BuilderKind::Correlated => build_correlated(spec),
    }
}

/// Backward recursion on closed cones of consistent price vectors: the
/// attainable cone at a node is its dual cone intersected with the cone
/// generated by its successors' cones. The market is free of arbitrage
/// when no node ends up with the trivial cone. Coordinates are rescaled by
/// root mid prices so that dual vectors have comparable entries.
pub fn check_no_arbitrage(tree: &MarketTree) -> Result<bool> {
    let d = tree.d;
    let scale = tree.root().quotes_or_implied(tree.numeraire).mid;
    if scale.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::InvalidInput("root mid prices must be positive".into()));
    }
    let scaled_k = |id: usize| -> Vec<Vector> {
        tree.nodes[id].cone.generators.iter().map(|k| k.iter().zip(&scale).map(|(a, s)| a * s).collect()).collect()
    };
    let mut cones: Vec<Option<Cone>> = vec![None; tree.nodes.len()];
    for t in (0..=tree.horizon).rev() {
        for &id in &tree.levels[t] {
            let node = &tree.nodes[id];
            let mut primal = scaled_k(id);
            if !node.is_terminal() {
                let mut union: Vec<Vector> = Vec::new();
                for c in &node.succ {
                    union.extend(cones[*c].as_ref().expect("successor processed first").generators.iter().cloned());
                }
                primal.extend(dual_cone(&Cone::new(d, union)?.reduced()?)?.generators);
            }
            let attainable = dual_cone(&Cone::new(d, primal)?)?;
            if attainable.generators.is_empty() {
                log::debug!("no consistent price vector at node {id}");
                return Ok(false);
            }
            cones[id] = Some(attainable.reduced()?);
        }
        for &id in tree.levels.get(t + 1).map(|v| v.as_slice()).unwrap_or(&[]) {
            cones[id] = None;
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quotes_pi(bid: f64, ask: f64) -> BidAskMatrix {
        BidAskMatrix::from_quotes(&[1.0, bid], &[1.0, ask])
    }

    #[test]
    fn example_one_root_cone() {
        let sc = solvency_cone(&quotes_pi(18.0, 25.0), 0).unwrap();
        assert_eq!(sc.cone.generators, vec![vec![25.0, -1.0], vec![-18.0, 1.0]]);
        assert_eq!(sc.labels, vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn frictionless_pair_is_merged() {
        let pi = quotes_pi(4.0, 4.0);
        let sc = solvency_cone(&pi, 0).unwrap();
        assert!(sc.cone.has_lines().unwrap());
        let liq = liquidation_map(&sc.cone, &pi).unwrap();
        assert_eq!(liq.p, vec![vec![1.0, 4.0]]);
        assert!(!liq.cone.has_lines().unwrap());
    }

    #[test]
    fn crr_levels() {
        let spec = TreeSpec {
            kind: BuilderKind::Crr,
            s0: vec![100.0],
            sigma: vec![0.2],
            rho: None,
            r: 0.1,
            compounding: Compounding::Effective,
            lambda: vec![0.00125],
            lambda0: 0.0,
            n: 6,
            maturity: 1.0,
            branch_weights: None,
        };
        let tree = build_crr(&spec).unwrap();
        for t in 0..=6 {
            assert_eq!(tree.levels[t].len(), t + 1);
        }
        assert!((spec.bond(0) - 1.0 / 1.1).abs() < 1e-14);
    }
}
