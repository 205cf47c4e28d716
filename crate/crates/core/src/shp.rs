//! Sets of superhedging portfolios by backward recursion over the tree,
//! one linear vector optimization problem per interior node.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dot, max_abs, Matrix, Polyhedron, Vector};
use crate::linprog::{self, LpProblem};
use crate::market::{check_no_arbitrage, liquidation_map, MarketTree};
use crate::payoffs::Claim;
use crate::vop::{benson_solve, VopProblem};

/// Superhedging set at one node with the efficient portfolios that
/// generate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeShp {
    pub set: Polyhedron,
    #[serde(default)]
    pub efficient_points: Matrix,
    #[serde(default)]
    pub efficient_directions: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShpResult {
    pub nodes: BTreeMap<usize, NodeShp>,
}

impl ShpResult {
    pub fn set(&self, node: usize) -> &Polyhedron {
        &self.nodes[&node].set
    }

    pub fn root<'a>(&'a self, tree: &MarketTree) -> &'a Polyhedron {
        self.set(tree.root().id)
    }
}

fn terminal_set(tree: &MarketTree, id: usize, x: &[f64]) -> Result<NodeShp> {
    let node = tree.node(id);
    let a: Matrix = node.dual_cone.generators.clone();
    let b: Vector = a.iter().map(|w| dot(w, x)).collect();
    let set = Polyhedron::from_hrep_dim(tree.d, a, b)?;
    Ok(NodeShp { set, efficient_points: vec![x.to_vec()], efficient_directions: Vec::new() })
}

fn stacked_rows(tree: &MarketTree, id: usize, sets: &BTreeMap<usize, NodeShp>) -> (Matrix, Vector) {
    let mut a: Matrix = Vec::new();
    let mut b: Vector = Vec::new();
    for c in &tree.node(id).succ {
        let h = sets[c].set.hrep();
        for (row, rhs) in h.a.iter().zip(&h.b) {
            let dup = a.iter().zip(&b).any(|(r, s)| {
                r.iter().zip(row).all(|(x, y)| (x - y).abs() <= 1e-12) && (s - rhs).abs() <= 1e-12 * (1.0 + rhs.abs())
            });
            if !dup {
                a.push(row.clone());
                b.push(*rhs);
            }
        }
    }
    (a, b)
}

fn interior_set(tree: &MarketTree, id: usize, sets: &BTreeMap<usize, NodeShp>) -> Result<NodeShp> {
    let node = tree.node(id);
    let d = tree.d;
    let (b_mat, b) = stacked_rows(tree, id, sets);
    let liq = liquidation_map(&node.cone, &node.bidask)?;
    // numeraire coordinate last so that c = e_q
    let last = liq.coordinate_of(tree.numeraire);
    let mut order: Vec<usize> = (0..liq.groups.len()).filter(|&k| k != last).collect();
    order.push(last);
    let p: Matrix = order.iter().map(|&k| liq.p[k].clone()).collect();
    let ordering: Vec<Vector> = liq.cone.generators.iter().map(|g| order.iter().map(|&k| g[k]).collect()).collect();
    let q = p.len();
    let mut c = vec![0.0; q];
    c[q - 1] = 1.0;
    let prob = VopProblem { p: p.clone(), b_mat, b, ordering, c };
    let sol = benson_solve(&prob).map_err(|e| match e {
        Error::Unbounded(_) => Error::Arbitrage,
        other => other,
    })?;
    let h = sol.upper_image.hrep();
    let mut a = Vec::with_capacity(h.a.len());
    for w in &h.a {
        let row: Vector = (0..d).map(|j| (0..q).map(|k| w[k] * p[k][j]).sum()).collect();
        a.push(row);
    }
    let set = Polyhedron::from_hrep_dim(d, a, h.b.clone())?;
    if set.is_empty() {
        return Err(Error::NumericalFailure(format!("superhedging set at node {id} came out empty")));
    }
    Ok(NodeShp { set, efficient_points: sol.primal_points, efficient_directions: sol.primal_directions })
}

/// All superhedging sets, processed level by level from the horizon.
pub fn shp_backward(tree: &MarketTree, claim: &Claim) -> Result<ShpResult> {
    claim.validate(tree)?;
    if !check_no_arbitrage(tree)? {
        return Err(Error::Arbitrage);
    }
    shp_backward_unchecked(tree, claim)
}

/// As [`shp_backward`] without the no-arbitrage precheck.
pub fn shp_backward_unchecked(tree: &MarketTree, claim: &Claim) -> Result<ShpResult> {
    claim.validate(tree)?;
    let mut sets: BTreeMap<usize, NodeShp> = BTreeMap::new();
    for t in (0..=tree.horizon).rev() {
        let level = &tree.levels[t];
        let done: Vec<Result<(usize, NodeShp)>> = level
            .par_iter()
            .map(|&id| {
                let node = tree.node(id);
                let s = if node.is_terminal() { terminal_set(tree, id, claim.at(id))? } else { interior_set(tree, id, &sets)? };
                Ok((id, s))
            })
            .collect();
        for r in done {
            let (id, s) = r?;
            sets.insert(id, s);
        }
        log::debug!("superhedging level {t} done ({} nodes)", level.len());
    }
    Ok(ShpResult { nodes: sets })
}

/// Portfolios in the given assets only, in the coordinates of `assets`.
pub fn restrict(shp: &Polyhedron, assets: &[usize]) -> Result<Polyhedron> {
    if assets.is_empty() || assets.iter().any(|&i| i >= shp.dim) {
        return Err(Error::InvalidInput("asset subset must be nonempty and in range".into()));
    }
    let h = shp.hrep();
    let a: Matrix = h.a.iter().map(|row| assets.iter().map(|&i| row[i]).collect()).collect();
    Polyhedron::from_hrep_dim(assets.len(), a, h.b.clone())
}

/// Smallest amount of asset i alone that superhedges, read from the
/// H-representation.
pub fn scalar_price(shp: &Polyhedron, i: usize) -> Result<f64> {
    let h = shp.hrep();
    let mut best = f64::NEG_INFINITY;
    for (row, rhs) in h.a.iter().zip(&h.b) {
        if row[i] <= 1e-12 * max_abs(row) {
            return Err(Error::InvariantViolation(format!("row {row:?} has nonpositive coefficient for asset {i}")));
        }
        best = best.max(rhs / row[i]);
    }
    if !best.is_finite() {
        return Err(Error::InvariantViolation("superhedging set is the whole space".into()));
    }
    Ok(best)
}

/// Ask and bid prices in units of asset i: the bid is minus the ask of the
/// negated claim.
pub fn bid_ask_prices(tree: &MarketTree, claim: &Claim, i: usize) -> Result<(f64, f64)> {
    let ask = scalar_price(shp_backward(tree, claim)?.root(tree), i)?;
    let bid = -scalar_price(shp_backward(tree, &claim.negated())?.root(tree), i)?;
    Ok((bid, ask))
}

struct PathNode {
    node: usize,
    children: Vec<usize>,
}

fn expand_paths(tree: &MarketTree) -> Vec<PathNode> {
    let mut out = vec![PathNode { node: tree.root().id, children: Vec::new() }];
    let mut k = 0;
    while k < out.len() {
        let succ = tree.node(out[k].node).succ.clone();
        for s in succ {
            out.push(PathNode { node: s, children: Vec::new() });
            let idx = out.len() - 1;
            out[k].children.push(idx);
        }
        k += 1;
    }
    out
}

/// Direct feasibility test of the primal definition on the tree of paths:
/// x0 is superhedging iff nonnegative generator weights exist at every
/// path node such that x0 minus all trades along each path equals the
/// payoff at its end. Exponential in the horizon on recombining lattices.
pub fn membership_oracle(tree: &MarketTree, claim: &Claim, x0: &[f64]) -> Result<bool> {
    claim.validate(tree)?;
    let d = tree.d;
    if x0.len() != d {
        return Err(Error::DimensionMismatch("x0 length".into()));
    }
    let paths = expand_paths(tree);
    let mut offset = Vec::with_capacity(paths.len());
    let mut nvars = 0;
    for p in &paths {
        offset.push(nvars);
        nvars += tree.node(p.node).cone.generators.len();
    }
    let mut lp = LpProblem::new(nvars);
    lp.set_nonneg(0..nvars);
    lp.set_objective(vec![0.0; nvars]);
    // walk each root-to-leaf chain
    let mut stack: Vec<(usize, Vec<usize>)> = vec![(0, vec![0])];
    while let Some((k, chain)) = stack.pop() {
        if paths[k].children.is_empty() {
            let x = claim.at(paths[k].node);
            for j in 0..d {
                let mut row = vec![0.0; nvars];
                for &pk in &chain {
                    for (g, gen) in tree.node(paths[pk].node).cone.generators.iter().enumerate() {
                        row[offset[pk] + g] = gen[j];
                    }
                }
                lp.add_eq(row, x0[j] - x[j]);
            }
            continue;
        }
        for &c in &paths[k].children {
            let mut ch = chain.clone();
            ch.push(c);
            stack.push((c, ch));
        }
    }
    linprog::feasible(&lp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{MarketJson, NodeJson, ParentField};
    use crate::payoffs::digital_asset_or_nothing;

    fn example_one() -> MarketTree {
        let pi = |b: f64, a: f64| vec![vec![1.0, a], vec![1.0 / b, 1.0]];
        let node = |id, t, parent: Option<usize>, m| NodeJson {
            id,
            t,
            parent: parent.map(ParentField::One),
            prob: if t == 0 { 1.0 } else { 0.5 },
            bidask: m,
            branch_probs: None,
            quotes: None,
            coords: None,
        };
        MarketTree::from_json(&MarketJson {
            d: 2,
            horizon: 1,
            numeraire: 0,
            nodes: vec![node(0, 0, None, pi(18.0, 25.0)), node(1, 1, Some(0), pi(20.0, 26.0)), node(2, 1, Some(0), pi(16.0, 22.0))],
        })
        .unwrap()
    }

    #[test]
    fn example_one_root() {
        let tree = example_one();
        let claim = digital_asset_or_nothing(&tree, 24.0, 1).unwrap();
        let res = shp_backward(&tree, &claim).unwrap();
        let root = res.root(&tree);
        assert_eq!(root.points().len(), 2);
        assert!((scalar_price(root, 0).unwrap() - 25.0).abs() < 1e-9);
        assert!(membership_oracle(&tree, &claim, &[25.0, 0.0]).unwrap());
        assert!(!membership_oracle(&tree, &claim, &[10.0, 0.0]).unwrap());
    }

    #[test]
    fn restrict_to_cash_is_a_ray() {
        let tree = example_one();
        let claim = digital_asset_or_nothing(&tree, 24.0, 1).unwrap();
        let res = shp_backward(&tree, &claim).unwrap();
        let cash = restrict(res.root(&tree), &[0]).unwrap();
        assert_eq!(cash.points().len(), 1);
        assert!((cash.points()[0][0] - 25.0).abs() < 1e-9);
        assert_eq!(cash.rays(), &vec![vec![1.0]]);
    }
}
