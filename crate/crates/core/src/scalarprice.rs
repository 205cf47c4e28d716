//! Scalar superhedging price by a backward cap/cut recursion on hypographs
//! of concave value functions, and recovery of the superhedging sets from
//! those functions.
//!
//! A hypograph lives in `R^d`: the price vector `S` with the pricing asset's
//! component (fixed to 1) removed, followed by the function value.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{convex_union, dot, max_abs, Matrix, Polyhedron, Vector};
use crate::market::{check_no_arbitrage, MarketTree};
use crate::payoffs::Claim;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypoFn {
    pub node: usize,
    pub asset: usize,
    pub set: Polyhedron,
}

fn drop_coord(v: &[f64], i: usize) -> Vector {
    v.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, x)| *x).collect()
}

fn insert_coord(v: &[f64], i: usize, x: f64) -> Vector {
    let mut out = v.to_vec();
    out.insert(i, x);
    out
}

fn down(d: usize) -> Vector {
    let mut e = vec![0.0; d];
    e[d - 1] = -1.0;
    e
}

/// `S -> X . S` on `{S in K_T^+, S^i = 1}`.
pub fn scalar_terminal(tree: &MarketTree, node: usize, claim: &Claim, i: usize) -> Result<HypoFn> {
    let n = tree.node(node);
    if !n.is_terminal() {
        return Err(Error::InvalidInput(format!("node {node} is not terminal")));
    }
    let d = tree.d;
    let x = claim.at(node);
    let mut points = Vec::new();
    let mut rays = vec![down(d)];
    for w in &n.dual_cone.generators {
        let scale = w[i];
        if scale > 1e-12 * max_abs(w) {
            let s: Vector = w.iter().map(|v| v / scale).collect();
            let mut p = drop_coord(&s, i);
            p.push(dot(x, &s));
            points.push(p);
        } else {
            let mut r = drop_coord(w, i);
            r.push(dot(x, w));
            rays.push(r);
        }
    }
    if points.is_empty() {
        return Err(Error::Arbitrage);
    }
    Ok(HypoFn { node, asset: i, set: Polyhedron::from_vrep(d, points, rays)? })
}

/// Hypograph of the least concave majorant of the children.
pub fn scalar_cap(children: &[HypoFn]) -> Result<HypoFn> {
    let first = children.first().ok_or_else(|| Error::InvalidInput("cap needs at least one function".into()))?;
    if children.iter().any(|h| h.asset != first.asset) {
        return Err(Error::InvalidInput("cap operands priced in different assets".into()));
    }
    let sets: Vec<Polyhedron> = children.iter().map(|h| h.set.clone()).collect();
    Ok(HypoFn { node: first.node, asset: first.asset, set: convex_union(&sets)? })
}

/// Restrict the domain to `{S in K_t^+, S^i = 1}` at `node`.
pub fn scalar_cut(tree: &MarketTree, h: &HypoFn, node: usize) -> Result<HypoFn> {
    let i = h.asset;
    let hr = h.set.hrep();
    let mut a: Matrix = hr.a.clone();
    let mut b: Vector = hr.b.clone();
    for k in &tree.node(node).cone.generators {
        let mut row = drop_coord(k, i);
        row.push(0.0);
        a.push(row);
        b.push(-k[i]);
    }
    let set = Polyhedron::from_hrep_dim(tree.d, a, b)?;
    if set.is_empty() {
        return Err(Error::Arbitrage);
    }
    Ok(HypoFn { node, asset: i, set })
}

/// Price in units of asset `i` with the hypograph at every node.
pub fn scalar_price_run(tree: &MarketTree, claim: &Claim, i: usize) -> Result<(f64, BTreeMap<usize, HypoFn>)> {
    claim.validate(tree)?;
    if i >= tree.d {
        return Err(Error::InvalidInput(format!("asset {i} out of range")));
    }
    if !check_no_arbitrage(tree)? {
        return Err(Error::Arbitrage);
    }
    let mut hypos: BTreeMap<usize, HypoFn> = BTreeMap::new();
    for t in (0..=tree.horizon).rev() {
        let done: Vec<Result<HypoFn>> = tree.levels[t]
            .par_iter()
            .map(|&id| {
                let n = tree.node(id);
                if n.is_terminal() {
                    return scalar_terminal(tree, id, claim, i);
                }
                let kids: Vec<HypoFn> = n.succ.iter().map(|c| hypos[c].clone()).collect();
                let mut cap = scalar_cap(&kids)?;
                cap.node = id;
                scalar_cut(tree, &cap, id)
            })
            .collect();
        for h in done {
            let h = h?;
            hypos.insert(h.node, h);
        }
    }
    let root = &hypos[&tree.root().id].set;
    let d = tree.d;
    if root.rays().iter().any(|r| r[d - 1] > 1e-12 * max_abs(r)) {
        return Err(Error::Arbitrage);
    }
    let price = root.points().iter().map(|p| p[d - 1]).fold(f64::NEG_INFINITY, f64::max);
    Ok((price, hypos))
}

/// Superhedging set `{x : S . x >= V(S)}` over the vertices and recession
/// directions of the hypograph.
pub fn recover_shp(h: &HypoFn) -> Result<Polyhedron> {
    let set = &h.set;
    let d = set.dim;
    let i = h.asset;
    let mut a = Vec::new();
    let mut b = Vec::new();
    for p in set.points() {
        a.push(insert_coord(&p[..d - 1], i, 1.0));
        b.push(p[d - 1]);
    }
    for r in set.rays() {
        // the downward direction, possibly carrying round-off
        if max_abs(&r[..d - 1]) <= 1e-8 * max_abs(r) {
            continue;
        }
        a.push(insert_coord(&r[..d - 1], i, 0.0));
        b.push(r[d - 1]);
    }
    Polyhedron::from_hrep_dim(d, a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::one_period_digital;

    #[test]
    fn digital_root_price_and_set() {
        let (tree, claim) = one_period_digital().unwrap();
        let (price, hypos) = scalar_price_run(&tree, &claim, 0).unwrap();
        assert!((price - 25.0).abs() < 1e-9);
        let up = &hypos[&1].set;
        let mut vals: Vec<(f64, f64)> = up.points().iter().map(|p| (p[0], p[1])).collect();
        vals.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!((vals[0].0 - 20.0).abs() < 1e-9 && (vals[0].1 - 20.0).abs() < 1e-9);
        assert!((vals[1].0 - 26.0).abs() < 1e-9 && (vals[1].1 - 26.0).abs() < 1e-9);
        let shp = recover_shp(&hypos[&0]).unwrap();
        let mut pts = shp.points().clone();
        pts.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert!((pts[0][0] + 80.0).abs() < 1e-9 && (pts[0][1] - 5.0).abs() < 1e-9);
        assert!(pts[1][0].abs() < 1e-9 && (pts[1][1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn root_cut_domain_is_the_price_interval() {
        let (tree, claim) = one_period_digital().unwrap();
        let (_, hypos) = scalar_price_run(&tree, &claim, 0).unwrap();
        let xs: Vec<f64> = hypos[&0].set.points().iter().map(|p| p[0]).collect();
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo >= 18.0 - 1e-9 && hi <= 25.0 + 1e-9);
    }
}
