#![allow(dead_code)]

use conehedge::geometry::{dot, max_abs, Polyhedron, Vector};
use conehedge::market::{BidAskMatrix, MarketJson, MarketTree, NodeJson, ParentField};
use conehedge::payoffs::Claim;
use conehedge::scalarprice::{recover_shp, scalar_price_run};
use conehedge::shp::{membership_oracle, scalar_price, shp_backward};
use conehedge::vop::{benson_solve, coupling, dual_objective, VopProblem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn two_objective_problem() -> VopProblem {
    VopProblem {
        p: vec![vec![1.0, -1.0], vec![1.0, 1.0]],
        b_mat: vec![vec![2.0, 1.0], vec![1.0, 2.0], vec![1.0, 0.0], vec![0.0, 1.0]],
        b: vec![6.0, 6.0, 0.0, 0.0],
        ordering: vec![vec![-3.0, 1.0], vec![1.0, 2.0]],
        c: vec![0.0, 1.0],
    }
}

pub fn three_objective_problem() -> VopProblem {
    VopProblem {
        p: vec![vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]],
        b_mat: vec![
            vec![2.0, 4.0, 4.0],
            vec![4.0, 2.0, 4.0],
            vec![4.0, 4.0, 2.0],
            vec![1.0, 1.0, 1.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ],
        b: vec![3.0, 3.0, 3.0, 1.0, 0.0, 0.0, 0.0],
        ordering: vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
        c: vec![1.0, 1.0, 1.0],
    }
}

pub fn near(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

/// Every expected point has a computed point within `tol` and vice versa.
pub fn same_points(computed: &[Vector], expected: &[Vector], tol: f64) -> bool {
    expected.iter().all(|e| computed.iter().any(|c| near(c, e, tol))) && computed.iter().all(|c| expected.iter().any(|e| near(c, e, tol)))
}

/// Random market on a non-recombining tree whose mid prices form a
/// martingale under random branch weights, so quotes around them are free
/// of arbitrage.
pub struct RandomMarket {
    pub json: MarketJson,
    pub mids: Vec<Vector>,
}

fn weights(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.2..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

fn children_mids(rng: &mut ChaCha8Rng, parent: &[f64], k: usize, q: &[f64]) -> Vec<Vector> {
    loop {
        let mut kids: Vec<Vector> = (0..k)
            .map(|_| parent.iter().enumerate().map(|(i, s)| if i == 0 { 1.0 } else { s * (rng.gen_range(-0.25..0.25f64)).exp() }).collect())
            .collect();
        for i in 1..parent.len() {
            let mean: f64 = kids.iter().zip(q).map(|(c, p)| c[i] * p).sum();
            for c in kids.iter_mut() {
                c[i] += parent[i] - mean;
            }
        }
        if kids.iter().flatten().all(|v| *v > 0.05) {
            return kids;
        }
    }
}

pub fn random_market(seed: u64) -> RandomMarket {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.gen_range(2..=3);
    let horizon = rng.gen_range(1..=2);
    let lambda: Vec<f64> = (0..d).map(|i| if i == 0 { 0.0 } else { rng.gen_range(0.0..0.05) }).collect();
    let quote = |m: &Vector| {
        let bid: Vec<f64> = m.iter().zip(&lambda).map(|(s, l)| s * (1.0 - l)).collect();
        let ask: Vec<f64> = m.iter().zip(&lambda).map(|(s, l)| s * (1.0 + l)).collect();
        BidAskMatrix::from_quotes(&bid, &ask).pi
    };
    let root: Vector = (0..d).map(|i| if i == 0 { 1.0 } else { rng.gen_range(5.0..50.0) }).collect();
    let mut nodes = vec![NodeJson { id: 0, t: 0, parent: None, prob: 1.0, bidask: quote(&root), branch_probs: None, quotes: None, coords: None }];
    let mut mids = vec![root];
    let mut frontier = vec![0usize];
    for t in 1..=horizon {
        let mut next = Vec::new();
        for &p in &frontier {
            let k = if d == 2 { rng.gen_range(2..=3) } else { 3 };
            let q = weights(&mut rng, k);
            let kids = children_mids(&mut rng, &mids[p].clone(), k, &q);
            for (m, w) in kids.into_iter().zip(&q) {
                let id = nodes.len();
                nodes.push(NodeJson { id, t, parent: Some(ParentField::One(p)), prob: nodes[p].prob * w, bidask: quote(&m), branch_probs: None, quotes: None, coords: None });
                mids.push(m);
                next.push(id);
            }
        }
        frontier = next;
    }
    RandomMarket { json: MarketJson { d, horizon, numeraire: 0, nodes }, mids }
}

/// Same market with fresh, unrelated branch probabilities.
pub fn reweighted(json: &MarketJson, seed: u64) -> MarketJson {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut out = json.clone();
    let n = out.nodes.len();
    let mut kids: Vec<Vec<usize>> = vec![Vec::new(); n];
    for node in &out.nodes {
        if let Some(ParentField::One(p)) = node.parent {
            kids[p].push(node.id);
        }
    }
    for p in 0..n {
        if kids[p].is_empty() {
            continue;
        }
        let w = weights(&mut rng, kids[p].len());
        let base = out.nodes[p].prob;
        for (c, wc) in kids[p].clone().into_iter().zip(w) {
            out.nodes[c].prob = base * wc;
        }
    }
    out
}

pub fn random_claim(tree: &MarketTree, seed: u64) -> Claim {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(31).wrapping_add(7));
    let payoffs = tree.terminals().iter().map(|&id| (id, (0..tree.d).map(|_| rng.gen_range(-2.0..2.0)).collect())).collect();
    Claim { payoffs }
}

pub fn random_case(seed: u64) -> (MarketTree, Claim) {
    let m = random_market(seed);
    let tree = MarketTree::from_json(&m.json).expect("random market is well formed");
    let claim = random_claim(&tree, seed);
    (tree, claim)
}

/// Largest scaled constraint violation; negative strictly inside.
fn scaled_violation(set: &Polyhedron, x: &[f64]) -> f64 {
    let h = set.hrep();
    h.a.iter().zip(&h.b).map(|(a, b)| (b - dot(a, x)) / max_abs(a)).fold(f64::NEG_INFINITY, f64::max)
}

fn sample_near(rng: &mut ChaCha8Rng, set: &Polyhedron) -> Vector {
    let pts = set.points();
    let base = &pts[rng.gen_range(0..pts.len())];
    let mut x = base.clone();
    for r in set.rays() {
        let s = rng.gen_range(0.0..0.5) / max_abs(r);
        x.iter_mut().zip(r).for_each(|(a, b)| *a += s * b);
    }
    let scale = 0.05 * (1.0 + max_abs(base));
    x.iter_mut().for_each(|a| *a += rng.gen_range(-scale..scale));
    x
}

/// Direct primal feasibility agrees with the backward-recursion set.
pub fn oracle_agreement(trees: u64, points: usize) -> Result<String, String> {
    let mut checked = 0usize;
    let mut skipped = 0usize;
    for seed in 0..trees {
        let (tree, claim) = random_case(seed);
        let shp = shp_backward(&tree, &claim).map_err(|e| format!("tree {seed}: {e}"))?;
        let root = shp.root(&tree);
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        for _ in 0..points {
            let x = sample_near(&mut rng, root);
            let v = scaled_violation(root, &x);
            if v.abs() < 1e-6 * (1.0 + max_abs(&x)) {
                skipped += 1;
                continue;
            }
            let direct = membership_oracle(&tree, &claim, &x).map_err(|e| format!("tree {seed}: {e}"))?;
            if direct != (v < 0.0) {
                return Err(format!("tree {seed}: point {x:?} direct={direct} violation={v:e}"));
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} points agree, {skipped} on the boundary skipped"))
}

fn same_set(a: &Polyhedron, b: &Polyhedron, tol: f64) -> bool {
    let inside = |p: &Polyhedron, q: &Polyhedron| q.points().iter().all(|x| p.contains_tol(x, tol)) && q.rays().iter().all(|r| p.contains_ray(r));
    inside(a, b) && inside(b, a)
}

/// Hypograph recursion recovers the same sets as the set-valued recursion,
/// and its price matches the H-representation price.
pub fn hypograph_agreement(trees: u64) -> Result<(String, f64), String> {
    let mut worst = 0.0f64;
    for seed in 0..trees {
        let (tree, claim) = random_case(seed);
        let shp = shp_backward(&tree, &claim).map_err(|e| format!("tree {seed}: {e}"))?;
        for i in 0..tree.d {
            let (price, hypos) = scalar_price_run(&tree, &claim, i).map_err(|e| format!("tree {seed} asset {i}: {e}"))?;
            let direct = scalar_price(shp.root(&tree), i).map_err(|e| format!("tree {seed}: {e}"))?;
            worst = worst.max((price - direct).abs());
            for (id, h) in &hypos {
                let rec = recover_shp(h).map_err(|e| format!("tree {seed} node {id}: {e}"))?;
                if !same_set(&rec, shp.set(*id), 1e-7) {
                    return Err(format!("tree {seed} node {id} asset {i}: recovered set differs"));
                }
            }
        }
    }
    Ok((format!("{trees} trees, all nodes and pricing assets"), worst))
}

fn random_vop(seed: u64) -> VopProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = rng.gen_range(2..=3);
    let n = rng.gen_range(2..=4);
    let m = rng.gen_range(2..=5);
    let mut b_mat: Vec<Vector> = (0..m).map(|_| (0..n).map(|_| rng.gen_range(0.1..3.0)).collect()).collect();
    let mut b: Vector = (0..m).map(|_| rng.gen_range(0.5..5.0)).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        b_mat.push(e);
        b.push(0.0);
    }
    let p = (0..q).map(|_| (0..n).map(|_| rng.gen_range(0.0..2.0)).collect()).collect();
    let ordering = (0..q).map(|k| (0..q).map(|l| if k == l { 1.0 } else { 0.0 }).collect()).collect();
    VopProblem { p, b_mat, b, ordering, c: vec![1.0; q] }
}

/// `phi(y, y*) >= 0` for sampled upper-image points against dual image
/// points.
pub fn weak_duality(problems: u64, samples: usize) -> Result<String, String> {
    let mut pairs = 0usize;
    let mut probs = vec![two_objective_problem(), three_objective_problem()];
    probs.extend((0..problems).map(random_vop));
    for (k, prob) in probs.iter().enumerate() {
        let sol = benson_solve(prob).map_err(|e| format!("problem {k}: {e}"))?;
        let ystars: Vec<Vector> = sol.dual_points.iter().map(|d| dual_objective(d, &prob.b)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(77 + k as u64);
        let pts = sol.upper_image.points();
        for _ in 0..samples {
            let w = weights(&mut rng, pts.len());
            let mut y: Vector = vec![0.0; prob.q()];
            for (p, wp) in pts.iter().zip(&w) {
                y.iter_mut().zip(p).for_each(|(a, b)| *a += wp * b);
            }
            for r in sol.upper_image.rays() {
                let s = rng.gen_range(0.0..2.0);
                y.iter_mut().zip(r).for_each(|(a, b)| *a += s * b);
            }
            for ys in &ystars {
                let phi = coupling(&y, ys, &prob.c);
                if phi < -1e-9 * (1.0 + max_abs(&y)) {
                    return Err(format!("problem {k}: phi({y:?}, {ys:?}) = {phi:e}"));
                }
                pairs += 1;
            }
        }
    }
    Ok(format!("{pairs} pairs over {} problems", probs.len()))
}

/// Branch probabilities do not move the superhedging sets.
pub fn probability_invariance(trees: u64) -> Result<String, String> {
    for seed in 0..trees {
        let m = random_market(seed);
        let a = MarketTree::from_json(&m.json).map_err(|e| e.to_string())?;
        let b = MarketTree::from_json(&reweighted(&m.json, seed)).map_err(|e| e.to_string())?;
        let claim = random_claim(&a, seed);
        let sa = shp_backward(&a, &claim).map_err(|e| e.to_string())?;
        let sb = shp_backward(&b, &claim).map_err(|e| e.to_string())?;
        for id in sa.nodes.keys() {
            if !same_set(sa.set(*id), sb.set(*id), 1e-9) {
                return Err(format!("tree {seed} node {id}: sets moved with probabilities"));
            }
        }
    }
    Ok(format!("{trees} trees reweighted"))
}

/// Adding a deterministic bundle shifts every set by it; a larger claim
/// has a smaller set.
pub fn translation_and_antitonicity(trees: u64) -> Result<String, String> {
    for seed in 0..trees {
        let (tree, claim) = random_case(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + seed);
        let u: Vector = (0..tree.d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let base = shp_backward(&tree, &claim).map_err(|e| e.to_string())?;
        let moved = shp_backward(&tree, &claim.shifted(&u)).map_err(|e| e.to_string())?;
        for id in base.nodes.keys() {
            let b = base.set(*id);
            let shifted: Vec<Vector> = b.points().iter().map(|p| p.iter().zip(&u).map(|(a, b)| a + b).collect()).collect();
            let expected = Polyhedron::from_vrep(tree.d, shifted, b.rays().clone()).map_err(|e| e.to_string())?;
            if !same_set(moved.set(*id), &expected, 1e-9) {
                return Err(format!("tree {seed} node {id}: translation law fails"));
            }
        }
        let mut bigger = claim.clone();
        for v in bigger.payoffs.values_mut() {
            v.iter_mut().for_each(|x| *x += rng.gen_range(0.0..0.5));
        }
        let small = shp_backward(&tree, &bigger).map_err(|e| e.to_string())?;
        for id in base.nodes.keys() {
            let outer = base.set(*id);
            if !small.set(*id).points().iter().all(|p| outer.contains_tol(p, 1e-8)) {
                return Err(format!("tree {seed} node {id}: larger claim has a larger set"));
            }
        }
    }
    Ok(format!("{trees} trees"))
}
