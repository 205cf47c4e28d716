//! One line per headline criterion; the test fails if any line reads FAIL.

mod common;

use std::io::Write;
use std::time::Instant;

use common::*;
use conehedge::fixtures::*;
use conehedge::geometry::{max_abs, Vector};
use conehedge::market::MarketTree;
use conehedge::payoffs::Claim;
use conehedge::shp::{scalar_price, shp_backward};
use conehedge::strategy::{replay, Choice, StepContext};
use conehedge::vop::{benson_solve, dual_objective};

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn direction(v: &[f64]) -> Vector {
    let m = max_abs(v);
    v.iter().map(|x| x / m).collect()
}

fn cash_mid(tree: &MarketTree, i: usize) -> f64 {
    tree.root().quotes_or_implied(tree.numeraire).mid[i]
}

fn prices(tree: &MarketTree, claim: &Claim, i: usize) -> Result<(f64, f64, Vec<Vector>, Vec<Vector>), String> {
    let ask_set = shp_backward(tree, claim).map_err(|e| e.to_string())?;
    let bid_set = shp_backward(tree, &claim.negated()).map_err(|e| e.to_string())?;
    let ask = scalar_price(ask_set.root(tree), i).map_err(|e| e.to_string())?;
    let bid = -scalar_price(bid_set.root(tree), i).map_err(|e| e.to_string())?;
    let sub: Vec<Vector> = bid_set.root(tree).points().iter().map(|p| p.iter().map(|x| -x).collect()).collect();
    Ok((bid, ask, ask_set.root(tree).points().clone(), sub))
}

fn one_period_digital_exact() -> Check {
    let (tree, claim) = one_period_digital().map_err(|e| e.to_string())?;
    let shp = shp_backward(&tree, &claim).map_err(|e| e.to_string())?;
    let root = shp.root(&tree);
    ensure(same_points(root.points(), &[vec![0.0, 1.0], vec![-80.0, 5.0]], 1e-9), format!("vertices {:?}", root.points()))?;
    let rays: Vec<Vector> = root.rays().iter().map(|r| direction(r)).collect();
    let expected = [direction(&[-18.0, 1.0]), direction(&[25.0, -1.0])];
    ensure(same_points(&rays, &expected, 1e-9), format!("recession directions {rays:?}"))?;
    let price = scalar_price(root, 0).map_err(|e| e.to_string())?;
    ensure((price - 25.0).abs() <= 1e-9, format!("price {price}"))?;
    Ok(format!("price {price}"))
}

fn two_objective_duality() -> Check {
    let prob = two_objective_problem();
    let sol = benson_solve(&prob).map_err(|e| e.to_string())?;
    let ystars: Vec<Vector> = sol.dual_points.iter().map(|d| dual_objective(d, &prob.b)).collect();
    ensure(same_points(&ystars, &[vec![-1.0, 0.0], vec![-1.0 / 3.0, 4.0], vec![1.0 / 3.0, 4.0]], 1e-9), format!("dual vertices {ystars:?}"))?;
    let h = sol.upper_image.hrep();
    let rows: Vec<Vector> = h.a.iter().zip(&h.b).map(|(a, b)| {
        let k = a[1];
        vec![a[0] / k, 1.0, b / k]
    }).collect();
    let expected = [vec![-1.0, 1.0, 0.0], vec![-1.0 / 3.0, 1.0, 4.0], vec![1.0 / 3.0, 1.0, 4.0]];
    ensure(same_points(&rows, &expected, 1e-9), format!("rows {rows:?}"))?;
    Ok("3 dual vertices, 3 facets".into())
}

fn three_objective_counts() -> Check {
    let sol = benson_solve(&three_objective_problem()).map_err(|e| e.to_string())?;
    let (v, f, dv) = (sol.upper_image.points().len(), sol.upper_image.hrep().a.len(), sol.lower_image.points().len());
    ensure((v, f, dv) == (6, 13, 13), format!("{v} vertices, {f} facets, {dv} dual vertices"))?;
    Ok(format!("{v} vertices, {f} facets, {dv} dual vertices"))
}

fn digital_on_hundred_steps() -> Check {
    let (tree, claim) = digital_crr(100).map_err(|e| e.to_string())?;
    let shp = shp_backward(&tree, &claim).map_err(|e| e.to_string())?;
    let root = shp.root(&tree);
    ensure(same_points(root.points(), &[vec![0.0, 1.0], vec![-24.92, 2.39]], 5e-3), format!("vertices {:?}", root.points()))?;
    let units = scalar_price(root, 0).map_err(|e| e.to_string())?;
    let cash = units * cash_mid(&tree, 0);
    ensure((units - 19.29).abs() <= 5e-3 && (cash - 18.72).abs() <= 5e-3, format!("{units} bond units, {cash} cash"))?;
    Ok(format!("{units:.5} bond units, {cash:.5} cash"))
}

fn call_table() -> Check {
    let rows = [
        (6, 27.552, 27.854, [-74.434, 0.953], [-73.814, 0.948]),
        (13, 27.537, 27.866, [-74.699, 0.956], [-73.857, 0.949]),
        (52, 27.462, 27.872, [-75.477, 0.962], [-73.857, 0.949]),
    ];
    let mut out = Vec::new();
    for (n, bid_ref, ask_ref, sub_ref, sup_ref) in rows {
        let (tree, claim) = call_crr(n, 0.00125).map_err(|e| e.to_string())?;
        let (bid, ask, sup, sub) = prices(&tree, &claim, 0)?;
        let m = cash_mid(&tree, 0);
        let (bid, ask) = (bid * m, ask * m);
        ensure((bid - bid_ref).abs() <= 1e-3 && (ask - ask_ref).abs() <= 1e-3, format!("n={n}: bid {bid}, ask {ask}"))?;
        ensure(sup.iter().any(|p| near(p, &sup_ref, 1e-3)), format!("n={n}: superhedging vertices {sup:?}"))?;
        ensure(sub.iter().any(|p| near(p, &sub_ref, 1e-3)), format!("n={n}: subhedging vertices {sub:?}"))?;
        out.push(format!("n={n} {bid:.3}/{ask:.3}"));
    }
    Ok(out.join(", "))
}

fn exchange_option_vertices() -> Check {
    let (tree, claim) = exchange(&exchange_spec(4, 0.0, 0.0, [0.02, 0.04])).map_err(|e| e.to_string())?;
    let shp = shp_backward(&tree, &claim).map_err(|e| e.to_string())?;
    let root = shp.root(&tree);
    let expected = vec![
        vec![-7.279, 0.583, -0.264],
        vec![-1.936, 0.518, -0.312],
        vec![8.263, 0.392, -0.403],
        vec![9.979, 0.372, -0.419],
        vec![12.359, 0.344, -0.441],
    ];
    ensure(same_points(root.points(), &expected, 1e-3), format!("vertices {:?}", root.points()))?;
    let price = scalar_price(root, 0).map_err(|e| e.to_string())?;
    ensure((price - 6.789).abs() <= 1e-3, format!("price {price}"))?;
    Ok(format!("5 vertices, price {price:.5}"))
}

fn outperformance_prices_and_replays() -> Check {
    let (tree, claim) = outperformance().map_err(|e| e.to_string())?;
    let (bid, ask, sup, _) = prices(&tree, &claim, 0)?;
    let expected = vec![vec![-27.404, 0.514, 0.388], vec![-34.254, 0.567, 0.480]];
    ensure(same_points(&sup, &expected, 1e-3), format!("vertices {sup:?}"))?;
    ensure((ask - 22.624).abs() <= 1e-3 && (bid + 8.633).abs() <= 1e-3, format!("bid {bid}, ask {ask}"))?;
    let shp = shp_backward(&tree, &claim).map_err(|e| e.to_string())?;
    let ctx = StepContext { tree: &tree, claim: &claim, shp: &shp };
    let x0 = sup.iter().find(|p| near(p, &expected[0], 1e-3)).cloned().ok_or("no starting vertex")?;
    let coords: [[usize; 2]; 5] = [[0, 0], [1, 0], [2, 1], [2, 2], [3, 3]];
    let path: Vec<usize> = coords.iter().enumerate().map(|(t, c)| tree.lattice_node(t, c).ok_or("path leaves the lattice")).collect::<Result<_, _>>()?;
    let y = vec![1.0, 0.0, 0.0];
    use Choice::*;
    let scripts: [(&str, Vec<Choice>, f64); 3] = [
        ("max-cash", vec![MaxCash; 5], 2.882),
        ("min-trade", vec![MinTrade, MinTrade, MinTrade, MinTrade, MaxCash], 6.143),
        ("mixed", vec![MinTrade, MinTrade, Index(1), MinTrade, MinTrade], 3.006),
    ];
    let mut out = vec![format!("bid {bid:.4}, ask {ask:.4}")];
    for (name, choices, target) in scripts {
        let state = replay(ctx, &x0, &path, &y, &choices).map_err(|e| format!("{name}: {e}"))?;
        let total = state.total_alpha();
        ensure((total - target).abs() <= 1e-3, format!("{name}: total {total}"))?;
        out.push(format!("{name} {total:.4}"));
    }
    Ok(out.join(", "))
}

fn property_suite() -> Check {
    let a = oracle_agreement(50, 1000)?;
    let (b, worst) = hypograph_agreement(50)?;
    ensure(worst <= 1e-7, format!("scalar price gap {worst:e}"))?;
    let d = weak_duality(50, 50)?;
    let e = probability_invariance(50)?;
    let f = translation_and_antitonicity(50)?;
    Ok(format!("(a) {a}; (b) {b}; (c) max gap {worst:.1e}; (d) {d}; (e) {e}; (f) {f}"))
}

/// Written to the stdout handle directly so the lines survive output capture.
fn line(s: String) {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{s}").expect("stdout writable");
}

#[test]
fn acceptance() {
    let checks: [(&str, fn() -> Check, f64); 8] = [
        ("one-period digital: exact set and price", one_period_digital_exact, 0.1),
        ("two-objective problem: dual vertices and facets", two_objective_duality, f64::INFINITY),
        ("three-objective problem: face counts", three_objective_counts, f64::INFINITY),
        ("digital on 100 steps: set and prices", digital_on_hundred_steps, 30.0),
        ("call price table n=6,13,52", call_table, 300.0),
        ("exchange option: five vertices and price", exchange_option_vertices, 120.0),
        ("outperformance option: set, prices and replays", outperformance_prices_and_replays, f64::INFINITY),
        ("property suite (a)-(f)", property_suite, f64::INFINITY),
    ];
    let mut failed = 0;
    for (name, check, limit) in checks {
        let start = Instant::now();
        let res = check();
        let secs = start.elapsed().as_secs_f64();
        let res = match res {
            Ok(msg) if secs > limit => Err(format!("{msg}; took {secs:.2}s, limit {limit}s")),
            other => other,
        };
        match res {
            Ok(msg) => line(format!("PASS {name} [{secs:.2}s] {msg}")),
            Err(msg) => {
                failed += 1;
                line(format!("FAIL {name} [{secs:.2}s] {msg}"));
            }
        }
    }
    assert_eq!(failed, 0, "{failed} criteria failed");
}
