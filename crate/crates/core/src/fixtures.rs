//! Ready-made markets and claims used by tests, benchmarks and the CLI.

use crate::error::Result;
use crate::market::{build, BuilderKind, Compounding, MarketJson, MarketTree, NodeJson, ParentField, TreeSpec};
use crate::payoffs::{self, Claim};

fn two_asset_pi(bid: f64, ask: f64) -> Vec<Vec<f64>> {
    vec![vec![1.0, ask], vec![1.0 / bid, 1.0]]
}

/// One period, cash and a stock quoted 18/25 today and 20/26 or 16/22
/// tomorrow, with a digital paying one share if the ask reaches 24.
pub fn one_period_digital() -> Result<(MarketTree, Claim)> {
    let node = |id, t, parent: Option<usize>, prob, (b, a)| NodeJson {
        id,
        t,
        parent: parent.map(ParentField::One),
        prob,
        bidask: two_asset_pi(b, a),
        branch_probs: None,
        quotes: None,
        coords: None,
    };
    let tree = MarketTree::from_json(&MarketJson {
        d: 2,
        horizon: 1,
        numeraire: 0,
        nodes: vec![
            node(0, 0, None, 1.0, (18.0, 25.0)),
            node(1, 1, Some(0), 0.5, (20.0, 26.0)),
            node(2, 1, Some(0), 0.5, (16.0, 22.0)),
        ],
    })?;
    let claim = payoffs::digital_asset_or_nothing(&tree, 24.0, 1)?;
    Ok((tree, claim))
}

pub fn digital_crr_spec(n: usize) -> TreeSpec {
    TreeSpec {
        kind: BuilderKind::Crr,
        s0: vec![18.0],
        sigma: vec![0.2],
        rho: None,
        r: 0.03,
        compounding: Compounding::Periodic,
        lambda: vec![0.04],
        lambda0: 0.0,
        n,
        maturity: 1.0,
        branch_weights: None,
    }
}

/// Bond and stock binomial lattice with a physically settled digital, strike 19.
pub fn digital_crr(n: usize) -> Result<(MarketTree, Claim)> {
    let tree = build(&digital_crr_spec(n))?;
    let claim = payoffs::digital_asset_or_nothing(&tree, 19.0, 1)?;
    Ok((tree, claim))
}

pub fn call_crr_spec(n: usize, lambda: f64) -> TreeSpec {
    TreeSpec {
        kind: BuilderKind::Crr,
        s0: vec![100.0],
        sigma: vec![0.2],
        rho: None,
        r: 0.1,
        compounding: Compounding::Effective,
        lambda: vec![lambda],
        lambda0: 0.0,
        n,
        maturity: 1.0,
        branch_weights: None,
    }
}

/// Physically settled call, strike 80, on a binomial lattice with 10%
/// effective rate.
pub fn call_crr(n: usize, lambda: f64) -> Result<(MarketTree, Claim)> {
    let tree = build(&call_crr_spec(n, lambda))?;
    let claim = payoffs::call_physical(&tree, 80.0, 1)?;
    Ok((tree, claim))
}

pub fn exchange_spec(n: usize, r: f64, lambda0: f64, lambda: [f64; 2]) -> TreeSpec {
    TreeSpec {
        kind: BuilderKind::Correlated,
        s0: vec![45.0, 50.0],
        sigma: vec![0.15, 0.2],
        rho: Some(vec![vec![1.0, 0.2], vec![0.2, 1.0]]),
        r,
        compounding: Compounding::Periodic,
        lambda: lambda.to_vec(),
        lambda0,
        n,
        maturity: 1.0,
        branch_weights: None,
    }
}

/// Exchange option (receive asset 1, deliver asset 2) on a correlated
/// two-stock lattice.
pub fn exchange(spec: &TreeSpec) -> Result<(MarketTree, Claim)> {
    let tree = build(spec)?;
    let claim = payoffs::exchange_option(&tree, 1, 2)?;
    Ok((tree, claim))
}

pub fn outperformance_spec() -> TreeSpec {
    TreeSpec {
        kind: BuilderKind::Correlated,
        s0: vec![50.0, 45.0],
        sigma: vec![0.15, 0.2],
        rho: Some(vec![vec![1.0, 0.2], vec![0.2, 1.0]]),
        r: 0.0,
        compounding: Compounding::Periodic,
        lambda: vec![0.2, 0.1],
        lambda0: 0.0,
        n: 4,
        maturity: 1.0,
        branch_weights: None,
    }
}

/// Outperformance call, strike 47, four periods, cash at zero rate.
pub fn outperformance() -> Result<(MarketTree, Claim)> {
    let tree = build(&outperformance_spec())?;
    let claim = payoffs::outperformance_option(&tree, 47.0)?;
    Ok((tree, claim))
}
