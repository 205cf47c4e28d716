//! Terminal claims with physical delivery.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vector;
use crate::market::{MarketTree, Quotes};

/// Payoff vectors in physical units, keyed by terminal node id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Claim {
    pub payoffs: BTreeMap<usize, Vector>,
}

impl Claim {
    pub fn zero(tree: &MarketTree) -> Claim {
        Claim::from_fn(tree, |_| vec![0.0; tree.d])
    }

    pub fn from_fn(tree: &MarketTree, mut f: impl FnMut(&Quotes) -> Vector) -> Claim {
        let payoffs = tree
            .terminals()
            .iter()
            .map(|&id| (id, f(&tree.node(id).quotes_or_implied(tree.numeraire))))
            .collect();
        Claim { payoffs }
    }

    pub fn at(&self, node: usize) -> &Vector {
        &self.payoffs[&node]
    }

    pub fn validate(&self, tree: &MarketTree) -> Result<()> {
        let terminals = tree.terminals();
        if self.payoffs.len() != terminals.len() || terminals.iter().any(|id| !self.payoffs.contains_key(id)) {
            return Err(Error::InvalidInput("claim must be defined on exactly the terminal nodes".into()));
        }
        for (id, x) in &self.payoffs {
            if x.len() != tree.d {
                return Err(Error::DimensionMismatch(format!("payoff at node {id} has length {}", x.len())));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("payoff at node {id} is not finite")));
            }
        }
        Ok(())
    }

    pub fn negated(&self) -> Claim {
        Claim { payoffs: self.payoffs.iter().map(|(k, v)| (*k, v.iter().map(|x| -x).collect())).collect() }
    }

    /// Adds the same deterministic vector at every terminal node.
    pub fn shifted(&self, u: &[f64]) -> Claim {
        Claim { payoffs: self.payoffs.iter().map(|(k, v)| (*k, v.iter().zip(u).map(|(a, b)| a + b).collect())).collect() }
    }
}

fn check_risky(tree: &MarketTree, i: usize) -> Result<()> {
    if i >= tree.d || i == tree.numeraire {
        return Err(Error::InvalidInput(format!("asset {i} is not a risky asset")));
    }
    Ok(())
}

/// One unit of asset i whenever its ask is at least `strike`.
pub fn digital_asset_or_nothing(tree: &MarketTree, strike: f64, i: usize) -> Result<Claim> {
    check_risky(tree, i)?;
    Ok(Claim::from_fn(tree, |q| {
        let mut x = vec![0.0; tree.d];
        if q.ask[i] >= strike {
            x[i] = 1.0;
        }
        x
    }))
}

/// Physically settled call: pay `strike` in the numeraire, receive asset i,
/// when the mid price strictly exceeds the strike.
pub fn call_physical(tree: &MarketTree, strike: f64, i: usize) -> Result<Claim> {
    check_risky(tree, i)?;
    let num = tree.numeraire;
    Ok(Claim::from_fn(tree, |q| {
        let mut x = vec![0.0; tree.d];
        if q.mid[i] > strike {
            x[num] = -strike;
            x[i] = 1.0;
        }
        x
    }))
}

/// Receive asset i and deliver asset j when the ask of i is at least the ask of j.
pub fn exchange_option(tree: &MarketTree, i: usize, j: usize) -> Result<Claim> {
    check_risky(tree, i)?;
    check_risky(tree, j)?;
    if i == j {
        return Err(Error::InvalidInput("exchange option needs two distinct assets".into()));
    }
    Ok(Claim::from_fn(tree, |q| {
        let mut x = vec![0.0; tree.d];
        if q.ask[i] >= q.ask[j] {
            x[i] = 1.0;
            x[j] = -1.0;
        }
        x
    }))
}

/// Call on the best performer: if the largest ask reaches `strike`, pay the
/// strike and receive that asset. Ties go to the lower asset index.
pub fn outperformance_option(tree: &MarketTree, strike: f64) -> Result<Claim> {
    let num = tree.numeraire;
    let risky: Vec<usize> = (0..tree.d).filter(|&k| k != num).collect();
    if risky.is_empty() {
        return Err(Error::InvalidInput("outperformance option needs a risky asset".into()));
    }
    Ok(Claim::from_fn(tree, |q| {
        let mut x = vec![0.0; tree.d];
        let mut best = risky[0];
        for &k in &risky[1..] {
            if q.ask[k] > q.ask[best] {
                best = k;
            }
        }
        if q.ask[best] >= strike {
            x[num] = -strike;
            x[best] = 1.0;
        }
        x
    }))
}
