//! JSON inputs shared by the command line and the service: a market given
//! node by node or as a lattice spec, and a claim given as payoffs or as a
//! named contract.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::market::{build, MarketJson, MarketTree, TreeSpec};
use crate::payoffs::{self, Claim};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MarketInput {
    Explicit(MarketJson),
    Spec(TreeSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClaimSpec {
    Zero,
    DigitalAssetOrNothing { strike: f64, asset: usize },
    CallPhysical { strike: f64, asset: usize },
    ExchangeOption { receive: usize, deliver: usize },
    OutperformanceOption { strike: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ClaimInput {
    Payoffs(Claim),
    Named(ClaimSpec),
}

/// Malformed input with the JSON pointer of the offending value.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub pointer: String,
    pub message: String,
}

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "at {}: {}", if self.pointer.is_empty() { "/" } else { &self.pointer }, self.message)
    }
}

impl std::error::Error for ParseError {}

fn pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    out
}

/// Deserialize with a pointer to the first offending value on failure.
pub fn from_value<T: DeserializeOwned>(v: Value) -> std::result::Result<T, ParseError> {
    serde_path_to_error::deserialize(v).map_err(|e| ParseError { pointer: pointer(e.path()), message: e.inner().to_string() })
}

pub fn from_str<T: DeserializeOwned>(s: &str) -> std::result::Result<T, ParseError> {
    let mut de = serde_json::Deserializer::from_str(s);
    let v = serde_path_to_error::deserialize(&mut de).map_err(|e| ParseError { pointer: pointer(e.path()), message: e.inner().to_string() })?;
    de.end().map_err(|e| ParseError { pointer: String::new(), message: e.to_string() })?;
    Ok(v)
}

pub fn parse_market(v: Value) -> std::result::Result<MarketInput, ParseError> {
    if v.get("nodes").is_some() {
        from_value(v).map(MarketInput::Explicit)
    } else {
        from_value(v).map(MarketInput::Spec)
    }
}

pub fn parse_claim(v: Value) -> std::result::Result<ClaimInput, ParseError> {
    if v.get("payoffs").is_some() {
        from_value(v).map(ClaimInput::Payoffs)
    } else {
        from_value(v).map(ClaimInput::Named)
    }
}

impl MarketInput {
    pub fn tree(&self) -> Result<MarketTree> {
        match self {
            MarketInput::Explicit(j) => MarketTree::from_json(j),
            MarketInput::Spec(s) => build(s),
        }
    }
}

impl ClaimInput {
    pub fn claim(&self, tree: &MarketTree) -> Result<Claim> {
        let c = match self {
            ClaimInput::Payoffs(c) => c.clone(),
            ClaimInput::Named(ClaimSpec::Zero) => Claim::zero(tree),
            ClaimInput::Named(ClaimSpec::DigitalAssetOrNothing { strike, asset }) => payoffs::digital_asset_or_nothing(tree, *strike, *asset)?,
            ClaimInput::Named(ClaimSpec::CallPhysical { strike, asset }) => payoffs::call_physical(tree, *strike, *asset)?,
            ClaimInput::Named(ClaimSpec::ExchangeOption { receive, deliver }) => payoffs::exchange_option(tree, *receive, *deliver)?,
            ClaimInput::Named(ClaimSpec::OutperformanceOption { strike }) => payoffs::outperformance_option(tree, *strike)?,
        };
        c.validate(tree)?;
        Ok(c)
    }
}

impl From<ParseError> for Error {
    fn from(e: ParseError) -> Error {
        Error::InvalidInput(e.to_string())
    }
}
