//! Set-valued superhedging for finite-tree markets with proportional
//! transaction costs.

pub mod error;
pub mod fixtures;
pub mod geometry;
pub mod input;
pub mod linprog;
pub mod market;
pub mod payoffs;
pub mod scalarprice;
pub mod shp;
pub mod strategy;
pub mod vop;

pub use error::{Error, Result};
