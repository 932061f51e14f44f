//! Finite-volume percolation laboratory: exact enumeration and Monte Carlo
//! checks of sharp-threshold inequalities on quasi-transitive graphs.

pub mod acceptance;
pub mod analysis;
pub mod cli;
pub mod config;
pub mod diffineq;
pub mod error;
pub mod exact;
pub mod graph;
pub mod longrange;
pub mod order_parameter;
pub mod percolation;
pub mod report;
pub mod rng;
pub mod stats;
pub mod union_find;
pub mod volume;

pub use error::{Error, Result};
