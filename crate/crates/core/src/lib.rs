//! Micro-to-macro aggregation of firm-level technology under heavy-tailed
//! firm size distributions.

pub mod aggregation;
pub mod decomposition;
pub mod distribution;
pub mod error;
pub mod estimation;
pub mod market_structure;
pub mod oracle;
pub mod quadrature;
pub mod rng;
pub mod simulation;
pub mod verify;

pub use error::{Error, Result};
