//! Federated hyperdimensional learning over a wireless edge network.
//!
//! The crate has two halves that meet in the convergence model:
//!
//! - a learning simulator: hypervector encoding and associative-memory
//!   training ([`hdc`]), zCDP noise calibration ([`privacy`]), dataset
//!   ingestion and client partitioning ([`datasets`]) and the round-based
//!   protocol itself ([`federation`]);
//! - an energy optimizer: the transmission/computation physics
//!   ([`system_model`]), the dimension-to-rounds curve ([`convergence`]),
//!   the feasibility initializer ([`feasibility`]) and the alternating
//!   solver ([`optimizer`]).

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convergence;
pub mod datasets;
pub mod error;
pub mod feasibility;
pub mod federation;
pub mod hdc;
pub mod optimizer;
pub mod privacy;
pub mod system_model;

pub use error::{Error, Result};
