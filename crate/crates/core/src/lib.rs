//! Metastability characterization of Schmitt-Trigger circuits.
//!
//! The crate bundles a small modified-nodal-analysis engine ([`sim`]), the
//! studied transistor topologies ([`circuits`]), an analytic reference
//! trigger with closed-form equilibria ([`marino`]) and the methods that
//! locate and characterize the metastable branch ([`characterization`]).

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod characterization;
pub mod circuits;
pub mod device;
pub mod error;
pub mod marino;
pub mod netlist;
pub mod params;
pub mod report;
pub mod sim;

pub use error::{Error, Result};
