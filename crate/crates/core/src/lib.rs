//! Deterministic simulator for the relativistic Vlasov-Maxwell system in one space
//! and two momentum dimensions on the unit interval, confined by an external
//! magnetic potential that blows up at the walls.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod characteristics;
pub mod config;
pub mod descriptors;
pub mod diagnostics;
pub mod driver;
pub mod error;
pub mod field;
pub mod grid;
pub mod io;
pub mod potential;
pub mod quadrature;
pub mod vlasov;

pub use config::{validate_config, SimConfig, ValidatedConfig};
pub use driver::{run, run_picard, run_time_marching, SimulationRun};
pub use error::{Error, Result};
