//! Batch front end for the mean-field laser solvers: configuration, initial
//! states, scenario dispatch, the `verify-all` suite and file formats.

// `!(x <= tol)` is used on purpose so that NaN fails the test.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod exec;
pub mod output;
pub mod run;
pub mod states;
pub mod suite;

pub use config::{Overrides, Scenario, SimConfig};
pub use run::{run, ExecMode, Outcome, RunError};
