//! Numerical core for the mean-field laser master equation on the truncated
//! space `ℓ²(Z₊) ⊗ C²`.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, configuration and
//! the command-line front end live in the `mfl` crate.

#![no_std]
// `!(x <= tol)` is used on purpose so that NaN fails the test.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod hilbert;
pub mod lindblad;
pub mod lorenz;
pub mod master;
mod math;
pub mod ode;
pub mod rng;
pub mod sse;
pub mod states;
pub mod verify;

pub use error::{Error, Result};
pub use num_complex::Complex64;
