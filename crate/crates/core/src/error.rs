use alloc::string::String;

use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("Fock cutoff n_max must be at least 1, got {0}")]
    InvalidCutoff(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (max |A - A^dagger| entry = {0:e})")]
    NotHermitian(f64),

    #[error("invalid laser parameters: {0}")]
    InvalidParams(&'static str),

    #[error("not a density matrix: {0}")]
    NotDensity(String),

    #[error("time step must be positive and finite, got {0}")]
    InvalidStep(f64),

    #[error("time horizon must be nonnegative and finite, got {0}")]
    InvalidHorizon(f64),

    #[error("truncation leakage {leakage:e} exceeds bound {bound:e} at t = {t}")]
    LeakageExceeded { t: f64, leakage: f64, bound: f64 },

    #[error("non-finite state in trajectory {trajectory} at step {step}")]
    NonFinite { trajectory: usize, step: u64 },

    #[error("ensemble collapse at step {step}: mean squared norm {mean_norm_sqr}")]
    EnsembleCollapse { step: u64, mean_norm_sqr: f64 },

    #[error("ensemble must contain at least one trajectory")]
    EmptyEnsemble,

    #[error("run has {0} grid points, at least 3 are required")]
    RunTooShort(usize),

    #[error("time grids do not match: {0}")]
    GridMismatch(String),
}
