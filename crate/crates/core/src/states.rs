//! Concrete initial states used by tests and the command-line presets.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{OperatorMatrix, SpaceDescriptor, StateVector, LOWER, UPPER};
use crate::master::DensityMatrix;
use crate::math;

/// `|n⟩ ⊗ (c₊ e₊ + c₋ e₋)`, normalized.
pub fn fock_state(space: SpaceDescriptor, n: usize, atom: [Complex64; 2]) -> Result<StateVector> {
    if n > space.n_max() {
        return Err(Error::NotDensity(alloc::format!("Fock level {n} exceeds the cutoff {}", space.n_max())));
    }
    let mut v = StateVector::zeros(space);
    v.amplitudes_mut()[space.index(n, UPPER)] = atom[0];
    v.amplitudes_mut()[space.index(n, LOWER)] = atom[1];
    normalize(v)
}

/// Coherent field `|α⟩` (renormalized on the truncated ladder) times the
/// atomic vector `c₊ e₊ + c₋ e₋`.
pub fn coherent_state(space: SpaceDescriptor, alpha: Complex64, atom: [Complex64; 2]) -> Result<StateVector> {
    let mut field = Vec::with_capacity(space.n_max() + 1);
    let mut c = Complex64::new(math::exp(-0.5 * alpha.norm_sqr()), 0.0);
    field.push(c);
    for n in 1..=space.n_max() {
        c = c * alpha / math::sqrt(n as f64);
        field.push(c);
    }
    let mut v = StateVector::zeros(space);
    for (n, f) in field.iter().enumerate() {
        v.amplitudes_mut()[space.index(n, UPPER)] = f * atom[0];
        v.amplitudes_mut()[space.index(n, LOWER)] = f * atom[1];
    }
    normalize(v)
}

fn normalize(v: StateVector) -> Result<StateVector> {
    let norm = v.norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::NotDensity("state vector has zero norm".into()));
    }
    Ok(v.normalized())
}

/// Field vacuum with atomic populations `p₊` (upper) and `1 − p₊` (lower).
pub fn vacuum_mixed(space: SpaceDescriptor, p_upper: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&p_upper) {
        return Err(Error::NotDensity(alloc::format!("upper population {p_upper} outside [0, 1]")));
    }
    let mut rho = OperatorMatrix::zeros(space);
    rho[(space.index(0, UPPER), space.index(0, UPPER))] = Complex64::new(p_upper, 0.0);
    rho[(space.index(0, LOWER), space.index(0, LOWER))] = Complex64::new(1.0 - p_upper, 0.0);
    DensityMatrix::new(rho)
}

/// Vacuum field with the atom in its lower level.
pub fn vacuum_ground(space: SpaceDescriptor) -> DensityMatrix {
    vacuum_mixed(space, 0.0).expect("valid populations")
}

/// Undriven stationary state `|0⟩⟨0| ⊗ diag((1+d)/2, (1−d)/2)`.
pub fn vacuum_atom_steady(space: SpaceDescriptor, d: f64) -> Result<DensityMatrix> {
    vacuum_mixed(space, 0.5 * (1.0 + d))
}

/// `|n⟩⟨n|` with the atom in its lower level.
pub fn fock_ground(space: SpaceDescriptor, n: usize) -> Result<DensityMatrix> {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    DensityMatrix::from_pure(&fock_state(space, n, [zero, one])?)
}

/// Mixture `Σ wᵢ |ψᵢ⟩⟨ψᵢ|` of normalized vectors with weights summing to one.
pub fn mixture(components: &[(f64, StateVector)]) -> Result<DensityMatrix> {
    let space = components.first().ok_or(Error::EmptyEnsemble)?.1.space();
    let mut rho = OperatorMatrix::zeros(space);
    for (w, psi) in components {
        rho.add_scaled(Complex64::new(*w, 0.0), &OperatorMatrix::projector(psi));
    }
    DensityMatrix::new(rho)
}
