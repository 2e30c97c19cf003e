//! Truncated Hilbert space `ℓ²(Z₊) ⊗ C²` and the dense linear algebra used by
//! every other module.
//!
//! Basis convention: the vector `e_n ⊗ e_q` lives at index `2n + q`, with
//! `q = 0` the upper atomic level `e₊` and `q = 1` the lower level `e₋`. The
//! atomic index runs fastest. The Fock ladder is cut hard at `n_max`, so the
//! truncated creation operator annihilates the top level.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::math;

/// Entrywise tolerance used to accept a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Atomic index of the upper level `e₊` (`σ³ e₊ = e₊`).
pub const UPPER: usize = 0;
/// Atomic index of the lower level `e₋`.
pub const LOWER: usize = 1;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpaceDescriptor {
    n_max: usize,
}

impl SpaceDescriptor {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::InvalidCutoff(n_max));
        }
        Ok(Self { n_max })
    }

    /// Highest retained Fock level.
    pub fn n_max(self) -> usize {
        self.n_max
    }

    pub fn dim(self) -> usize {
        2 * (self.n_max + 1)
    }

    /// Index of `e_n ⊗ e_q`.
    #[inline]
    pub fn index(self, n: usize, q: usize) -> usize {
        debug_assert!(n <= self.n_max && q < 2);
        2 * n + q
    }

    /// Inverse of [`SpaceDescriptor::index`]: `(n, q)`.
    #[inline]
    pub fn level(self, idx: usize) -> (usize, usize) {
        (idx / 2, idx % 2)
    }

    fn check(self, other: SpaceDescriptor) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            })
        }
    }
}

/// Dense complex matrix on the truncated space, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    space: SpaceDescriptor,
    data: Vec<Complex64>,
}

impl OperatorMatrix {
    pub fn zeros(space: SpaceDescriptor) -> Self {
        let dim = space.dim();
        Self {
            space,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(space: SpaceDescriptor) -> Self {
        let mut m = Self::zeros(space);
        for i in 0..space.dim() {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(space: SpaceDescriptor, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let dim = space.dim();
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { space, data }
    }

    /// Builds a matrix from row-major entries.
    pub fn from_row_major(space: SpaceDescriptor, data: Vec<Complex64>) -> Result<Self> {
        let dim = space.dim();
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: data.len(),
            });
        }
        Ok(Self { space, data })
    }

    /// Real diagonal matrix.
    pub fn diagonal(space: SpaceDescriptor, mut f: impl FnMut(usize) -> f64) -> Self {
        let mut m = Self::zeros(space);
        for i in 0..space.dim() {
            m[(i, i)] = Complex64::new(f(i), 0.0);
        }
        m
    }

    /// `|x⟩⟨x|`.
    pub fn projector(x: &StateVector) -> Self {
        let amps = x.amplitudes();
        Self::from_fn(x.space(), |i, j| amps[i] * amps[j].conj())
    }

    pub fn space(&self) -> SpaceDescriptor {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn adjoint(&self) -> Self {
        let dim = self.dim();
        Self::from_fn(self.space, |i, j| self.data[j * dim + i].conj())
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            space: self.space,
            data: self.data.iter().map(|&z| z * c).collect(),
        }
    }

    /// `self += c · other`.
    pub fn add_scaled(&mut self, c: Complex64, other: &OperatorMatrix) {
        assert_eq!(self.space, other.space, "operator spaces differ");
        for (y, &x) in self.data.iter_mut().zip(&other.data) {
            *y += c * x;
        }
    }

    pub fn trace(&self) -> Complex64 {
        let dim = self.dim();
        (0..dim).map(|i| self.data[i * dim + i]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        math::sqrt(self.data.iter().map(|z| z.norm_sqr()).sum())
    }

    /// Largest entry of `|A − A†|`.
    pub fn hermiticity_error(&self) -> f64 {
        let dim = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..dim {
            for j in i..dim {
                let d = self.data[i * dim + j] - self.data[j * dim + i].conj();
                worst = worst.max(d.norm());
            }
        }
        worst
    }

    /// Replaces `A` by `½(A + A†)`.
    pub fn symmetrize(&mut self) {
        let dim = self.dim();
        for i in 0..dim {
            let d = self.data[i * dim + i];
            self.data[i * dim + i] = Complex64::new(d.re, 0.0);
            for j in (i + 1)..dim {
                let upper = self.data[i * dim + j];
                let lower = self.data[j * dim + i];
                let avg = (upper + lower.conj()) * 0.5;
                self.data[i * dim + j] = avg;
                self.data[j * dim + i] = avg.conj();
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Real parts of the diagonal.
    pub fn diagonal_real(&self) -> Vec<f64> {
        let dim = self.dim();
        (0..dim).map(|i| self.data[i * dim + i].re).collect()
    }

    pub fn matmul(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        self.space.check(other.space)?;
        let dim = self.dim();
        let mut out = OperatorMatrix::zeros(self.space);
        for i in 0..dim {
            let row = &mut out.data[i * dim..(i + 1) * dim];
            for k in 0..dim {
                let aik = self.data[i * dim + k];
                if aik == ZERO {
                    continue;
                }
                let brow = &other.data[k * dim..(k + 1) * dim];
                for (o, &b) in row.iter_mut().zip(brow) {
                    *o += aik * b;
                }
            }
        }
        Ok(out)
    }

    fn zip_with(&self, other: &OperatorMatrix, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        assert_eq!(self.space, other.space, "operator spaces differ");
        Self {
            space: self.space,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// Zeroes entries below `1e-30 · max_abs`. Such entries drive the
    /// Householder and QR sweeps into underflow and NaN; dropping them moves
    /// eigenvalues by at most `dim · 1e-30 · max_abs`.
    fn flush_tiny(mut self) -> Self {
        let floor = self.max_abs() * 1e-30;
        for z in &mut self.data {
            if z.norm() < floor {
                *z = ZERO;
            }
        }
        self
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<Complex64> {
        let dim = self.dim();
        DMatrix::from_row_slice(dim, dim, &self.data)
    }
}

impl Index<(usize, usize)> for OperatorMatrix {
    type Output = Complex64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.dim() + j]
    }
}

impl IndexMut<(usize, usize)> for OperatorMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        let dim = self.dim();
        &mut self.data[i * dim + j]
    }
}

/// Panics if the operands live on different spaces.
impl Mul for &OperatorMatrix {
    type Output = OperatorMatrix;

    fn mul(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        self.matmul(rhs).expect("operator spaces differ")
    }
}

impl Add for &OperatorMatrix {
    type Output = OperatorMatrix;

    fn add(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &OperatorMatrix {
    type Output = OperatorMatrix;

    fn sub(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        self.zip_with(rhs, |a, b| a - b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    space: SpaceDescriptor,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn zeros(space: SpaceDescriptor) -> Self {
        Self {
            space,
            amps: vec![ZERO; space.dim()],
        }
    }

    /// Canonical basis vector at `idx`.
    pub fn basis(space: SpaceDescriptor, idx: usize) -> Self {
        let mut v = Self::zeros(space);
        v.amps[idx] = ONE;
        v
    }

    pub fn from_amplitudes(space: SpaceDescriptor, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: amps.len(),
            });
        }
        Ok(Self { space, amps })
    }

    pub fn space(&self) -> SpaceDescriptor {
        self.space
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        math::sqrt(self.norm_sqr())
    }

    /// `⟨self, other⟩`, antilinear in the first slot.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            space: self.space,
            amps: self.amps.iter().map(|&z| z * c).collect(),
        }
    }

    pub fn normalized(&self) -> Self {
        self.scaled(Complex64::new(1.0 / self.norm(), 0.0))
    }

    pub fn is_finite(&self) -> bool {
        self.amps.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Elementary operators of the truncated space.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub a: OperatorMatrix,
    pub a_dag: OperatorMatrix,
    /// Number operator, stored as the exact diagonal `n`; equals `a† a` up to
    /// rounding of `√n · √n`.
    pub n_op: OperatorMatrix,
    pub sigma_plus: OperatorMatrix,
    pub sigma_minus: OperatorMatrix,
    pub sigma_3: OperatorMatrix,
    pub identity: OperatorMatrix,
}

pub fn build_operators(space: SpaceDescriptor) -> OperatorSet {
    let mut a = OperatorMatrix::zeros(space);
    let mut sigma_plus = OperatorMatrix::zeros(space);
    let mut sigma_minus = OperatorMatrix::zeros(space);
    for n in 0..=space.n_max() {
        for q in 0..2 {
            if n >= 1 {
                a[(space.index(n - 1, q), space.index(n, q))] = Complex64::new(math::sqrt(n as f64), 0.0);
            }
        }
        sigma_plus[(space.index(n, UPPER), space.index(n, LOWER))] = ONE;
        sigma_minus[(space.index(n, LOWER), space.index(n, UPPER))] = ONE;
    }
    let a_dag = a.adjoint();
    let n_op = OperatorMatrix::diagonal(space, |i| space.level(i).0 as f64);
    let sigma_3 = OperatorMatrix::diagonal(space, |i| if space.level(i).1 == UPPER { 1.0 } else { -1.0 });
    OperatorSet {
        a,
        a_dag,
        n_op,
        sigma_plus,
        sigma_minus,
        sigma_3,
        identity: OperatorMatrix::identity(space),
    }
}

pub fn adjoint(a: &OperatorMatrix) -> OperatorMatrix {
    a.adjoint()
}

/// `AB − BA`.
pub fn commutator(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<OperatorMatrix> {
    let ab = a.matmul(b)?;
    let ba = b.matmul(a)?;
    Ok(&ab - &ba)
}

pub fn apply(a: &OperatorMatrix, x: &StateVector) -> Result<StateVector> {
    a.space.check(x.space)?;
    let dim = a.dim();
    let amps = (0..dim)
        .map(|i| a.data[i * dim..(i + 1) * dim].iter().zip(&x.amps).map(|(&m, &v)| m * v).sum())
        .collect();
    Ok(StateVector { space: a.space, amps })
}

pub fn trace(a: &OperatorMatrix) -> Complex64 {
    a.trace()
}

/// `tr(Aρ)` without forming the product.
pub fn expectation(a: &OperatorMatrix, rho: &OperatorMatrix) -> Result<Complex64> {
    a.space.check(rho.space)?;
    let dim = a.dim();
    let mut acc = ZERO;
    for i in 0..dim {
        for k in 0..dim {
            acc += a.data[i * dim + k] * rho.data[k * dim + i];
        }
    }
    Ok(acc)
}

pub fn frobenius_distance(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<f64> {
    a.space.check(b.space)?;
    Ok((a - b).frobenius_norm())
}

/// Half the sum of singular values of `ρ − σ`.
pub fn trace_distance(rho: &OperatorMatrix, sigma: &OperatorMatrix) -> Result<f64> {
    rho.space.check(sigma.space)?;
    let diff = rho - sigma;
    let total: f64 = if diff.hermiticity_error() <= HERMITIAN_TOL {
        hermitian_eigenvalues(&diff)?.iter().map(|l| math::abs(*l)).sum()
    } else {
        diff.flush_tiny().to_nalgebra().singular_values().iter().sum()
    };
    Ok(0.5 * total)
}

/// Spectral decomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<StateVector>,
}

impl HermitianEigen {
    /// `Σ λ_i |v_i⟩⟨v_i|`.
    pub fn reconstruct(&self) -> OperatorMatrix {
        let space = self.vectors[0].space();
        let mut out = OperatorMatrix::zeros(space);
        for (&l, v) in self.values.iter().zip(&self.vectors) {
            out.add_scaled(Complex64::new(l, 0.0), &OperatorMatrix::projector(v));
        }
        out
    }
}

fn hermitian_input(a: &OperatorMatrix) -> Result<DMatrix<Complex64>> {
    let err = a.hermiticity_error();
    if !(err <= HERMITIAN_TOL) {
        return Err(Error::NotHermitian(err));
    }
    let mut sym = a.clone();
    sym.symmetrize();
    Ok(sym.flush_tiny().to_nalgebra())
}

pub fn hermitian_eigen(a: &OperatorMatrix) -> Result<HermitianEigen> {
    let m = hermitian_input(a)?;
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..a.dim()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| StateVector {
            space: a.space,
            amps: eig.eigenvectors.column(i).iter().copied().collect(),
        })
        .collect();
    Ok(HermitianEigen { values, vectors })
}

/// Eigenvalues only, ascending. Cheaper than [`hermitian_eigen`].
pub fn hermitian_eigenvalues(a: &OperatorMatrix) -> Result<Vec<f64>> {
    let m = hermitian_input(a)?;
    let mut values: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Coordinate-list view of a dense operator with its exact zeros dropped.
///
/// The laser operators have at most two nonzeros per row, so the products
/// below cost `O(nnz · dim)` instead of `O(dim³)`.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    dim: usize,
    entries: Vec<(usize, usize, Complex64)>,
}

impl SparseOperator {
    pub fn from_dense(m: &OperatorMatrix) -> Self {
        let dim = m.dim();
        let entries = (0..dim)
            .flat_map(|i| (0..dim).map(move |j| (i, j)))
            .filter_map(|(i, j)| {
                let v = m[(i, j)];
                (v != ZERO).then_some((i, j, v))
            })
            .collect();
        Self { dim, entries }
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// `out += c · S x`.
    #[inline]
    pub fn apply_add(&self, c: Complex64, x: &[Complex64], out: &mut [Complex64]) {
        for &(i, k, v) in &self.entries {
            out[i] += c * v * x[k];
        }
    }

    /// `out += c · S ρ` for row-major `ρ`.
    pub fn left_mul_add(&self, c: Complex64, rho: &[Complex64], out: &mut [Complex64]) {
        let dim = self.dim;
        for &(i, k, v) in &self.entries {
            let cv = c * v;
            let src = &rho[k * dim..(k + 1) * dim];
            let dst = &mut out[i * dim..(i + 1) * dim];
            for (o, &r) in dst.iter_mut().zip(src) {
                *o += cv * r;
            }
        }
    }

    /// `out += ρ (c · S)†` for row-major `ρ`.
    pub fn right_mul_adjoint_add(&self, c: Complex64, rho: &[Complex64], out: &mut [Complex64]) {
        let dim = self.dim;
        for &(j, k, v) in &self.entries {
            let cv = (c * v).conj();
            for i in 0..dim {
                out[i * dim + j] += rho[i * dim + k] * cv;
            }
        }
    }

    /// `tr(Sρ)` for row-major `ρ`.
    pub fn trace_product(&self, rho: &[Complex64]) -> Complex64 {
        let dim = self.dim;
        self.entries.iter().map(|&(i, k, v)| v * rho[k * dim + i]).sum()
    }

    /// `⟨x, S x⟩`.
    pub fn quadratic_form(&self, x: &[Complex64]) -> Complex64 {
        self.entries.iter().map(|&(i, k, v)| x[i].conj() * v * x[k]).sum()
    }

    /// `out += S ρ S†` for row-major `ρ`.
    pub fn sandwich_add(&self, rho: &[Complex64], out: &mut [Complex64]) {
        let dim = self.dim;
        for &(i, k, u) in &self.entries {
            for &(j, l, v) in &self.entries {
                out[i * dim + j] += u * rho[k * dim + l] * v.conj();
            }
        }
    }
}
