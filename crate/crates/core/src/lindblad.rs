//! GKSL pieces of the laser: Hamiltonian, drift operator `G`, the three
//! jump operators, and the linear and mean-field generators acting on
//! density matrices.
//!
//! The generator is always evaluated in the form `Gρ + ρG† + Σ LρL†` with
//!
//! ```text
//! H  = (ω/2)(2a†a + σ³) + i(α a† − ᾱ a) + i(β̄ σ⁻ − β σ⁺)
//! G  = −iH − ½ Σ L†L
//! L₁ = √(2κ) a,  L₂ = √(γ(1−d)) σ⁻,  L₃ = √(γ(1+d)) σ⁺
//! ```
//!
//! Drives `α, β` carry the coupling `g` already; the mean-field generator
//! sets `α = g tr(σ⁻ρ)` and `β = g tr(aρ)`.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{build_operators, OperatorMatrix, OperatorSet, SpaceDescriptor, SparseOperator, StateVector, HERMITIAN_TOL};
use crate::math;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Trace tolerance accepted by the mean-field generator.
pub const TRACE_TOL: f64 = 1e-8;

/// Physical constants of the laser. All rates in inverse time units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaserParams {
    omega: f64,
    g: f64,
    kappa: f64,
    kappa_plus: f64,
    kappa_minus: f64,
}

impl LaserParams {
    pub fn new(omega: f64, g: f64, kappa: f64, kappa_plus: f64, kappa_minus: f64) -> Result<Self> {
        if !omega.is_finite() {
            return Err(Error::InvalidParams("omega must be finite"));
        }
        if !(g.is_finite() && g != 0.0) {
            return Err(Error::InvalidParams("g must be a nonzero real number"));
        }
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::InvalidParams("kappa must be positive"));
        }
        if !(kappa_plus.is_finite() && kappa_plus > 0.0) {
            return Err(Error::InvalidParams("kappa_plus must be positive"));
        }
        if !(kappa_minus.is_finite() && kappa_minus > 0.0) {
            return Err(Error::InvalidParams("kappa_minus must be positive"));
        }
        let p = Self {
            omega,
            g,
            kappa,
            kappa_plus,
            kappa_minus,
        };
        if !(p.gamma() > 0.0 && p.d() > -1.0 && p.d() < 1.0) {
            return Err(Error::InvalidParams("d must lie in (−1,1)"));
        }
        Ok(p)
    }

    /// Parametrization by the mean atomic rate `γ` and the pump asymmetry `d`.
    pub fn from_gamma_d(omega: f64, g: f64, kappa: f64, gamma: f64, d: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidParams("gamma must be positive"));
        }
        if !(d.is_finite() && d > -1.0 && d < 1.0) {
            return Err(Error::InvalidParams("d must lie in (−1,1)"));
        }
        Self::new(omega, g, kappa, gamma * (1.0 + d), gamma * (1.0 - d))
    }

    /// Default desk-scale set: ω = 0.5, g = 0.8, κ = 1, γ = 2, d = −0.2.
    pub fn desk() -> Self {
        Self::from_gamma_d(0.5, 0.8, 1.0, 2.0, -0.2).expect("desk parameters are valid")
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn kappa_plus(&self) -> f64 {
        self.kappa_plus
    }

    pub fn kappa_minus(&self) -> f64 {
        self.kappa_minus
    }

    pub fn gamma(&self) -> f64 {
        0.5 * (self.kappa_plus + self.kappa_minus)
    }

    pub fn d(&self) -> f64 {
        (self.kappa_plus - self.kappa_minus) / (self.kappa_plus + self.kappa_minus)
    }
}

/// Time-dependent drives `(α(t), β(t))` of the linear master equation.
pub trait MeanFieldDrive {
    fn drives(&self, t: f64) -> (Complex64, Complex64);
}

impl<D: MeanFieldDrive + ?Sized> MeanFieldDrive for &D {
    fn drives(&self, t: f64) -> (Complex64, Complex64) {
        (**self).drives(t)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroDrive;

impl MeanFieldDrive for ZeroDrive {
    fn drives(&self, _t: f64) -> (Complex64, Complex64) {
        (ZERO, ZERO)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantDrive {
    pub alpha: Complex64,
    pub beta: Complex64,
}

impl MeanFieldDrive for ConstantDrive {
    fn drives(&self, _t: f64) -> (Complex64, Complex64) {
        (self.alpha, self.beta)
    }
}

/// Drive given by a closure.
#[derive(Debug, Clone, Copy)]
pub struct FnDrive<F>(pub F);

impl<F: Fn(f64) -> (Complex64, Complex64)> MeanFieldDrive for FnDrive<F> {
    fn drives(&self, t: f64) -> (Complex64, Complex64) {
        (self.0)(t)
    }
}

/// Drive sampled on a grid together with its time derivative, evaluated by
/// piecewise cubic Hermite interpolation (local error `O(h⁴)`).
#[derive(Debug, Clone)]
pub struct SampledDrive {
    times: Vec<f64>,
    values: Vec<[Complex64; 2]>,
    slopes: Vec<[Complex64; 2]>,
}

impl SampledDrive {
    pub fn new(times: Vec<f64>, values: Vec<[Complex64; 2]>, slopes: Vec<[Complex64; 2]>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::GridMismatch("a sampled drive needs at least two grid points".into()));
        }
        if values.len() != times.len() || slopes.len() != times.len() {
            return Err(Error::GridMismatch("drive samples and grid differ in length".into()));
        }
        if !times.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::GridMismatch("drive grid must be strictly increasing".into()));
        }
        Ok(Self { times, values, slopes })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }
}

impl MeanFieldDrive for SampledDrive {
    fn drives(&self, t: f64) -> (Complex64, Complex64) {
        let last = self.times.len() - 2;
        let k = self.times.partition_point(|&s| s <= t).saturating_sub(1).min(last);
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let eval = |c: usize| self.values[k][c] * h00 + self.slopes[k][c] * (h10 * h) + self.values[k + 1][c] * h01 + self.slopes[k + 1][c] * (h11 * h);
        (eval(0), eval(1))
    }
}

/// Drive-independent part of the laser generator plus fast kernels.
#[derive(Debug, Clone)]
pub struct Generator {
    params: LaserParams,
    space: SpaceDescriptor,
    ops: OperatorSet,
    lindblad: [OperatorMatrix; 3],
    h0: OperatorMatrix,
    /// `½ Σ L†L` (diagonal for the laser).
    damping: OperatorMatrix,
    g0_diag: Vec<Complex64>,
    a_sp: SparseOperator,
    a_dag_sp: SparseOperator,
    sigma_plus_sp: SparseOperator,
    sigma_minus_sp: SparseOperator,
    lindblad_sp: [SparseOperator; 3],
}

impl Generator {
    pub fn new(params: LaserParams, space: SpaceDescriptor) -> Self {
        let ops = build_operators(space);
        let real = |x: f64| Complex64::new(x, 0.0);
        let gamma = params.gamma();
        let d = params.d();
        let lindblad = [
            ops.a.scaled(real(math::sqrt(2.0 * params.kappa()))),
            ops.sigma_minus.scaled(real(math::sqrt(gamma * (1.0 - d)))),
            ops.sigma_plus.scaled(real(math::sqrt(gamma * (1.0 + d)))),
        ];
        let mut damping = OperatorMatrix::zeros(space);
        for l in &lindblad {
            damping.add_scaled(real(0.5), &(&l.adjoint() * l));
        }
        let mut h0 = ops.n_op.scaled(real(2.0));
        h0.add_scaled(real(1.0), &ops.sigma_3);
        let h0 = h0.scaled(real(0.5 * params.omega()));
        let g0_diag = (0..space.dim()).map(|i| -I * h0[(i, i)] - damping[(i, i)]).collect();
        Self {
            params,
            space,
            a_sp: SparseOperator::from_dense(&ops.a),
            a_dag_sp: SparseOperator::from_dense(&ops.a_dag),
            sigma_plus_sp: SparseOperator::from_dense(&ops.sigma_plus),
            sigma_minus_sp: SparseOperator::from_dense(&ops.sigma_minus),
            lindblad_sp: [
                SparseOperator::from_dense(&lindblad[0]),
                SparseOperator::from_dense(&lindblad[1]),
                SparseOperator::from_dense(&lindblad[2]),
            ],
            ops,
            lindblad,
            h0,
            damping,
            g0_diag,
        }
    }

    pub fn params(&self) -> &LaserParams {
        &self.params
    }

    pub fn space(&self) -> SpaceDescriptor {
        self.space
    }

    pub fn operators(&self) -> &OperatorSet {
        &self.ops
    }

    /// `[L₁, L₂, L₃]`.
    pub fn lindblad_ops(&self) -> &[OperatorMatrix; 3] {
        &self.lindblad
    }

    /// `½ Σ L†L`.
    pub fn damping(&self) -> &OperatorMatrix {
        &self.damping
    }

    pub fn hamiltonian(&self, alpha: Complex64, beta: Complex64) -> OperatorMatrix {
        let mut h = self.h0.clone();
        h.add_scaled(I * alpha, &self.ops.a_dag);
        h.add_scaled(-I * alpha.conj(), &self.ops.a);
        h.add_scaled(I * beta.conj(), &self.ops.sigma_minus);
        h.add_scaled(-I * beta, &self.ops.sigma_plus);
        h
    }

    pub fn g_op(&self, alpha: Complex64, beta: Complex64) -> OperatorMatrix {
        let mut g = self.hamiltonian(alpha, beta).scaled(-I);
        g.add_scaled(Complex64::new(-1.0, 0.0), &self.damping);
        g
    }

    /// Sparse pieces of the drive part of `G`: `α a† − ᾱ a + β̄ σ⁻ − β σ⁺`.
    fn drive_terms(&self, alpha: Complex64, beta: Complex64) -> [(&SparseOperator, Complex64); 4] {
        [
            (&self.a_dag_sp, alpha),
            (&self.a_sp, -alpha.conj()),
            (&self.sigma_minus_sp, beta.conj()),
            (&self.sigma_plus_sp, -beta),
        ]
    }

    /// `Gρ + ρG† + Σ LρL†`, symmetrized. `rho` must live on this space.
    pub fn apply(&self, alpha: Complex64, beta: Complex64, rho: &OperatorMatrix) -> OperatorMatrix {
        assert_eq!(rho.space(), self.space, "operator spaces differ");
        let dim = self.space.dim();
        let src = rho.as_slice();
        let mut out = OperatorMatrix::zeros(self.space);
        let dst = out.as_mut_slice();
        for i in 0..dim {
            let gi = self.g0_diag[i];
            for j in 0..dim {
                dst[i * dim + j] = gi * src[i * dim + j] + src[i * dim + j] * self.g0_diag[j].conj();
            }
        }
        for (op, c) in self.drive_terms(alpha, beta) {
            op.left_mul_add(c, src, dst);
            op.right_mul_adjoint_add(c, src, dst);
        }
        for l in &self.lindblad_sp {
            l.sandwich_add(src, dst);
        }
        out.symmetrize();
        out
    }

    /// `(g tr(σ⁻ρ), g tr(aρ))`.
    pub fn mean_fields(&self, rho: &OperatorMatrix) -> (Complex64, Complex64) {
        let g = self.params.g();
        (
            self.sigma_minus_sp.trace_product(rho.as_slice()) * g,
            self.a_sp.trace_product(rho.as_slice()) * g,
        )
    }

    /// `(⟨x, a x⟩, ⟨x, σ⁻ x⟩)` without normalizing `x`.
    pub fn field_forms(&self, x: &[Complex64]) -> (Complex64, Complex64) {
        (self.a_sp.quadratic_form(x), self.sigma_minus_sp.quadratic_form(x))
    }

    /// `out += G x`.
    pub fn apply_g_add(&self, alpha: Complex64, beta: Complex64, x: &[Complex64], out: &mut [Complex64]) {
        for ((o, &v), &gd) in out.iter_mut().zip(x).zip(&self.g0_diag) {
            *o += gd * v;
        }
        for (op, c) in self.drive_terms(alpha, beta) {
            op.apply_add(c, x, out);
        }
    }

    /// `out += c L_ℓ x` for `ℓ ∈ {0, 1, 2}`.
    pub fn apply_lindblad_add(&self, l: usize, c: f64, x: &[Complex64], out: &mut [Complex64]) {
        self.lindblad_sp[l].apply_add(Complex64::new(c, 0.0), x, out);
    }

    /// `|2 Re⟨x, Gx⟩ + Σ ‖L_ℓ x‖²|`.
    pub fn conservativity_residual(&self, alpha: Complex64, beta: Complex64, x: &StateVector) -> Result<f64> {
        if x.space() != self.space {
            return Err(Error::DimensionMismatch {
                expected: self.space.dim(),
                found: x.space().dim(),
            });
        }
        let amps = x.amplitudes();
        let mut gx = vec![ZERO; amps.len()];
        self.apply_g_add(alpha, beta, amps, &mut gx);
        let drift: f64 = 2.0 * amps.iter().zip(&gx).map(|(a, b)| (a.conj() * b).re).sum::<f64>();
        let mut jumps = 0.0;
        let mut lx = vec![ZERO; amps.len()];
        for l in 0..3 {
            lx.iter_mut().for_each(|z| *z = ZERO);
            self.apply_lindblad_add(l, 1.0, amps, &mut lx);
            jumps += lx.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        Ok(math::abs(drift + jumps))
    }
}

/// Generator pieces bound to a particular drive.
#[derive(Debug, Clone)]
pub struct GKSLOperators<D> {
    generator: Generator,
    drive: D,
}

impl<D: MeanFieldDrive> GKSLOperators<D> {
    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn drive(&self) -> &D {
        &self.drive
    }

    pub fn lindblad_ops(&self) -> &[OperatorMatrix; 3] {
        self.generator.lindblad_ops()
    }

    pub fn hamiltonian(&self, t: f64) -> OperatorMatrix {
        let (alpha, beta) = self.drive.drives(t);
        self.generator.hamiltonian(alpha, beta)
    }

    pub fn g_op(&self, t: f64) -> OperatorMatrix {
        let (alpha, beta) = self.drive.drives(t);
        self.generator.g_op(alpha, beta)
    }
}

pub fn build_gksl<D: MeanFieldDrive>(params: LaserParams, drive: D, space: SpaceDescriptor) -> GKSLOperators<D> {
    GKSLOperators {
        generator: Generator::new(params, space),
        drive,
    }
}

fn check_space(generator: &Generator, rho: &OperatorMatrix) -> Result<()> {
    if rho.space() != generator.space() {
        return Err(Error::DimensionMismatch {
            expected: generator.space().dim(),
            found: rho.dim(),
        });
    }
    Ok(())
}

/// Right-hand side of the linear master equation at time `t`.
pub fn linear_generator_apply<D: MeanFieldDrive>(ops: &GKSLOperators<D>, t: f64, rho: &OperatorMatrix) -> Result<OperatorMatrix> {
    check_space(&ops.generator, rho)?;
    let (alpha, beta) = ops.drive.drives(t);
    Ok(ops.generator.apply(alpha, beta, rho))
}

/// Right-hand side of the nonlinear mean-field equation, together with the
/// instantaneous drives `α = g tr(σ⁻ρ)`, `β = g tr(aρ)`.
pub fn meanfield_generator_apply(generator: &Generator, rho: &OperatorMatrix) -> Result<(OperatorMatrix, Complex64, Complex64)> {
    check_space(generator, rho)?;
    let herm = rho.hermiticity_error();
    if !(herm <= HERMITIAN_TOL) {
        return Err(Error::NotHermitian(herm));
    }
    let tr = rho.trace();
    if !((tr - 1.0).norm() <= TRACE_TOL) {
        return Err(Error::NotDensity(alloc::format!("trace {tr} differs from 1")));
    }
    let (alpha, beta) = generator.mean_fields(rho);
    Ok((generator.apply(alpha, beta, rho), alpha, beta))
}

pub fn conservativity_residual<D: MeanFieldDrive>(ops: &GKSLOperators<D>, t: f64, x: &StateVector) -> Result<f64> {
    let (alpha, beta) = ops.drive.drives(t);
    ops.generator.conservativity_residual(alpha, beta, x)
}
