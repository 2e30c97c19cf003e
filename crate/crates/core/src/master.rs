//! Deterministic density-matrix evolution.
//!
//! Three routes share one RK4 stepper:
//!
//! * linear: `ρ' = L(t)ρ` with prescribed drives;
//! * self-consistent mean field: drives recomputed from the stage state at
//!   every RK stage;
//! * Lorenz-precomputed: solve the Maxwell–Bloch system first, then run the
//!   linear equation with `α = gS(t)`, `β = gA(t)` (cubic Hermite in time).
//!
//! Trace is never renormalized; drift is reported as a diagnostic.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{expectation, hermitian_eigenvalues, OperatorMatrix, SpaceDescriptor, StateVector, HERMITIAN_TOL};
use crate::lindblad::{Generator, LaserParams, MeanFieldDrive, SampledDrive, ZeroDrive};
use crate::lorenz::{integrate_lorenz, lorenz_rhs, LorenzSeries, LorenzState};
use crate::ode::time_grid;

pub const DEFAULT_LEAKAGE_BOUND: f64 = 1e-6;
pub const DENSITY_TRACE_TOL: f64 = 1e-8;
pub const DENSITY_EIGEN_FLOOR: f64 = -1e-8;

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(OperatorMatrix);

impl DensityMatrix {
    pub fn new(matrix: OperatorMatrix) -> Result<Self> {
        let herm = matrix.hermiticity_error();
        if !(herm <= HERMITIAN_TOL) {
            return Err(Error::NotHermitian(herm));
        }
        let tr = matrix.trace();
        if !((tr - 1.0).norm() <= DENSITY_TRACE_TOL) {
            return Err(Error::NotDensity(format!("trace {tr} differs from 1")));
        }
        let min = hermitian_eigenvalues(&matrix)?[0];
        if min < DENSITY_EIGEN_FLOOR {
            return Err(Error::NotDensity(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self(matrix))
    }

    pub fn from_pure(psi: &StateVector) -> Result<Self> {
        Self::new(OperatorMatrix::projector(psi))
    }

    pub(crate) fn new_unchecked(matrix: OperatorMatrix) -> Self {
        Self(matrix)
    }

    pub fn matrix(&self) -> &OperatorMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> OperatorMatrix {
        self.0
    }

    pub fn space(&self) -> SpaceDescriptor {
        self.0.space()
    }
}

/// Population on the two highest retained Fock levels.
pub fn truncation_leakage(rho: &OperatorMatrix) -> f64 {
    let space = rho.space();
    let top = space.n_max();
    (0..space.dim()).filter(|&i| space.level(i).0 + 1 >= top).map(|i| rho[(i, i)].re).sum()
}

/// Expectation values tracked along a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observables {
    /// `tr(aρ)`
    pub field: Complex64,
    /// `tr(σ⁻ρ)`
    pub polarization: Complex64,
    /// `tr(σ³ρ)`
    pub inversion: f64,
    /// `tr(Nρ)`
    pub photons: f64,
    /// `tr(ρ²)`
    pub purity: f64,
    pub leakage: f64,
}

impl Observables {
    pub fn lorenz_state(&self) -> LorenzState {
        LorenzState::new(self.field, self.polarization, self.inversion)
    }
}

pub fn observables(generator: &Generator, rho: &OperatorMatrix) -> Observables {
    let ops = generator.operators();
    let purity = rho.as_slice().iter().map(|z| z.norm_sqr()).sum();
    Observables {
        field: expectation(&ops.a, rho).expect("same space"),
        polarization: expectation(&ops.sigma_minus, rho).expect("same space"),
        inversion: expectation(&ops.sigma_3, rho).expect("same space").re,
        photons: expectation(&ops.n_op, rho).expect("same space").re,
        purity,
        leakage: truncation_leakage(rho),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Linear,
    SelfConsistent,
    LorenzPrecomputed,
}

impl Route {
    pub fn name(self) -> &'static str {
        match self {
            Route::Linear => "linear",
            Route::SelfConsistent => "self-consistent",
            Route::LorenzPrecomputed => "lorenz-precomputed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MasterOptions {
    /// Abort once [`truncation_leakage`] exceeds this.
    pub leakage_bound: f64,
    /// Keep the full state every this many steps (the final state is always kept).
    pub snapshot_every: usize,
    /// Compute the minimum eigenvalue every this many steps; `0` disables it.
    pub eig_every: usize,
}

impl Default for MasterOptions {
    fn default() -> Self {
        Self {
            leakage_bound: DEFAULT_LEAKAGE_BOUND,
            snapshot_every: usize::MAX,
            eig_every: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    /// Drives in effect at this grid point.
    pub alpha: Complex64,
    pub beta: Complex64,
    pub observables: Observables,
    /// `|tr ρ − 1|`
    pub trace_error: f64,
    pub hermiticity_error: f64,
    pub min_eig: Option<f64>,
    /// Diagonal of `ρ`.
    pub populations: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub rho: DensityMatrix,
}

#[derive(Debug, Clone)]
pub struct MasterRun {
    pub route: Route,
    pub params: LaserParams,
    pub space: SpaceDescriptor,
    pub dt: f64,
    pub records: Vec<StepRecord>,
    pub snapshots: Vec<Snapshot>,
}

impl MasterRun {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    /// Per-grid-point observables.
    pub fn observables(&self) -> Vec<Observables> {
        self.records.iter().map(|r| r.observables).collect()
    }

    pub fn max_trace_error(&self) -> f64 {
        self.records.iter().fold(0.0, |m, r| m.max(r.trace_error))
    }

    pub fn max_hermiticity_error(&self) -> f64 {
        self.records.iter().fold(0.0, |m, r| m.max(r.hermiticity_error))
    }

    pub fn min_eigenvalue(&self) -> Option<f64> {
        self.records.iter().filter_map(|r| r.min_eig).reduce(f64::min)
    }

    pub fn max_leakage(&self) -> f64 {
        self.records.iter().fold(0.0, |m, r| m.max(r.observables.leakage))
    }

    /// Snapshot whose time is within `1e-9` of `t`.
    pub fn state_at(&self, t: f64) -> Option<&DensityMatrix> {
        self.snapshots.iter().find(|s| (s.t - t).abs() <= 1e-9).map(|s| &s.rho)
    }

    pub fn final_state(&self) -> &DensityMatrix {
        &self.snapshots.last().expect("final state is always kept").rho
    }
}

enum VectorField<D> {
    Linear(D),
    MeanField,
}

/// RK4 stepper over a fixed grid; usable on its own to advance several
/// routes in lockstep.
pub struct MasterStepper<D> {
    generator: Generator,
    field: VectorField<D>,
    rho: OperatorMatrix,
    times: Vec<f64>,
    step: usize,
}

impl<D: MeanFieldDrive> MasterStepper<D> {
    pub fn linear(params: LaserParams, rho0: &DensityMatrix, drive: D, dt: f64, t_final: f64) -> Result<Self> {
        Ok(Self {
            generator: Generator::new(params, rho0.space()),
            field: VectorField::Linear(drive),
            rho: rho0.matrix().clone(),
            times: time_grid(dt, t_final)?,
            step: 0,
        })
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn time(&self) -> f64 {
        self.times[self.step]
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn state(&self) -> &OperatorMatrix {
        &self.rho
    }

    pub fn is_finished(&self) -> bool {
        self.step + 1 >= self.times.len()
    }

    fn eval(&self, t: f64, rho: &OperatorMatrix) -> (OperatorMatrix, Complex64, Complex64) {
        let (alpha, beta) = match &self.field {
            VectorField::Linear(drive) => drive.drives(t),
            VectorField::MeanField => self.generator.mean_fields(rho),
        };
        (self.generator.apply(alpha, beta, rho), alpha, beta)
    }

    /// Drives at the current grid point.
    pub fn current_drives(&self) -> (Complex64, Complex64) {
        match &self.field {
            VectorField::Linear(drive) => drive.drives(self.time()),
            VectorField::MeanField => self.generator.mean_fields(&self.rho),
        }
    }

    /// Advances one step; returns the new time, or `None` at the horizon.
    pub fn advance(&mut self) -> Option<f64> {
        if self.is_finished() {
            return None;
        }
        let t = self.times[self.step];
        let h = self.times[self.step + 1] - t;
        let half = Complex64::new(0.5 * h, 0.0);
        let (k1, _, _) = self.eval(t, &self.rho);
        let mut stage = self.rho.clone();
        stage.add_scaled(half, &k1);
        let (k2, _, _) = self.eval(t + 0.5 * h, &stage);
        stage = self.rho.clone();
        stage.add_scaled(half, &k2);
        let (k3, _, _) = self.eval(t + 0.5 * h, &stage);
        stage = self.rho.clone();
        stage.add_scaled(Complex64::new(h, 0.0), &k3);
        let (k4, _, _) = self.eval(t + h, &stage);
        let sixth = h / 6.0;
        let dst = self.rho.as_mut_slice();
        for (i, r) in dst.iter_mut().enumerate() {
            *r += (k1.as_slice()[i] + (k2.as_slice()[i] + k3.as_slice()[i]) * 2.0 + k4.as_slice()[i]) * sixth;
        }
        self.rho.symmetrize();
        self.step += 1;
        Some(self.times[self.step])
    }
}

impl MasterStepper<ZeroDrive> {
    /// Self-consistent mean-field stepper.
    pub fn meanfield(params: LaserParams, rho0: &DensityMatrix, dt: f64, t_final: f64) -> Result<Self> {
        Ok(Self {
            generator: Generator::new(params, rho0.space()),
            field: VectorField::MeanField,
            rho: rho0.matrix().clone(),
            times: time_grid(dt, t_final)?,
            step: 0,
        })
    }
}

fn record<D: MeanFieldDrive>(stepper: &MasterStepper<D>, options: &MasterOptions) -> Result<StepRecord> {
    let rho = stepper.state();
    let obs = observables(&stepper.generator, rho);
    let t = stepper.time();
    if !(obs.leakage <= options.leakage_bound) {
        return Err(Error::LeakageExceeded {
            t,
            leakage: obs.leakage,
            bound: options.leakage_bound,
        });
    }
    let k = stepper.step_index();
    let want_eig = options.eig_every > 0 && (k.is_multiple_of(options.eig_every) || stepper.is_finished());
    let min_eig = if want_eig { Some(hermitian_eigenvalues(rho)?[0]) } else { None };
    let (alpha, beta) = stepper.current_drives();
    Ok(StepRecord {
        t,
        alpha,
        beta,
        observables: obs,
        trace_error: (rho.trace() - 1.0).norm(),
        hermiticity_error: rho.hermiticity_error(),
        min_eig,
        populations: rho.diagonal_real(),
    })
}

/// Drives every step of `stepper` to the horizon, recording diagnostics.
pub fn run_stepper<D: MeanFieldDrive>(mut stepper: MasterStepper<D>, route: Route, options: &MasterOptions) -> Result<MasterRun> {
    let mut records = Vec::with_capacity(stepper.times().len());
    let mut snapshots = Vec::new();
    loop {
        records.push(record(&stepper, options)?);
        let k = stepper.step_index();
        if k.is_multiple_of(options.snapshot_every.max(1)) || stepper.is_finished() {
            snapshots.push(Snapshot {
                step: k,
                t: stepper.time(),
                rho: DensityMatrix::new_unchecked(stepper.state().clone()),
            });
        }
        if stepper.advance().is_none() {
            break;
        }
    }
    let dt = if stepper.times.len() > 1 { stepper.times[1] - stepper.times[0] } else { 0.0 };
    Ok(MasterRun {
        route,
        params: *stepper.generator.params(),
        space: stepper.generator.space(),
        dt,
        records,
        snapshots,
    })
}

pub fn integrate_linear<D: MeanFieldDrive>(
    params: LaserParams,
    rho0: &DensityMatrix,
    drive: D,
    dt: f64,
    t_final: f64,
    options: &MasterOptions,
) -> Result<MasterRun> {
    run_stepper(MasterStepper::linear(params, rho0, drive, dt, t_final)?, Route::Linear, options)
}

pub fn integrate_meanfield_direct(params: LaserParams, rho0: &DensityMatrix, dt: f64, t_final: f64, options: &MasterOptions) -> Result<MasterRun> {
    run_stepper(MasterStepper::meanfield(params, rho0, dt, t_final)?, Route::SelfConsistent, options)
}

/// Drives `α = gS`, `β = gA` of a Lorenz solution, with slopes from the
/// vector field for cubic Hermite interpolation.
pub fn lorenz_drive(params: &LaserParams, series: &LorenzSeries) -> Result<SampledDrive> {
    let g = params.g();
    let values = series.states.iter().map(|s| [s.polarization * g, s.field * g]).collect();
    let slopes = series
        .states
        .iter()
        .map(|s| {
            let r = lorenz_rhs(params, s);
            [r.polarization * g, r.field * g]
        })
        .collect();
    SampledDrive::new(series.times.clone(), values, slopes)
}

/// Initial Lorenz data `(tr aρ₀, tr σ⁻ρ₀, tr σ³ρ₀)`.
pub fn initial_lorenz_state(params: &LaserParams, rho0: &DensityMatrix) -> Result<LorenzState> {
    let generator = Generator::new(*params, rho0.space());
    LorenzState::from_density(generator.operators(), rho0.matrix())
}

/// Lorenz series on the master grid plus the stepper that consumes it.
pub fn via_lorenz_stepper(params: LaserParams, rho0: &DensityMatrix, dt: f64, t_final: f64) -> Result<(LorenzSeries, MasterStepper<SampledDrive>)> {
    let s0 = initial_lorenz_state(&params, rho0)?;
    let series = integrate_lorenz(&params, s0, dt, t_final)?;
    if series.times.len() < 2 {
        return Err(Error::GridMismatch("horizon shorter than one step".into()));
    }
    let drive = lorenz_drive(&params, &series)?;
    let stepper = MasterStepper::linear(params, rho0, drive, dt, t_final)?;
    Ok((series, stepper))
}

pub fn integrate_meanfield_via_lorenz(
    params: LaserParams,
    rho0: &DensityMatrix,
    dt: f64,
    t_final: f64,
    options: &MasterOptions,
) -> Result<(MasterRun, LorenzSeries)> {
    let (series, stepper) = via_lorenz_stepper(params, rho0, dt, t_final)?;
    Ok((run_stepper(stepper, Route::LorenzPrecomputed, options)?, series))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{trace_distance, LOWER, UPPER};
    use crate::lindblad::ConstantDrive;
    use crate::states::{coherent_state, fock_ground, vacuum_atom_steady};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn space(n: usize) -> SpaceDescriptor {
        SpaceDescriptor::new(n).unwrap()
    }

    fn coherent_superposition(s: SpaceDescriptor) -> DensityMatrix {
        let h = c(core::f64::consts::FRAC_1_SQRT_2, 0.0);
        DensityMatrix::from_pure(&coherent_state(s, c(0.8, 0.3), [h, h]).unwrap()).unwrap()
    }

    #[test]
    fn density_validation() {
        let s = space(2);
        let ops = crate::hilbert::build_operators(s);
        assert!(matches!(DensityMatrix::new(ops.a.clone()), Err(Error::NotHermitian(_))));
        assert!(matches!(DensityMatrix::new(ops.identity.clone()), Err(Error::NotDensity(_))));
        let mut neg = OperatorMatrix::zeros(s);
        neg[(0, 0)] = c(1.5, 0.0);
        neg[(1, 1)] = c(-0.5, 0.0);
        assert!(matches!(DensityMatrix::new(neg), Err(Error::NotDensity(_))));
    }

    #[test]
    fn leakage_examples() {
        let s = space(3);
        assert_eq!(truncation_leakage(vacuum_atom_steady(s, 0.1).unwrap().matrix()), 0.0);
        let mixed = OperatorMatrix::identity(s).scaled(c(1.0 / 8.0, 0.0));
        assert!((truncation_leakage(&mixed) - 0.5).abs() < 1e-15);
        // Gaussian Fock profile centred at n = 5 with width 1.5 on a 40-level ladder.
        let big = space(40);
        let weights: Vec<f64> = (0..=40).map(|n| (-((n as f64 - 5.0) / 1.5).powi(2) / 2.0).exp()).collect();
        let total: f64 = weights.iter().sum();
        let rho = OperatorMatrix::diagonal(big, |i| if big.level(i).1 == LOWER { weights[big.level(i).0] / total } else { 0.0 });
        assert!(truncation_leakage(&rho) < 1e-8);
    }

    #[test]
    fn undriven_steady_state_is_constant() {
        let p = LaserParams::desk();
        let s = space(4);
        let rho0 = vacuum_atom_steady(s, p.d()).unwrap();
        let run = integrate_linear(p, &rho0, ZeroDrive, 1e-2, 1.0, &MasterOptions::default()).unwrap();
        assert_eq!(run.records.len(), 101);
        assert!((run.final_state().matrix() - rho0.matrix()).max_abs() <= 1e-10);
        let direct = integrate_meanfield_direct(p, &rho0, 1e-2, 1.0, &MasterOptions::default()).unwrap();
        assert!((direct.final_state().matrix() - rho0.matrix()).max_abs() <= 1e-10);
        assert!(direct.records.iter().all(|r| r.alpha == c(0.0, 0.0) && r.beta == c(0.0, 0.0)));
    }

    #[test]
    fn one_photon_decays_at_twice_kappa() {
        let p = LaserParams::desk();
        let s = space(3);
        let rho0 = fock_ground(s, 1).unwrap();
        let run = integrate_linear(
            p,
            &rho0,
            ZeroDrive,
            1e-3,
            3.0,
            &MasterOptions {
                leakage_bound: 1.0,
                ..Default::default()
            },
        )
        .unwrap();
        for r in &run.records {
            assert!((r.observables.photons - (-2.0 * p.kappa() * r.t).exp()).abs() <= 1e-6);
        }
    }

    #[test]
    fn trace_hermiticity_positivity_hold_on_driven_run() {
        let p = LaserParams::desk();
        let s = space(12);
        let rho0 = coherent_superposition(s);
        let opts = MasterOptions {
            eig_every: 50,
            ..Default::default()
        };
        let drive = ConstantDrive {
            alpha: c(0.3, 0.1),
            beta: c(-0.2, 0.2),
        };
        let run = integrate_linear(p, &rho0, drive, 1e-2, 2.0, &opts).unwrap();
        for (k, r) in run.records.iter().enumerate() {
            assert!(r.trace_error <= 1e-9 * (1.0 + k as f64));
            assert!(r.hermiticity_error <= 1e-10);
            assert!(r.observables.inversion.abs() <= 1.0 + 1e-8);
        }
        assert!(run.min_eigenvalue().unwrap() >= -1e-8);
    }

    #[test]
    fn recorded_drives_are_instantaneous_mean_fields() {
        let p = LaserParams::desk();
        let s = space(12);
        let run = integrate_meanfield_direct(p, &coherent_superposition(s), 1e-2, 1.0, &MasterOptions::default()).unwrap();
        for r in &run.records {
            assert!((r.alpha - r.observables.polarization * p.g()).norm() <= 1e-12);
            assert!((r.beta - r.observables.field * p.g()).norm() <= 1e-12);
        }
    }

    #[test]
    fn routes_agree_and_track_lorenz() {
        let p = LaserParams::desk();
        let s = space(10);
        let rho0 = coherent_superposition(s);
        let opts = MasterOptions {
            snapshot_every: 100,
            ..Default::default()
        };
        let direct = integrate_meanfield_direct(p, &rho0, 1e-3, 1.0, &opts).unwrap();
        let (via, series) = integrate_meanfield_via_lorenz(p, &rho0, 1e-3, 1.0, &opts).unwrap();
        assert_eq!(via.route, Route::LorenzPrecomputed);
        for (a, b) in direct.snapshots.iter().zip(&via.snapshots) {
            assert_eq!(a.step, b.step);
            assert!(trace_distance(a.rho.matrix(), b.rho.matrix()).unwrap() <= 1e-6);
        }
        for (r, l) in via.records.iter().zip(&series.states) {
            assert!((r.observables.field - l.field).norm() <= 1e-5);
        }
    }

    #[test]
    fn fixed_point_via_lorenz_is_constant() {
        let p = LaserParams::desk();
        let s = space(3);
        let rho0 = vacuum_atom_steady(s, p.d()).unwrap();
        let (run, _) = integrate_meanfield_via_lorenz(p, &rho0, 1e-2, 0.5, &MasterOptions::default()).unwrap();
        assert!((run.final_state().matrix() - rho0.matrix()).max_abs() <= 1e-10);
    }

    #[test]
    fn observables_of_pure_states() {
        let s = space(3);
        let generator = Generator::new(LaserParams::desk(), s);
        let rho = coherent_superposition(s);
        let obs = observables(&generator, rho.matrix());
        assert!((obs.purity - 1.0).abs() <= 1e-10);
        let up = DensityMatrix::from_pure(&StateVector::basis(s, s.index(0, UPPER))).unwrap();
        assert_eq!(observables(&generator, up.matrix()).leakage, 0.0);
    }

    #[test]
    fn leakage_bound_aborts() {
        let p = LaserParams::desk();
        let s = space(3);
        let rho0 = fock_ground(s, 3).unwrap();
        let err = integrate_linear(p, &rho0, ZeroDrive, 1e-2, 1.0, &MasterOptions::default()).unwrap_err();
        assert!(matches!(err, Error::LeakageExceeded { .. }));
    }

    #[test]
    fn rejects_bad_step() {
        let p = LaserParams::desk();
        let rho0 = vacuum_atom_steady(space(2), p.d()).unwrap();
        assert!(matches!(
            integrate_meanfield_direct(p, &rho0, 0.0, 1.0, &MasterOptions::default()),
            Err(Error::InvalidStep(_))
        ));
    }
}
