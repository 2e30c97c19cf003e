//! Linear stochastic Schrödinger equations and their ensemble estimates.
//!
//! Trajectories follow the Euler–Maruyama scheme
//!
//! ```text
//! Z ← Z + h·G(t)Z + Σ_ℓ L_ℓ Z·ΔW_ℓ
//! ```
//!
//! without renormalization, so `(1/M) Σ |Z⟩⟨Z|` estimates the density
//! matrix. In the mean-field route the drives of each step are frozen from
//! the unnormalized ensemble averages `(1/M) Σ ⟨Z, σ⁻Z⟩`, `(1/M) Σ ⟨Z, aZ⟩`
//! at the start of the step.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{hermitian_eigen, OperatorMatrix, SpaceDescriptor, StateVector, LOWER};
use crate::lindblad::{build_gksl, GKSLOperators, Generator, LaserParams, MeanFieldDrive};
use crate::master::DensityMatrix;
use crate::math;
use crate::ode::time_grid;
use crate::rng::{NoisePlan, CHANNELS};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Mean squared norm range outside which the mean-field route aborts.
pub const COLLAPSE_BOUNDS: (f64, f64) = (0.2, 5.0);

const WEIGHT_FLOOR: f64 = -1e-12;

/// Eigen-decomposition of `ρ₀` used to draw initial vectors.
#[derive(Debug, Clone)]
pub struct InitialSampler {
    weights: Vec<f64>,
    cumulative: Vec<f64>,
    vectors: Vec<StateVector>,
}

impl InitialSampler {
    pub fn new(rho0: &DensityMatrix) -> Result<Self> {
        let m = rho0.matrix();
        let space = m.space();
        let dim = space.dim();
        let diagonal = (0..dim).all(|i| (0..dim).all(|j| i == j || m[(i, j)] == ZERO));
        let (raw, vectors): (Vec<f64>, Vec<StateVector>) = if diagonal {
            (0..dim).map(|i| (m[(i, i)].re, StateVector::basis(space, i))).unzip()
        } else {
            let eig = hermitian_eigen(m)?;
            (eig.values, eig.vectors)
        };
        if let Some(w) = raw.iter().copied().find(|w| *w < WEIGHT_FLOOR) {
            return Err(Error::NotDensity(alloc::format!("eigenvalue {w:e} below the sampling floor")));
        }
        let (weights, vectors): (Vec<f64>, Vec<StateVector>) = raw.into_iter().zip(vectors).filter(|(w, _)| *w > 0.0).unzip();
        let total: f64 = weights.iter().sum();
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Ok(Self { weights, cumulative, vectors })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn vectors(&self) -> &[StateVector] {
        &self.vectors
    }

    /// Index of the vector selected by a uniform draw `u ∈ [0, 1)`.
    pub fn pick(&self, u: f64) -> usize {
        self.cumulative.partition_point(|&c| c <= u).min(self.vectors.len() - 1)
    }

    /// `Σ λᵢ |uᵢ⟩⟨uᵢ|`.
    pub fn reconstruct(&self) -> OperatorMatrix {
        let mut out = OperatorMatrix::zeros(self.vectors[0].space());
        for (w, v) in self.weights.iter().zip(&self.vectors) {
            out.add_scaled(Complex64::new(*w, 0.0), &OperatorMatrix::projector(v));
        }
        out
    }
}

/// `M` state vectors stored trajectory-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    space: SpaceDescriptor,
    states: Vec<Complex64>,
    time: f64,
    step: u64,
}

impl TrajectoryEnsemble {
    pub fn from_states(states: &[StateVector]) -> Result<Self> {
        let space = states.first().ok_or(Error::EmptyEnsemble)?.space();
        let mut flat = Vec::with_capacity(states.len() * space.dim());
        for s in states {
            if s.space() != space {
                return Err(Error::DimensionMismatch {
                    expected: space.dim(),
                    found: s.space().dim(),
                });
            }
            flat.extend_from_slice(s.amplitudes());
        }
        Ok(Self {
            space,
            states: flat,
            time: 0.0,
            step: 0,
        })
    }

    pub fn space(&self) -> SpaceDescriptor {
        self.space
    }

    pub fn len(&self) -> usize {
        self.states.len() / self.space.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn trajectory(&self, j: usize) -> &[Complex64] {
        let d = self.space.dim();
        &self.states[j * d..(j + 1) * d]
    }

    /// Interleaved amplitudes of every trajectory, trajectory-major.
    pub fn as_flat(&self) -> &[Complex64] {
        &self.states
    }

    pub fn state_vector(&self, j: usize) -> StateVector {
        StateVector::from_amplitudes(self.space, self.trajectory(j).to_vec()).expect("same space")
    }

    pub fn mean_norm_sqr(&self) -> f64 {
        let norms: Vec<[f64; 1]> = self.states.chunks(self.space.dim()).map(|z| [norm_sqr(z)]).collect();
        pairwise_sum(&norms)[0] / self.len() as f64
    }
}

fn norm_sqr(z: &[Complex64]) -> f64 {
    z.iter().map(|c| c.norm_sqr()).sum()
}

/// Draws each trajectory's initial vector from the eigen-decomposition of
/// `ρ₀` using the trajectory's own uniform.
pub fn sample_initial(rho0: &DensityMatrix, plan: &NoisePlan) -> Result<TrajectoryEnsemble> {
    if plan.trajectories() == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let sampler = InitialSampler::new(rho0)?;
    let space = rho0.space();
    let mut states = Vec::with_capacity(plan.trajectories() * space.dim());
    for j in 0..plan.trajectories() {
        let k = sampler.pick(plan.rng().initial_uniform(j as u64));
        states.extend_from_slice(sampler.vectors()[k].amplitudes());
    }
    Ok(TrajectoryEnsemble {
        space,
        states,
        time: 0.0,
        step: 0,
    })
}

/// `(1/M) Σ |Zⱼ⟩⟨Zⱼ|`, Hermitian by construction.
pub fn reconstruct_density(ensemble: &TrajectoryEnsemble) -> OperatorMatrix {
    let space = ensemble.space;
    let dim = space.dim();
    let mut out = OperatorMatrix::zeros(space);
    {
        let dst = out.as_mut_slice();
        for z in ensemble.states.chunks(dim) {
            for i in 0..dim {
                let zi = z[i];
                if zi == ZERO {
                    continue;
                }
                for j in i..dim {
                    dst[i * dim + j] += zi * z[j].conj();
                }
            }
        }
        let scale = 1.0 / ensemble.len() as f64;
        for i in 0..dim {
            dst[i * dim + i] = Complex64::new(dst[i * dim + i].re * scale, 0.0);
            for j in i + 1..dim {
                let v = dst[i * dim + j] * scale;
                dst[i * dim + j] = v;
                dst[j * dim + i] = v.conj();
            }
        }
    }
    out
}

/// Runs per-trajectory work; implementations may run trajectories in
/// parallel but must return results in trajectory order.
pub trait Executor {
    fn map_trajectories<T, F>(&self, states: &mut [Complex64], dim: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize, &mut [Complex64]) -> T + Sync + Send;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Serial;

impl Executor for Serial {
    fn map_trajectories<T, F>(&self, states: &mut [Complex64], dim: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize, &mut [Complex64]) -> T + Sync + Send,
    {
        states.chunks_mut(dim).enumerate().map(|(j, z)| f(j, z)).collect()
    }
}

/// Componentwise sum in a fixed pairwise tree, independent of how the
/// summands were produced.
pub fn pairwise_sum<const K: usize>(items: &[[f64; K]]) -> [f64; K] {
    if items.len() <= 8 {
        let mut acc = [0.0; K];
        for it in items {
            for (a, v) in acc.iter_mut().zip(it) {
                *a += v;
            }
        }
        return acc;
    }
    let mid = items.len() / 2;
    let (l, r) = (pairwise_sum(&items[..mid]), pairwise_sum(&items[mid..]));
    core::array::from_fn(|k| l[k] + r[k])
}

/// One Euler–Maruyama step in place; `scratch` must have the state's length.
pub fn em_step(generator: &Generator, alpha: Complex64, beta: Complex64, h: f64, dw: [f64; CHANNELS], z: &mut [Complex64], scratch: &mut [Complex64]) {
    scratch.iter_mut().for_each(|s| *s = ZERO);
    generator.apply_g_add(alpha, beta, z, scratch);
    for s in scratch.iter_mut() {
        *s *= h;
    }
    for (l, w) in dw.iter().enumerate() {
        if *w != 0.0 {
            generator.apply_lindblad_add(l, *w, z, scratch);
        }
    }
    for (zi, s) in z.iter_mut().zip(scratch.iter()) {
        *zi += s;
    }
}

/// Per-trajectory quadratic forms feeding the ensemble estimates:
/// `Re/Im ⟨Z,aZ⟩`, `Re/Im ⟨Z,σ⁻Z⟩`, `⟨Z,σ³Z⟩`, `⟨Z,NZ⟩`, `‖Z‖²`.
const SAMPLE_LEN: usize = 7;

fn sample(generator: &Generator, z: &[Complex64]) -> [f64; SAMPLE_LEN] {
    let space = generator.space();
    let (field, pol) = generator.field_forms(z);
    let mut inversion = 0.0;
    let mut photons = 0.0;
    for (i, c) in z.iter().enumerate() {
        let (n, q) = space.level(i);
        let p = c.norm_sqr();
        inversion += if q == LOWER { -p } else { p };
        photons += n as f64 * p;
    }
    [field.re, field.im, pol.re, pol.im, inversion, photons, norm_sqr(z)]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealEstimate {
    pub mean: f64,
    /// Standard error of the mean.
    pub se: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexEstimate {
    pub mean: Complex64,
    pub se_re: f64,
    pub se_im: f64,
}

impl ComplexEstimate {
    /// `√(se_re² + se_im²)`.
    pub fn combined_se(&self) -> f64 {
        math::sqrt(self.se_re * self.se_re + self.se_im * self.se_im)
    }
}

/// Ensemble estimates at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SseRecord {
    pub t: f64,
    /// Drives used for the step leaving this grid point.
    pub alpha: Complex64,
    pub beta: Complex64,
    /// `E⟨Z, aZ⟩`
    pub field: ComplexEstimate,
    /// `E⟨Z, σ⁻Z⟩`
    pub polarization: ComplexEstimate,
    /// `E⟨Z, σ³Z⟩`
    pub inversion: RealEstimate,
    /// `E⟨Z, NZ⟩`
    pub photons: RealEstimate,
    /// `E‖Z‖²`
    pub norm_sqr: RealEstimate,
}

fn summarize(t: f64, samples: &[[f64; SAMPLE_LEN]]) -> SseRecord {
    let m = samples.len() as f64;
    let sums = pairwise_sum(samples);
    let squares: Vec<[f64; SAMPLE_LEN]> = samples.iter().map(|s| s.map(|v| v * v)).collect();
    let sq = pairwise_sum(&squares);
    let est = |k: usize| {
        let mean = sums[k] / m;
        let se = if samples.len() > 1 {
            math::sqrt(((sq[k] - m * mean * mean) / (m - 1.0)).max(0.0) / m)
        } else {
            0.0
        };
        RealEstimate { mean, se }
    };
    let complex = |k: usize| {
        let (re, im) = (est(k), est(k + 1));
        ComplexEstimate {
            mean: Complex64::new(re.mean, im.mean),
            se_re: re.se,
            se_im: im.se,
        }
    };
    SseRecord {
        t,
        alpha: ZERO,
        beta: ZERO,
        field: complex(0),
        polarization: complex(2),
        inversion: est(4),
        photons: est(5),
        norm_sqr: est(6),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SseRoute {
    Linear,
    MeanField,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SseOptions {
    /// Times (matched to grid points within `1e-9`) at which the ensemble
    /// density estimate is stored.
    pub snapshot_times: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SseSnapshot {
    pub t: f64,
    pub rho: OperatorMatrix,
}

#[derive(Debug, Clone)]
pub struct SseRun {
    pub route: SseRoute,
    pub params: LaserParams,
    pub seed: u64,
    pub dt: f64,
    pub records: Vec<SseRecord>,
    pub snapshots: Vec<SseSnapshot>,
    pub ensemble: TrajectoryEnsemble,
}

impl SseRun {
    pub fn trajectories(&self) -> usize {
        self.ensemble.len()
    }

    pub fn snapshot_at(&self, t: f64) -> Option<&OperatorMatrix> {
        self.snapshots.iter().find(|s| (s.t - t).abs() <= 1e-9).map(|s| &s.rho)
    }

    /// Largest `|E‖Z‖² − 1|` over the grid.
    pub fn max_norm_deviation(&self) -> f64 {
        self.records.iter().fold(0.0, |m, r| m.max((r.norm_sqr.mean - 1.0).abs()))
    }
}

/// Advances one trajectory over one step with the noise at its own
/// coordinates; the ensemble loops call exactly this.
#[allow(clippy::too_many_arguments)]
fn advance(
    generator: &Generator,
    plan: &NoisePlan,
    alpha: Complex64,
    beta: Complex64,
    h: f64,
    j: usize,
    step: u64,
    z: &mut [Complex64],
) -> ([f64; SAMPLE_LEN], bool) {
    let mut scratch = vec![ZERO; z.len()];
    em_step(generator, alpha, beta, h, plan.increments(j, step, h), z, &mut scratch);
    let finite = z.iter().all(|c| c.re.is_finite() && c.im.is_finite());
    (sample(generator, z), finite)
}

/// Advances every trajectory by `h` with the drives of `ops` at the ensemble's
/// current time. Returns the new samples.
fn step_with<E: Executor>(
    ensemble: &mut TrajectoryEnsemble,
    generator: &Generator,
    plan: &NoisePlan,
    alpha: Complex64,
    beta: Complex64,
    h: f64,
    executor: &E,
) -> Result<Vec<[f64; SAMPLE_LEN]>> {
    let step = ensemble.step;
    let dim = ensemble.space.dim();
    let out = executor.map_trajectories(&mut ensemble.states, dim, |j, z| advance(generator, plan, alpha, beta, h, j, step, z));
    if let Some(j) = out.iter().position(|(_, ok)| !ok) {
        return Err(Error::NonFinite { trajectory: j, step: step + 1 });
    }
    ensemble.step += 1;
    ensemble.time += h;
    Ok(out.into_iter().map(|(s, _)| s).collect())
}

/// One Euler–Maruyama step of the linear equation, drives frozen at the
/// ensemble's current time, step length `plan.dt()`.
pub fn step_linear<D: MeanFieldDrive, E: Executor>(ensemble: &mut TrajectoryEnsemble, ops: &GKSLOperators<D>, plan: &NoisePlan, executor: &E) -> Result<()> {
    let (alpha, beta) = ops.drive().drives(ensemble.time);
    step_with(ensemble, ops.generator(), plan, alpha, beta, plan.dt(), executor).map(|_| ())
}

fn initial_samples(generator: &Generator, ensemble: &TrajectoryEnsemble) -> Vec<[f64; SAMPLE_LEN]> {
    ensemble.states.chunks(ensemble.space.dim()).map(|z| sample(generator, z)).collect()
}

fn wants_snapshot(options: &SseOptions, t: f64) -> bool {
    options.snapshot_times.iter().any(|s| (s - t).abs() <= 1e-9)
}

#[allow(clippy::too_many_arguments)]
fn simulate<E: Executor>(
    route: SseRoute,
    generator: &Generator,
    drive: &dyn Fn(f64, &SseRecord) -> (Complex64, Complex64),
    rho0: &DensityMatrix,
    t_final: f64,
    plan: &NoisePlan,
    options: &SseOptions,
    executor: &E,
) -> Result<SseRun> {
    let times = time_grid(plan.dt(), t_final)?;
    let mut ensemble = sample_initial(rho0, plan)?;
    let mut samples = initial_samples(generator, &ensemble);
    let mut records = Vec::with_capacity(times.len());
    let mut snapshots = Vec::new();
    for (k, &t) in times.iter().enumerate() {
        ensemble.time = t;
        let mut rec = summarize(t, &samples);
        if route == SseRoute::MeanField {
            let m = rec.norm_sqr.mean;
            if !(COLLAPSE_BOUNDS.0..=COLLAPSE_BOUNDS.1).contains(&m) {
                return Err(Error::EnsembleCollapse {
                    step: k as u64,
                    mean_norm_sqr: m,
                });
            }
        }
        let (alpha, beta) = drive(t, &rec);
        rec.alpha = alpha;
        rec.beta = beta;
        records.push(rec);
        if wants_snapshot(options, t) {
            snapshots.push(SseSnapshot {
                t,
                rho: reconstruct_density(&ensemble),
            });
        }
        if let Some(&next) = times.get(k + 1) {
            samples = step_with(&mut ensemble, generator, plan, alpha, beta, next - t, executor)?;
        }
    }
    Ok(SseRun {
        route,
        params: *generator.params(),
        seed: plan.seed(),
        dt: plan.dt(),
        records,
        snapshots,
        ensemble,
    })
}

/// Lockstep ensemble for the mean-field equation; drives are
/// `α = g E⟨Z, σ⁻Z⟩`, `β = g E⟨Z, aZ⟩` at the start of each step.
pub fn simulate_meanfield_sse<E: Executor>(
    params: LaserParams,
    rho0: &DensityMatrix,
    t_final: f64,
    plan: &NoisePlan,
    options: &SseOptions,
    executor: &E,
) -> Result<SseRun> {
    let generator = Generator::new(params, rho0.space());
    let g = params.g();
    let drive = |_: f64, r: &SseRecord| (r.polarization.mean * g, r.field.mean * g);
    simulate(SseRoute::MeanField, &generator, &drive, rho0, t_final, plan, options, executor)
}

/// Decoupled trajectories under prescribed drives (frozen at the left end of
/// each step).
pub fn simulate_linear_sse<D: MeanFieldDrive, E: Executor>(
    params: LaserParams,
    rho0: &DensityMatrix,
    drive: D,
    t_final: f64,
    plan: &NoisePlan,
    options: &SseOptions,
    executor: &E,
) -> Result<SseRun> {
    let ops = build_gksl(params, drive, rho0.space());
    let f = |t: f64, _: &SseRecord| ops.drive().drives(t);
    simulate(SseRoute::Linear, ops.generator(), &f, rho0, t_final, plan, options, executor)
}

/// Propagates a single trajectory of the linear equation on its own.
/// Matches trajectory `j` of [`simulate_linear_sse`] bit for bit when started
/// from the same vector.
pub fn propagate_trajectory<D: MeanFieldDrive>(
    params: LaserParams,
    drive: D,
    z0: &StateVector,
    trajectory: usize,
    t_final: f64,
    plan: &NoisePlan,
) -> Result<StateVector> {
    let generator = Generator::new(params, z0.space());
    let times = time_grid(plan.dt(), t_final)?;
    let mut z = z0.clone();
    for (k, w) in times.windows(2).enumerate() {
        let (alpha, beta) = drive.drives(w[0]);
        let (_, ok) = advance(&generator, plan, alpha, beta, w[1] - w[0], trajectory, k as u64, z.amplitudes_mut());
        if !ok {
            return Err(Error::NonFinite {
                trajectory,
                step: k as u64 + 1,
            });
        }
    }
    Ok(z)
}
