//! The full oracle suite behind the `verify-all` scenario, and the pieces it
//! is assembled from.

use mfl_core::hilbert::{trace_distance, HERMITIAN_TOL};
use mfl_core::lindblad::{build_gksl, LaserParams, MeanFieldDrive};
use mfl_core::lorenz::{integrate_lorenz, LorenzSeries};
use mfl_core::master::{
    initial_lorenz_state, integrate_meanfield_direct, integrate_meanfield_via_lorenz, lorenz_drive, DensityMatrix, MasterOptions, MasterRun,
    DENSITY_EIGEN_FLOOR, DENSITY_TRACE_TOL,
};
use mfl_core::rng::NoisePlan;
use mfl_core::sse::{simulate_meanfield_sse, Executor, SseOptions, SseRun};
use mfl_core::verify::{
    check_duality_pairing, check_ehrenfest, check_equilibrium_convergence, check_generator_identities, check_lorenz_master_agreement, check_lyapunov,
    check_regularity, check_route_equivalence, check_sse_drives, Check, PairingObservable, VerificationReport,
};

pub const AGREEMENT_TOL: f64 = 1e-5;
pub const ROUTE_TOL: f64 = 1e-6;
pub const LYAPUNOV_REL_TOL: f64 = 1e-6;
pub const CONVERGENCE_TOL: f64 = 1e-6;
pub const CONVERGENCE_BY: f64 = 25.0;
pub const REGULARITY_FACTOR: f64 = 10.0;
pub const N_SE: f64 = 3.0;
pub const RECONSTRUCTION_TOL: f64 = 0.05;
pub const GENERATOR_TIMES: usize = 10;
pub const GENERATOR_VECTORS: usize = 100;
pub const PERTURBATION: f64 = 1.1;

/// `100 dt²`: the centered stencil is second order and its constant at desk
/// scale stays well below 100.
pub fn ehrenfest_tolerance(dt: f64) -> f64 {
    100.0 * dt * dt
}

/// Times at which stochastic and deterministic states are compared.
pub fn sample_times(t_final: f64) -> Vec<f64> {
    let mut ts: Vec<f64> = [0.5, 1.0, 2.0].into_iter().filter(|&t| t <= t_final + 1e-12).collect();
    if ts.is_empty() {
        ts.push(t_final);
    }
    ts
}

/// Master options keeping the states at every sample time when the grid
/// allows it.
pub fn master_options(leakage_bound: f64, dt: f64, t_final: f64) -> MasterOptions {
    let ts = sample_times(t_final);
    let steps: Vec<f64> = ts.iter().map(|t| t / dt).collect();
    let on_grid = steps.iter().all(|s| (s - s.round()).abs() < 1e-9);
    let stride = if on_grid {
        steps.iter().map(|s| s.round() as usize).fold(0, gcd).max(1)
    } else {
        usize::MAX
    };
    MasterOptions {
        leakage_bound,
        snapshot_every: stride,
        eig_every: 1,
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Param {
    Omega,
    G,
    Kappa,
    KappaPlus,
    KappaMinus,
}

impl Param {
    pub const ALL: [Param; 5] = [Param::Omega, Param::G, Param::Kappa, Param::KappaPlus, Param::KappaMinus];

    pub fn name(self) -> &'static str {
        match self {
            Param::Omega => "omega",
            Param::G => "g",
            Param::Kappa => "kappa",
            Param::KappaPlus => "kappa_plus",
            Param::KappaMinus => "kappa_minus",
        }
    }
}

/// `params` with one rate multiplied by `factor`.
pub fn perturb(params: &LaserParams, which: Param, factor: f64) -> mfl_core::Result<LaserParams> {
    let mut v = [params.omega(), params.g(), params.kappa(), params.kappa_plus(), params.kappa_minus()];
    v[Param::ALL.iter().position(|&p| p == which).expect("listed")] *= factor;
    LaserParams::new(v[0], v[1], v[2], v[3], v[4])
}

/// Passes iff `perturbed` (an agreement check run across mismatched
/// parameters) fails.
pub fn negative_control(name: &str, perturbed: &VerificationReport) -> Check {
    let worst = perturbed
        .checks
        .iter()
        .map(|c| c.residual / c.tolerance)
        .fold(0.0f64, |m, r| if r.is_nan() { f64::INFINITY } else { m.max(r) });
    let flipped = !perturbed.passed();
    Check::new(
        name,
        "a mismatched parameter must break agreement",
        if flipped { 0.0 } else { 1.0 },
        0.5,
        format!(
            "perturbed run: worst residual/tolerance = {worst:.3e}; {}",
            if flipped { "fails as it should" } else { "still passes" }
        ),
    )
}

/// Trace, Hermiticity and spectrum bounds over every recorded grid point.
pub fn master_invariant_checks(run: &MasterRun) -> VerificationReport {
    let mut r = VerificationReport::new();
    let label = run.route.name();
    r.push(Check::new(
        &format!("{label}: trace"),
        "tr ρ_t = 1",
        run.max_trace_error(),
        DENSITY_TRACE_TOL,
        format!("max |tr ρ − 1| over {} grid points", run.records.len()),
    ));
    r.push(Check::new(
        &format!("{label}: hermiticity"),
        "ρ_t = ρ_t†",
        run.max_hermiticity_error(),
        HERMITIAN_TOL,
        "max entry of |ρ − ρ†|".into(),
    ));
    let checked = run.records.iter().filter(|x| x.min_eig.is_some()).count();
    r.push(match run.min_eigenvalue() {
        Some(m) => Check::new(
            &format!("{label}: positivity"),
            "ρ_t ≥ 0",
            -m,
            -DENSITY_EIGEN_FLOOR,
            format!("smallest eigenvalue {m:.3e} over {checked} spectra"),
        ),
        None => Check::not_applicable(&format!("{label}: positivity"), "ρ_t ≥ 0", "no spectra recorded".into()),
    });
    r
}

pub fn generator_checks<D: MeanFieldDrive>(params: LaserParams, drive: D, rho0: &DensityMatrix, t_final: f64, seed: u64) -> VerificationReport {
    let ops = build_gksl(params, drive, rho0.space());
    let times: Vec<f64> = (0..GENERATOR_TIMES).map(|k| t_final * k as f64 / (GENERATOR_TIMES - 1) as f64).collect();
    check_generator_identities(&ops, &times, GENERATOR_VECTORS, seed)
}

/// Lyapunov decay and convergence on a Lorenz series long enough to reach
/// [`CONVERGENCE_BY`].
pub fn lorenz_certificate_checks(params: &LaserParams, rho0: &DensityMatrix, dt: f64, t_final: f64) -> mfl_core::Result<VerificationReport> {
    let s0 = initial_lorenz_state(params, rho0)?;
    let long = integrate_lorenz(params, s0, dt, t_final.max(CONVERGENCE_BY))?;
    let mut r = check_lyapunov(&long, params, LYAPUNOV_REL_TOL);
    r.extend(check_equilibrium_convergence(&long, params, CONVERGENCE_BY, CONVERGENCE_TOL));
    Ok(r)
}

/// `max_t |E‖Z_t‖² − 1| / SE_t`.
pub fn check_norm_martingale(run: &SseRun, n_se: f64) -> Check {
    let mut worst = 0.0f64;
    let mut at = 0.0;
    for r in &run.records {
        let dev = (r.norm_sqr.mean - 1.0).abs();
        let z = if dev <= 1e-12 { 0.0 } else { dev / r.norm_sqr.se };
        if !(z <= worst) {
            worst = z;
            at = r.t;
        }
    }
    Check::new(
        "sse norm martingale",
        "E‖Z_t‖² = 1",
        worst,
        n_se,
        format!(
            "max over the grid in ensemble standard errors, attained at t = {at:.4}; max |E‖Z‖² − 1| = {:.3e}; M = {}",
            run.max_norm_deviation(),
            run.trajectories()
        ),
    )
}

/// Trace distance between the ensemble estimate `(1/M) Σ |Z⟩⟨Z|` and the
/// deterministic state at each stored time.
pub fn check_reconstruction(master: &MasterRun, run: &SseRun, tolerance: f64) -> mfl_core::Result<Check> {
    let mut worst = 0.0f64;
    let mut detail = String::new();
    let mut compared = 0;
    for snap in &run.snapshots {
        if let Some(rho) = master.state_at(snap.t) {
            let d = trace_distance(&snap.rho, rho.matrix())?;
            worst = worst.max(d);
            compared += 1;
            detail.push_str(&format!(" t={}: {d:.3e};", snap.t));
        }
    }
    const NAME: &str = "sse reconstruction";
    const IDENTITY: &str = "ρ_t = E|Z_t⟩⟨Z_t|";
    Ok(if compared == 0 {
        Check::not_applicable(NAME, IDENTITY, "no common stored times".into())
    } else {
        Check::new(NAME, IDENTITY, worst, tolerance, format!("trace distance, M = {};{detail}", run.trajectories()))
    })
}

/// Stochastic checks of one mean-field ensemble against the deterministic
/// routes.
pub fn sse_checks(master: &MasterRun, series: &LorenzSeries, run: &SseRun, times: &[f64]) -> mfl_core::Result<VerificationReport> {
    let mut r = check_duality_pairing(master, std::slice::from_ref(run), &PairingObservable::DEFAULT, times, N_SE)?;
    r.extend(check_sse_drives(run, series, N_SE)?);
    r.push(check_norm_martingale(run, N_SE));
    r.push(check_reconstruction(master, run, RECONSTRUCTION_TOL)?);
    Ok(r)
}

/// Runs `attempt(seed)` and, if its report fails, once more with `seed + 1`.
/// A check fails only when it fails on both seeds; retried checks say so in
/// their context. Returns the first attempt's payload.
pub fn two_seed<T>(seed: u64, mut attempt: impl FnMut(u64) -> mfl_core::Result<(T, VerificationReport)>) -> mfl_core::Result<(T, VerificationReport)> {
    let (first, report) = attempt(seed)?;
    if report.passed() {
        return Ok((first, report));
    }
    let (_, retry) = attempt(seed.wrapping_add(1))?;
    let merged = report
        .checks
        .into_iter()
        .map(|c| {
            if c.passed() {
                return c;
            }
            match retry.get(&c.name) {
                Some(second) => {
                    let mut second = second.clone();
                    second.context = format!(
                        "seed {seed} failed (residual {:.3e}); seed {}: {}",
                        c.residual,
                        seed.wrapping_add(1),
                        second.context
                    );
                    second
                }
                None => c,
            }
        })
        .collect();
    Ok((first, VerificationReport { checks: merged }))
}

pub struct Suite {
    pub report: VerificationReport,
    pub direct: MasterRun,
    pub via: MasterRun,
    pub series: LorenzSeries,
    pub sse: SseRun,
}

pub struct SuiteConfig {
    pub params: LaserParams,
    pub dt: f64,
    pub t_final: f64,
    pub trajectories: usize,
    pub seed: u64,
    pub leakage_bound: f64,
}

pub fn verify_all<E: Executor>(cfg: &SuiteConfig, rho0: &DensityMatrix, executor: &E) -> mfl_core::Result<Suite> {
    let p = cfg.params;
    let (dt, t_final) = (cfg.dt, cfg.t_final);
    let opts = master_options(cfg.leakage_bound, dt, t_final);
    let times = sample_times(t_final);
    let mut report = VerificationReport::new();

    let direct = integrate_meanfield_direct(p, rho0, dt, t_final, &opts)?;
    let (via, series) = integrate_meanfield_via_lorenz(p, rho0, dt, t_final, &opts)?;

    report.extend(generator_checks(p, lorenz_drive(&p, &series)?, rho0, t_final, cfg.seed));
    report.extend(master_invariant_checks(&direct));
    report.extend(master_invariant_checks(&via));
    report.extend(check_ehrenfest(&direct, ehrenfest_tolerance(dt))?);
    report.extend(check_ehrenfest(&via, ehrenfest_tolerance(dt))?);
    report.extend(check_lorenz_master_agreement(&direct, &series, AGREEMENT_TOL)?);
    report.extend(check_route_equivalence(p, p, rho0, dt, t_final, ROUTE_TOL)?);
    report.extend(lorenz_certificate_checks(&p, rho0, dt, t_final)?);
    for pw in [1, 2] {
        report.extend(check_regularity(&direct, pw, REGULARITY_FACTOR));
    }

    let sse_opts = SseOptions { snapshot_times: times.clone() };
    let (sse, stochastic) = two_seed(cfg.seed, |seed| {
        let plan = NoisePlan::new(seed, cfg.trajectories, dt);
        let run = simulate_meanfield_sse(p, rho0, t_final, &plan, &sse_opts, executor)?;
        let r = sse_checks(&direct, &series, &run, &times)?;
        Ok((run, r))
    })?;
    report.extend(stochastic);

    let pg = perturb(&p, Param::G, PERTURBATION)?;
    let mut misreported = direct.clone();
    misreported.params = pg;
    report.push(negative_control(
        "negative control: ehrenfest with g × 1.1",
        &check_ehrenfest(&misreported, ehrenfest_tolerance(dt))?,
    ));
    let s0 = initial_lorenz_state(&pg, rho0)?;
    let series_g = integrate_lorenz(&pg, s0, dt, t_final)?;
    report.push(negative_control(
        "negative control: lorenz-master agreement with g × 1.1",
        &check_lorenz_master_agreement(&direct, &series_g, AGREEMENT_TOL)?,
    ));
    report.push(negative_control(
        "negative control: route equivalence with g × 1.1",
        &check_route_equivalence(p, pg, rho0, dt, t_final, ROUTE_TOL)?,
    ));

    Ok(Suite {
        report,
        direct,
        via,
        series,
        sse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use mfl_core::verify::CheckStatus;

    #[test]
    fn snapshot_stride_hits_sample_times() {
        assert_eq!(master_options(1e-6, 1e-3, 2.0).snapshot_every, 500);
        assert_eq!(master_options(1e-6, 1e-3, 0.7).snapshot_every, 500);
        assert_eq!(master_options(1e-6, 0.3, 2.0).snapshot_every, usize::MAX);
        assert_eq!(sample_times(0.2), vec![0.2]);
    }

    #[test]
    fn perturb_touches_one_rate() {
        let p = LaserParams::desk();
        let q = perturb(&p, Param::KappaMinus, 1.1).unwrap();
        assert_eq!((q.omega(), q.g(), q.kappa(), q.kappa_plus()), (p.omega(), p.g(), p.kappa(), p.kappa_plus()));
        assert!((q.kappa_minus() - 1.1 * p.kappa_minus()).abs() < 1e-15);
    }

    #[test]
    fn negative_control_inverts() {
        let mut failing = VerificationReport::new();
        failing.push(Check::new("a", "x", 2.0, 1.0, String::new()));
        assert!(negative_control("nc", &failing).passed());
        let mut passing = VerificationReport::new();
        passing.push(Check::new("a", "x", 0.5, 1.0, String::new()));
        assert_eq!(negative_control("nc", &passing).status, CheckStatus::Fail);
    }

    #[test]
    fn two_seed_policy() {
        let verdict = |fail_on: &'static [u64]| {
            move |seed: u64| {
                let residual = if fail_on.contains(&seed) { 5.0 } else { 1.0 };
                let mut r = VerificationReport::new();
                r.push(Check::new("s", "x", residual, 3.0, String::new()));
                Ok((seed, r))
            }
        };
        let (first, r) = two_seed(10, verdict(&[])).unwrap();
        assert!(r.passed() && first == 10);
        let (first, r) = two_seed(10, verdict(&[10])).unwrap();
        assert!(r.passed() && first == 10);
        assert!(r.checks[0].context.contains("seed 10 failed"));
        let (_, r) = two_seed(10, verdict(&[10, 11])).unwrap();
        assert!(!r.passed());
    }
}
