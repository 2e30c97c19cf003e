//! Maxwell–Bloch (complex Lorenz) equations for the field mean `A`, the
//! polarization `S` and the inversion `D`:
//!
//! ```text
//! A' = −(κ + iω) A + g S
//! S' = −(γ + iω) S + g A D
//! D' = −4g Re(Ā S) − 2γ (D − d)
//! ```
//!
//! Integrated with fixed-step RK4 on the five real components
//! `(Re A, Im A, Re S, Im S, D)`, together with the two quadratic Lyapunov
//! functionals that certify convergence to the equilibrium `(0, 0, d)`.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::Result;
use crate::hilbert::{expectation, OperatorMatrix, OperatorSet};
use crate::lindblad::LaserParams;
use crate::math;
use crate::ode::{rk4_step, time_grid};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorenzState {
    /// `A = tr(aρ)`.
    pub field: Complex64,
    /// `S = tr(σ⁻ρ)`.
    pub polarization: Complex64,
    /// `D = tr(σ³ρ)`.
    pub inversion: f64,
}

impl LorenzState {
    pub fn new(field: Complex64, polarization: Complex64, inversion: f64) -> Self {
        Self {
            field,
            polarization,
            inversion,
        }
    }

    /// The equilibrium `(0, 0, d)`.
    pub fn equilibrium(params: &LaserParams) -> Self {
        Self::new(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), params.d())
    }

    /// Mean values `(tr aρ, tr σ⁻ρ, tr σ³ρ)` of a density matrix.
    pub fn from_density(ops: &OperatorSet, rho: &OperatorMatrix) -> Result<Self> {
        Ok(Self::new(
            expectation(&ops.a, rho)?,
            expectation(&ops.sigma_minus, rho)?,
            expectation(&ops.sigma_3, rho)?.re,
        ))
    }

    pub fn to_array(self) -> [f64; 5] {
        [self.field.re, self.field.im, self.polarization.re, self.polarization.im, self.inversion]
    }

    pub fn from_array(y: [f64; 5]) -> Self {
        Self::new(Complex64::new(y[0], y[1]), Complex64::new(y[2], y[3]), y[4])
    }

    /// `|A| + |S| + |D − d|`.
    pub fn distance_to_equilibrium(&self, params: &LaserParams) -> f64 {
        self.field.norm() + self.polarization.norm() + math::abs(self.inversion - params.d())
    }
}

/// Time derivative of the state.
pub fn lorenz_rhs(params: &LaserParams, state: &LorenzState) -> LorenzState {
    let (a, s, d) = (state.field, state.polarization, state.inversion);
    let kappa = Complex64::new(params.kappa(), params.omega());
    let gamma = Complex64::new(params.gamma(), params.omega());
    let g = params.g();
    LorenzState::new(
        -kappa * a + s * g,
        -gamma * s + a * (g * d),
        -4.0 * g * (a.conj() * s).re - 2.0 * params.gamma() * (d - params.d()),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct LorenzSeries {
    pub times: Vec<f64>,
    pub states: Vec<LorenzState>,
}

impl LorenzSeries {
    pub fn last(&self) -> &LorenzState {
        self.states.last().expect("series holds the initial state")
    }
}

/// RK4 with fixed step `dt`, emitting every step; the last step is shortened
/// to land on `t_final`.
pub fn integrate_lorenz(params: &LaserParams, state0: LorenzState, dt: f64, t_final: f64) -> Result<LorenzSeries> {
    let times = time_grid(dt, t_final)?;
    let f = |_: f64, y: &[f64; 5]| lorenz_rhs(params, &LorenzState::from_array(*y)).to_array();
    let mut states = Vec::with_capacity(times.len());
    let mut y = state0.to_array();
    states.push(state0);
    for w in times.windows(2) {
        y = rk4_step(f, w[0], &y, w[1] - w[0]);
        states.push(LorenzState::from_array(y));
    }
    Ok(LorenzSeries { times, states })
}

/// Lyapunov functional matching the sign of `d`:
///
/// * `d < 0`: `4|d||A|² + 4|S|² + (D − d)²`
/// * `d ≥ 0`: `|A|² + g²/(γκ) |S|² + g²/(4γκ) (D − d)²`
pub fn lyapunov_value(params: &LaserParams, state: &LorenzState) -> f64 {
    let d = params.d();
    let dev = state.inversion - d;
    let a2 = state.field.norm_sqr();
    let s2 = state.polarization.norm_sqr();
    if d < 0.0 {
        4.0 * math::abs(d) * a2 + 4.0 * s2 + dev * dev
    } else {
        let c = params.g() * params.g() / (params.gamma() * params.kappa());
        a2 + c * s2 + 0.25 * c * dev * dev
    }
}

/// Exponential rate at which [`lyapunov_value`] is guaranteed to decay.
/// Nonpositive values certify nothing.
pub fn decay_rate(params: &LaserParams) -> f64 {
    let d = params.d();
    let (kappa, gamma) = (params.kappa(), params.gamma());
    if d < 0.0 {
        2.0 * kappa.min(gamma)
    } else {
        let g2d = params.g() * params.g() * d;
        (kappa - g2d / gamma).min(gamma - g2d / kappa)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    CertifiedStable,
    Uncertified,
}

pub fn classify_equilibrium(params: &LaserParams) -> Stability {
    let d = params.d();
    if d < 0.0 || params.g() * params.g() * d < params.kappa() * params.gamma() {
        Stability::CertifiedStable
    } else {
        Stability::Uncertified
    }
}

/// Co-rotating variables `X = e^{iωt} A`, `Y = e^{iωt} S`, `Z = D − d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotatingFrame {
    pub x: Complex64,
    pub y: Complex64,
    pub z: f64,
}

pub fn rotating_frame(state: &LorenzState, t: f64, params: &LaserParams) -> RotatingFrame {
    let phase = math::cis(params.omega() * t);
    RotatingFrame {
        x: phase * state.field,
        y: phase * state.polarization,
        z: state.inversion - params.d(),
    }
}

pub fn from_rotating_frame(frame: &RotatingFrame, t: f64, params: &LaserParams) -> LorenzState {
    let phase = math::cis(-params.omega() * t);
    LorenzState::new(phase * frame.x, phase * frame.y, frame.z + params.d())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn params(omega: f64, g: f64, kappa: f64, gamma: f64, d: f64) -> LaserParams {
        LaserParams::from_gamma_d(omega, g, kappa, gamma, d).unwrap()
    }

    fn max_diff(a: &LorenzState, b: &LorenzState) -> f64 {
        a.to_array().iter().zip(b.to_array()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn equilibrium_is_fixed_point() {
        let p = LaserParams::desk();
        let r = lorenz_rhs(&p, &LorenzState::equilibrium(&p));
        assert_eq!(r.to_array(), [0.0; 5]);
        let series = integrate_lorenz(&p, LorenzState::equilibrium(&p), 0.01, 1.0).unwrap();
        assert!(series.states.iter().all(|s| *s == LorenzState::equilibrium(&p)));
    }

    #[test]
    fn rhs_hand_evaluations() {
        let p = params(0.0, 0.8, 1.0, 2.0, -0.2);
        let r = lorenz_rhs(&p, &LorenzState::new(c(1.0, 0.0), c(0.0, 0.0), 0.0));
        // D' = −2γ(D − d) = −2·2·0.2.
        let expected = [-1.0, 0.0, 0.0, 0.0, -0.8];
        for (x, e) in r.to_array().iter().zip(expected) {
            assert!((x - e).abs() < 1e-15);
        }
        let p = LaserParams::desk();
        let r = lorenz_rhs(&p, &LorenzState::new(c(0.0, 0.0), c(1.0, 0.0), p.d()));
        assert_eq!(r.field, c(0.8, 0.0));
        assert_eq!(r.polarization, -c(2.0, 0.5));
        assert_eq!(r.inversion, 0.0);
    }

    #[test]
    fn matches_refined_reference() {
        let p = params(0.5, 0.8, 1.0, 2.0, -0.2);
        let s0 = LorenzState::new(c(1.0, 0.0), c(0.0, 0.5), 0.1);
        let coarse = integrate_lorenz(&p, s0, 1e-3, 1.0).unwrap();
        let fine = integrate_lorenz(&p, s0, 1e-5, 1.0).unwrap();
        assert_eq!(coarse.times.last(), Some(&1.0));
        assert!(max_diff(coarse.last(), fine.last()) < 1e-8);
    }

    #[test]
    fn step_halving_error_scales_as_fourth_power() {
        let p = params(0.5, 0.8, 1.0, 2.0, -0.2);
        let s0 = LorenzState::new(c(1.0, 0.0), c(0.0, 0.5), 0.1);
        let scaled: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
            .iter()
            .map(|&dt| {
                let e = max_diff(
                    integrate_lorenz(&p, s0, dt, 1.0).unwrap().last(),
                    integrate_lorenz(&p, s0, dt / 2.0, 1.0).unwrap().last(),
                );
                e / dt.powi(4)
            })
            .collect();
        let hi = scaled.iter().cloned().fold(0.0, f64::max);
        let lo = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(hi / lo <= 4.0, "{scaled:?}");
    }

    #[test]
    fn stable_regime_contracts() {
        let p = LaserParams::desk();
        let s0 = LorenzState::new(c(1.5, -0.5), c(0.3, 0.4), 0.9);
        let rate = decay_rate(&p);
        let series = integrate_lorenz(&p, s0, 1e-3, 5.0 / rate).unwrap();
        let dist = |s: &LorenzState| (s.field.norm_sqr() + s.polarization.norm_sqr() + (s.inversion - p.d()).powi(2)).sqrt();
        assert!(dist(series.last()) < dist(&s0));
    }

    #[test]
    fn lyapunov_examples() {
        let p = LaserParams::desk();
        assert_eq!(lyapunov_value(&p, &LorenzState::equilibrium(&p)), 0.0);
        let v = lyapunov_value(&p, &LorenzState::new(c(1.0, 0.0), c(1.0, 0.0), p.d()));
        assert!((v - 4.8).abs() < 1e-14);
        assert_eq!(decay_rate(&p), 2.0);
        let q = params(0.5, 0.5, 1.0, 2.0, 0.3);
        assert!((decay_rate(&q) - 0.9625).abs() < 1e-14);
    }

    #[test]
    fn classification_examples() {
        assert_eq!(classify_equilibrium(&LaserParams::desk()), Stability::CertifiedStable);
        assert_eq!(classify_equilibrium(&params(0.5, 0.5, 1.0, 2.0, 0.3)), Stability::CertifiedStable);
        let hot = params(0.5, 3.0, 1.0, 2.0, 0.9);
        assert_eq!(classify_equilibrium(&hot), Stability::Uncertified);
        assert!(decay_rate(&hot) <= 0.0);
    }

    #[test]
    fn certified_decay_along_trajectories() {
        for p in [LaserParams::desk(), params(0.5, 0.5, 1.0, 2.0, 0.3)] {
            let rate = decay_rate(&p);
            for s0 in [
                LorenzState::new(c(1.0, 0.0), c(0.0, 0.5), 0.1),
                LorenzState::new(c(-2.0, 1.0), c(0.7, -0.7), -1.0),
                LorenzState::new(c(0.0, 0.0), c(0.0, 0.0), 1.0),
            ] {
                let series = integrate_lorenz(&p, s0, 1e-3, 10.0).unwrap();
                let v0 = lyapunov_value(&p, &s0);
                for (t, s) in series.times.iter().zip(&series.states) {
                    assert!(lyapunov_value(&p, s) <= v0 * (-rate * t).exp() * (1.0 + 1e-6));
                }
            }
        }
    }

    #[test]
    fn rotating_frame_basics() {
        let p = LaserParams::desk();
        let s = LorenzState::new(c(0.3, -1.2), c(0.5, 0.1), 0.4);
        let f0 = rotating_frame(&s, 0.0, &p);
        assert_eq!((f0.x, f0.y, f0.z), (s.field, s.polarization, s.inversion - p.d()));
        for t in [0.0, 0.7, 3.1, 100.0] {
            let f = rotating_frame(&s, t, &p);
            assert!((f.x.norm() - s.field.norm()).abs() < 1e-14);
            assert!(max_diff(&from_rotating_frame(&f, t, &p), &s) < 1e-14);
        }
    }

    #[test]
    fn rotating_frame_removes_detuning() {
        // In co-rotating variables the dynamics do not depend on ω.
        let p = params(0.9, 0.8, 1.0, 2.0, -0.2);
        let p0 = params(0.0, 0.8, 1.0, 2.0, -0.2);
        let s0 = LorenzState::new(c(1.0, 0.2), c(-0.3, 0.5), 0.2);
        let rotated = integrate_lorenz(&p, s0, 1e-3, 3.0).unwrap();
        let still = integrate_lorenz(&p0, s0, 1e-3, 3.0).unwrap();
        for ((t, a), b) in rotated.times.iter().zip(&rotated.states).zip(&still.states) {
            let f = rotating_frame(a, *t, &p);
            assert!((f.x - b.field).norm() < 1e-10);
            assert!((f.y - b.polarization).norm() < 1e-10);
            assert!((f.z - (b.inversion - p.d())).abs() < 1e-10);
        }
    }

    proptest! {
        #[test]
        fn lyapunov_is_nonnegative(ar in -3.0..3.0f64, ai in -3.0..3.0f64, sr in -1.0..1.0f64, si in -1.0..1.0f64, d in -1.0..1.0f64, dp in -0.95..0.95f64) {
            let p = params(0.5, 0.8, 1.0, 2.0, dp);
            prop_assert!(lyapunov_value(&p, &LorenzState::new(c(ar, ai), c(sr, si), d)) >= 0.0);
        }
    }
}
