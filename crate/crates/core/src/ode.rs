//! Fixed-step time grids and a classical fourth-order Runge–Kutta kernel.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Grid `0, dt, 2dt, …` ending exactly at `t_final`; the last step is
/// shortened when `t_final` is not a multiple of `dt`.
pub fn time_grid(dt: f64, t_final: f64) -> Result<Vec<f64>> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidStep(dt));
    }
    if !(t_final.is_finite() && t_final >= 0.0) {
        return Err(Error::InvalidHorizon(t_final));
    }
    let ratio = t_final / dt;
    let mut full = ratio as usize;
    // Absorb representation error: 2.0 / 1e-3 is not exactly 2000.
    if (ratio - (full as f64 + 1.0)).abs() <= 1e-9 * ratio.max(1.0) {
        full += 1;
    }
    let mut times: Vec<f64> = (0..=full).map(|k| k as f64 * dt).collect();
    let last = *times.last().expect("grid starts at 0");
    if t_final - last > 1e-9 * dt {
        times.push(t_final);
    } else if let Some(end) = times.last_mut() {
        *end = t_final;
    }
    Ok(times)
}

/// One RK4 step of `y' = f(t, y)`.
pub fn rk4_step<const N: usize>(f: impl Fn(f64, &[f64; N]) -> [f64; N], t: f64, y: &[f64; N], h: f64) -> [f64; N] {
    let axpy = |a: &[f64; N], s: f64, b: &[f64; N]| -> [f64; N] { core::array::from_fn(|i| a[i] + s * b[i]) };
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, &axpy(y, 0.5 * h, &k1));
    let k3 = f(t + 0.5 * h, &axpy(y, 0.5 * h, &k2));
    let k4 = f(t + h, &axpy(y, h, &k3));
    core::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_lands_on_horizon() {
        let g = time_grid(1e-3, 2.0).unwrap();
        assert_eq!(g.len(), 2001);
        assert_eq!(*g.last().unwrap(), 2.0);
        let g = time_grid(0.3, 1.0).unwrap();
        assert_eq!(g.len(), 5);
        assert!((g[3] - 0.9).abs() < 1e-15);
        assert_eq!(g[4], 1.0);
        assert_eq!(time_grid(0.1, 0.0).unwrap(), [0.0]);
        assert!(time_grid(0.0, 1.0).is_err());
        assert!(time_grid(-1.0, 1.0).is_err());
        assert!(time_grid(0.1, -1.0).is_err());
    }

    #[test]
    fn rk4_is_exact_on_cubics_and_fourth_order_on_exponential() {
        let y = rk4_step(|t, _: &[f64; 1]| [3.0 * t * t], 1.0, &[1.0], 0.5);
        assert!((y[0] - 1.5f64.powi(3)).abs() < 1e-14);
        let err = |h: f64| {
            let mut y = [1.0];
            let n = (1.0 / h).round() as usize;
            for k in 0..n {
                y = rk4_step(|_, y: &[f64; 1]| [-y[0]], k as f64 * h, &y, h);
            }
            (y[0] - (-1.0f64).exp()).abs()
        };
        let order = (err(0.1) / err(0.05)).log2();
        assert!((order - 4.0).abs() < 0.2, "order {order}");
    }
}
