//! Artifact writers. Floats are written with 17 significant digits so that
//! every value reads back bit for bit.
//!
//! | file | columns |
//! |------|---------|
//! | `lorenz.csv` | `t,ReA,ImA,ReS,ImS,D,V,certified_rate` |
//! | `master.csv` | `t,ReA,ImA,ReS,ImS,D,N,purity,trace_error,min_eig,leakage` |
//! | `drives.csv` | `t,ReAlpha,ImAlpha,ReBeta,ImBeta` |
//! | `sse.csv` | see [`SSE_HEADER`] |
//!
//! `min_eig` is `NaN` at grid points where no spectrum was computed and
//! `certified_rate` is `NaN` when the parameters carry no certificate.
//!
//! `ensemble.bin` holds the final trajectory vectors as little-endian `f64`
//! pairs `(Re, Im)`, trajectory-major: amplitude `i` of trajectory `j` starts
//! at byte `16 (j·dim + i)`.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use mfl_core::lindblad::LaserParams;
use mfl_core::lorenz::{classify_equilibrium, decay_rate, lyapunov_value, LorenzSeries, Stability};
use mfl_core::master::MasterRun;
use mfl_core::sse::{SseRun, TrajectoryEnsemble};
use mfl_core::verify::{Check, VerificationReport};
use mfl_core::Complex64;
use serde_json::{json, Value};

pub const LORENZ_HEADER: &str = "t,ReA,ImA,ReS,ImS,D,V,certified_rate";
pub const MASTER_HEADER: &str = "t,ReA,ImA,ReS,ImS,D,N,purity,trace_error,min_eig,leakage";
pub const DRIVES_HEADER: &str = "t,ReAlpha,ImAlpha,ReBeta,ImBeta";
pub const SSE_HEADER: &str = "t,ReAlpha,ImAlpha,ReBeta,ImBeta,ReA,ImA,ReA_se,ImA_se,ReS,ImS,ReS_se,ImS_se,D,D_se,N,N_se,norm_sqr,norm_sqr_se";

fn row(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write!(out, "{v:.16e}").expect("writing to a String");
    }
    out.push('\n');
}

fn with_header(header: &str, capacity: usize) -> String {
    let mut s = String::with_capacity(capacity * 200);
    s.push_str(header);
    s.push('\n');
    s
}

pub fn lorenz_csv(params: &LaserParams, series: &LorenzSeries) -> String {
    let rate = match classify_equilibrium(params) {
        Stability::CertifiedStable => decay_rate(params),
        Stability::Uncertified => f64::NAN,
    };
    let mut out = with_header(LORENZ_HEADER, series.times.len());
    for (t, s) in series.times.iter().zip(&series.states) {
        row(
            &mut out,
            &[
                *t,
                s.field.re,
                s.field.im,
                s.polarization.re,
                s.polarization.im,
                s.inversion,
                lyapunov_value(params, s),
                rate,
            ],
        );
    }
    out
}

pub fn master_csv(run: &MasterRun) -> String {
    let mut out = with_header(MASTER_HEADER, run.records.len());
    for r in &run.records {
        let o = &r.observables;
        row(
            &mut out,
            &[
                r.t,
                o.field.re,
                o.field.im,
                o.polarization.re,
                o.polarization.im,
                o.inversion,
                o.photons,
                o.purity,
                r.trace_error,
                r.min_eig.unwrap_or(f64::NAN),
                o.leakage,
            ],
        );
    }
    out
}

pub fn drives_csv(samples: impl ExactSizeIterator<Item = (f64, Complex64, Complex64)>) -> String {
    let mut out = with_header(DRIVES_HEADER, samples.len());
    for (t, a, b) in samples {
        row(&mut out, &[t, a.re, a.im, b.re, b.im]);
    }
    out
}

pub fn master_drives_csv(run: &MasterRun) -> String {
    drives_csv(run.records.iter().map(|r| (r.t, r.alpha, r.beta)))
}

pub fn sse_csv(run: &SseRun) -> String {
    let mut out = with_header(SSE_HEADER, run.records.len());
    for r in &run.records {
        row(
            &mut out,
            &[
                r.t,
                r.alpha.re,
                r.alpha.im,
                r.beta.re,
                r.beta.im,
                r.field.mean.re,
                r.field.mean.im,
                r.field.se_re,
                r.field.se_im,
                r.polarization.mean.re,
                r.polarization.mean.im,
                r.polarization.se_re,
                r.polarization.se_im,
                r.inversion.mean,
                r.inversion.se,
                r.photons.mean,
                r.photons.se,
                r.norm_sqr.mean,
                r.norm_sqr.se,
            ],
        );
    }
    out
}

pub fn ensemble_bytes(ensemble: &TrajectoryEnsemble) -> Vec<u8> {
    let flat = ensemble.as_flat();
    let mut out = Vec::with_capacity(flat.len() * 16);
    for c in flat {
        out.extend_from_slice(&c.re.to_le_bytes());
        out.extend_from_slice(&c.im.to_le_bytes());
    }
    out
}

/// Inverse of [`ensemble_bytes`]: trajectory vectors of length `dim`.
pub fn read_ensemble_bytes(bytes: &[u8], dim: usize) -> io::Result<Vec<Vec<Complex64>>> {
    if dim == 0 || !bytes.len().is_multiple_of(16 * dim) {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "length is not a whole number of trajectories"));
    }
    let f = |b: &[u8]| f64::from_le_bytes(b.try_into().expect("8-byte chunk"));
    Ok(bytes
        .chunks(16 * dim)
        .map(|traj| traj.chunks(16).map(|c| Complex64::new(f(&c[..8]), f(&c[8..]))).collect())
        .collect())
}

pub fn params_json(p: &LaserParams) -> Value {
    json!({
        "omega": p.omega(),
        "g": p.g(),
        "kappa": p.kappa(),
        "kappa_plus": p.kappa_plus(),
        "kappa_minus": p.kappa_minus(),
        "gamma": p.gamma(),
        "d": p.d(),
    })
}

/// Non-finite numbers become `null` (JSON has no NaN or infinity).
fn number(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn check_json(c: &Check) -> Value {
    json!({
        "name": c.name,
        "identity": c.identity,
        "status": c.status.label(),
        "residual": number(c.residual),
        "tolerance": number(c.tolerance),
        "heuristic": c.heuristic,
        "context": c.context,
    })
}

pub fn report_json(report: &VerificationReport) -> Value {
    json!({
        "passed": report.passed(),
        "failed": report.failures().count(),
        "checks": report.checks.iter().map(check_json).collect::<Vec<_>>(),
    })
}

pub fn master_invariants_json(run: &MasterRun) -> Value {
    json!({
        "max_trace_error": number(run.max_trace_error()),
        "max_hermiticity_error": number(run.max_hermiticity_error()),
        "min_eigenvalue": run.min_eigenvalue().map_or(Value::Null, number),
        "max_leakage": number(run.max_leakage()),
    })
}

pub fn sse_json(run: &SseRun) -> Value {
    let last = run.records.last().expect("a run holds its initial record");
    json!({
        "route": match run.route {
            mfl_core::sse::SseRoute::Linear => "linear",
            mfl_core::sse::SseRoute::MeanField => "mean-field",
        },
        "trajectories": run.trajectories(),
        "seed": run.seed,
        "max_norm_deviation": number(run.max_norm_deviation()),
        "final_norm_sqr": number(last.norm_sqr.mean),
        "final_norm_sqr_se": number(last.norm_sqr.se),
    })
}

pub fn write_file(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> io::Result<()> {
    std::fs::write(dir.join(name), contents)
}

#[cfg(test)]
mod tests {
    use super::*;
    use mfl_core::lorenz::{integrate_lorenz, LorenzState};
    use mfl_core::verify::CheckStatus;

    #[test]
    fn floats_keep_seventeen_digits() {
        let mut s = String::new();
        row(&mut s, &[0.1, -1.0 / 3.0, f64::NAN]);
        let cells: Vec<&str> = s.trim_end().split(',').collect();
        assert_eq!(cells[0].parse::<f64>().unwrap().to_bits(), 0.1f64.to_bits());
        assert_eq!(cells[1].parse::<f64>().unwrap().to_bits(), (-1.0f64 / 3.0).to_bits());
        assert!(cells[2].parse::<f64>().unwrap().is_nan());
        assert_eq!(cells[0].split('e').next().unwrap().replace(['.', '-'], "").len(), 17);
    }

    #[test]
    fn lorenz_columns() {
        let p = LaserParams::desk();
        let s0 = LorenzState::new(Complex64::new(0.1, 0.0), Complex64::new(0.0, 0.1), 0.0);
        let series = integrate_lorenz(&p, s0, 0.1, 0.3).unwrap();
        let csv = lorenz_csv(&p, &series);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], LORENZ_HEADER);
        assert_eq!(lines.len(), 1 + series.times.len());
        let first: Vec<f64> = lines[1].split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(first.len(), 8);
        assert_eq!(first[6], lyapunov_value(&p, &s0));
        assert_eq!(first[7], 2.0);
    }

    #[test]
    fn ensemble_bytes_round_trip() {
        use mfl_core::hilbert::{SpaceDescriptor, StateVector};
        let space = SpaceDescriptor::new(1).unwrap();
        let a = StateVector::from_amplitudes(space, (0..4).map(|k| Complex64::new(k as f64, -0.5 * k as f64)).collect()).unwrap();
        let b = StateVector::basis(space, 2);
        let ens = TrajectoryEnsemble::from_states(&[a.clone(), b.clone()]).unwrap();
        let bytes = ensemble_bytes(&ens);
        assert_eq!(bytes.len(), 2 * 4 * 16);
        assert_eq!(&bytes[16..24], &1.0f64.to_le_bytes());
        let back = read_ensemble_bytes(&bytes, 4).unwrap();
        assert_eq!(back, vec![a.amplitudes().to_vec(), b.amplitudes().to_vec()]);
        assert!(read_ensemble_bytes(&bytes[1..], 4).is_err());
    }

    #[test]
    fn report_json_nulls_non_finite() {
        let mut r = VerificationReport::new();
        r.push(Check::new("x", "a = b", f64::NAN, 1.0, String::new()));
        let v = report_json(&r);
        assert_eq!(v["checks"][0]["residual"], Value::Null);
        assert_eq!(v["checks"][0]["status"], CheckStatus::Fail.label());
        assert_eq!(v["passed"], false);
    }
}
