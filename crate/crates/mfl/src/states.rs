//! Initial-state presets and the custom density-matrix text format.
//!
//! A custom file holds the `dim × dim` matrix in row-major order, entries
//! written as `re,im` and separated by whitespace (line breaks are not
//! significant). `#` starts a comment. The dimension must be `2(n_max+1)`
//! with basis index `2n + q`, `q = 0` the upper atomic level.

use std::path::Path;

use mfl_core::hilbert::{OperatorMatrix, SpaceDescriptor, LOWER};
use mfl_core::lindblad::LaserParams;
use mfl_core::master::DensityMatrix;
use mfl_core::states::{coherent_state, fock_ground, vacuum_atom_steady, vacuum_ground, vacuum_mixed};
use mfl_core::Complex64;

use crate::config::InitialState;

#[derive(Debug, thiserror::Error)]
pub enum StateError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: bad entry `{token}` (expected re,im)")]
    Entry { line: usize, token: String },
    #[error("matrix has {found} entries, expected {expected} for n_max = {n_max}")]
    Size { found: usize, expected: usize, n_max: usize },
    #[error(transparent)]
    Core(#[from] mfl_core::Error),
}

pub fn parse_density_text(text: &str, space: SpaceDescriptor) -> Result<DensityMatrix, StateError> {
    let mut data = Vec::with_capacity(space.dim() * space.dim());
    for (i, line) in text.lines().enumerate() {
        let content = line.split('#').next().unwrap_or("");
        for token in content.split_whitespace() {
            let bad = || StateError::Entry {
                line: i + 1,
                token: token.into(),
            };
            let (re, im) = token.split_once(',').ok_or_else(bad)?;
            let re: f64 = re.parse().map_err(|_| bad())?;
            let im: f64 = im.parse().map_err(|_| bad())?;
            data.push(Complex64::new(re, im));
        }
    }
    let expected = space.dim() * space.dim();
    if data.len() != expected {
        return Err(StateError::Size {
            found: data.len(),
            expected,
            n_max: space.n_max(),
        });
    }
    Ok(DensityMatrix::new(OperatorMatrix::from_row_major(space, data)?)?)
}

pub fn load_density_text(path: &Path, space: SpaceDescriptor) -> Result<DensityMatrix, StateError> {
    let text = std::fs::read_to_string(path).map_err(|source| StateError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_density_text(&text, space)
}

/// Writes `rho` in the format [`parse_density_text`] reads, one row per line.
pub fn format_density_text(rho: &OperatorMatrix) -> String {
    let dim = rho.dim();
    let mut out = format!("# {dim}x{dim} density matrix, row-major re,im\n");
    for row in rho.as_slice().chunks(dim) {
        let cells: Vec<String> = row.iter().map(|c| format!("{:.16e},{:.16e}", c.re, c.im)).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}

pub fn build_initial(initial: &InitialState, space: SpaceDescriptor, params: &LaserParams) -> Result<DensityMatrix, StateError> {
    let lower = {
        let mut atom = [Complex64::new(0.0, 0.0); 2];
        atom[LOWER] = Complex64::new(1.0, 0.0);
        atom
    };
    Ok(match initial {
        InitialState::VacuumGround => vacuum_ground(space),
        InitialState::VacuumAtomSteady => vacuum_atom_steady(space, params.d())?,
        InitialState::FockGround(n) => fock_ground(space, *n)?,
        InitialState::Mixed(p) => vacuum_mixed(space, *p)?,
        InitialState::CoherentGround(re, im) => DensityMatrix::from_pure(&coherent_state(space, Complex64::new(*re, *im), lower)?)?,
        InitialState::File(path) => load_density_text(path, space)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use mfl_core::hilbert::{frobenius_distance, UPPER};

    #[test]
    fn custom_text_round_trip() {
        let space = SpaceDescriptor::new(3).unwrap();
        let rho = build_initial(&InitialState::CoherentGround(0.4, 0.2), space, &LaserParams::desk()).unwrap();
        let back = parse_density_text(&format_density_text(rho.matrix()), space).unwrap();
        assert!(frobenius_distance(rho.matrix(), back.matrix()).unwrap() < 1e-15);
    }

    #[test]
    fn custom_text_diagnostics() {
        let space = SpaceDescriptor::new(1).unwrap();
        let err = parse_density_text("1,0 0,0\n0,0 x\n", space).unwrap_err();
        assert!(matches!(err, StateError::Entry { line: 2, .. }));
        let err = parse_density_text("1,0 0,0", space).unwrap_err();
        assert!(matches!(err, StateError::Size { found: 2, expected: 16, .. }));
        // Hermitian, unit trace but not positive.
        let text = "1,0 0,0 0,0 0,0\n0,0 1,0 0,0 0,0\n0,0 0,0 -1,0 0,0\n0,0 0,0 0,0 0,0\n";
        assert!(matches!(parse_density_text(text, space).unwrap_err(), StateError::Core(_)));
    }

    #[test]
    fn presets_are_density_matrices() {
        let space = SpaceDescriptor::new(4).unwrap();
        let p = LaserParams::desk();
        for s in [
            InitialState::VacuumGround,
            InitialState::VacuumAtomSteady,
            InitialState::FockGround(2),
            InitialState::Mixed(0.3),
            InitialState::CoherentGround(0.5, 0.0),
        ] {
            let rho = build_initial(&s, space, &p).unwrap();
            assert!((rho.matrix().trace().re - 1.0).abs() < 1e-12, "{s}");
        }
        let rho = build_initial(&InitialState::Mixed(0.3), space, &p).unwrap();
        let upper = rho.matrix().as_slice()[space.index(0, UPPER) * (space.dim() + 1)].re;
        assert!((upper - 0.3).abs() < 1e-15);
    }
}
