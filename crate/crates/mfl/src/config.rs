//! Run configuration.
//!
//! The text format is one `key = value` pair per line; `#` starts a comment
//! and blank lines are ignored. Keys:
//!
//! | key | value |
//! |-----|-------|
//! | `scenario` | `master-direct`, `master-lorenz`, `lorenz`, `sse-linear`, `sse-meanfield`, `verify-all` |
//! | `omega`, `g`, `kappa` | reals |
//! | `kappa_plus`, `kappa_minus` | positive reals |
//! | `gamma`, `d` | alternative to `kappa_plus`/`kappa_minus` (give both or neither) |
//! | `n_max` | Fock cutoff, at least 1 |
//! | `dt`, `t_final` | positive reals |
//! | `initial` | see [`InitialState`] |
//! | `trajectories`, `seed` | integers |
//! | `out` | output directory |
//! | `leakage_bound` | positive real |
//! | `dump_ensemble` | `true` or `false` |
//!
//! JSON is accepted as well, either a bare config object or a run summary
//! (`"schema": "mfl-1"`) whose `config` field is reused.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mfl_core::lindblad::LaserParams;
use serde::{Deserialize, Serialize};

pub const SCHEMA: &str = "mfl-1";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}, field `{key}`: {message}")]
    BadValue { line: usize, key: String, message: String },
    #[error("field `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("JSON config: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    MasterDirect,
    MasterLorenz,
    Lorenz,
    SseLinear,
    SseMeanfield,
    VerifyAll,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::MasterDirect => "master-direct",
            Scenario::MasterLorenz => "master-lorenz",
            Scenario::Lorenz => "lorenz",
            Scenario::SseLinear => "sse-linear",
            Scenario::SseMeanfield => "sse-meanfield",
            Scenario::VerifyAll => "verify-all",
        }
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        <Scenario as clap::ValueEnum>::from_str(s, false)
    }
}

/// Initial density matrix.
///
/// * `vacuum-ground`: field vacuum, atom in the lower level
/// * `vacuum-atom-steady`: field vacuum, atom `diag((1+d)/2, (1−d)/2)`
/// * `fock(n)-ground`: `|n⟩`, atom lower
/// * `mixed(p)`: field vacuum, upper-level population `p`
/// * `coherent(re,im)-ground`: coherent field `|α⟩`, atom lower
/// * `file:PATH`: custom matrix, see [`crate::states::load_density_text`]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum InitialState {
    VacuumGround,
    VacuumAtomSteady,
    FockGround(usize),
    Mixed(f64),
    CoherentGround(f64, f64),
    File(PathBuf),
}

impl fmt::Display for InitialState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialState::VacuumGround => write!(f, "vacuum-ground"),
            InitialState::VacuumAtomSteady => write!(f, "vacuum-atom-steady"),
            InitialState::FockGround(n) => write!(f, "fock({n})-ground"),
            InitialState::Mixed(p) => write!(f, "mixed({p:?})"),
            InitialState::CoherentGround(re, im) => write!(f, "coherent({re:?},{im:?})-ground"),
            InitialState::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

fn parenthesized<'a>(s: &'a str, head: &str, tail: &str) -> Option<&'a str> {
    s.strip_prefix(head)?.strip_suffix(tail)
}

fn real(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("`{}` is not a number", s.trim()))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{}` is not finite", s.trim()))
    }
}

impl FromStr for InitialState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(path) = s.strip_prefix("file:") {
            return Ok(InitialState::File(PathBuf::from(path.trim())));
        }
        match s {
            "vacuum-ground" => return Ok(InitialState::VacuumGround),
            "vacuum-atom-steady" => return Ok(InitialState::VacuumAtomSteady),
            _ => {}
        }
        if let Some(n) = parenthesized(s, "fock(", ")-ground") {
            return n.trim().parse().map(InitialState::FockGround).map_err(|_| format!("bad Fock level `{n}`"));
        }
        if let Some(p) = parenthesized(s, "mixed(", ")") {
            return real(p).map(InitialState::Mixed);
        }
        if let Some(args) = parenthesized(s, "coherent(", ")-ground") {
            let (re, im) = args.split_once(',').ok_or_else(|| format!("coherent amplitude needs `re,im`, got `{args}`"))?;
            return Ok(InitialState::CoherentGround(real(re)?, real(im)?));
        }
        Err(format!(
            "unknown initial state `{s}` (expected vacuum-ground, vacuum-atom-steady, fock(n)-ground, mixed(p), coherent(re,im)-ground or file:PATH)"
        ))
    }
}

impl TryFrom<String> for InitialState {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<InitialState> for String {
    fn from(s: InitialState) -> String {
        s.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub scenario: Scenario,
    pub omega: f64,
    pub g: f64,
    pub kappa: f64,
    pub kappa_plus: f64,
    pub kappa_minus: f64,
    pub n_max: usize,
    pub dt: f64,
    pub t_final: f64,
    pub initial: InitialState,
    pub trajectories: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub leakage_bound: f64,
    pub dump_ensemble: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        let p = LaserParams::desk();
        Self {
            scenario: Scenario::VerifyAll,
            omega: p.omega(),
            g: p.g(),
            kappa: p.kappa(),
            kappa_plus: p.kappa_plus(),
            kappa_minus: p.kappa_minus(),
            n_max: 30,
            dt: 1e-3,
            t_final: 2.0,
            initial: InitialState::CoherentGround(0.5, 0.0),
            trajectories: 4000,
            seed: 1,
            out: PathBuf::from("mfl-out"),
            leakage_bound: mfl_core::master::DEFAULT_LEAKAGE_BOUND,
            dump_ensemble: false,
        }
    }
}

/// Command-line overrides applied on top of a loaded config.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub scenario: Option<Scenario>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub trajectories: Option<usize>,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub n_max: Option<usize>,
}

impl SimConfig {
    pub fn params(&self) -> Result<LaserParams, ConfigError> {
        LaserParams::new(self.omega, self.g, self.kappa, self.kappa_plus, self.kappa_minus).map_err(|e| ConfigError::Invalid {
            field: "params",
            message: e.to_string(),
        })
    }

    /// Checks every field and that a `file:` initial state exists.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params()?;
        let invalid = |field, message: &str| {
            Err(ConfigError::Invalid {
                field,
                message: message.into(),
            })
        };
        if self.n_max < 1 {
            return invalid("n_max", "must be at least 1");
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return invalid("dt", "must be positive");
        }
        if !(self.t_final.is_finite() && self.t_final > 0.0) {
            return invalid("t_final", "must be positive");
        }
        if self.trajectories == 0 {
            return invalid("trajectories", "must be at least 1");
        }
        if !(self.leakage_bound > 0.0) {
            return invalid("leakage_bound", "must be positive");
        }
        match &self.initial {
            InitialState::File(p) if !p.is_file() => return invalid("initial", &format!("file {} does not exist", p.display())),
            InitialState::Mixed(p) if !(0.0..=1.0).contains(p) => return invalid("initial", "mixed(p) needs 0 ≤ p ≤ 1"),
            InitialState::FockGround(n) if *n > self.n_max => return invalid("initial", "Fock level exceeds n_max"),
            _ => {}
        }
        Ok(())
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.scenario {
            self.scenario = v;
        }
        if let Some(v) = &o.out {
            self.out = v.clone();
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.trajectories {
            self.trajectories = v;
        }
        if let Some(v) = o.dt {
            self.dt = v;
        }
        if let Some(v) = o.t_final {
            self.t_final = v;
        }
        if let Some(v) = o.n_max {
            self.n_max = v;
        }
    }

    /// Key-value text; unspecified keys keep their defaults.
    pub fn parse_text(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = SimConfig::default();
        // (line, value) of `gamma` and `d`.
        let mut gamma_d: [Option<(usize, f64)>; 2] = [None, None];
        let mut rates_given = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |message: String| ConfigError::BadValue {
                line,
                key: key.into(),
                message,
            };
            let num = || real(value).map_err(bad);
            let int = || value.parse::<u64>().map_err(|_| bad(format!("`{value}` is not a nonnegative integer")));
            match key {
                "scenario" => cfg.scenario = value.parse().map_err(bad)?,
                "omega" => cfg.omega = num()?,
                "g" => cfg.g = num()?,
                "kappa" => cfg.kappa = num()?,
                "kappa_plus" => {
                    cfg.kappa_plus = num()?;
                    rates_given = Some(line);
                }
                "kappa_minus" => {
                    cfg.kappa_minus = num()?;
                    rates_given = Some(line);
                }
                "gamma" => gamma_d[0] = Some((line, num()?)),
                "d" => gamma_d[1] = Some((line, num()?)),
                "n_max" => cfg.n_max = int()? as usize,
                "dt" => cfg.dt = num()?,
                "t_final" => cfg.t_final = num()?,
                "initial" => cfg.initial = value.parse().map_err(bad)?,
                "trajectories" => cfg.trajectories = int()? as usize,
                "seed" => cfg.seed = int()?,
                "out" => cfg.out = PathBuf::from(value),
                "leakage_bound" => cfg.leakage_bound = num()?,
                "dump_ensemble" => cfg.dump_ensemble = value.parse().map_err(|_| bad(format!("`{value}` is not true/false")))?,
                _ => return Err(ConfigError::UnknownKey { line, key: key.into() }),
            }
        }
        match gamma_d {
            [None, None] => {}
            [Some((line, gamma)), Some((_, d))] => {
                if let Some(other) = rates_given {
                    return Err(ConfigError::Syntax {
                        line: other,
                        message: "give either gamma and d or kappa_plus and kappa_minus, not both".into(),
                    });
                }
                let p = LaserParams::from_gamma_d(cfg.omega, cfg.g, cfg.kappa, gamma, d).map_err(|e| ConfigError::BadValue {
                    line,
                    key: "gamma/d".into(),
                    message: e.to_string(),
                })?;
                cfg.kappa_plus = p.kappa_plus();
                cfg.kappa_minus = p.kappa_minus();
            }
            [Some((line, _)), None] | [None, Some((line, _))] => {
                return Err(ConfigError::Syntax {
                    line,
                    message: "gamma and d must be given together".into(),
                })
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// A bare config object or a run summary embedding one.
    pub fn parse_json(text: &str) -> Result<Self, ConfigError> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let cfg_value = match value.get("schema") {
            Some(schema) => {
                if schema != SCHEMA {
                    return Err(ConfigError::Invalid {
                        field: "schema",
                        message: format!("unsupported schema {schema}"),
                    });
                }
                value.get("config").cloned().ok_or(ConfigError::Invalid {
                    field: "config",
                    message: "summary has no embedded config".into(),
                })?
            }
            None => value,
        };
        let cfg: SimConfig = serde_json::from_value(cfg_value)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        let is_json = path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
        if is_json {
            Self::parse_json(&text)
        } else {
            Self::parse_text(&text)
        }
    }

    /// The text form that [`SimConfig::parse_text`] reads back.
    pub fn to_text(&self) -> String {
        format!(
            "scenario = {}\nomega = {:?}\ng = {:?}\nkappa = {:?}\nkappa_plus = {:?}\nkappa_minus = {:?}\nn_max = {}\ndt = {:?}\nt_final = {:?}\ninitial = {}\ntrajectories = {}\nseed = {}\nout = {}\nleakage_bound = {:?}\ndump_ensemble = {}\n",
            self.scenario.name(),
            self.omega,
            self.g,
            self.kappa,
            self.kappa_plus,
            self.kappa_minus,
            self.n_max,
            self.dt,
            self.t_final,
            self.initial,
            self.trajectories,
            self.seed,
            self.out.display(),
            self.leakage_bound,
            self.dump_ensemble
        )
    }
}
