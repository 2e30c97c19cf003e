//! Scenario dispatch and artifact emission.

use std::path::PathBuf;

use mfl_core::hilbert::SpaceDescriptor;
use mfl_core::lorenz::integrate_lorenz;
use mfl_core::master::{initial_lorenz_state, integrate_meanfield_direct, integrate_meanfield_via_lorenz, lorenz_drive, MasterRun};
use mfl_core::rng::NoisePlan;
use mfl_core::sse::{simulate_linear_sse, simulate_meanfield_sse, Executor, Serial, SseOptions, SseRun};
use mfl_core::verify::VerificationReport;
use serde_json::{json, Map, Value};

use crate::config::{ConfigError, Scenario, SimConfig, SCHEMA};
use crate::exec::Rayon;
use crate::output;
use crate::states::{build_initial, StateError};
use crate::suite::{master_options, sample_times, verify_all, SuiteConfig};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("initial state: {0}")]
    State(#[from] StateError),
    #[error("run aborted: {0}")]
    Core(#[from] mfl_core::Error),
    #[error("writing output: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    /// 2 for unusable input, 1 for aborted runs and IO failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::State(_) => 2,
            RunError::Core(_) | RunError::Io(_) => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    Serial,
    #[default]
    Parallel,
}

#[derive(Debug)]
pub struct Outcome {
    pub out_dir: PathBuf,
    pub files: Vec<String>,
    pub summary: Value,
    pub report: Option<VerificationReport>,
}

impl Outcome {
    /// False iff a verification check failed.
    pub fn passed(&self) -> bool {
        self.report.as_ref().is_none_or(VerificationReport::passed)
    }
}

struct Emitter {
    dir: PathBuf,
    files: Vec<String>,
}

impl Emitter {
    fn emit(&mut self, name: &str, contents: impl AsRef<[u8]>) -> std::io::Result<()> {
        output::write_file(&self.dir, name, contents)?;
        self.files.push(name.into());
        Ok(())
    }
}

pub fn run(config: &SimConfig, mode: ExecMode) -> Result<Outcome, RunError> {
    match mode {
        ExecMode::Serial => run_with(config, &Serial),
        ExecMode::Parallel => run_with(config, &Rayon),
    }
}

fn sse_plan(config: &SimConfig) -> NoisePlan {
    NoisePlan::new(config.seed, config.trajectories, config.dt)
}

pub fn run_with<E: Executor>(config: &SimConfig, executor: &E) -> Result<Outcome, RunError> {
    config.validate()?;
    let params = config.params()?;
    let space = SpaceDescriptor::new(config.n_max)?;
    let rho0 = build_initial(&config.initial, space, &params)?;
    let (dt, t_final) = (config.dt, config.t_final);
    let opts = master_options(config.leakage_bound, dt, t_final);

    std::fs::create_dir_all(&config.out)?;
    let mut em = Emitter {
        dir: config.out.clone(),
        files: Vec::new(),
    };
    let mut extra = Map::new();
    let mut report = None;

    let master_section = |run: &MasterRun| {
        json!({
            "route": run.route.name(),
            "invariants": output::master_invariants_json(run),
        })
    };
    let sse_out = |em: &mut Emitter, run: &SseRun| -> std::io::Result<Value> {
        em.emit("sse.csv", output::sse_csv(run))?;
        if config.dump_ensemble {
            em.emit("ensemble.bin", output::ensemble_bytes(&run.ensemble))?;
        }
        Ok(output::sse_json(run))
    };

    match config.scenario {
        Scenario::Lorenz => {
            let series = integrate_lorenz(&params, initial_lorenz_state(&params, &rho0)?, dt, t_final)?;
            em.emit("lorenz.csv", output::lorenz_csv(&params, &series))?;
        }
        Scenario::MasterDirect => {
            let run = integrate_meanfield_direct(params, &rho0, dt, t_final, &opts)?;
            em.emit("master.csv", output::master_csv(&run))?;
            em.emit("drives.csv", output::master_drives_csv(&run))?;
            extra.insert("master".into(), master_section(&run));
        }
        Scenario::MasterLorenz => {
            let (run, series) = integrate_meanfield_via_lorenz(params, &rho0, dt, t_final, &opts)?;
            em.emit("master.csv", output::master_csv(&run))?;
            em.emit("drives.csv", output::master_drives_csv(&run))?;
            em.emit("lorenz.csv", output::lorenz_csv(&params, &series))?;
            extra.insert("master".into(), master_section(&run));
        }
        Scenario::SseLinear => {
            let series = integrate_lorenz(&params, initial_lorenz_state(&params, &rho0)?, dt, t_final)?;
            let drive = lorenz_drive(&params, &series)?;
            let run = simulate_linear_sse(params, &rho0, drive, t_final, &sse_plan(config), &SseOptions::default(), executor)?;
            let v = sse_out(&mut em, &run)?;
            extra.insert("sse".into(), v);
        }
        Scenario::SseMeanfield => {
            let run = simulate_meanfield_sse(params, &rho0, t_final, &sse_plan(config), &SseOptions::default(), executor)?;
            let v = sse_out(&mut em, &run)?;
            extra.insert("sse".into(), v);
        }
        Scenario::VerifyAll => {
            let suite_cfg = SuiteConfig {
                params,
                dt,
                t_final,
                trajectories: config.trajectories,
                seed: config.seed,
                leakage_bound: config.leakage_bound,
            };
            let suite = verify_all(&suite_cfg, &rho0, executor)?;
            em.emit("master.csv", output::master_csv(&suite.direct))?;
            em.emit("drives.csv", output::master_drives_csv(&suite.direct))?;
            em.emit("lorenz.csv", output::lorenz_csv(&params, &suite.series))?;
            let v = sse_out(&mut em, &suite.sse)?;
            extra.insert("sse".into(), v);
            extra.insert("master".into(), master_section(&suite.direct));
            extra.insert("master_lorenz".into(), master_section(&suite.via));
            extra.insert("sample_times".into(), json!(sample_times(t_final)));
            em.emit(
                "report.json",
                serde_json::to_string_pretty(&output::report_json(&suite.report)).expect("JSON values serialize"),
            )?;
            em.emit("report.txt", suite.report.to_text())?;
            report = Some(suite.report);
        }
    }

    let mut summary = json!({
        "schema": SCHEMA,
        "scenario": config.scenario.name(),
        "config": config,
        "params": output::params_json(&params),
        "grid": {
            "dt": dt,
            "t_final": t_final,
            "n_max": config.n_max,
            "dim": space.dim(),
        },
        "passed": report.as_ref().is_none_or(VerificationReport::passed),
    });
    let obj = summary.as_object_mut().expect("summary is an object");
    obj.extend(extra);
    let mut files = em.files.clone();
    files.push("summary.json".into());
    obj.insert("files".into(), json!(files));
    em.emit("summary.json", serde_json::to_string_pretty(&summary).expect("JSON values serialize"))?;

    Ok(Outcome {
        out_dir: em.dir,
        files: em.files,
        summary,
        report,
    })
}
