use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mfl::output::{read_ensemble_bytes, SSE_HEADER};
use mfl::SimConfig;

fn mfl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfl")).args(args).output().expect("binary runs")
}

fn path_arg(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn small_sse(scenario: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        scenario,
        "--out",
        path_arg(out),
        "--n-max",
        "6",
        "--trajectories",
        "300",
        "--t-final",
        "0.3",
        "--dt",
        "0.01",
        "--seed",
        "5",
    ];
    args.extend_from_slice(extra);
    mfl(&args)
}

#[test]
fn verify_all_on_default_config_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = mfl(&["verify-all", "--out", path_arg(dir.path())]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}\n{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout.contains(" checks, 0 failed"), "{stdout}");
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert!(report["checks"].as_array().unwrap().len() > 20);
    for name in ["master.csv", "lorenz.csv", "sse.csv", "drives.csv", "report.txt", "summary.json"] {
        assert!(dir.path().join(name).is_file(), "{name} missing");
    }
}

#[test]
fn out_of_range_d_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "# pumped beyond range\ngamma = 2\nd = 1.5\n").unwrap();
    let out = mfl(&["lorenz", "--config", path_arg(&cfg), "--out", path_arg(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("d must lie in (−1,1)"), "{stderr}");
    assert!(stderr.contains("line 2"), "{stderr}");
}

#[test]
fn config_syntax_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "g = 0.8\nkappa: 1\n").unwrap();
    let out = mfl(&["lorenz", "--config", path_arg(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    let out = mfl(&["lorenz", "--config", path_arg(&dir.path().join("missing.cfg"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn same_seed_gives_identical_sse_csv() {
    for scenario in ["sse-meanfield", "sse-linear"] {
        let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        assert!(small_sse(scenario, a.path(), &["--serial"]).status.success());
        assert!(small_sse(scenario, b.path(), &["--serial"]).status.success());
        assert!(small_sse(scenario, c.path(), &[]).status.success());
        let read = |d: &Path| fs::read(d.join("sse.csv")).unwrap();
        assert_eq!(read(a.path()), read(b.path()), "{scenario}");
        assert_eq!(read(a.path()), read(c.path()), "{scenario}: parallel differs from serial");
        let text = String::from_utf8(read(a.path())).unwrap();
        assert_eq!(text.lines().next(), Some(SSE_HEADER));
        assert_eq!(text.lines().count(), 1 + 31);
    }
}

#[test]
fn summary_reproduces_the_run() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = a.path().join("run.cfg");
    fs::write(
        &cfg,
        "scenario = master-lorenz\nn_max = 8\ndt = 0.01\nt_final = 0.5\ninitial = coherent(0.4,0.1)-ground\ngamma = 2\nd = 0.3\ng = 0.5\n",
    )
    .unwrap();
    assert!(mfl(&["master-lorenz", "--config", path_arg(&cfg), "--out", path_arg(a.path())])
        .status
        .success());
    let summary_path = a.path().join("summary.json");
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(&summary_path).unwrap()).unwrap();
    assert_eq!(summary["schema"], "mfl-1");
    assert_eq!(summary["scenario"], "master-lorenz");
    assert!((summary["params"]["d"].as_f64().unwrap() - 0.3).abs() < 1e-15);
    assert!(summary["master"]["invariants"]["max_trace_error"].as_f64().unwrap() < 1e-8);

    assert!(mfl(&["master-lorenz", "--config", path_arg(&summary_path), "--out", path_arg(b.path())])
        .status
        .success());
    for name in ["master.csv", "lorenz.csv", "drives.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    let again = SimConfig::load(&b.path().join("summary.json")).unwrap();
    let mut original = SimConfig::load(&summary_path).unwrap();
    original.out = b.path().into();
    assert_eq!(again, original);
}

#[test]
fn ensemble_dump_has_documented_layout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "dump_ensemble = true\n").unwrap();
    assert!(small_sse("sse-linear", dir.path(), &["--config", path_arg(&cfg)]).status.success());
    let bytes = fs::read(dir.path().join("ensemble.bin")).unwrap();
    let states = read_ensemble_bytes(&bytes, 14).unwrap();
    assert_eq!(states.len(), 300);
    let mean_norm: f64 = states.iter().map(|z| z.iter().map(|c| c.norm_sqr()).sum::<f64>()).sum::<f64>() / 300.0;
    let csv = fs::read_to_string(dir.path().join("sse.csv")).unwrap();
    let last: Vec<f64> = csv.lines().last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert!((mean_norm - last[17]).abs() < 1e-12);
}

#[test]
fn custom_initial_state_file() {
    let dir = tempfile::tempdir().unwrap();
    let rho = dir.path().join("rho.txt");
    // n_max = 1: vacuum with the atom in the upper level.
    let mut text = String::from("# |0,up><0,up|\n");
    for i in 0..4 {
        let row: Vec<&str> = (0..4).map(|j| if i == 0 && j == 0 { "1,0" } else { "0,0" }).collect();
        text.push_str(&row.join(" "));
        text.push('\n');
    }
    fs::write(&rho, text).unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        format!("initial = file:{}\nn_max = 1\nt_final = 0.1\ndt = 0.01\nleakage_bound = 1\n", rho.display()),
    )
    .unwrap();
    let out = mfl(&["master-direct", "--config", path_arg(&cfg), "--out", path_arg(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("master.csv")).unwrap();
    let first: Vec<f64> = csv.lines().nth(1).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(first[5], 1.0);
}
