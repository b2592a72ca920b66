use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
seed = 7
replicas = 2000
suite = ["sampling-lemma", "polya-marginals", "monotonicity"]
grid = [0.25, 0.5, 0.75]

[flow]
variant = "polya_sum"

[flow.rho]
lo = 0.0
hi = 1.0
masses = [2.0]
"#;

fn polyaflow(args: &[&str], seed_env: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_polyaflow"));
    cmd.args(args).env_remove("POLYAFLOW_SEED");
    if let Some(s) = seed_env {
        cmd.env("POLYAFLOW_SEED", s);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn report_seed(out: &Path) -> u64 {
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    v["seed"].as_u64().expect("seed in report")
}

#[test]
fn list_suites_names_the_core_checks() {
    let o = polyaflow(&["list-suites"], None);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for name in ["sampling-lemma", "duality", "mixture-representation", "exit-limit", "mecke"] {
        assert!(text.contains(name), "{name} missing from\n{text}");
    }
}

#[test]
fn list_suites_verbose_prints_a_loadable_config() {
    let o = polyaflow(&["list-suites", "--verbose"], None);
    let text = String::from_utf8(o.stdout).unwrap();
    let toml = text.split("# default configuration\n").nth(1).unwrap();
    polyaflow::ExperimentConfig::parse(toml).unwrap();
}

#[test]
fn zero_replicas_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("replicas = 2000", "replicas = 0"));
    let o = polyaflow(&["run", "--config", &cfg], None);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("invalid configuration") && err.contains("replicas"), "{err}");
}

#[test]
fn every_problem_is_listed() {
    let dir = tempfile::tempdir().unwrap();
    let bad = SMALL
        .replace("replicas = 2000", "replicas = 0")
        .replace("grid = [0.25, 0.5, 0.75]", "grid = [0.5, 0.25]")
        .replace("\"monotonicity\"", "\"no-such-suite\"");
    let cfg = write_config(dir.path(), &bad);
    let o = polyaflow(&["run", "--config", &cfg], None);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.lines().filter(|l| l.starts_with("  - ")).count() >= 3, "{err}");
    assert!(err.contains("no-such-suite"), "{err}");
}

#[test]
fn unknown_keys_and_missing_files_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("replicate = 3\n{SMALL}"));
    assert_eq!(polyaflow(&["run", "--config", &cfg], None).status.code(), Some(2));
    let missing = dir.path().join("absent.toml");
    assert_eq!(
        polyaflow(&["run", "--config", missing.to_str().unwrap()], None).status.code(),
        Some(2)
    );
}

#[test]
fn run_writes_deterministic_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let oa = polyaflow(&["run", "--config", &cfg, "--out", a.to_str().unwrap()], None);
    assert_eq!(oa.status.code(), Some(0), "{}", stderr(&oa));
    let ob = polyaflow(&["--threads", "2", "run", "--config", &cfg, "--out", b.to_str().unwrap()], None);
    assert_eq!(ob.status.code(), Some(0), "{}", stderr(&ob));
    for file in ["report.json", "summary.csv", "paths.jsonl"] {
        let x = std::fs::read(a.join(file)).unwrap();
        let y = std::fs::read(b.join(file)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{file} differs between runs");
    }
    let csv = std::fs::read_to_string(a.join("summary.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("sampling-lemma:")), "{csv}");
    for line in std::fs::read_to_string(a.join("paths.jsonl")).unwrap().lines() {
        serde_json::from_str::<polyaflow::Path>(line).unwrap();
    }
}

#[test]
fn seed_precedence_flag_env_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &SMALL.replace("\"polya-marginals\", \"monotonicity\"", "\"polya-marginals\""),
    );
    let out = dir.path().join("o");
    let o = out.to_str().unwrap();
    polyaflow(&["run", "--config", &cfg, "--out", o], None);
    assert_eq!(report_seed(&out), 7);
    polyaflow(&["run", "--config", &cfg, "--out", o], Some("11"));
    assert_eq!(report_seed(&out), 11);
    polyaflow(&["run", "--config", &cfg, "--out", o, "--seed", "13"], Some("11"));
    assert_eq!(report_seed(&out), 13);
    let bad = polyaflow(&["run", "--config", &cfg, "--out", o], Some("seven"));
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn simulate_writes_monotone_paths() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("sim");
    let o = polyaflow(
        &["simulate", "--config", &cfg, "--replicas", "50", "--out", out.to_str().unwrap()],
        None,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(out.join("paths.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 50);
    for line in text.lines() {
        let p: polyaflow::Path = serde_json::from_str(line).unwrap();
        assert_eq!(p.grid(), &[0.25, 0.5, 0.75]);
    }
}

#[test]
fn exit_limit_sweep_shrinks() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("exit");
    let o = polyaflow(
        &[
            "exit-limit",
            "--config",
            &cfg,
            "--replicas",
            "20000",
            "--out",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("exit_limit.csv")).unwrap();
    let rows: Vec<(f64, f64)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let (t, ks) = l.split_once(',').unwrap();
            (t.parse().unwrap(), ks.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].1 > rows[3].1, "{rows:?}");
}
