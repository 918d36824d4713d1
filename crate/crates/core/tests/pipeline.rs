use std::path::{Path, PathBuf};
use std::process::Command;

use thermodamage::io::config::build;
use thermodamage::io::{audit_directory, load_config, run_single, RunConfig};

fn configs_dir() -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "..", "..", "configs"].iter().collect()
}

fn shortened(name: &str, final_time: f64) -> RunConfig {
    let cfg = load_config(configs_dir().join(name)).unwrap();
    let mut file = cfg.file;
    file.experiment.final_time = final_time;
    build(file).unwrap()
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn identical_configs_write_identical_files() {
    let cfg = shortened("full_damage.toml", 0.02);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_single(&cfg, a.path()).unwrap();
    run_single(&cfg, b.path()).unwrap();
    for f in [
        "timeseries.csv",
        "snap_0.csv",
        "snap_10.csv",
        "snap_20.csv",
        "diagnostics.json",
    ] {
        assert_eq!(read(&a.path().join(f)), read(&b.path().join(f)), "{f} differs");
    }
}

#[test]
fn reloaded_snapshots_reproduce_the_verdicts() {
    let cfg = shortened("full_damage.toml", 0.2);
    let dir = tempfile::tempdir().unwrap();
    let run = run_single(&cfg, dir.path()).unwrap();
    let again = audit_directory(dir.path()).unwrap();
    assert_eq!(again.verdicts, run.report.verdicts);
    assert!(again.all_pass());
    assert_eq!(again.pairs.len(), run.report.pairs.len());
    for (p, q) in again.pairs.iter().zip(&run.report.pairs) {
        assert_eq!(p.remainders, q.remainders);
        assert_eq!(p.xi, q.xi);
    }
}

#[test]
fn saved_config_rebuilds_the_same_run() {
    let cfg = shortened("decoupled.toml", 0.01);
    let dir = tempfile::tempdir().unwrap();
    let first = run_single(&cfg, dir.path()).unwrap();
    let reloaded = load_config(dir.path().join("config.toml")).unwrap();
    let other = tempfile::tempdir().unwrap();
    let second = run_single(&reloaded, other.path()).unwrap();
    assert_eq!(first.trajectory.states, second.trajectory.states);
}

fn cli(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_thermodamage"))
        .args(args)
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap_or(-1), text)
}

#[test]
fn cli_checks_every_shipped_config() {
    for name in ["smoke.toml", "equilibrium.toml", "decoupled.toml", "full_damage.toml"] {
        let path = configs_dir().join(name);
        let (code, text) = cli(&["check-config", "--config", path.to_str().unwrap()]);
        assert_eq!(code, 0, "{name}: {text}");
        assert!(text.contains("valid"));
    }
}

#[test]
fn cli_rejects_invalid_config_with_status_2() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs_dir().join("equilibrium.toml")).unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, text.replace("sigma = 3.0", "sigma = 2.0")).unwrap();
    let (code, out) = cli(&["check-config", "--config", bad.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(out.contains("(A2)"), "{out}");
}

#[test]
fn cli_simulate_then_audit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let config = configs_dir().join("equilibrium.toml");
    let (code, text) = cli(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("positivity"));
    let (code, text) = cli(&["audit", "--snapshots", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    assert!(out.join("audit.json").exists());
}

#[test]
fn cli_sweep_flags_active_truncation() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs_dir().join("smoke.toml")).unwrap();
    let cfg = dir.path().join("short.toml");
    std::fs::write(&cfg, text.replace("final_time = 1.0", "final_time = 0.01")).unwrap();
    let (code, out) = cli(&[
        "sweep-m",
        "--config",
        cfg.to_str().unwrap(),
        "--m",
        "0.5,100",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.contains("truncation active true"), "{out}");
    assert_eq!(code, 0, "{out}");
    assert!(dir.path().join("m_sweep.json").exists());
}
