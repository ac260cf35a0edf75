use std::path::Path;
use std::process::{Command, Output};

fn cqi_beam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cqi-beam")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL: &str = "n_antennas = 12\nn_ports = 4\nrounds = 4\ntrials = 2\neigen_profile = [3.0, 1.0]\ncodebook_size = 8\n";

#[test]
fn simulate_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SMALL);
    let out = dir.path().join("res.csv");
    let o = cqi_beam(&["simulate", "--config", &cfg, "--seed", "5", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("method,round,mean_precision,stderr_precision,mean_lambda\n"));
    assert_eq!(csv.lines().count(), 1 + 3 * 4);

    let again = dir.path().join("res2.csv");
    cqi_beam(&["simulate", "--config", &cfg, "--seed", "5", "--out", again.to_str().unwrap()]);
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(dir.path(), "u.toml", "n_antenas = 12\n");
    assert_eq!(cqi_beam(&["simulate", "--config", &unknown]).status.code(), Some(2));
    let invalid = write(dir.path(), "i.toml", "n_streams = 5\n");
    assert_eq!(cqi_beam(&["simulate", "--config", &invalid]).status.code(), Some(2));
    let lambda = write(dir.path(), "l.toml", "lambda_mode = \"fixed(0)\"\n");
    assert_eq!(cqi_beam(&["simulate", "--config", &lambda]).status.code(), Some(2));
    assert_eq!(cqi_beam(&["betacheck", "--antennas", "32", "--samples", "10"]).status.code(), Some(2));
}

#[test]
fn io_errors_exit_with_4() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    assert_eq!(cqi_beam(&["simulate", "--config", missing.to_str().unwrap()]).status.code(), Some(4));

    // output path below a regular file cannot be created
    let cfg = write(dir.path(), "c.toml", SMALL);
    let blocker = write(dir.path(), "file", "");
    let out = format!("{blocker}/out.csv");
    assert_eq!(cqi_beam(&["simulate", "--config", &cfg, "--out", &out]).status.code(), Some(4));
}

#[test]
fn betacheck_reports_moments() {
    let o = cqi_beam(&["betacheck", "--antennas", "32", "--samples", "2000"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("n_antennas=32 samples=2000"));
    assert!(text.contains("mean_z="));
}

#[test]
fn convergence_trace_is_printed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SMALL);
    let o = cqi_beam(&["convergence", "--config", &cfg]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("iteration,objective"));
    assert!(lines.next().unwrap().starts_with("0,"));
}
