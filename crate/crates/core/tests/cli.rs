//! Runs the binary end to end on small scenario files.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, name: &str, body: &str, envs: &[(&str, &str)]) -> Output {
    let file = dir.join(format!("{name}.ini"));
    fs::write(&file, body).unwrap();
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_harnack-lab"));
    cmd.arg(&file).arg("--out").arg(dir.join("out")).arg("--quiet");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

#[test]
fn range_check_exits_zero_with_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), "rc", "command = range-check\nn = 2\np = 2\nq = 1.5\n", &[]);
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("out/rc_report.csv")).unwrap();
    assert!(csv.starts_with("scenario,quantity,value,tolerance,pass\n"));
    assert!(csv.lines().any(|l| l.starts_with("rc,range_condition,") && l.ends_with(",true")));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/rc.json")).unwrap()).unwrap();
    assert_eq!(json["result"]["range_condition"], serde_json::Value::Bool(true));
}

#[test]
fn failing_row_gives_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    // q = 1.5 sits below the lower end 2(n-p)/(n-1) = 1.8
    let out = run(dir.path(), "low", "command = range-check\nn = 3\np = 1.2\nq = 1.5\n", &[]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_key_is_reported_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), "bad", "command = range-check\nn = 2\np = 2\nq = 1.5\nwidht = 3\n", &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("widht") && err.contains("line 5"), "{err}");
}

#[test]
fn counterexample_audit_records_b() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), "ce", "command = counterexample-audit\nn = 3\np = 1.2\nq = critical\n", &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out/ce_report.csv")).unwrap();
    assert!(csv.contains("ce,b,"));
    assert!(csv.contains("ce,max_relative_residual,"));
}

const HARNACK: &str = "\
[scenario]
command = harnack
[params]
n = 2
p = 1.5
q = 1.5
[solver]
h = 1/32
t_end = 0.01
[initial]
initial = random
seed = 11
[probes]
ratio = elliptic
probes = 0 0.005 0.25; 0 0.01 0.5
bound = 50
";

#[test]
fn reruns_and_thread_counts_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let read = |d: &Path| {
        (
            fs::read(d.join("out/h_ratios.csv")).unwrap(),
            fs::read(d.join("out/h.json")).unwrap(),
            fs::read(d.join("out/h_report.csv")).unwrap(),
        )
    };
    let a = run(dir.path(), "h", HARNACK, &[("HARNACK_LAB_THREADS", "1")]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let first = read(dir.path());
    run(dir.path(), "h", HARNACK, &[("HARNACK_LAB_THREADS", "3")]);
    assert_eq!(first, read(dir.path()));
    let header = String::from_utf8(first.0).unwrap();
    assert!(header.starts_with("probe,kind,t,x0,r,theta,u0,ratio,pass\n"));
}

#[test]
fn solve_radial_writes_grid_csv() {
    let dir = tempfile::tempdir().unwrap();
    let body = "command = solve-radial\nn = 2\np = 2\nq = 1.5\nh = 1/16\nt_end = 0.001\nsnapshots = 0.0005\n";
    let out = run(dir.path(), "s", body, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out/s_grid.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "time,node,r,value");
    assert_eq!(lines.len(), 1 + 3 * 17);
}
