use std::process::{Command, Output};

fn rics(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rics-sim")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn printed_config_feeds_back_into_run() {
    let cfg = rics(&["config"]);
    assert!(cfg.status.success());
    let dir = std::env::temp_dir().join(format!("rics-sim-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let text = stdout(&cfg).replace("\"num_elements\": 30", "\"num_elements\": 6");
    let path = dir.join("cfg.json");
    std::fs::write(&path, text).unwrap();
    let trace = dir.join("trace.csv");
    let out = rics(&[
        "run",
        "--config",
        path.to_str().unwrap(),
        "--seed",
        "3",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let body = stdout(&out);
    let lines: Vec<&str> = body.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("seed,scheme,M,N,L"));
    assert!(lines[1].starts_with("3,aioa,10,10,6,"));
    assert!(std::fs::read_to_string(&trace).unwrap().starts_with("iteration,objective"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn unknown_scheme_is_an_error() {
    let out = rics(&["run", "--scheme", "nope"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown scheme `nope`"));
}

#[test]
fn empty_sweep_grid_is_rejected() {
    let out = rics(&["sweep", "--param", "cv_power", "--from", "30", "--to", "20", "--step", "2"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn material_table_has_one_row_per_value() {
    let out = rics(&["material", "--psi-grid", "0.5:2:0.5"]);
    assert!(out.status.success());
    let body = stdout(&out);
    assert_eq!(body.lines().count(), 5);
    assert!(body.starts_with("psi,eps_ratio_re,eps_ratio_im,feasible"));
}

#[test]
fn validation_suite_reports_pass() {
    let out = rics(&["validate", "--suite", "offload-grid"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("offload-grid: passed"));
}
