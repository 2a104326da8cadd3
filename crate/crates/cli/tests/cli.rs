use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn catm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_catm-sim")).args(args).output().expect("binary runs")
}

fn scenario_file(dir: &Path, body: &str) -> String {
    let p = dir.join("sc.toml");
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL: &str = r#"
name = "small"
seed = 4
duration_ms = 3000
[layout]
rings = 0
sectors = 3
[[ue_groups]]
count = 6
traffic = { kind = "voip" }
"#;

#[test]
fn scenario_run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario_file(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = catm(&["--scenario", &sc, "--out", out.to_str().unwrap(), "--trace"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["kpi.csv", "cells.csv", "summary.json", "summary.txt", "trace.csv"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let kpi = fs::read_to_string(out.join("kpi.csv")).unwrap();
    // header, six UEs, aggregate
    assert_eq!(kpi.lines().count(), 8);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(json["scenario"]["name"], "small");
}

#[test]
fn seed_and_duration_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario_file(dir.path(), SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(catm(&["--scenario", &sc, "--out", a.to_str().unwrap(), "--seed", "11", "--duration-ms", "1500"]).status.success());
    assert!(catm(&["--scenario", &sc, "--out", b.to_str().unwrap(), "--seed", "11", "--duration-ms", "1500"]).status.success());
    let (ka, kb) = (fs::read(a.join("kpi.csv")).unwrap(), fs::read(b.join("kpi.csv")).unwrap());
    assert_eq!(ka, kb);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(json["duration_ms"], 1500);
    assert_eq!(json["scenario"]["seed"], 11);
}

#[test]
fn unknown_field_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario_file(dir.path(), &format!("{SMALL}\nbogus = 1\n"));
    let o = catm(&["--scenario", &sc, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));
}

#[test]
fn invalid_value_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario_file(dir.path(), &SMALL.replace("sectors = 3", "sectors = 4"));
    assert_eq!(catm(&["--scenario", &sc]).status.code(), Some(2));
}

#[test]
fn missing_file_and_bad_preset_are_config_errors() {
    assert_eq!(catm(&["--scenario", "/nonexistent/x.toml"]).status.code(), Some(2));
    assert_eq!(catm(&["--preset", "fig9"]).status.code(), Some(2));
    // no input at all, or both
    assert_eq!(catm(&[]).status.code(), Some(2));
    assert_eq!(catm(&["--scenario", "a.toml", "--preset", "fig3"]).status.code(), Some(2));
}

#[test]
fn analytic_presets_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = catm(&["--preset", "table2", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let t = fs::read_to_string(dir.path().join("table2.csv")).unwrap();
    assert!(t.starts_with("rl_pusch,aggregation,tbs_bits,attempts,mcs,mcl_db"));
    assert_eq!(t.lines().count(), 4);
    assert!(String::from_utf8_lossy(&o.stdout).contains("RL  8"));

    let o = catm(&["--preset", "fig4d", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    assert!(dir.path().join("fig4d.csv").is_file());
}

#[test]
fn short_voip_preset_runs() {
    let dir = tempfile::tempdir().unwrap();
    let o = catm(&["--preset", "voip", "--duration-ms", "2000", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let t = fs::read_to_string(dir.path().join("voip.csv")).unwrap();
    assert_eq!(t.lines().count(), 7);
}
