mod common;

use std::path::Path;
use std::process::{Command, Output};

fn patchbeam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_patchbeam")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("beam.cfg");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn first_line(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).lines().next().unwrap_or_default().to_owned()
}

#[test]
fn static_writes_deflection_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &common::small_text());
    let out = patchbeam(&["static", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(first_line(&out), "patch,x,u,v,w");
    assert!(String::from_utf8_lossy(&out.stderr).contains("max_deflection"));
}

#[test]
fn modes_honours_out_and_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &common::small_text());
    let path = dir.path().join("modes.csv");
    let out = patchbeam(&["modes", "--count", "3", "--config", &cfg, "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(path).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "re,im,mode_type,mode_number,p_zbend,p_ybend,p_torsion,p_compress");
    assert_eq!(lines.len(), 4);
}

#[test]
fn simulate_writes_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &common::small_text());
    let out = patchbeam(&["simulate", "--t-final", "2", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(first_line(&out), "t,tip_u,tip_v,tip_w,energy");
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 4);
}

#[test]
fn empty_sweep_prints_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &common::small_text());
    let out = patchbeam(&["sweep", "--param", "P", "--values", "", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        String::from_utf8_lossy(&out.stdout),
        "param,value,status,max_deflection,tip_w,freq_1,freq_2,freq_3,period,decay\n"
    );
}

#[test]
fn invalid_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = common::small_text().replace("interp_order = 4", "interp_order = 9");
    let cfg = write_config(dir.path(), &text);
    let out = patchbeam(&["static", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("discretisation.interp_order"));
    assert!(out.stdout.is_empty());
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(patchbeam(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(patchbeam(&["static"]).status.code(), Some(2));
    assert_eq!(patchbeam(&["static", "--config", "/nonexistent/beam.cfg"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &common::small_text());
    assert_eq!(patchbeam(&["sweep", "--param", "Q", "--values", "1", "--config", &cfg]).status.code(), Some(2));
    assert_eq!(patchbeam(&["sweep", "--param", "P", "--values", "x", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn help_succeeds() {
    let out = patchbeam(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("sweep"));
}
