use std::path::Path;
use std::process::{Command, Output};

use hbmflow::fixtures;
use hbmflow_cli::{RunArgs, RunConfig};
use proptest::prelude::*;

fn hbmflow(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hbmflow")).args(args).current_dir(dir).env("NO_COLOR", "1").output().unwrap()
}

fn workspace() -> tempfile::TempDir {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("helmholtz.cfd"), fixtures::HELMHOLTZ).unwrap();
    tmp
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn compile_writes_artifacts() {
    let tmp = workspace();
    let o = hbmflow(
        &["compile", "helmholtz.cfd", "--p", "11", "--format", "f64", "--opt", "double-buffering,bus-parallel,dataflow=7", "--out", "out"],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let mut names: Vec<String> =
        std::fs::read_dir(tmp.path().join("out")).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    names.sort();
    assert_eq!(
        names,
        ["batch_plan.json", "design.json", "helmholtz.c", "helmholtz_banks.json", "helmholtz_compat.json", "host_plan.json", "system.cfg"]
    );
    let cfg = std::fs::read_to_string(tmp.path().join("out/system.cfg")).unwrap();
    assert!(cfg.starts_with("sp=cu_0.m_axi_in_even:HBM[0]"));
}

#[test]
fn missing_source_is_an_io_error() {
    let tmp = workspace();
    let o = hbmflow(&["compile", "nope.cfd"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no such file"), "{}", stderr(&o));
    let o = hbmflow(&["simulate", "empty"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_two() {
    let tmp = workspace();
    assert_eq!(hbmflow(&["compile", "helmholtz.cfd", "--opt", "turbo"], tmp.path()).status.code(), Some(2));
    assert_eq!(hbmflow(&["compile", "helmholtz.cfd", "--opt", "dataflow=0"], tmp.path()).status.code(), Some(2));
    assert_eq!(hbmflow(&["frobnicate"], tmp.path()).status.code(), Some(2));
    assert_eq!(hbmflow(&["compile", "helmholtz.cfd", "--format", "fixed(24,8,16)"], tmp.path()).status.code(), Some(2));
}

#[test]
fn frontend_diagnostics_name_the_file() {
    let tmp = workspace();
    std::fs::write(tmp.path().join("bad.cfd"), "var input a : [2]\nvar output b : [3]\nb = a\n").unwrap();
    let o = hbmflow(&["compile", "bad.cfd"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.cfd:"), "{}", stderr(&o));
}

#[test]
fn sharing_warning_goes_to_stderr() {
    let tmp = workspace();
    let o = hbmflow(&["compile", "helmholtz.cfd", "--p", "5", "--opt", "mem-sharing", "--opt", "dataflow=7", "--out", "w"], tmp.path());
    assert!(o.status.success());
    assert!(stderr(&o).contains("warning: memory sharing is ineffective"), "{}", stderr(&o));
    assert!(!stderr(&o).contains('\x1b'));
    let o = hbmflow(&["compile", "helmholtz.cfd", "--p", "5", "--opt", "mem-sharing", "--out", "w1"], tmp.path());
    assert!(o.status.success());
    assert!(stderr(&o).is_empty(), "{}", stderr(&o));
}

fn report(tmp: &Path, out: &str, opts: &str) -> serde_json::Value {
    let o = hbmflow(&["compile", "helmholtz.cfd", "--p", "11", "--opt", opts, "--out", out], tmp);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = hbmflow(&["simulate", out, "--power", "37.5"], tmp);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("Ideal GFLOPS"));
    assert!(tmp.join(out).join("report.txt").exists());
    serde_json::from_str(&std::fs::read_to_string(tmp.join(out).join("report.json")).unwrap()).unwrap()
}

#[test]
fn double_buffering_beats_baseline() {
    let tmp = workspace();
    let base = report(tmp.path(), "base", "");
    let db = report(tmp.path(), "db", "double-buffering");
    assert!(db["system_gflops"].as_f64().unwrap() >= base["system_gflops"].as_f64().unwrap());
    let w = db["gflops_per_watt"].as_f64().unwrap();
    assert!((w - db["system_gflops"].as_f64().unwrap() / 37.5).abs() < 1e-12);
}

#[test]
fn sweep_writes_one_report_per_configuration() {
    let tmp = workspace();
    let o =
        hbmflow(&["sweep", "helmholtz.cfd", "--p", "5", "--opt", "bus-parallel", "--dataflow", "1,2,3,7", "--out", "sweep"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    for d in ["1", "2", "3", "7"] {
        assert!(tmp.path().join(format!("sweep/dataflow_{d}/report.json")).exists());
    }
    let csv = std::fs::read_to_string(tmp.path().join("sweep/summary.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 5);
    let groups: Vec<&str> = rows[1..].iter().map(|r| r.split(',').nth(1).unwrap()).collect();
    assert_eq!(groups, ["1", "2", "3", "7"]);
}

#[test]
fn verify_passes_and_localizes_faults() {
    let tmp = workspace();
    let o = hbmflow(&["verify", "helmholtz.cfd", "--p", "3", "--opt", "dataflow=auto", "--trials", "50"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("PASS"));
    let o =
        hbmflow(&["verify", "helmholtz.cfd", "--p", "3", "--opt", "dataflow=auto", "--trials", "2", "--inject-fault", "mmult"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("group mmult"), "{}", stdout(&o));
    let o = hbmflow(&["verify", "helmholtz.cfd", "--p", "3", "--inject-fault", "nowhere"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_reports_fixed_point_mse() {
    let tmp = workspace();
    let o = hbmflow(&["verify", "helmholtz.cfd", "--p", "7", "--format", "fixed(32,8,24)", "--trials", "20", "--seed", "4"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let line = stdout(&o);
    let mse: f64 = line.split("mse ").nth(1).unwrap().split_whitespace().next().unwrap().parse().unwrap();
    assert!((1e-14..=1e-10).contains(&mse), "{mse}");
}

#[test]
fn config_file_and_flags_merge() {
    let tmp = workspace();
    let path = tmp.path().join("run.toml");
    std::fs::write(&path, "format = \"f32\"\ndouble_buffering = true\ndataflow_groups = \"2\"\nseed = 9\n[params]\np = 4\n").unwrap();
    let args = RunArgs { config: Some(path.clone()), opts: vec!["bus-parallel".into()], seed: Some(3), ..Default::default() };
    let cfg = RunConfig::from_args(&args).unwrap();
    assert_eq!(cfg.format, "f32");
    assert!(cfg.double_buffering && cfg.bus_parallel);
    assert_eq!((cfg.seed, cfg.params["p"]), (3, 4));
    assert_eq!(cfg.dataflow().unwrap(), hbmflow::pipeline::Dataflow::Groups(2));
    std::fs::write(&path, "colour = true\n").unwrap();
    assert!(RunConfig::from_args(&args).is_err());
}

proptest! {
    #[test]
    fn dataflow_groups_must_be_positive(n in 0usize..1000) {
        let args = RunArgs { opts: vec![format!("dataflow={n}")], ..Default::default() };
        match RunConfig::from_args(&args) {
            Ok(c) => prop_assert_eq!(c.dataflow().unwrap(), hbmflow::pipeline::Dataflow::Groups(n)),
            Err(_) => prop_assert_eq!(n, 0),
        }
    }
}
