use std::path::Path;
use std::process::Command;

use cac_cli::pipeline::{run_force, run_omega_scan, with_jobs};
use cac_cli::RunConfig;

const PISTON_FORCE: f64 = 0.0335;

fn cac() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cac"))
}

fn config(json: &str) -> RunConfig {
    let c = RunConfig::parse(json).unwrap();
    c.validate().unwrap();
    c
}

fn data_rows(path: &Path) -> Vec<csv::StringRecord> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).unwrap();
    r.records().map(|x| x.unwrap()).collect()
}

#[test]
fn default_piston_lands_in_band_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_force(&RunConfig::default(), dir.path()).unwrap();
    assert!(report.converged());
    let f = report.contours[0].best();
    assert!((f - PISTON_FORCE).abs() / PISTON_FORCE < 0.05, "F = {f}");

    for name in ["force.json", "integrand_conductive_sigma_100_r32.csv", "partial_conductive_sigma_100_r32.csv"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let partial = data_rows(&dir.path().join("partial_conductive_sigma_100_r32.csv"));
    let last = partial.last().unwrap();
    assert!((last[1].parse::<f64>().unwrap() - f).abs() < 1e-12 * f);
}

#[test]
fn centred_single_block_has_no_net_force() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(r#"{"geometry": {"kind": "single_block"}, "resolutions": [16]}"#);
    let report = run_force(&c, dir.path()).unwrap();
    let f = report.contours[0].runs[0].result.force;
    assert!(f.abs() < 1e-4 * PISTON_FORCE, "F = {f}");
    assert!(report.converged(), "a vanishing force must still count as converged");
}

#[test]
fn thread_count_does_not_change_json() {
    let c = config(r#"{"contours": [{"kind": "wick"}, {"kind": "conductive", "sigma": 10}], "resolutions": [16]}"#);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    with_jobs(Some(1), || run_force(&c, a.path())).unwrap().unwrap();
    with_jobs(Some(4), || run_force(&c, b.path())).unwrap().unwrap();
    let ja = std::fs::read(a.path().join("force.json")).unwrap();
    let jb = std::fs::read(b.path().join("force.json")).unwrap();
    assert!(ja == jb, "force.json differs between 1 and 4 threads");
}

#[test]
fn scan_marks_origin_and_real_axis() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(r#"{"scan": {"resolution": 8, "n_re": 3, "n_im": 2, "re_max": 2.0, "im_max": 1.0}}"#);
    let pts = run_omega_scan(&c, dir.path()).unwrap();
    assert_eq!(pts.len(), 6);
    assert!(pts[0].status.starts_with("skipped"));
    assert_eq!(pts[1].status, "real_axis");
    assert_eq!(pts[4].status, "ok");
    let text = std::fs::read_to_string(dir.path().join("omega_scan.csv")).unwrap();
    assert!(text.lines().nth(1).unwrap().contains("qualitative"));
}

#[test]
fn oracles_subcommand_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = cac().args(["oracles", "--out"]).arg(dir.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = std::fs::read_to_string(dir.path().join("oracles.csv")).unwrap();
    assert!(text.starts_with("# cac "));
    assert!(text.lines().next().unwrap().contains("config_sha256="));
    assert!(data_rows(&dir.path().join("oracles.csv")).iter().all(|r| &r[6] == "true"));
}

#[test]
fn unconverged_run_exits_nonzero_with_tail() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tight.json");
    std::fs::write(&cfg, r#"{"geometry": {"kind": "parallel_plates_1d"}, "contours": [{"kind": "wick"}], "quadrature": {"xi_max": 0.3}}"#).unwrap();
    let out = cac()
        .args(["force", "--resolution", "16", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tail"));
    assert!(dir.path().join("o/force.json").exists());
}

#[test]
fn unknown_config_key_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"geometry": {"kind": "piston", "gap": 0.5}}"#).unwrap();
    let out = cac().args(["force", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gap"));
}

#[test]
fn jobs_flag_and_env_agree() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str, env: Option<&str>, flag: Option<&str>| {
        let mut c = cac();
        c.args(["force", "--resolution", "16", "--config"])
            .arg(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/plates_1d.json"))
            .arg("--out")
            .arg(dir.path().join(sub));
        if let Some(e) = env {
            c.env("CAC_JOBS", e);
        }
        if let Some(f) = flag {
            c.args(["--jobs", f]);
        }
        assert!(c.status().unwrap().success());
        std::fs::read(dir.path().join(sub).join("force.json")).unwrap()
    };
    let a = run("env", Some("1"), None);
    let b = run("flag", None, Some("3"));
    assert!(a == b);
    let zero = cac().args(["oracles", "--jobs", "0"]).output().unwrap();
    assert!(!zero.status.success());
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "json") {
            RunConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e:#}", p.display()));
            n += 1;
        }
    }
    assert!(n >= 6);
}
