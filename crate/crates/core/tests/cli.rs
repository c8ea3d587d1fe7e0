use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tdcm::config::{ParamsFile, ScenarioFile};
use tdcm::io::ShiftEstimateFile;

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn tdcm(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tdcm"))
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .env_remove("TDCM_OUT_DIR")
        .output()
        .unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_matches_golden_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = scenarios().join("straight_periodic.json");
    let out = tdcm(dir.path(), &["run", path_str(&config)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let got = fs::read(dir.path().join("straight_periodic/report.csv")).unwrap();
    let want = fs::read(
        Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/straight_periodic_report.csv"),
    )
    .unwrap();
    assert_eq!(
        String::from_utf8(got).unwrap(),
        String::from_utf8(want).unwrap()
    );
}

#[test]
fn run_writes_traces_and_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let config = scenarios().join("two_curvatures_nonperiodic.json");
    let out = tdcm(dir.path(), &["--jobs", "2", "run", path_str(&config)]);
    assert!(out.status.success());
    let base = dir.path().join("two_curvatures_nonperiodic");
    for f in [
        "report.csv",
        "report.txt",
        "detections.csv",
        "trace_shift.csv",
        "plot_shift_lr.dat",
        "plot_none_ap.dat",
    ] {
        assert!(base.join(f).is_file(), "missing {f}");
    }
    let trace = fs::read_to_string(base.join("trace_none.csv")).unwrap();
    assert!(trace.starts_with("t,axis,q_desired,q_commanded,y_true,current,branch_id\n"));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("Compensation+Shift"));
}

#[test]
fn seed_flag_changes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = scenarios().join("alpha45_periodic.json");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(tdcm(&a, &["run", path_str(&config)]).status.success());
    assert!(tdcm(&b, &["--seed", "99", "run", path_str(&config)])
        .status
        .success());
    let ra = fs::read(a.join("alpha45_periodic/report.csv")).unwrap();
    let rb = fs::read(b.join("alpha45_periodic/report.csv")).unwrap();
    assert_ne!(ra, rb);
}

#[test]
fn report_collects_three_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenarios();
    let configs: Vec<PathBuf> = ["straight_periodic", "alpha45_periodic", "alpha90_periodic"]
        .iter()
        .map(|n| s.join(format!("{n}.json")))
        .collect();
    let mut args = vec!["run"];
    args.extend(configs.iter().map(|c| path_str(c)));
    assert!(tdcm(dir.path(), &args).status.success());
    let summary = dir.path().join("summary");
    let out = tdcm(&summary, &["report", path_str(dir.path())]);
    assert!(out.status.success());
    let csv = fs::read_to_string(summary.join("summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 3 * 2);
    let table = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = table
        .lines()
        .filter(|l| l.starts_with("No compensation"))
        .collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(
        table
            .lines()
            .next()
            .unwrap()
            .matches("_periodic/ap")
            .count(),
        3
    );
}

#[test]
fn detect_on_straight_shaft_finds_no_shift() {
    let dir = tempfile::tempdir().unwrap();
    let config = scenarios().join("straight_periodic.json");
    let out = tdcm(dir.path(), &["detect", path_str(&config)]);
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("straight_periodic_ap.shift.json")).unwrap();
    let est: ShiftEstimateFile = serde_json::from_str(&text).unwrap();
    assert!(est.offset_deg.abs() < 0.7, "offset {}", est.offset_deg);
    assert_eq!(est.direction_flips, 0);
    let log = fs::read_to_string(dir.path().join("straight_periodic_ap.log.csv")).unwrap();
    assert!(log.starts_with("iteration,q,current,grad,direction,event\n"));
    assert!(log.trim_end().ends_with("detect"));
}

#[test]
fn simulate_then_identify() {
    let dir = tempfile::tempdir().unwrap();
    let config = scenarios().join("calibration_sweep.json");
    let out = tdcm(dir.path(), &["simulate", path_str(&config)]);
    assert!(out.status.success());
    let trace = dir.path().join("calibration_sweep_none_trace.csv");
    let params = dir.path().join("id.json");
    let out = tdcm(
        dir.path(),
        &[
            "identify",
            path_str(&trace),
            "--axis",
            "ap",
            "-o",
            path_str(&params),
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let p: ParamsFile = serde_json::from_str(&fs::read_to_string(&params).unwrap()).unwrap();
    assert!((p.omega - 1.45).abs() < 0.0145);
    assert!(p.d_pos_deg > 10.0 && p.d_neg_deg < -10.0);
}

#[test]
fn out_dir_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let config = scenarios().join("calibration_sweep.json");
    let out = Command::new(env!("CARGO_BIN_EXE_tdcm"))
        .args(["simulate", path_str(&config)])
        .env("TDCM_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir
        .path()
        .join("calibration_sweep_none_trace.csv")
        .is_file());
}

#[test]
fn missing_file_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = tdcm(dir.path(), &["run", "/definitely/not/here.json"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("here.json"));
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let text = fs::read_to_string(scenarios().join("alpha45_periodic.json")).unwrap();
    fs::write(
        &bad,
        text.replace("\"seed\": 2024", "\"seed\": 2024, \"trials\": 0"),
    )
    .unwrap();
    let out = tdcm(dir.path(), &["run", path_str(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("alpha45_periodic").exists());

    fs::write(&bad, "{ not json").unwrap();
    assert_eq!(
        tdcm(dir.path(), &["simulate", path_str(&bad)])
            .status
            .code(),
        Some(2)
    );

    let flat = dir.path().join("flat.csv");
    fs::write(
        &flat,
        "t,axis,q_desired,q_commanded,y_true,current,branch_id\n",
    )
    .unwrap();
    let out = tdcm(dir.path(), &["identify", path_str(&flat)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn detection_timeout_exits_3_and_keeps_the_log() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("short.json");
    let mut f = ScenarioFile::load(&scenarios().join("alpha90_periodic.json")).unwrap();
    f.detector.max_iterations = 3;
    f.save(&cfg).unwrap();
    let out = tdcm(dir.path(), &["detect", path_str(&cfg)]);
    assert_eq!(out.status.code(), Some(3));
    let log = fs::read_to_string(dir.path().join("alpha90_periodic_ap.log.csv")).unwrap();
    assert!(log.lines().count() > 3);
}

#[test]
fn bundled_scenarios_round_trip() {
    for entry in fs::read_dir(scenarios()).unwrap() {
        let path = entry.unwrap().path();
        let f = ScenarioFile::load(&path).unwrap();
        let again: ScenarioFile = serde_json::from_str(&f.to_json()).unwrap();
        assert_eq!(f, again, "{}", path.display());
        assert_eq!(
            f.spec(&scenarios()).unwrap(),
            again.spec(&scenarios()).unwrap()
        );
    }
}
