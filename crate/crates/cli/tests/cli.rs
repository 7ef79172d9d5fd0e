use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn vibsim(args: &[&str], config: Option<&Path>, out: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_vibsim"));
    cmd.args(args).arg("--out-dir").arg(out);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.output().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn ideal_table_of_the_fixture() {
    let out = tempfile::tempdir().unwrap();
    let o = vibsim(&["ideal"], Some(&fixture("tropolone_ideal.json")), out.path());
    assert!(o.status.success());
    let csv = std::fs::read_to_string(out.path().join("fc_table.csv")).unwrap();
    assert!(csv.starts_with("m1,m2,frequency_cm1,probability\n"));
    let row = csv.lines().find(|l| l.starts_with("2,0,")).unwrap();
    let cells: Vec<&str> = row.split(',').collect();
    assert_eq!(cells[2], "352");
    assert!((cells[3].parse::<f64>().unwrap() - 0.1097).abs() < 0.002);
}

#[test]
fn vacuum_target_has_one_row() {
    let out = tempfile::tempdir().unwrap();
    let config = write_config(
        out.path(),
        r#"{"version": 1, "target": {"type": "two_mode", "r1": 0, "r2": 0, "theta": 0, "excited_freqs": [100, 50]}}"#,
    );
    assert!(vibsim(&["ideal"], Some(&config), out.path()).status.success());
    let csv = std::fs::read_to_string(out.path().join("fc_table.csv")).unwrap();
    assert_eq!(csv, "m1,m2,frequency_cm1,probability\n0,0,0,1\n");
}

#[test]
fn small_cutoff_is_a_convergence_failure() {
    let out = tempfile::tempdir().unwrap();
    let o = vibsim(&["ideal", "--cutoff", "5"], Some(&fixture("tropolone_ideal.json")), out.path());
    assert_eq!(o.status.code(), Some(3));
    let summary = read_json(&out.path().join("ideal_summary.json"));
    assert!(summary["tail_mass"].as_f64().unwrap() > 0.0);
    assert_eq!(summary["converged"], Value::Bool(false));
}

#[test]
fn input_errors_exit_with_two() {
    let out = tempfile::tempdir().unwrap();
    let missing = out.path().join("missing.json");
    assert_eq!(vibsim(&["simulate"], Some(&missing), out.path()).status.code(), Some(2));
    let bad = write_config(out.path(), r#"{"version": 1, "shots": 10, "extra": true}"#);
    assert_eq!(vibsim(&["sample"], Some(&bad), out.path()).status.code(), Some(2));
    assert_eq!(vibsim(&["optimize"], None, out.path()).status.code(), Some(2));
    let grid = vibsim(&["sweep-loss", "--grid", "0:1.5:0.5"], Some(&fixture("tropolone_experiment.json")), out.path());
    assert_eq!(grid.status.code(), Some(2));
}

#[test]
fn malformed_histogram_names_the_line() {
    let out = tempfile::tempdir().unwrap();
    let good = out.path().join("good.csv");
    std::fs::write(&good, "m1,m2,count\n0,0,10\n1,1,2\n").unwrap();
    let bad = out.path().join("bad.csv");
    std::fs::write(&bad, "m1,m2,count\n0,0,10\n1,1,-2\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_vibsim"))
        .arg("tomography")
        .arg(&good)
        .arg(&bad)
        .arg("--out-dir")
        .arg(out.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn simulate_report_of_the_characterized_experiment() {
    let out = tempfile::tempdir().unwrap();
    assert!(vibsim(&["simulate"], Some(&fixture("tropolone_experiment.json")), out.path())
        .status
        .success());
    let r = read_json(&out.path().join("simulate_report.json"));
    let f = |k: &str| r[k].as_f64().unwrap();
    assert!((f("total") - 0.455).abs() < 0.005, "{}", f("total"));
    assert!((0.19..0.22).contains(&f("tvd_to_ideal")), "{}", f("tvd_to_ideal"));
    assert!((r["witness"]["classical_bound"].as_f64().unwrap() - 0.476).abs() < 0.001);
    assert_eq!(r["witness"]["passes"], Value::Bool(true));
}

#[test]
fn ideal_experiment_has_no_error() {
    let out = tempfile::tempdir().unwrap();
    let config = write_config(
        out.path(),
        r#"{"version": 1,
            "target": {"type": "two_mode", "r1": 0.3, "r2": -0.2, "theta": 0.4},
            "experiment": {"source": {"type": "smsv_pair", "r1": 0.3, "r2": -0.2},
                           "bs_transmission": 0.8483533546735826,
                           "detector": {"dark_p1": 0, "pump_p2": 0, "noise_fidelity_factor": 1}}}"#,
    );
    assert!(vibsim(&["simulate"], Some(&config), out.path()).status.success());
    let r = read_json(&out.path().join("simulate_report.json"));
    for key in ["fidelity_bound", "eps_stat", "eps_g", "tvd_to_ideal"] {
        assert!(r[key].as_f64().unwrap() < 1e-6, "{key}: {}", r[key]);
    }
}

#[test]
fn optimum_ignores_the_seed() {
    let out = tempfile::tempdir().unwrap();
    let config = fixture("no_imperfections.json");
    let a = out.path().join("a");
    let b = out.path().join("b");
    assert!(vibsim(&["optimize", "--seed", "1"], Some(&config), &a).status.success());
    assert!(vibsim(&["optimize", "--seed", "2"], Some(&config), &b).status.success());
    let (ja, jb) = (read_json(&a.join("optimize.json")), read_json(&b.join("optimize.json")));
    assert!((ja["F_star"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert_eq!(ja["F_star"], jb["F_star"]);
    assert_eq!(ja["r_star"], jb["r_star"]);
    assert_eq!(ja["t_star"], jb["t_star"]);
}

#[test]
fn reruns_are_byte_identical() {
    let out = tempfile::tempdir().unwrap();
    let config = fixture("tropolone_experiment.json");
    for command in ["simulate", "sample", "optimize"] {
        let a = out.path().join(format!("{command}-a"));
        let b = out.path().join(format!("{command}-b"));
        assert!(vibsim(&[command], Some(&config), &a).status.success());
        assert!(vibsim(&[command], Some(&config), &b).status.success());
        for entry in std::fs::read_dir(&a).unwrap() {
            let name = entry.unwrap().file_name();
            assert_eq!(
                std::fs::read(a.join(&name)).unwrap(),
                std::fs::read(b.join(&name)).unwrap(),
                "{command}: {name:?}"
            );
        }
    }
}

#[test]
fn tomography_round_trip_through_files() {
    let out = tempfile::tempdir().unwrap();
    for (name, t, seed) in [("a", 1.0, 1), ("b", 0.0, 2)] {
        let dir = out.path().join(name);
        std::fs::create_dir_all(&dir).unwrap();
        let config = write_config(
            &dir,
            &format!(
                r#"{{"version": 1, "cutoff": 24, "shots": 1000000, "seed": {seed},
                    "experiment": {{"source": {{"type": "tmsv", "r": 0.3}}, "bs_transmission": {t:?},
                                    "eta_pre": [0.45, 0.4]}}}}"#
            ),
        );
        assert!(vibsim(&["sample"], Some(&config), &dir).status.success());
    }
    let o = Command::new(env!("CARGO_BIN_EXE_vibsim"))
        .arg("tomography")
        .arg(out.path().join("a/counts.csv"))
        .arg(out.path().join("b/counts.csv"))
        .arg("--out-dir")
        .arg(out.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    let fit = read_json(&out.path().join("tomography.json"));
    assert!((fit["r"].as_f64().unwrap() - 0.3).abs() < 0.01);
    assert!((fit["eta"][0].as_f64().unwrap() - 0.45).abs() < 0.02);
    assert!((fit["eta"][1].as_f64().unwrap() - 0.40).abs() < 0.02);
    assert!(fit["residual_tvd"].as_f64().unwrap() < 1e-3);
}
