use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use groundphase::schemes::{read_metrics_csv, write_metrics_csv};
use groundphase::state::{read_cg_csv, write_cg_csv, TrajectoryRecord};
use serde_json::Value;
use tempfile::TempDir;

fn groundphase(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_groundphase"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run_ok(cfg: &Path, out: &Path, extra: &[&str]) -> Value {
    let mut args = vec!["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = groundphase(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

fn num(v: &Value, key: &str) -> f64 {
    v["results"][key]
        .as_f64()
        .unwrap_or_else(|| panic!("{key} missing in {v}"))
}

const CAPTURE_RELEASE: &str = r#"
kind = "scheme"
[scheme]
scheme = "capture_release"
theta = "pi/2"
omega = 1.0
cone_phase = "pi/10"
"#;

#[test]
fn capture_release_manifest_reports_the_split() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), "cr.toml", CAPTURE_RELEASE);
    let m = run_ok(&cfg, &tmp.path().join("out"), &[]);
    assert!((num(&m, "theta_geo") - PI / 10.0).abs() < 1e-4);
    assert!((num(&m, "theta_dyn") - 4.0 * PI / 10.0).abs() < 1e-4);
    assert!((num(&m, "theta_achieved") - PI / 2.0).abs() < 1e-6);
    let files: Vec<&str> = m["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f.as_str().unwrap())
        .collect();
    for f in ["cg.csv", "cg_disc.svg", "phase.json", "manifest.json", "bloch_xz.svg"] {
        assert!(files.contains(&f), "{files:?}");
        assert!(tmp.path().join("out").join(f).exists());
    }
}

#[test]
fn repeated_runs_are_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), "cr.toml", CAPTURE_RELEASE);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_ok(&cfg, &a, &[]);
    run_ok(&cfg, &b, &[]);
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() > 5);
    for n in names {
        assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn emitted_csv_reparses_exactly() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), "cr.toml", CAPTURE_RELEASE);
    let out = tmp.path().join("out");
    run_ok(&cfg, &out, &["--formats", "csv"]);

    let bytes = fs::read(out.join("cg.csv")).unwrap();
    let mut again = Vec::new();
    write_cg_csv(&read_cg_csv(bytes.as_slice()).unwrap(), &mut again).unwrap();
    assert_eq!(bytes, again);

    let bytes = fs::read(out.join("trajectory.csv")).unwrap();
    let mut again = Vec::new();
    TrajectoryRecord::read_csv(bytes.as_slice())
        .unwrap()
        .write_csv(&mut again)
        .unwrap();
    assert_eq!(bytes, again);

    let bytes = fs::read(out.join("metrics.csv")).unwrap();
    let mut again = Vec::new();
    write_metrics_csv(&read_metrics_csv(bytes.as_slice()).unwrap(), &mut again).unwrap();
    assert_eq!(bytes, again);

    assert!(!out.join("cg_disc.svg").exists());
    assert!(!out.join("phase.json").exists());
}

#[test]
fn comparison_table_covers_the_grid() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(
        tmp.path(),
        "cmp.toml",
        "kind = \"compare\"\n[compare]\nomega = 1.0\nloops = 20\ntheta_min = \"0.1pi\"\ntheta_max = \"0.9pi\"\npoints = 9\n",
    );
    let out = tmp.path().join("out");
    let m = run_ok(&cfg, &out, &[]);
    let rows = read_metrics_csv(fs::read(out.join("comparison.csv")).unwrap().as_slice()).unwrap();
    assert_eq!(rows.len(), 36);
    assert!(num(&m, "max_phase_error") < 1e-4);
    assert!(fs::read_to_string(out.join("comparison.svg"))
        .unwrap()
        .contains("<polyline"));
}

#[test]
fn far_off_resonant_path_hugs_the_edge() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(
        tmp.path(),
        "far.toml",
        "kind = \"scheme\"\n[scheme]\nscheme = \"far_off_resonant\"\ntheta = \"pi/2\"\nloops = 20\n",
    );
    let m = run_ok(&cfg, &tmp.path().join("out"), &[]);
    assert!(num(&m, "min_abs_cg") > 0.9);
    assert_eq!(m["results"]["cg_stays_near_edge"], Value::Bool(true));
}

#[test]
fn resonant_run_reports_endpoint_phase() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(
        tmp.path(),
        "res.toml",
        "kind = \"scheme\"\n[scheme]\nscheme = \"resonant_two_pulse\"\ntheta = \"pi/2\"\n",
    );
    let m = run_ok(&cfg, &tmp.path().join("out"), &["--formats", "json"]);
    assert_eq!(m["results"]["phase_path_continuous"], Value::Bool(false));
    assert!((num(&m, "theta_total") - PI / 2.0).abs() < 1e-6);
    assert!(num(&m, "min_abs_cg") < 1e-2);
}

#[test]
fn other_scenarios_run() {
    let tmp = TempDir::new().unwrap();
    let cases = [
        (
            "frame",
            "kind = \"frame\"\n[scheme]\nscheme = \"capture_release\"\ntheta = \"pi/2\"\ncone_phase = \"pi/10\"\n[frame]\nframe = \"atomic\"\n",
        ),
        ("lambda", "kind = \"lambda\"\n[lambda]\ntheta = \"pi/2\"\n"),
        ("tripod", "kind = \"tripod\"\n[tripod]\neta = 1.1\ngamma = 0.4\ntheta = \"3pi/4\"\n"),
        (
            "open",
            "kind = \"open_system\"\n[scheme]\nscheme = \"off_resonant\"\ntheta = \"pi/2\"\n[open_system]\ndecay_rates = [0.0, 0.2]\n",
        ),
    ];
    for (name, text) in cases {
        let cfg = config(tmp.path(), &format!("{name}.toml"), text);
        let m = run_ok(&cfg, &tmp.path().join(name), &[]);
        match name {
            "frame" => {
                assert_eq!(m["results"]["cg_record_identical"], Value::Bool(true));
                assert!(num(&m, "covariance_error") < 1e-4);
            }
            "lambda" => {
                let runs = m["results"]["runs"].as_array().unwrap();
                assert_eq!(runs.len(), 3);
                for r in runs {
                    let phase = r["metrics"]["final_phase"].as_f64().unwrap();
                    assert!((phase - PI / 2.0).abs() < 1e-3);
                }
            }
            "tripod" => assert!(num(&m, "max_entry_error") < 1e-3),
            _ => {
                let rates = m["results"]["rates"].as_array().unwrap();
                assert!((rates[0]["magnitude"].as_f64().unwrap() - 1.0).abs() < 1e-6);
                assert!(rates[1]["magnitude"].as_f64().unwrap() < 1.0);
            }
        }
    }
}

#[test]
fn malformed_config_exits_1_without_output() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    for (name, text) in [
        ("syntax.toml", "kind = \"scheme\"\n[scheme\n"),
        (
            "typo.toml",
            "kind = \"scheme\"\n[scheme]\nscheme = \"off_resonant\"\ntheta = 1.0\nomgea = 2.0\n",
        ),
        ("kind.toml", "kind = \"movie\"\n"),
    ] {
        let cfg = config(tmp.path(), name, text);
        let o = groundphase(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(1), "{name}");
        assert!(!out.exists());
    }
    let o = groundphase(&["run", tmp.path().join("missing.toml").to_str().unwrap(), "--out", "x"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn invalid_scenario_exits_2_naming_the_key() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    for (text, key) in [
        (
            "kind = \"scheme\"\n[scheme]\nscheme = \"off_resonant\"\ntheta = \"pi/2\"\nomega = -1\n",
            "scheme.omega",
        ),
        (
            "kind = \"scheme\"\n[scheme]\nscheme = \"off_resonant\"\n",
            "scheme.theta",
        ),
        (
            "kind = \"scheme\"\n[scheme]\nscheme = \"off_resonant\"\ntheta = \"1.5pi\"\n",
            "scheme.theta",
        ),
        (
            "kind = \"lambda\"\n[lambda]\ntheta = \"pi/2\"\nshapings = [\"wobble\"]\n",
            "lambda.shapings",
        ),
        ("kind = \"tripod\"\n[tripod]\neta = 1\ngamma = 0\n", "tripod.theta"),
        ("kind = \"scheme\"\n[lambda]\ntheta = 1\n", "lambda"),
    ] {
        let cfg = config(tmp.path(), "bad.toml", text);
        let o = groundphase(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{text}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(&format!("`{key}`")), "{err}");
        assert!(!out.exists());
    }
}

#[test]
fn numerical_failure_exits_3() {
    // the resonant state passes through c_g = 0, so no frame re-split exists
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let cfg = config(
        tmp.path(),
        "bad.toml",
        "kind = \"frame\"\n[scheme]\nscheme = \"resonant_two_pulse\"\ntheta = \"pi/2\"\n[frame]\nframe = \"energy_shift\"\nenergy = 0.3\n",
    );
    let o = groundphase(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("phase"));
    assert!(!out.exists());
}
