//! End-to-end checks of the `homog` binary and its output files.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use beltrami_lab::output::CSV_HEADER;
use serde_json::Value;

fn homog(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_homog")).args(args).output().expect("homog runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn validate_config_reports_pointer_and_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write(tmp.path(), "bad.json", r#"{"experiment": "beltrami", "grid": {"d": 2, "N": 64, "L": 4}, "modle": []}"#);
    let o = homog(&["validate-config", &bad]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/modle"), "{}", stderr(&o));

    let fine = r#"{"experiment": "iterated", "grid": {"d": 2, "N": 256, "L": 4}, "ladder": [10],
        "models": [{"kind": "model2_checkerboard", "a": 0.5}]}"#;
    let o = homog(&["validate-config", "--config", &write(tmp.path(), "fine.json", fine)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("resolution"), "{}", stderr(&o));

    let good = write(tmp.path(), "good.json", r#"{"experiment": "stripes_oracle", "grid": {"d": 2, "N": 64, "L": 4}}"#);
    let o = homog(&["validate-config", &good]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("ok stripes_oracle "));

    let o = homog(&["validate-config", &tmp.path().join("missing.json").to_string_lossy()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn stripes_subcommand_writes_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = homog(&["run-stripes-oracle", "--a", "0.5", "--N", "512", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("stripes_oracle_summary.json")).unwrap()).unwrap();
    let a_eff = summary["summary"][0]["a_eff"][0].as_f64().unwrap();
    assert!((a_eff - 0.25).abs() < 1e-10);
    assert_eq!(summary["summary"][0]["n"], 512);
    assert_eq!(summary["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn rows_are_ordered_and_reruns_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write(
        tmp.path(),
        "c.json",
        r#"{"experiment": "beltrami", "grid": {"d": 2, "N": 64, "L": 2}, "ladder": [4, 3],
            "seeds": {"list": [9, 2]}, "models": [{"kind": "model2_checkerboard", "a": 0.5}],
            "test_functions": [{"center": [0.1, 0.2], "width": 0.3}]}"#,
    );
    let mut csvs = Vec::new();
    for run in ["a", "b"] {
        let out = tmp.path().join(run);
        let o = homog(&["run-beltrami", &config, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        csvs.push(fs::read(out.join("beltrami.csv")).unwrap());
        assert_eq!(
            fs::read(tmp.path().join("a/beltrami_summary.json")).unwrap(),
            fs::read(out.join("beltrami_summary.json")).unwrap()
        );
    }
    assert_eq!(csvs[0], csvs[1]);
    let text = String::from_utf8(csvs.swap_remove(0)).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    let keys: Vec<(u32, u64, usize)> = lines[1..]
        .iter()
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            assert_eq!(f.len(), 10);
            for x in &f[4..9] {
                let v: f64 = x.parse().unwrap();
                assert_eq!(&format!("{v:.16e}"), x, "17-digit round trip");
            }
            (f[1].parse().unwrap(), f[2].parse().unwrap(), f[3].parse().unwrap())
        })
        .collect();
    assert_eq!(keys, vec![(3, 2, 0), (3, 9, 0), (4, 2, 0), (4, 9, 0)]);
}

#[test]
fn numerical_failure_exits_2_and_flushes() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write(
        tmp.path(),
        "c.json",
        r#"{"experiment": "checkerboard", "grid": {"d": 2, "N": 64, "L": 2}, "ladder": [3],
            "seeds": {"count": 2}, "models": [{"kind": "model2_checkerboard", "a": 0.9}],
            "solver": {"max_iter": 2}}"#,
    );
    let out = tmp.path().join("out");
    let o = homog(&["run-checkerboard", &config, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(out.join("checkerboard.csv")).unwrap(), format!("{CSV_HEADER}\n"));
    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("checkerboard_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["failures"].as_array().unwrap().len(), 2);
}

#[test]
fn render_and_mismatched_subcommand() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write(
        tmp.path(),
        "c.json",
        r#"{"experiment": "checkerboard", "grid": {"d": 2, "N": 64, "L": 2}, "ladder": [3],
            "models": [{"kind": "model2_checkerboard", "a": 0.5}]}"#,
    );
    let out = tmp.path().join("out");
    let o = homog(&["render", &config, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let ppm = fs::read(out.join("checkerboard_deformed_grid.ppm")).unwrap();
    assert!(ppm.starts_with(b"P6\n# config "));

    let o = homog(&["run-hgx", &config]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/experiment"));
}
