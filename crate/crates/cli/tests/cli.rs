use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pcwk::estimators::Truncation;
use pcwk_cli::{parse_spec_str, Task};
use tempfile::TempDir;

const WHITE: &str = "m,row,col,re,im\n0,0,0,1,0\n";

fn pcwk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcwk"))
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn errors(text: &str, base: &Path) -> Vec<String> {
    parse_spec_str(text, base).unwrap_err().0
}

fn summary_value(out: &Path, key: &str) -> String {
    let text = fs::read_to_string(out.join("summary.csv")).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key},")).map(str::to_string))
        .unwrap_or_else(|| panic!("no `{key}` in summary:\n{text}"))
}

#[test]
fn minimal_spec_takes_defaults() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "w.csv", WHITE);
    let spec = parse_spec_str(
        r#"{"task": "filter", "lift": {"harmonics": 2},
            "densities": {"f": "w.csv", "g": "w.csv"}, "weights": {"blocks": [[1, 0]]}}"#,
        dir.path(),
    )
    .unwrap();
    assert_eq!(spec.task, Task::Filter);
    assert_eq!(spec.numerics.grid, 2048);
    assert_eq!(spec.numerics.seed, 0);
    assert_eq!(spec.numerics.truncation, Truncation::Auto);
    assert_eq!(spec.lift.period, 1.0);
    assert_eq!(spec.lift.quadrature_points, 8);
    assert_eq!(spec.f.as_deref(), Some(dir.path().join("w.csv").as_path()));
}

#[test]
fn zero_harmonics_is_rejected() {
    let dir = TempDir::new().unwrap();
    let errs = errors(
        r#"{"task": "factorize", "lift": {"harmonics": 0}}"#,
        dir.path(),
    );
    assert!(errs.iter().any(|e| e.contains("K must be ≥ 1")), "{errs:?}");
}

#[test]
fn weights_cannot_be_doubly_specified() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "w.csv", WHITE);
    write(dir.path(), "a.csv", "t,a\n0,1\n");
    let errs = errors(
        r#"{"task": "extrapolate", "lift": {"harmonics": 1}, "densities": {"f": "w.csv"},
            "weights": {"blocks": [[1]], "csv": "a.csv"}}"#,
        dir.path(),
    );
    assert_eq!(
        errs,
        vec!["weights doubly specified (`weights.blocks` and `weights.csv`)".to_string()]
    );
}

#[test]
fn all_problems_are_reported_together() {
    let dir = TempDir::new().unwrap();
    let errs = errors(
        r#"{"task": "filter", "lift": {"harmonics": 1, "colour": 3}, "numerics": {"grid": 15},
            "weights": {"blocks": [[1, 2]], "horizon": "extrapolation"}, "extra": true}"#,
        dir.path(),
    );
    let want = [
        "unknown key `extra`",
        "unknown key `lift.colour`",
        "numerics.grid",
        "`weights.blocks[0]` has 2 entries, expected K = 1",
        "`weights.horizon` is extrapolation but task filter needs filtering",
        "task filter requires `densities.f`",
        "task filter requires `densities.g`",
    ];
    for w in want {
        assert!(
            errs.iter().any(|e| e.contains(w)),
            "missing {w:?} in {errs:#?}"
        );
    }
}

#[test]
fn unknown_task_and_missing_files() {
    let dir = TempDir::new().unwrap();
    let errs = errors(
        r#"{"task": "smooth", "lift": {"harmonics": 1}}"#,
        dir.path(),
    );
    assert!(errs.iter().any(|e| e.contains("smooth")), "{errs:?}");
    let errs = errors(
        r#"{"task": "factorize", "lift": {"harmonics": 1}, "densities": {"f": "nope.csv"}}"#,
        dir.path(),
    );
    assert!(errs.iter().any(|e| e.contains("nope.csv")), "{errs:?}");
    assert!(parse_spec_str("[1, 2]", dir.path()).is_err());
    assert!(parse_spec_str("{", dir.path()).unwrap_err().0[0].contains("not valid JSON"));
}

#[test]
fn white_noise_filtering_end_to_end() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "w.csv", WHITE);
    let spec = write(
        dir.path(),
        "s.json",
        r#"{"task": "filter", "lift": {"harmonics": 1},
            "densities": {"f": "w.csv", "g": "w.csv"}, "weights": {"blocks": [[1]]}}"#,
    );
    let out = dir.path().join("out");
    let res = pcwk(&[
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--grid",
        "256",
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let mse: f64 = summary_value(&out, "mse").parse().unwrap();
    assert!((mse - 0.5).abs() < 1e-12, "{mse}");
    assert_eq!(summary_value(&out, "grid"), "256");
    let h = fs::read_to_string(out.join("h.csv")).unwrap();
    assert!(h.starts_with("lambda,component,re_h,im_h\n"));
    assert_eq!(h.lines().count(), 257);
    assert!(out.join("h_coefficients.csv").exists());
}

#[test]
fn indefinite_density_exits_with_numerical_failure() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "w.csv", WHITE);
    write(
        dir.path(),
        "bad.csv",
        "m,row,col,re,im\n-1,0,0,1,0\n0,0,0,1,0\n1,0,0,1,0\n",
    );
    let spec = write(
        dir.path(),
        "s.json",
        r#"{"task": "filter", "lift": {"harmonics": 1},
            "densities": {"f": "bad.csv", "g": "w.csv"}, "weights": {"blocks": [[1]]}}"#,
    );
    let out = dir.path().join("out");
    let res = pcwk(&[
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("grid node 0"), "{stderr}");
    assert!(!out.join("summary.csv").exists());
}

#[test]
fn invalid_spec_exits_with_usage_error() {
    let dir = TempDir::new().unwrap();
    let spec = write(
        dir.path(),
        "s.json",
        r#"{"task": "filter", "lift": {"harmonics": 0}}"#,
    );
    let res = pcwk(&["--spec", spec.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("invalid specification"));
}

#[test]
fn dry_run_writes_nothing() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "w.csv", WHITE);
    let spec = write(
        dir.path(),
        "s.json",
        r#"{"task": "factorize", "lift": {"harmonics": 1}, "densities": {"f": "w.csv"}, "numerics": {"seed": 4}}"#,
    );
    let out = dir.path().join("out");
    let res = pcwk(&[
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--dry-run",
        "--seed",
        "9",
    ]);
    assert!(res.status.success());
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(
        stderr.contains("grid: 2048") && stderr.contains("seed: 9"),
        "{stderr}"
    );
    assert!(!out.exists());
}

#[test]
fn uncertified_minimax_is_written_and_flagged() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "g2.csv",
        "m,row,col,re,im\n-1,0,0,0.25,0\n0,0,0,1,0\n1,0,0,0.25,0\n",
    );
    let spec = write(
        dir.path(),
        "s.json",
        r#"{"task": "minimax-filter-d0eps", "lift": {"harmonics": 1}, "weights": {"blocks": [[1], [0.5]]},
            "class_params": {"p_zeta": 1, "p_theta": 1, "epsilon": 0.5, "g2": "g2.csv", "samples": 5},
            "numerics": {"grid": 256, "max_iter": 20}}"#,
    );
    let out = dir.path().join("out");
    let res = pcwk(&[
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("not certified"));
    assert_eq!(summary_value(&out, "certified"), "false");
    assert!(out.join("f0.csv").exists() && out.join("g0.csv").exists());
}

#[test]
fn bundled_specs_run() {
    let specs = Path::new(env!("CARGO_MANIFEST_DIR")).join("specs");
    let mut names: Vec<_> = fs::read_dir(&specs)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    names.sort();
    assert!(names.len() >= 11);
    let dir = TempDir::new().unwrap();
    for spec in names {
        let out = dir.path().join(spec.file_stem().unwrap());
        let res = pcwk(&[
            "--spec",
            spec.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--grid",
            "512",
        ]);
        assert!(
            res.status.success(),
            "{}: {}",
            spec.display(),
            String::from_utf8_lossy(&res.stderr)
        );
        assert!(out.join("summary.csv").exists());
    }
}

#[test]
fn csv_bodies_are_reproducible_across_runs() {
    let dir = TempDir::new().unwrap();
    let spec = Path::new(env!("CARGO_MANIFEST_DIR")).join("specs/simulate.json");
    let outs: Vec<PathBuf> = ["a", "b"].iter().map(|n| dir.path().join(n)).collect();
    for out in &outs {
        let res = pcwk(&[
            "--spec",
            spec.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--grid",
            "256",
        ]);
        assert!(res.status.success());
    }
    for name in ["path.csv", "summary.csv"] {
        assert_eq!(
            fs::read(outs[0].join(name)).unwrap(),
            fs::read(outs[1].join(name)).unwrap(),
            "{name}"
        );
    }
    let other = dir.path().join("c");
    pcwk(&[
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        other.to_str().unwrap(),
        "--grid",
        "256",
        "--seed",
        "4",
    ]);
    assert_ne!(
        fs::read(outs[0].join("path.csv")).unwrap(),
        fs::read(other.join("path.csv")).unwrap()
    );
}
