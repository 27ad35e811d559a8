//! The `bo-lab` binary: exit codes, run directories and golden norm values.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bo_lab(args: &[&str], out_root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bo-lab"))
        .args(args)
        .env("BO_LAB_OUT", out_root)
        .env_remove("BO_LAB_THREADS")
        .output()
        .unwrap()
}

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
        .display()
        .to_string()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn run_dirs(root: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(root)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    v.sort();
    v
}

const SMALL: &str = r#""solver": {"period": 32.0, "n_points": 64, "n_t": 33}"#;

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("config.json");
    fs::write(&p, body).unwrap();
    p.display().to_string()
}

fn assert_close(a: f64, b: f64, what: &str) {
    assert!(
        (a - b).abs() <= 1e-10 * (1.0 + b.abs()),
        "{what}: {a} vs golden {b}"
    );
}

fn check_golden(field: &str, args: &[&str], golden: &str) {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let mut full = vec!["norms", field];
    full.extend_from_slice(args);
    full.extend_from_slice(&["--out", out.to_str().unwrap()]);
    let o = bo_lab(&full, tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let got: Value = serde_json::from_slice(&fs::read(out.join("norm.json")).unwrap()).unwrap();
    let want: Value = serde_json::from_slice(&fs::read(data(golden)).unwrap()).unwrap();
    assert_eq!(got["name"], want["name"]);
    assert_close(
        got["value"].as_f64().unwrap(),
        want["value"].as_f64().unwrap(),
        "value",
    );
    let (g, w) = (
        got["breakdown"].as_array().unwrap(),
        want["breakdown"].as_array().unwrap(),
    );
    assert_eq!(g.len(), w.len());
    for (a, b) in g.iter().zip(w) {
        assert_eq!(a["label"], b["label"]);
        assert_close(
            a["value"].as_f64().unwrap(),
            b["value"].as_f64().unwrap(),
            b["label"].as_str().unwrap(),
        );
    }
}

#[test]
fn norms_match_golden_files() {
    check_golden(
        &data("gaussian.bofield"),
        &["--norm", "hsigma", "--sigma", "1", "--effort", "baselines"],
        "gaussian.hsigma1.json",
    );
    check_golden(
        &data("low_band.bofield"),
        &["--norm", "x", "--k", "0"],
        "low_band.x0.json",
    );
    check_golden(
        &data("low_band.bofield"),
        &["--norm", "z0"],
        "low_band.z0.json",
    );
}

#[test]
fn norms_rejects_wrong_layout_and_missing_file() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bo_lab(
        &["norms", &data("gaussian.bofield"), "--norm", "x"],
        tmp.path(),
    );
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("space-time"));
    let o = bo_lab(&["norms", "no-such.bofield", "--norm", "b0"], tmp.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn usage_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&bo_lab(&["frobnicate"], tmp.path())), 2);
    assert_eq!(code(&bo_lab(&["verify", "--suite", "nope"], tmp.path())), 2);
    assert_eq!(
        code(&bo_lab(
            &["counterexample", "--which", "51", "--k-range", "12:8"],
            tmp.path()
        )),
        2
    );
    assert_eq!(
        code(&bo_lab(
            &["counterexample", "--which", "53", "--k-range", "8:8"],
            tmp.path()
        )),
        2
    );
    let o = Command::new(env!("CARGO_BIN_EXE_bo-lab"))
        .args(["verify", "--suite", "identities"])
        .env("BO_LAB_OUT", tmp.path())
        .env("BO_LAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("BO_LAB_THREADS"));
}

#[test]
fn config_errors_point_at_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "{\n  \"sigma\": 0.0,\n  \"n_pionts\": 64\n}\n");
    let o = bo_lab(&["solve", "--config", &cfg], tmp.path());
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("n_pionts") && err.contains("line 3"), "{err}");
    let cfg = write_config(tmp.path(), &format!("{{{SMALL}, \"data\": \"zero\"}}"));
    assert_eq!(
        code(&bo_lab(
            &["solve", "--config", &cfg, "--dt", "0.3"],
            tmp.path()
        )),
        2
    );
}

#[test]
fn solve_writes_a_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("runs");
    let cfg = write_config(
        tmp.path(),
        &format!(
            "{{{SMALL}, \"data\": {{\"suite\": {{\"name\": \"gaussian\", \"target\": 0.04}}}}}}"
        ),
    );
    let o = bo_lab(&["solve", "--config", &cfg], &root);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let dirs = run_dirs(&root);
    assert_eq!(dirs.len(), 1);
    let run = &dirs[0];
    for name in [
        "manifest.json",
        "config.json",
        "trace.csv",
        "snapshots.csv",
        "solution.bofield",
        "residual.json",
        "decay.svg",
    ] {
        assert!(run.join(name).is_file(), "missing {name}");
    }
    let o = bo_lab(&["report", run.to_str().unwrap()], &root);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS converged"));

    // The solution is a valid field file for the norms subcommand.
    let sol = run.join("solution.bofield");
    let o = bo_lab(
        &[
            "norms",
            sol.to_str().unwrap(),
            "--norm",
            "f",
            "--effort",
            "baselines",
        ],
        &root,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    // Tampering with an artifact is detected.
    fs::write(run.join("trace.csv"), "edited\n").unwrap();
    let o = bo_lab(&["report", run.to_str().unwrap()], &root);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stdout).contains("MODIFIED"));
}

#[test]
fn numerical_failures_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let big = write_config(
        tmp.path(),
        r#"{"solver": {"period": 32.0, "n_points": 64, "n_t": 33, "epsilon_bar": 100.0}, "data": {"suite": {"name": "gaussian", "target": 20.0}}}"#,
    );
    let o = bo_lab(&["solve", "--config", &big], tmp.path());
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("diverged"));
    let run = run_dirs(tmp.path())
        .into_iter()
        .find(|p| p.is_dir())
        .unwrap();
    assert!(
        run.join("trace.csv").is_file(),
        "divergence keeps the trace"
    );

    // Converges, but the data are not small.
    let cfg = write_config(
        tmp.path(),
        &format!(
            "{{{SMALL}, \"data\": {{\"suite\": {{\"name\": \"gaussian\", \"target\": 0.5}}}}}}"
        ),
    );
    let o = bo_lab(&["solve", "--config", &cfg], tmp.path());
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL data below epsilon_bar"));
}

#[test]
fn zero_data_and_verify_succeed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{{{SMALL}, \"data\": \"zero\"}}"));
    assert_eq!(code(&bo_lab(&["solve", "--config", &cfg], tmp.path())), 0);
    let o = bo_lab(
        &["verify", "--suite", "identities", "--seed", "3"],
        tmp.path(),
    );
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("# suite identities seed 3"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for i in 0..2 {
        let out = tmp.path().join(format!("n{i}"));
        let o = bo_lab(
            &[
                "norms",
                &data("low_band.bofield"),
                "--norm",
                "z0",
                "--out",
                out.to_str().unwrap(),
            ],
            tmp.path(),
        );
        assert_eq!(code(&o), 0);
        outputs.push((
            fs::read(out.join("norm.json")).unwrap(),
            fs::read(out.join("breakdown.csv")).unwrap(),
            o.stdout,
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
    let mut reports = Vec::new();
    for i in 0..2 {
        let out = tmp.path().join(format!("c{i}"));
        let o = bo_lab(
            &[
                "counterexample",
                "--which",
                "52",
                "--k-range",
                "8:10",
                "--out",
                out.to_str().unwrap(),
            ],
            tmp.path(),
        );
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
        reports.push(fs::read(out.join("report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
}
