use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const LINEAR: &str = r#"{"family":"linear","params":{"theta0":1,"theta1":0.3,"theta2":0.4}}"#;

fn cpk(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpk"))
        .args(args)
        .current_dir(dir)
        .env_remove("CPK_SEED")
        .output()
        .expect("spawn cpk")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, body).unwrap();
    p
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_schema(schema: &str, doc: &Value) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("schemas")
        .join(schema);
    let schema = read_json(&path);
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{schema}: {errors:#?}");
}

fn simulate(dir: &TempDir, n: &str, seed: &str) -> PathBuf {
    write(dir, "linear.json", LINEAR);
    let out = cpk(
        dir.path(),
        &[
            "simulate",
            "--config",
            "linear.json",
            "--n",
            n,
            "--seed",
            seed,
            "--out",
            "traj.csv",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    dir.path().join("traj.csv")
}

#[test]
fn simulate_writes_csv_and_sidecar() {
    let dir = TempDir::new().unwrap();
    let csv = simulate(&dir, "10000", "42");
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,N,lambda"));
    assert_eq!(lines.count(), 10_000);
    let side = read_json(&dir.path().join("traj.csv.json"));
    assert_schema("simulate.schema.json", &side);
    assert_eq!(side["provenance"]["seed"], 42);
    assert_eq!(side["provenance"]["config"]["burn_in"], 500);
}

#[test]
fn simulate_is_reproducible() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let ca = fs::read(simulate(&a, "500", "7")).unwrap();
    let cb = fs::read(simulate(&b, "500", "7")).unwrap();
    assert_eq!(ca, cb);
}

#[test]
fn seed_precedence() {
    let dir = TempDir::new().unwrap();
    write(
        &dir,
        "cfg.json",
        &format!(r#"{{"model":{LINEAR},"n":20,"seed":5}}"#),
    );
    let run = |env: Option<&str>, flag: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_cpk"));
        cmd.current_dir(dir.path())
            .env_remove("CPK_SEED")
            .args(["simulate", "--config", "cfg.json", "--out", "t.csv"]);
        if let Some(e) = env {
            cmd.env("CPK_SEED", e);
        }
        if let Some(f) = flag {
            cmd.args(["--seed", f]);
        }
        assert!(cmd.status().unwrap().success());
        let side = read_json(&dir.path().join("t.csv.json"));
        (
            side["provenance"]["seed"].as_u64().unwrap(),
            side["provenance"]["seed_source"]
                .as_str()
                .unwrap()
                .to_string(),
        )
    };
    assert_eq!(run(None, None), (5, "config".into()));
    assert_eq!(run(Some("9"), None), (9, "env".into()));
    assert_eq!(run(Some("9"), Some("11")), (11, "flag".into()));
}

#[test]
fn contraction_violation_exits_2() {
    let dir = TempDir::new().unwrap();
    write(
        &dir,
        "bad.json",
        r#"{"family":"linear","params":{"theta0":1,"theta1":0.6,"theta2":0.5}}"#,
    );
    let out = cpk(
        dir.path(),
        &["simulate", "--config", "bad.json", "--n", "10"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("contraction violated: kappa1+kappa2=1.1"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn missing_file_exits_2_naming_path() {
    let dir = TempDir::new().unwrap();
    let out = cpk(
        dir.path(),
        &["simulate", "--config", "absent.json", "--n", "10"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("absent.json"));
    let out = cpk(
        dir.path(),
        &["fit", "--counts", "nothing.csv", "--family", "linear"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("nothing.csv"));
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = TempDir::new().unwrap();
    write(
        &dir,
        "typo.json",
        &format!(r#"{{"model":{LINEAR},"n":20,"sede":5}}"#),
    );
    let out = cpk(dir.path(), &["simulate", "--config", "typo.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("sede"), "{}", stderr(&out));
    write(
        &dir,
        "typo2.json",
        r#"{"family":"linear","params":{"theta0":1,"theta1":0.3,"theta2":0.4,"theta3":0}}"#,
    );
    let out = cpk(
        dir.path(),
        &["simulate", "--config", "typo2.json", "--n", "5"],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn test_decision_is_data() {
    let dir = TempDir::new().unwrap();
    simulate(&dir, "3000", "42");
    let out = cpk(
        dir.path(),
        &[
            "test",
            "--counts",
            "traj.csv",
            "--family",
            "linear",
            "--alpha",
            "0.05",
            "--out",
            "report.json",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let report = read_json(&dir.path().join("report.json"));
    assert_schema("test.schema.json", &report);
    assert_eq!(report["mode"], "composite");

    // a badly wrong simple null is rejected, and the exit status stays 0
    write(
        &dir,
        "wrong.json",
        r#"{"mode":"simple","model":{"family":"linear","params":{"theta0":1,"theta1":0.3,"theta2":0.05}}}"#,
    );
    let out = cpk(
        dir.path(),
        &[
            "test",
            "--counts",
            "traj.csv",
            "--hypothesis",
            "wrong.json",
            "--out",
            "wrong_report.json",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let report = read_json(&dir.path().join("wrong_report.json"));
    assert_schema("test.schema.json", &report);
    assert_eq!(report["reject"], true);
    assert_eq!(report["mode"], "simple");
}

#[test]
fn test_rejects_degenerate_alpha() {
    let dir = TempDir::new().unwrap();
    simulate(&dir, "100", "1");
    for alpha in ["0", "1", "-0.1"] {
        let out = cpk(
            dir.path(),
            &[
                "test", "--counts", "traj.csv", "--family", "linear", "--alpha", alpha,
            ],
        );
        assert_eq!(out.status.code(), Some(2), "alpha={alpha}");
    }
}

#[test]
fn fit_output_validates() {
    let dir = TempDir::new().unwrap();
    simulate(&dir, "2000", "3");
    let out = cpk(
        dir.path(),
        &[
            "fit", "--counts", "traj.csv", "--family", "linear", "--out", "fit.json",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let fit = read_json(&dir.path().join("fit.json"));
    assert_schema("fit.schema.json", &fit);
    assert_eq!(fit["n"], 2000);
    let too_short = cpk(
        dir.path(),
        &["fit", "--counts", "traj.csv", "--family", "poisson"],
    );
    assert_eq!(too_short.status.code(), Some(2));
}

#[test]
fn simulate_then_reconstruct_has_no_violations() {
    let dir = TempDir::new().unwrap();
    simulate(&dir, "5000", "11");
    let out = cpk(
        dir.path(),
        &[
            "reconstruct",
            "--trajectory",
            "traj.csv",
            "--depths",
            "1..30",
            "--out",
            "rec.csv",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("rec.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("d,max_err,bound"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 30);
    for r in &rows {
        assert!(r[1] <= r[2] * (1.0 + 1e-12) + 1e-12, "{r:?}");
    }
    let side = read_json(&dir.path().join("rec.csv.json"));
    assert_schema("reconstruct.schema.json", &side);
    assert_eq!(side["total_violations"], 0);
}

#[test]
fn mixing_table() {
    let dir = TempDir::new().unwrap();
    write(&dir, "linear.json", LINEAR);
    let out = cpk(
        dir.path(),
        &[
            "mixing",
            "--config",
            "linear.json",
            "--n-values",
            "1..6",
            "--replicates",
            "500",
            "--pool-size",
            "5000",
            "--seed",
            "3",
            "--out",
            "mix.csv",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("mix.csv")).unwrap();
    assert_eq!(
        text.lines().next(),
        Some("n,empirical_nonconv,bound,se,trunc_err")
    );
    assert_eq!(text.lines().count(), 7);
    let side = read_json(&dir.path().join("mix.csv.json"));
    assert_schema("mixing.schema.json", &side);
}

#[test]
fn study_is_thread_count_invariant() {
    let dir = TempDir::new().unwrap();
    write(
        &dir,
        "size.json",
        &format!(
            r#"{{"study":"size","model":{LINEAR},"n":200,"replicates":100,"alpha":0.05,"seed":17}}"#
        ),
    );
    let run = |threads: &str, out: &str, values: &str| {
        let o = cpk(
            dir.path(),
            &[
                "--threads",
                threads,
                "study",
                "--config",
                "size.json",
                "--out",
                out,
                "--values-out",
                values,
            ],
        );
        assert!(o.status.success(), "{}", stderr(&o));
        (
            fs::read(dir.path().join(out)).unwrap(),
            fs::read(dir.path().join(values)).unwrap(),
        )
    };
    let one = run("1", "a.json", "a.csv");
    let three = run("3", "b.json", "b.csv");
    assert_eq!(one, three);
    let summary = read_json(&dir.path().join("a.json"));
    assert_schema("study.schema.json", &summary);
    assert_eq!(summary["values"].as_array().unwrap().len(), 100);
    let csv = String::from_utf8(one.1).unwrap();
    assert_eq!(csv.lines().next(), Some("replicate,value,reject"));
}

#[test]
fn study_config_is_strict() {
    let dir = TempDir::new().unwrap();
    write(
        &dir,
        "bad.json",
        &format!(
            r#"{{"study":"moment","model":{LINEAR},"n":10000,"seed":1,"kappa_bar":0.8,"extra":1}}"#
        ),
    );
    let out = cpk(dir.path(), &["study", "--config", "bad.json"]);
    assert_eq!(out.status.code(), Some(2));
}
