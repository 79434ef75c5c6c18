use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command;

use betti_cli::cache::{cache_append, cache_lookup, job_hash, ResultRecord};
use serde_json::{json, Value};
use tempfile::TempDir;

fn corpus(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(format!("{name}.json"))
}

struct Run {
    code: i32,
    stdout: String,
}

impl Run {
    fn json(&self) -> Value {
        serde_json::from_str(&self.stdout).unwrap_or_else(|e| panic!("{e}: {}", self.stdout))
    }
}

fn run(dir: &TempDir, args: &[&str]) -> Run {
    let cache = dir.path().join("cache.jsonl");
    let out = Command::new(env!("CARGO_BIN_EXE_betti-heights"))
        .arg("--cache")
        .arg(&cache)
        .args(args)
        .current_dir(dir.path())
        .output()
        .unwrap();
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8(out.stdout).unwrap(),
    }
}

fn record(hash: &str, value: Value, timestamp: u64) -> ResultRecord {
    ResultRecord {
        job_hash: hash.into(),
        command: "height".into(),
        value,
        timestamp,
        tool_version: "0.1.0".into(),
    }
}

#[test]
fn cache_store_behaviour() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("store.jsonl");
    assert_eq!(cache_lookup(&path, "abc", None).unwrap().record, None);

    let first = record("abc", json!({"tate": 0.5}), 1);
    cache_append(&path, &first).unwrap();
    assert_eq!(
        cache_lookup(&path, "abc", None).unwrap().record,
        Some(first)
    );

    let second = record("abc", json!({"tate": 0.25}), 2);
    cache_append(&path, &record("other", json!(1), 3)).unwrap();
    cache_append(&path, &second).unwrap();
    std::fs::write(
        &path,
        std::fs::read_to_string(&path).unwrap() + "not json\n",
    )
    .unwrap();
    let l = cache_lookup(&path, "abc", Some("0.1.0")).unwrap();
    assert_eq!(l.record, Some(second));
    assert_eq!(l.skipped, 1);
    assert_eq!(
        cache_lookup(&path, "abc", Some("9.9.9")).unwrap().record,
        None
    );
}

#[test]
fn job_hash_ignores_key_order() {
    let a: Value = serde_json::from_str(r#"{"x": 1, "y": [1, 2]}"#).unwrap();
    let b: Value = serde_json::from_str(r#"{"y": [1, 2], "x": 1}"#).unwrap();
    assert_eq!(job_hash(&a), job_hash(&b));
    assert_ne!(job_hash(&a), job_hash(&json!({"x": 2, "y": [1, 2]})));
}

#[test]
fn example23_matches_closed_form() {
    let dir = TempDir::new().unwrap();
    let r = run(
        &dir,
        &[
            "--no-cache",
            "example23",
            "--n-max",
            "6",
            "--r",
            "0.5",
            "--schedule",
            "paper",
        ],
    );
    assert_eq!(r.code, 0);
    let v = r.json();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 6);
    assert!((rows[0]["quadrature"].as_f64().unwrap() - 4.0 * PI / 5.0).abs() < 1e-6);

    let csv = run(
        &dir,
        &["--no-cache", "example23", "--n-max", "6", "--format", "csv"],
    );
    assert_eq!(csv.code, 0);
    let mut lines = csv.stdout.lines();
    assert_eq!(lines.next(), Some("n,closed_form,quadrature,abs_err"));
    assert_eq!(lines.count(), 6);

    let bad = run(&dir, &["example23", "--n-max", "13", "--schedule", "unit"]);
    assert_eq!(bad.code, 2);
}

#[test]
fn height_uses_and_fills_the_cache() {
    let dir = TempDir::new().unwrap();
    let cfg = corpus("p1t");
    let cfg = cfg.to_str().unwrap();
    let first = run(&dir, &["height", "--config", cfg]);
    assert_eq!(first.code, 0);
    let v = first.json();
    assert_eq!(v["naive"], json!(0));
    assert_eq!(v["tate"], json!(0.5));
    assert_eq!(v["cached"], json!(false));
    let second = run(&dir, &["height", "--config", cfg]);
    let w = second.json();
    assert_eq!(w["cached"], json!(true));
    assert_eq!(w["job_hash"], v["job_hash"]);
    assert_eq!(w["estimates"], v["estimates"]);
    let other = run(
        &dir,
        &["--precision", "extended", "height", "--config", cfg],
    );
    assert_ne!(other.json()["job_hash"], v["job_hash"]);
}

#[test]
fn runs_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = corpus("p1t");
    let args = [
        "--no-cache",
        "partial",
        "--config",
        cfg.to_str().unwrap(),
        "--disc",
        "1",
    ];
    let a = run(&dir, &args);
    let b = run(&dir, &args);
    assert_eq!(a.code, 0);
    assert_eq!(a.stdout, b.stdout);
    assert!(a.json()["err"].as_f64().unwrap() <= 1e-7);
}

#[test]
fn validation_errors_exit_2_with_a_pointer() {
    let dir = TempDir::new().unwrap();
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    };
    let surface = r#""surface": {"a": {"num": ["0", "-1"]}, "b": {"num": ["0", "1"]}}"#;
    let empty = write(
        "empty.json",
        &format!(
            r#"{{{surface}, "sections": [], "discs": [{{"center": [-1, 0], "radius": 0.25}}]}}"#
        ),
    );
    let r = run(&dir, &["partial", "--config", empty.to_str().unwrap()]);
    assert_eq!(r.code, 2);
    assert_eq!(r.json()["error"]["pointer"], json!("/sections"));

    let off = write(
        "off.json",
        &format!(
            r#"{{{surface}, "sections": [{{"x": {{"num": ["2"]}}, "y": {{"num": ["1"]}}}}]}}"#
        ),
    );
    let r = run(&dir, &["height", "--config", off.to_str().unwrap()]);
    assert_eq!(r.code, 2);
    assert_eq!(r.json()["error"]["pointer"], json!("/sections/0"));

    let bad_disc = write(
        "disc.json",
        &format!(r#"{{{surface}, "discs": [{{"center": [0.1, 0], "radius": 0.5}}]}}"#),
    );
    let r = run(&dir, &["gram", "--config", bad_disc.to_str().unwrap()]);
    assert_eq!(r.code, 2);
    assert_eq!(r.json()["error"]["pointer"], json!("/discs/0"));

    let unknown = write("unknown.json", r#"{"colour": 1}"#);
    let r = run(&dir, &["height", "--config", unknown.to_str().unwrap()]);
    assert_eq!(r.json()["error"]["pointer"], json!("/colour"));

    let r = run(&dir, &["frobnicate"]);
    assert_eq!(r.code, 2);
    assert_eq!(r.json()["error"]["kind"], json!("usage"));
}

#[test]
fn brody_runs_and_flags_bounded_families() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("probe.csv");
    let r = run(
        &dir,
        &["--no-cache", "brody", "--csv", csv.to_str().unwrap()],
    );
    assert_eq!(r.code, 0);
    let v = r.json();
    assert_eq!(v["norm_bounded"], json!(false));
    assert_eq!(v["zoom_valid"], json!(true));
    for e in v["entries"].as_array().unwrap() {
        assert!((e["norm_at_0"].as_f64().unwrap() - 1.0).abs() <= 1e-3);
    }
    assert!(std::fs::read_to_string(&csv)
        .unwrap()
        .starts_with("z_re,z_im"));

    let bounded = corpus("bounded_family");
    let r = run(
        &dir,
        &["--no-cache", "brody", "--config", bounded.to_str().unwrap()],
    );
    assert_eq!(r.code, 0);
    assert_eq!(r.json()["norm_bounded"], json!(true));
}

#[test]
fn partial_writes_density_artifacts() {
    let dir = TempDir::new().unwrap();
    let cfg = corpus("p1t");
    let (csv, svg) = (dir.path().join("d.csv"), dir.path().join("d.svg"));
    let r = run(
        &dir,
        &[
            "partial",
            "--config",
            cfg.to_str().unwrap(),
            "--csv",
            csv.to_str().unwrap(),
            "--svg",
            svg.to_str().unwrap(),
        ],
    );
    assert_eq!(r.code, 0);
    assert!(std::fs::metadata(&csv).unwrap().len() > 0);
    assert!(std::fs::read_to_string(&svg).unwrap().contains("<svg"));
}

#[test]
fn verify_passes_on_the_corpus() {
    let dir = TempDir::new().unwrap();
    for name in ["power_family", "bounded_family", "torsion"] {
        let r = run(&dir, &["--no-cache", "verify", name]);
        let v = r.json();
        assert_eq!(r.code, 0, "{name}: {v}");
        assert_eq!(v["passed"], json!(true));
    }
}
