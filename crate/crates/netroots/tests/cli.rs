use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn netroots(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netroots"))
        .args(args)
        .current_dir(dir)
        .env("NETROOTS_WORKERS", "1")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Checks required keys and a few types against the bundled schema.
fn check_report(r: &Value) {
    let schema: Value =
        serde_json::from_str(include_str!("../schema/report.schema.json")).expect("schema parses");
    for key in schema["required"].as_array().unwrap() {
        assert!(r.get(key.as_str().unwrap()).is_some(), "missing {key}");
    }
    for key in schema["properties"]["diagnostics"]["required"].as_array().unwrap() {
        assert!(r["diagnostics"].get(key.as_str().unwrap()).is_some(), "diagnostics missing {key}");
    }
    assert_eq!(r["schema_version"], "1.0");
    let n = r["n"].as_u64().unwrap() as usize;
    assert_eq!(r["nodes"].as_array().unwrap().len(), n);
    assert_eq!(r["root_distribution"].as_array().unwrap().len(), n);
    for (_, set) in r["credible_sets"].as_object().unwrap() {
        for node in set.as_array().unwrap() {
            assert!(node.is_string());
        }
    }
}

#[test]
fn simulate_then_infer() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&netroots(&["simulate", "--n", "60", "--m", "90", "--seed", "4", "--relabel", "--out", "g"], d));
    assert!(d.join("g.edges").exists());
    let truth: Value = serde_json::from_str(&fs::read_to_string(d.join("g.truth.json")).unwrap()).unwrap();
    assert!(truth.is_object());

    ok(&netroots(
        &["infer", "g.edges", "--seed", "1", "--out", "r.json", "--csv", "r.csv", "--samples", "s.ndjson"],
        d,
    ));
    let r: Value = serde_json::from_str(&fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    check_report(&r);
    let total: f64 = r["root_distribution"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);
    let sets = r["credible_sets"].as_object().unwrap();
    assert!(sets["0.8"].as_array().unwrap().len() <= sets["0.95"].as_array().unwrap().len());

    let csv = fs::read_to_string(d.join("r.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("node,root_probability"));
    assert_eq!(csv.lines().count(), 61);

    let samples = fs::read_to_string(d.join("s.ndjson")).unwrap();
    let first: Value = serde_json::from_str(samples.lines().next().unwrap()).unwrap();
    assert!(first.get("parent_array_hash").is_some());
    assert!(samples.lines().count() >= 2);
}

#[test]
fn infer_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&netroots(&["simulate", "--n", "40", "--m", "60", "--seed", "2", "--out", "g"], d));
    let strip = |s: String| {
        let mut v: Value = serde_json::from_str(&s).unwrap();
        v.as_object_mut().unwrap().remove("wall_time_s");
        v
    };
    let a = strip(ok(&netroots(&["infer", "g.edges", "--seed", "9"], d)));
    let b = strip(ok(&netroots(&["infer", "g.edges", "--seed", "9"], d)));
    assert_eq!(a, b);
}

#[test]
fn fixed_k_report_has_clusters() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("g.edges"), "a b\nb c\nc d\nd e\ne f\nf a\n").unwrap();
    let out = ok(&netroots(
        &["infer", "g.edges", "--variant", "fixed-k", "--k", "2", "--max-sweeps", "2000"],
        d,
    ));
    let r: Value = serde_json::from_str(&out).unwrap();
    check_report(&r);
    assert_eq!(r["clusters"]["root_distributions"].as_array().unwrap().len(), 2);
    let total: f64 = r["root_distribution"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).sum();
    assert!((total - 2.0).abs() < 1e-9);
}

#[test]
fn estimate_reports_theta() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&netroots(&["simulate", "--n", "200", "--m", "400", "--seed", "3", "--out", "g"], d));
    let e: Value = serde_json::from_str(&ok(&netroots(&["estimate", "g.edges"], d))).unwrap();
    assert_eq!(e["n"], 200);
    assert_eq!(e["m"], 400);
    assert!(e["theta_hat"].as_f64().unwrap() > 0.0);
}

#[test]
fn oracle_check_passes_on_small_graph() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("g.edges"), "0 1\n1 2\n2 3\n3 0\n0 2\n").unwrap();
    ok(&netroots(&["oracle-check", "g.edges", "--sweeps", "20000", "--max-tv", "0.03"], d));
}

#[test]
fn experiment_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&netroots(
        &["experiment", "--n", "50", "--m", "80", "--trials", "3", "--out", "t.csv", "--summary", "s.json"],
        d,
    ));
    let csv = fs::read_to_string(d.join("t.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    let s: Value = serde_json::from_str(&fs::read_to_string(d.join("s.json")).unwrap()).unwrap();
    assert!(s.to_string().contains("coverage"));
}

#[test]
fn bad_input_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("disc.edges"), "0 1\n2 3\n").unwrap();
    fs::write(d.join("junk.edges"), "0 1 2\n").unwrap();
    fs::write(d.join("ok.edges"), "0 1\n1 2\n").unwrap();
    for args in [
        vec!["infer", "disc.edges"],
        vec!["infer", "junk.edges"],
        vec!["infer", "ok.edges", "--beta", "-1"],
        vec!["infer", "ok.edges", "--variant", "fixed-k", "--k", "5"],
        vec!["infer", "ok.edges", "--epsilon", "1.5"],
        vec!["infer", "ok.edges", "--variant", "nonsense"],
    ] {
        let out = netroots(&args, d);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
    // missing files are environment errors, not validation errors
    assert_eq!(netroots(&["infer", "nope.edges"], d).status.code(), Some(1));
}
