mod common;

use std::fs;
use std::path::Path;

use common::*;

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const TRIANGLE: &str = r#"{
  "variables": [{"name": "A", "card": 2}, {"name": "B", "card": 2}, {"name": "C", "card": 2}],
  "components": [
    {"vars": ["A", "B"], "probs": [0.25, 0.25, 0.25, 0.25]},
    {"vars": ["B", "C"], "probs": [0.25, 0.25, 0.25, 0.25]},
    {"vars": ["C", "A"], "probs": [0.25, 0.25, 0.25, 0.25]}
  ]
}"#;

const MISMATCHED: &str = r#"{
  "variables": [{"name": "A", "card": 2}, {"name": "B", "card": 2}, {"name": "C", "card": 2}],
  "components": [
    {"vars": ["A", "B"], "probs": [0.1, 0.1, 0.4, 0.4]},
    {"vars": ["B", "C"], "probs": [0.4, 0.4, 0.1, 0.1]}
  ]
}"#;

#[test]
fn score_reports_fixture_values() {
    let out = cli(&["score", path(&fixture("fig1.json"))]);
    assert!(out.status.success());
    let text = stdout(&out);
    for (key, want) in [
        ("g_standard", -2.453268),
        ("g_alt", -2.457152),
        ("k", 0.992126),
        ("uniform", -2.772589),
        ("ln_k", -0.007905),
    ] {
        assert_eq!(field(&text, key), Some(want), "{key}");
    }
    assert!(text.contains("- G(BC) = -1.279854"));
    assert!(text.contains("+ ln k = -0.007905"));
}

#[test]
fn independent_fixture_has_unit_k() {
    let text = stdout(&cli(&["score", path(&fixture("fig1_indep.json"))]));
    assert_eq!(field(&text, "k"), Some(1.0));
    assert_eq!(field(&text, "ln_k"), Some(0.0));
    let g = (FIG1_INDEP_G * 1e6).round() / 1e6;
    assert_eq!(field(&text, "g_standard"), Some(g));
    assert_eq!(field(&text, "g_alt"), Some(g));
}

#[test]
fn unpack_lists_steps_in_order() {
    let out = cli(&["unpack", path(&fixture("fig1.json"))]);
    let text = stdout(&out);
    let steps: Vec<&str> = text.lines().filter(|l| l.starts_with("step")).collect();
    assert_eq!(
        steps,
        [
            "step 1: component BCD, tail {D}, overlap {B,C}, O* = {B}, {C}",
            "step 2: component AC, tail {C}, overlap {A}, O* = {A}",
            "step 3: component AB, tail {A,B}, overlap {}, O* = {}",
        ]
    );
    assert!(text.contains("labels = web\n"));
}

#[test]
fn validate_rejects_bad_sums() {
    let dir = tempfile::tempdir().unwrap();
    let good = fs::read_to_string(fixture("fig1.json")).unwrap();
    let bad = write(dir.path(), "bad.json", &good.replacen("0.4", "0.2", 1));
    let out = cli(&["validate", &bad]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("component AB: 4 entries, sum = 0.8 FAIL"));
    assert!(stderr(&out).starts_with("error: normalization: "));

    let out = cli(&["validate", path(&fixture("fig1.json"))]);
    assert!(out.status.success());
    assert!(stdout(&out).ends_with("valid\n"));
}

#[test]
fn small_deviations_warn() {
    let dir = tempfile::tempdir().unwrap();
    let good = fs::read_to_string(fixture("fig1.json")).unwrap();
    let near = write(dir.path(), "near.json", &good.replacen("0.4", "0.4000001", 1));
    let out = cli(&["validate", &near]);
    assert!(out.status.success());
    assert!(stderr(&out).starts_with("warning: component AB sums to"));
}

#[test]
fn expand_writes_joint_table() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("px.txt");
    let out = cli(&[
        "expand", path(&fixture("fig1.json")), "--model", "standard", "--out", path(&out_path),
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).is_empty());
    let text = fs::read_to_string(out_path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("model = standard"));
    assert_eq!(lines.next(), Some("k = 1"));
    assert_eq!(lines.next(), Some("A B C D p"));
    let rows: Vec<f64> = lines
        .map(|l| l.rsplit(' ').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(rows.len(), 16);
    for (got, want) in rows.iter().zip(fig1_px()) {
        assert!((got - want).abs() < 1e-12);
    }
    assert!(text.contains("\n1 1 1 1 0.128\n"));
}

#[test]
fn expand_alt_prints_k() {
    let text = stdout(&cli(&["expand", path(&fixture("fig1.json")), "--model", "alt"]));
    assert!(text.starts_with("model = alt\nk = 0.992125984252\n"));
    assert!(text.contains("\n0 0 0 0 0.204094488189\n"));
}

#[test]
fn non_webs_need_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let tri = write(dir.path(), "tri.json", TRIANGLE);
    let out = cli(&["expand", &tri, "--model", "alt"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("error: not-a-web: "));

    let out = cli(&["expand", &tri, "--model", "alt", "--allow-non-web"]);
    assert!(out.status.success());
    assert!(stderr(&out).starts_with("warning: "));
    assert!(stdout(&out).contains("k = 1\n"));

    let out = cli(&["unpack", &tri]);
    assert!(stdout(&out).contains("labels = non_web"));
    assert!(!out.status.success());
}

#[test]
fn consistency_verdicts() {
    let text = stdout(&cli(&["consistency", path(&fixture("fig1.json"))]));
    assert!(text.starts_with("status = consistent\n"));

    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "mismatch.json", MISMATCHED);
    let text = stdout(&cli(&["consistency", &bad]));
    assert!(text.starts_with("status = inconsistent\n"), "{text}");
    let out = cli(&["maxent", &bad]);
    assert!(stderr(&out).starts_with("error: inconsistent: "));
}

#[test]
fn maxent_reports_gap() {
    let text = stdout(&cli(&["maxent", path(&fixture("fig1.json"))]));
    assert!((field(&text, "entropy").unwrap() + FIG1_G_STANDARD).abs() < 1e-10);
    assert!(field(&text, "entropy_gap").unwrap().abs() < 1e-10);
    assert!(text.contains("px_in_k = true"));
}

#[test]
fn experiment_is_reproducible_and_accepts_files() {
    let args = ["experiment", "--structure", "chain", "--trials", "20", "--seed", "3"];
    let a = cli(&args);
    let b = cli(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert_eq!(text.lines().count(), 21);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",true,tie")));
    assert!(stderr(&a).contains("ordering_violations = 0"));

    let from_file = cli(&[
        "experiment", "--structure", path(&fixture("fig1.json")), "--trials", "20", "--seed", "3",
    ]);
    let preset = cli(&["experiment", "--structure", "fig1", "--trials", "20", "--seed", "3"]);
    assert_eq!(from_file.stdout, preset.stdout);
}

#[test]
fn probe_finds_both_unpackings() {
    let text = stdout(&cli(&["probe", path(&fixture("fig1.json"))]));
    assert_eq!(field(&text, "unpackings"), Some(2.0));
    assert!(field(&text, "max_joint_deviation").unwrap() < 1e-9);
    assert!(field(&text, "max_score_deviation").unwrap() < 1e-9);
}

#[test]
fn errors_are_machine_readable() {
    let out = cli(&["experiment", "--structure", "nope", "--trials", "1"]);
    assert!(stderr(&out).starts_with("error: unknown-preset: "));
    let out = cli(&["experiment", "--structure", "fig1", "--trials", "0"]);
    assert!(stderr(&out).starts_with("error: parse: "));

    let dir = tempfile::tempdir().unwrap();
    let junk = write(dir.path(), "junk.json", "{");
    let out = cli(&["score", &junk]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("error: parse: "));
    let out = cli(&["score", path(&dir.path().join("missing.json"))]);
    assert!(stderr(&out).starts_with("error: io: "));
}
