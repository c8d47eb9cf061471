use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mealscope_core::io::{read_events, read_manifest, read_params, read_recording, write_events};
use mealscope_core::{BiteSet, EventList, Interval, MealIntervalSet};
use tempfile::TempDir;

const TINY_NET: &[&str] = &[
    "--filters",
    "4,4,4",
    "--lstm-units",
    "4",
    "--epochs",
    "1",
    "--batch-size",
    "32",
    "--max-negatives",
    "200",
];

fn meals(start_s: f64, end_s: f64) -> MealIntervalSet {
    MealIntervalSet::new(vec![Interval::new(start_s, end_s).unwrap()]).unwrap()
}

fn mealscope(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mealscope"))
        .args(args)
        .output()
        .expect("spawn mealscope")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn assert_code(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout:\n{}\nstderr:\n{}",
        stdout(out),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Two subjects, one short meal each, and a single short day.
fn tiny_corpus(dir: &TempDir) -> PathBuf {
    let out = dir.path().join("corpus");
    let res = mealscope(&[
        "synth",
        "--output-dir",
        s(&out),
        "--subjects",
        "2",
        "--meals-per-subject",
        "1",
        "--meal-duration-s",
        "60",
        "--days",
        "1",
        "--day-duration-s",
        "400",
        "--day-meal-duration-s",
        "200",
        "--seed",
        "3",
    ]);
    assert_code(&res, 0);
    let manifest = out.join("manifest.csv");
    assert_eq!(stdout(&res).trim(), s(&manifest));
    manifest
}

#[test]
fn help_and_version_exit_zero() {
    assert_code(&mealscope(&["--help"]), 0);
    assert_code(&mealscope(&["--version"]), 0);
    assert_code(&mealscope(&["loso", "--help"]), 0);
}

#[test]
fn bad_usage_exits_one() {
    assert_code(&mealscope(&[]), 1);
    assert_code(&mealscope(&["frobnicate"]), 1);
    assert_code(&mealscope(&["preprocess", "--input", "a.csv"]), 1);
    assert_code(
        &mealscope(&["detect-meals", "--bites", "b.jsonl", "--method", "kmeans"]),
        1,
    );
}

#[test]
fn missing_input_exits_two() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing.csv");
    let out = mealscope(&[
        "preprocess",
        "--input",
        s(&missing),
        "--output",
        s(&dir.path().join("o.csv")),
    ]);
    assert_code(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.csv"));
}

#[test]
fn malformed_recording_exits_two() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "fs_hz=100,hand=R,units=g\nt,ax,ay,az,gx,gy,gz\n0,1,2,3\n").unwrap();
    let out = mealscope(&[
        "preprocess",
        "--input",
        s(&bad),
        "--output",
        s(&dir.path().join("o.csv")),
    ]);
    assert_code(&out, 2);
}

#[test]
fn synth_writes_manifest_and_files() {
    let dir = TempDir::new().unwrap();
    let manifest = tiny_corpus(&dir);
    let entries = read_manifest(&manifest).unwrap();
    assert_eq!(entries.len(), 3);
    for e in &entries {
        let rec = read_recording(&e.recording).unwrap();
        assert_eq!(rec.sample_rate_hz(), 100.0);
        let events = read_events(&e.events).unwrap();
        assert!(!events.bite_times().is_empty());
        assert_eq!(events.meals().len(), 1);
    }
}

#[test]
fn preprocess_keeps_length_and_rate() {
    let dir = TempDir::new().unwrap();
    let manifest = tiny_corpus(&dir);
    let entry = &read_manifest(&manifest).unwrap()[0];
    let output = dir.path().join("filtered.csv");
    assert_code(
        &mealscope(&["preprocess", "--input", s(&entry.recording), "--output", s(&output)]),
        0,
    );
    let raw = read_recording(&entry.recording).unwrap();
    let filtered = read_recording(&output).unwrap();
    assert_eq!(raw.len(), filtered.len());
    assert_eq!(raw.sample_rate_hz(), filtered.sample_rate_hz());
}

#[test]
fn evaluate_bites_against_itself_is_perfect() {
    let dir = TempDir::new().unwrap();
    let manifest = tiny_corpus(&dir);
    let entry = &read_manifest(&manifest).unwrap()[0];
    let ev = s(&entry.events);
    let out = mealscope(&["evaluate-bites", "--detections", ev, "--truth", ev, "--json"]);
    assert_code(&out, 0);
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["f1"], 1.0);
    assert_eq!(json["confusion"]["fp"], 0);

    let table = mealscope(&["evaluate-bites", "--detections", ev, "--truth", ev]);
    assert_code(&table, 0);
    assert!(stdout(&table).lines().nth(1).unwrap().ends_with("1.000   1.000  1.000"));
}

#[test]
fn evaluate_meals_reports_overlap() {
    let dir = TempDir::new().unwrap();
    let truth = dir.path().join("truth.jsonl");
    let est = dir.path().join("est.jsonl");
    write_events(&truth, &EventList::from_meals(&meals(100.0, 300.0))).unwrap();
    write_events(&est, &EventList::from_meals(&meals(200.0, 400.0))).unwrap();
    let out = mealscope(&[
        "evaluate-meals",
        "--estimate",
        s(&est),
        "--truth",
        s(&truth),
        "--duration-s",
        "1000",
        "--json",
    ]);
    assert_code(&out, 0);
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let jaccard = json["jaccard"].as_f64().unwrap();
    assert!((jaccard - 1.0 / 3.0).abs() < 0.01, "{jaccard}");
}

#[test]
fn detect_meals_dbscan_and_gaussian() {
    let dir = TempDir::new().unwrap();
    let bites = dir.path().join("bites.jsonl");
    let times = BiteSet::from_times((0..40).map(|i| 1000.0 + 10.0 * i as f64)).unwrap();
    write_events(&bites, &EventList::from_bites(&times)).unwrap();

    let out = mealscope(&[
        "detect-meals",
        "--bites",
        s(&bites),
        "--method",
        "dbscan",
        "--eps-s",
        "30",
    ]);
    assert_code(&out, 0);
    let path = dir.path().join("dbscan.jsonl");
    std::fs::write(&path, stdout(&out)).unwrap();
    let meals = read_events(&path).unwrap().meals();
    assert_eq!(meals.len(), 1);
    assert_eq!(
        (meals.intervals()[0].start_s, meals.intervals()[0].end_s),
        (1000.0, 1390.0)
    );

    let gauss = dir.path().join("gauss.jsonl");
    let out = mealscope(&[
        "detect-meals",
        "--bites",
        s(&bites),
        "--duration-s",
        "3000",
        "--fs-hz",
        "100",
        "--output",
        s(&gauss),
    ]);
    assert_code(&out, 0);
    let meals = read_events(&gauss).unwrap().meals();
    assert_eq!(meals.len(), 1);
    assert!(
        meals.intervals()[0].start_s < 1050.0 && meals.intervals()[0].end_s > 1340.0,
        "{meals:?}"
    );
}

#[test]
fn detect_meals_needs_duration() {
    let dir = TempDir::new().unwrap();
    let bites = dir.path().join("bites.jsonl");
    write_events(
        &bites,
        &EventList::from_bites(&BiteSet::from_times([1.0, 2.0]).unwrap()),
    )
    .unwrap();
    assert_code(&mealscope(&["detect-meals", "--bites", s(&bites)]), 1);
}

#[test]
fn train_then_detect() {
    let dir = TempDir::new().unwrap();
    let manifest = tiny_corpus(&dir);
    let model = dir.path().join("model.bin");
    let mut args = vec![
        "train",
        "--manifest",
        s(&manifest),
        "--output",
        s(&model),
        "--exclude-subject",
        "s1",
    ];
    args.extend_from_slice(TINY_NET);
    assert_code(&mealscope(&args), 0);
    let params = read_params(&model).unwrap();
    assert_eq!(params.config().lstm_units, 4);

    let entry = &read_manifest(&manifest).unwrap()[0];
    let events = dir.path().join("bites.jsonl");
    let probs = dir.path().join("p.csv");
    let out = mealscope(&[
        "detect-bites",
        "--model",
        s(&model),
        "--input",
        s(&entry.recording),
        "--output",
        s(&events),
        "--probabilities",
        s(&probs),
    ]);
    assert_code(&out, 0);
    read_events(&events).unwrap();
    let text = std::fs::read_to_string(&probs).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,p"));
    let n = read_recording(&entry.recording).unwrap().len();
    assert_eq!(lines.count(), n / 4);
}

#[test]
fn train_rejects_bad_network() {
    let dir = TempDir::new().unwrap();
    let manifest = tiny_corpus(&dir);
    let model = dir.path().join("model.bin");
    let out = mealscope(&[
        "train",
        "--manifest",
        s(&manifest),
        "--output",
        s(&model),
        "--filters",
        "4,4",
    ]);
    assert_code(&out, 1);
    assert!(!model.exists());
}

#[test]
fn loso_runs_every_fold() {
    let dir = TempDir::new().unwrap();
    let manifest = tiny_corpus(&dir);
    let models = dir.path().join("models");
    let mut args = vec!["loso", "--manifest", s(&manifest), "--model-dir", s(&models), "--json"];
    args.extend_from_slice(TINY_NET);
    let out = mealscope(&args);
    assert_code(&out, 0);
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let folds = json["folds"].as_array().unwrap();
    assert_eq!(folds.len(), 2);
    assert!(json["pooled"]["bites"].is_object());
    assert!(json["pooled"]["meals"].is_object());
    assert!(models.join("s0.bin").exists() && models.join("s1.bin").exists());

    let mut args = vec!["loso", "--manifest", s(&manifest), "--subject", "s9"];
    args.extend_from_slice(TINY_NET);
    assert_code(&mealscope(&args), 1);
}
