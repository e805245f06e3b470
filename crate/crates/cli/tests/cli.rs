//! Command-line behaviour: outputs, error bodies and exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_storyremix"))
        .args(args)
        .output()
        .unwrap()
}

fn json_out(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn json_err(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("error line on stderr");
    serde_json::from_str(line).unwrap()
}

fn golden_copy(dir: &Path) -> String {
    let path = dir.join("store.json");
    std::fs::copy(fixtures().join("golden/store.json"), &path).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn ingest_reports_new_ids_and_appends() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("s.json");
    let store = store.to_str().unwrap();
    let tale = fixtures().join("tales/cinderella.txt");
    let out = run(&[
        "ingest",
        fixtures().join("manifest.json").to_str().unwrap(),
        "--out",
        store,
    ]);
    assert!(out.status.success());
    assert_eq!(
        json_out(&out)["story_ids"],
        serde_json::json!(["st-0001", "st-0002", "st-0003"])
    );
    let out = run(&["ingest", tale.to_str().unwrap(), "--out", store]);
    assert_eq!(json_out(&out)["story_ids"], serde_json::json!(["st-0004"]));
}

#[test]
fn replay_miss_exits_with_gateway_code() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("s.json");
    let text = dir.path().join("new.txt");
    std::fs::write(&text, "A story that was never recorded.").unwrap();
    let store = store.to_str().unwrap();
    assert!(run(&["ingest", text.to_str().unwrap(), "--out", store])
        .status
        .success());
    let out = run(&[
        "analyze",
        store,
        "--replay",
        fixtures().join("cassette.jsonl").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json_err(&out)["error"], "FixtureMiss");
    // The failure is recorded in the store, not lost.
    let snapshot: Value = serde_json::from_slice(&run(&["export", store]).stdout).unwrap();
    assert_eq!(snapshot["analysis"]["st-0001"]["state"], "failed");
}

#[test]
fn arc_prints_normalized_points() {
    let dir = tempfile::tempdir().unwrap();
    let store = golden_copy(dir.path());
    let out = run(&["arc", &store, "--story", "st-0002"]);
    assert!(out.status.success());
    let arc = json_out(&out);
    assert_eq!(arc["protagonist"], "Little Red Cap");
    let points = arc["points"].as_array().unwrap();
    assert_eq!(points.len(), 6);
    assert_eq!(points[5]["x"], 1.0);
    for p in points {
        assert_eq!(p["y"].as_f64().unwrap(), 2.0 * p["raw_valence"].as_f64().unwrap() - 1.0);
    }
    let out = run(&["arc", &store, "--story", "st-0404"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json_err(&out)["error"], "UnknownStory");
}

#[test]
fn similar_finds_closest_tale() {
    let dir = tempfile::tempdir().unwrap();
    let store = golden_copy(dir.path());
    let cassette = fixtures().join("cassette.jsonl");
    let out = run(&[
        "similar",
        &store,
        "--draft",
        fixtures().join("tales/cinderella.txt").to_str().unwrap(),
        "--replay",
        cassette.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let best = json_out(&out);
    assert_eq!(
        (best["story_id"].as_str(), best["S"].as_f64()),
        (Some("st-0001"), Some(1.0))
    );

    let out = run(&[
        "similar",
        &store,
        "--draft",
        fixtures().join("drafts/maya.txt").to_str().unwrap(),
        "--replay",
        cassette.to_str().unwrap(),
    ]);
    let best = json_out(&out);
    assert_eq!(best["story_id"], "st-0003");
    assert!((0.0..1.0).contains(&best["S"].as_f64().unwrap()));
}

#[test]
fn bad_inputs_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.json");
    std::fs::write(&manifest, "[]").unwrap();
    let out = run(&[
        "ingest",
        manifest.to_str().unwrap(),
        "--out",
        dir.path().join("s.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json_err(&out)["error"], "MalformedManifest");
    let out = run(&["export", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json_err(&out)["error"], "StoreError");
}
