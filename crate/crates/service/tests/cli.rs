use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn perceptmap(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_perceptmap"))
        .env_remove("PERCEPTMAP_DATA_DIR")
        .env("RUST_LOG", "warn")
        .arg("--data-dir")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

/// Runs a verb that must succeed and parses its last stdout line as JSON.
fn ok(dir: &Path, args: &[&str]) -> Value {
    let out = perceptmap(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}\n{}",
        String::from_utf8_lossy(&out.stderr),
        String::from_utf8_lossy(&out.stdout)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    serde_json::from_str(stdout.lines().last().unwrap()).unwrap()
}

fn small_fixture(dir: &Path) {
    ok(
        dir,
        &["fixture", "--images", "200", "--votes", "900", "--unlabeled-zone", "east", "--unlabeled-images", "80", "--seed", "3"],
    );
}

const TRAIN: [&str; 10] = ["train", "--hidden", "16", "--max-epochs", "12", "--patience", "5", "--lr", "0.001", "--seed"];

#[test]
fn full_pipeline_ends_with_a_parseable_map() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_fixture(dir);

    let filtered = ok(dir, &["filter", "--min-descriptors", "420"]);
    let (kept, excluded) = (filtered["kept"].as_u64().unwrap(), filtered["excluded"].as_u64().unwrap());
    assert_eq!(kept + excluded, 280);
    assert!(excluded > 0);

    let built = ok(dir, &["build-dataset", "--zone", "fixture", "--seed", "1"]);
    let sizes = [&built["train"], &built["val"], &built["test"]].map(|v| v.as_u64().unwrap());
    assert!(sizes.iter().all(|s| *s > 0 && s % 2 == 0), "{built}");
    for f in ["dataset.bin", "labels.jsonl", "stats.json"] {
        assert!(dir.join(f).is_file(), "{f}");
    }

    let mut args = TRAIN.to_vec();
    args.push("7");
    ok(dir, &args);
    let curves = std::fs::read_to_string(dir.join("curves.csv")).unwrap();
    assert!(curves.starts_with("epoch,train_loss,val_loss\n0,"));

    let model = dir.join("model.json");
    let dataset = dir.join("dataset.bin");
    let out = perceptmap(dir, &["evaluate", "--model", model.to_str().unwrap(), "--dataset", dataset.to_str().unwrap()]);
    assert!(out.status.success());
    let report = String::from_utf8(out.stdout).unwrap();
    let accuracy: f64 = report
        .lines()
        .find_map(|l| l.strip_prefix("accuracy "))
        .expect("accuracy line")
        .parse()
        .unwrap();
    assert!(accuracy > 0.9, "{report}");
    assert!(report.lines().count() >= 4, "{report}");

    let planned = ok(dir, &["synth-generate", "--zone", "east", "--seed", "2"]);
    let zone_images = planned["images"].as_u64().unwrap();
    let pairs = 10 * 2 * (zone_images / 2);
    assert!(zone_images < 80, "filtering should have removed some east images");
    assert_eq!(planned["pairs"].as_u64().unwrap(), pairs);
    assert!(dir.join("synthetic/east/plan.json").is_file());

    let predicted = ok(
        dir,
        &["synth-predict", "--model", model.to_str().unwrap(), "--margin", "0.25", "--timestamp", "2018-06-01T00:00:00Z"],
    );
    assert_eq!(predicted["synthetic_total"].as_u64().unwrap(), pairs);
    let synthetic = std::fs::read_to_string(dir.join("synthetic_votes.jsonl")).unwrap();
    assert_eq!(synthetic.lines().count() as u64, pairs);

    // a second run replaces the zone's votes instead of adding to them
    ok(dir, &["synth-predict", "--model", model.to_str().unwrap(), "--timestamp", "2018-06-01T00:00:00Z"]);
    let log = std::fs::read_to_string(dir.join("votes.jsonl")).unwrap();
    assert_eq!(log.lines().filter(|l| l.contains("\"synthetic\"")).count() as u64, pairs);

    let scored = ok(dir, &["score", "--zone", "east", "--source", "synthetic"]);
    assert!(scored["scored"].as_u64().unwrap() > 0);
    assert!(dir.join("scores_east_synthetic.csv").is_file());

    let emitted = ok(dir, &["emit-map", "--zone", "east"]);
    let map: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("map_east.geojson")).unwrap()).unwrap();
    assert_eq!(map["type"], "FeatureCollection");
    assert_eq!(map["features"].as_array().unwrap().len() as u64, emitted["features"].as_u64().unwrap());
    for f in map["features"].as_array().unwrap() {
        assert_eq!(f["geometry"]["type"], "Point");
        assert!(f["properties"]["color"].as_str().unwrap().starts_with('#'));
    }
}

#[test]
fn training_twice_with_one_seed_gives_identical_models() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_fixture(dir);
    ok(dir, &["build-dataset", "--zone", "fixture"]);
    let mut models = Vec::new();
    for name in ["a.json", "b.json"] {
        let out = dir.join(name);
        let mut args = TRAIN.to_vec();
        args.extend(["7", "--out", out.to_str().unwrap()]);
        ok(dir, &args);
        models.push(std::fs::read(out).unwrap());
    }
    assert_eq!(models[0], models[1]);
}

#[test]
fn unknown_verb_prints_usage_and_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = perceptmap(tmp.path(), &["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn failures_print_one_json_error_line() {
    let tmp = tempfile::tempdir().unwrap();
    let out = perceptmap(tmp.path(), &["score", "--zone", "z"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    let line: Value = serde_json::from_str(stderr.lines().last().unwrap()).unwrap();
    assert_eq!(line["verb"], "score");
    assert!(line["error"].as_str().unwrap().contains("images.jsonl"));
}

#[test]
fn crawl_plan_only_lists_points_inside_the_fence() {
    let tmp = tempfile::tempdir().unwrap();
    let fence = tmp.path().join("fence.geojson");
    std::fs::write(
        &fence,
        r#"{"type":"Feature","properties":{"zone_name":"block"},"geometry":{"type":"Polygon",
            "coordinates":[[[-74.06,4.65],[-74.058,4.65],[-74.058,4.652],[-74.06,4.652],[-74.06,4.65]]]}}"#,
    )
    .unwrap();
    let out = perceptmap(
        tmp.path(),
        &["crawl", "--fence", fence.to_str().unwrap(), "--step-m", "50", "--headings", "0,180", "--plan-only"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let points: Vec<Value> =
        String::from_utf8(out.stdout).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    // a ~222 m square holds a 4 x 4 grid of 50 m cells
    assert_eq!(points.len(), 32);
    for p in &points {
        let (lat, lon) = (p["lat"].as_f64().unwrap(), p["lon"].as_f64().unwrap());
        assert!((4.65..4.652).contains(&lat) && (-74.06..-74.058).contains(&lon));
    }
}

#[test]
fn crawl_without_a_key_is_a_configuration_error() {
    let tmp = tempfile::tempdir().unwrap();
    let fence = tmp.path().join("fence.geojson");
    std::fs::write(
        &fence,
        r#"{"type":"Feature","properties":{"zone_name":"block"},"geometry":{"type":"Polygon",
            "coordinates":[[[-74.06,4.65],[-74.058,4.65],[-74.058,4.652],[-74.06,4.652],[-74.06,4.65]]]}}"#,
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_perceptmap"))
        .env_remove("PERCEPTMAP_PROVIDER_KEY")
        .args(["--data-dir", tmp.path().to_str().unwrap(), "crawl", "--fence", fence.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let line: Value = serde_json::from_str(String::from_utf8(out.stderr).unwrap().lines().last().unwrap()).unwrap();
    assert_eq!(line["verb"], "crawl");
}
