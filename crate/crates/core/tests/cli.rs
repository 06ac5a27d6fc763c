use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ltss(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ltss"))
        .args(args)
        .output()
        .expect("spawn ltss")
}

fn ok(args: &[&str]) -> Output {
    let out = ltss(args);
    assert!(
        out.status.success(),
        "ltss {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_sample_and_restat() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = d.join("data");
    ok(&[
        "gen-synth",
        "--classes",
        "200",
        "--images",
        "5000",
        "--rank-decay",
        "0.06",
        "--size",
        "8",
        "--seed",
        "7",
        "--out",
        s(&data),
    ]);
    let manifest = data.join("manifest.json");
    ok(&[
        "stats",
        "--manifest",
        s(&manifest),
        "--out",
        s(&d.join("before.json")),
    ]);
    ok(&[
        "sample-lt",
        "--manifest",
        s(&manifest),
        "--target-gini",
        "0.85",
        "--out-manifest",
        s(&d.join("lt.json")),
        "--report",
        s(&d.join("report.json")),
    ]);
    ok(&[
        "stats",
        "--manifest",
        s(&d.join("lt.json")),
        "--out",
        s(&d.join("after.json")),
    ]);

    let before = json(&d.join("before.json"))["image_level"]["gini"]
        .as_f64()
        .unwrap();
    let after = json(&d.join("after.json"))["image_level"]["gini"]
        .as_f64()
        .unwrap();
    let report = json(&d.join("report.json"));
    assert!(after >= 0.85 - 0.02, "{before} -> {after}");
    assert!(after > before);
    assert_eq!(report["achieved_gini_image"].as_f64().unwrap(), after);

    ok(&[
        "split",
        "--stats",
        s(&d.join("after.json")),
        "--mode",
        "image",
        "--out",
        s(&d.join("split.json")),
    ]);
    let split = json(&d.join("split.json"));
    let n: usize = ["frequent", "common", "rare"]
        .iter()
        .map(|k| split[k].as_array().unwrap().len())
        .sum();
    assert_eq!(n, 200);
}

#[test]
fn stats_pretty_prints_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&[
        "gen-synth",
        "--classes",
        "4",
        "--images",
        "10",
        "--size",
        "8",
        "--out",
        s(&data),
    ]);
    let out = ok(&[
        "stats",
        "--manifest",
        s(&data.join("manifest.json")),
        "--pretty",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.to_lowercase().contains("gini"), "{text}");
}

#[test]
fn match_one_to_one_on_two_by_two() {
    let dir = tempfile::tempdir().unwrap();
    let cost = dir.path().join("cost.csv");
    std::fs::write(&cost, "1,2\n2,1\n").unwrap();
    let out = ok(&["match", "--cost", s(&cost), "--one-to-one"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["query_to_target"], serde_json::json!([0, 1]));
    assert_eq!(v["total_cost"].as_f64(), Some(2.0));
    assert_eq!(v["clamped"], Value::Bool(false));
}

#[test]
fn match_frequency_based_with_stats_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // class 0 in 1 of 100 images, class 1 in all of them
    let stats = serde_json::json!({
        "mode_agnostic": {"num_images": 100, "num_classes": 2},
        "image_level": {"weights": [1.0, 100.0], "gini": 0.49},
        "pixel_level": {"weights": [0.5, 60.0], "gini": 0.49}
    });
    std::fs::write(d.join("stats.json"), serde_json::to_vec(&stats).unwrap()).unwrap();
    std::fs::write(d.join("cost.csv"), "2,9\n1,9\n5,0\n").unwrap();
    std::fs::write(d.join("classes.csv"), "0,1\n").unwrap();
    let out = ok(&[
        "match",
        "--cost",
        s(&d.join("cost.csv")),
        "--classes",
        s(&d.join("classes.csv")),
        "--freq",
        s(&d.join("stats.json")),
        "--t",
        "0.02",
        "--s",
        "1",
    ]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    // p0 = 0.01 -> q = ceil(sqrt(2)) = 2, p1 = 1 -> q = 1
    assert_eq!(v["query_to_target"], serde_json::json!([0, 0, 1]));
    assert_eq!(v["total_cost"].as_f64(), Some(3.0));
    assert_eq!(v["multiplicity"]["0"], 2);
}

#[test]
fn usage_errors_exit_two() {
    let out = ltss(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr).to_lowercase();
    assert!(err.contains("usage"), "{err}");

    let out = ltss(&["gen-synth", "--classes", "3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn data_and_sampler_errors_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = ltss(&["stats", "--manifest", s(&d.join("missing.json"))]);
    assert_eq!(out.status.code(), Some(3));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["exit_code"], 3);

    let data = d.join("data");
    ok(&[
        "gen-synth",
        "--classes",
        "5",
        "--images",
        "20",
        "--size",
        "8",
        "--out",
        s(&data),
    ]);
    let lt = d.join("lt.json");
    let report = d.join("report.json");
    let out = ltss(&[
        "sample-lt",
        "--manifest",
        s(&data.join("manifest.json")),
        "--target-gini",
        "0.81",
        "--out-manifest",
        s(&lt),
        "--report",
        s(&report),
    ]);
    assert_eq!(out.status.code(), Some(4));
    // nothing half-written
    assert!(!lt.exists());
    assert!(!report.exists());
    let leftovers: Vec<_> = std::fs::read_dir(d)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(leftovers, vec![std::ffi::OsString::from("data")]);
}

#[test]
fn thread_count_does_not_change_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = d.join("data");
    ok(&[
        "gen-synth",
        "--classes",
        "12",
        "--images",
        "300",
        "--rank-decay",
        "0.1",
        "--size",
        "8",
        "--seed",
        "3",
        "--out",
        s(&data),
    ]);
    let manifest = data.join("manifest.json");

    // perfect predictions, one per image
    let pred = d.join("pred");
    std::fs::create_dir_all(&pred).unwrap();
    for e in std::fs::read_dir(data.join("labels")).unwrap() {
        let e = e.unwrap();
        std::fs::copy(e.path(), pred.join(e.file_name())).unwrap();
    }

    let mut runs = Vec::new();
    for threads in ["1", "4"] {
        let out = d.join(format!("t{threads}"));
        std::fs::create_dir_all(&out).unwrap();
        let o = |name: &str| out.join(name).to_str().unwrap().to_string();
        ok(&[
            "--threads",
            threads,
            "stats",
            "--manifest",
            s(&manifest),
            "--out",
            &o("stats.json"),
            "--emit-index",
            &o("index.json"),
        ]);
        ok(&[
            "--threads",
            threads,
            "sample-lt",
            "--manifest",
            s(&manifest),
            "--target-gini",
            "0.6",
            "--out-manifest",
            &o("lt.json"),
            "--report",
            &o("report.json"),
        ]);
        ok(&[
            "--threads",
            threads,
            "eval",
            "--gt-manifest",
            s(&manifest),
            "--pred-dir",
            s(&pred),
            "--train-stats",
            &o("stats.json"),
            "--out",
            &o("eval.json"),
        ]);
        ok(&[
            "--threads",
            threads,
            "split",
            "--stats",
            &o("stats.json"),
            "--mode",
            "pixel",
            "--out",
            &o("split.json"),
        ]);
        runs.push(out);
    }
    for name in [
        "stats.json",
        "index.json",
        "lt.json",
        "report.json",
        "eval.json",
        "split.json",
    ] {
        assert_eq!(
            std::fs::read(runs[0].join(name)).unwrap(),
            std::fs::read(runs[1].join(name)).unwrap(),
            "{name}"
        );
    }
    assert_eq!(json(&runs[0].join("eval.json"))["miou"].as_f64(), Some(1.0));
}
