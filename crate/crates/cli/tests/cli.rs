use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SCENE: &str = r#"{
  "width": 24, "height": 18, "fps": 10, "duration_s": 14,
  "water_base": 120, "ripple_amp": 6, "ripple_freq": 0.7,
  "struggle": {"box": {"min_x": 9, "min_y": 7, "max_x": 14, "max_y": 12},
               "amp": 40, "freq": 3, "start_s": 5, "end_s": 10},
  "rng_seed": 7
}"#;

fn neptune(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_neptune"))
        .args(args)
        .env("NEPTUNE_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = neptune(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Renders the scene and trains a model inside `dir`.
fn prepare(dir: &Path) {
    let spec = dir.join("scene.json");
    fs::write(&spec, SCENE).unwrap();
    ok(&["synth", "--spec", s(&spec), "--out", s(&dir.join("data"))]);
    ok(&[
        "train",
        "--frames",
        s(&dir.join("data/frames")),
        "--labels",
        s(&dir.join("data/labels.csv")),
        "--model",
        s(&dir.join("model.json")),
        "--fps",
        "10",
        "--report-dir",
        s(&dir.join("report")),
    ]);
}

#[test]
fn synth_writes_frames_and_labels() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("scene.json");
    fs::write(&spec, SCENE).unwrap();
    let stdout = ok(&["synth", "--spec", s(&spec), "--out", s(&dir.path().join("data"))]);
    assert!(stdout.contains("frames=140"));
    assert_eq!(fs::read_dir(dir.path().join("data/frames")).unwrap().count(), 140);
    let labels = fs::read_to_string(dir.path().join("data/labels.csv")).unwrap();
    assert_eq!(labels.lines().nth(1), Some("51,100,9,7,14,12"));
}

#[test]
fn malformed_scene_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("scene.json");
    fs::write(&spec, "{\"width\": 24,").unwrap();
    let out = neptune(&["synth", "--spec", s(&spec), "--out", s(&dir.path().join("data"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    assert!(!dir.path().join("data").exists());
}

#[test]
fn train_then_detect() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    prepare(d);
    let summary = fs::read_to_string(d.join("report/training_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 6);
    assert!(d.join("report/sweep.csv").exists());

    let stdout = ok(&[
        "detect",
        "--frames",
        s(&d.join("data/frames")),
        "--model",
        s(&d.join("model.json")),
        "--out",
        s(&d.join("det")),
    ]);
    assert!(stdout.starts_with("seconds=14 "));
    let union = fs::read_to_string(d.join("det/union.csv")).unwrap();
    assert_eq!(union.lines().count(), 15);
    let detections = fs::read_to_string(d.join("det/detections.csv")).unwrap();
    // seconds 1..=14 with every window length that fits
    assert_eq!(detections.lines().count(), 1 + (1..=14).map(|t: usize| t.min(5)).sum::<usize>());
    assert!(fs::read_to_string(d.join("det/timeline.svg")).unwrap().starts_with("<svg"));

    // same inputs, same bytes
    ok(&[
        "detect",
        "--frames",
        s(&d.join("data/frames")),
        "--model",
        s(&d.join("model.json")),
        "--out",
        s(&d.join("det_again")),
    ]);
    assert_eq!(detections, fs::read_to_string(d.join("det_again/detections.csv")).unwrap());

    let mismatch = neptune(&[
        "detect",
        "--frames",
        s(&d.join("data/frames")),
        "--model",
        s(&d.join("model.json")),
        "--out",
        s(&d.join("det_bad")),
        "--dc-policy",
        "include_dc",
    ]);
    assert!(!mismatch.status.success());
    assert!(String::from_utf8_lossy(&mismatch.stderr).contains("mismatch"));
    assert!(!d.join("det_bad").exists());
}

#[test]
fn missing_model_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = neptune(&[
        "detect",
        "--frames",
        s(dir.path()),
        "--model",
        s(&dir.path().join("absent.json")),
        "--out",
        s(&dir.path().join("det")),
    ]);
    assert!(!out.status.success());
    assert!(!dir.path().join("det").exists());
}

#[test]
fn baseline_and_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    prepare(d);
    let frames = d.join("data/frames");
    let stdout = ok(&[
        "baseline",
        "--frames",
        s(&frames),
        "--labels",
        s(&d.join("data/labels.csv")),
        "--window-s",
        "3",
        "--fps",
        "10",
        "--out",
        s(&d.join("baseline.csv")),
    ]);
    assert!(stdout.contains("formula=3c"));
    let csv = fs::read_to_string(d.join("baseline.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("window_s,start_frame,segment_id,actual,predicted"));

    ok(&[
        "dump-merge",
        "--frames",
        s(&frames),
        "--window-s",
        "2",
        "--start-second",
        "6",
        "--fps",
        "10",
        "--out",
        s(&d.join("merge.pgm")),
        "--csv",
        s(&d.join("merge.csv")),
    ]);
    assert!(fs::read(d.join("merge.pgm")).unwrap().starts_with(b"P5"));

    ok(&[
        "dump-segments",
        "--frames",
        s(&frames),
        "--window-s",
        "2",
        "--start-second",
        "6",
        "--fps",
        "10",
        "--out",
        s(&d.join("segs")),
    ]);
    for name in ["segments_a.csv", "segments_b.csv", "clusters3.pgm", "clusters4.pgm"] {
        assert!(d.join("segs").join(name).exists(), "{name}");
    }

    let late = neptune(&[
        "dump-merge",
        "--frames",
        s(&frames),
        "--window-s",
        "5",
        "--start-second",
        "12",
        "--fps",
        "10",
        "--out",
        s(&d.join("late.pgm")),
    ]);
    assert!(!late.status.success());
}

#[test]
fn bad_thread_count_is_rejected() {
    let out = Command::new(env!("CARGO_BIN_EXE_neptune"))
        .args(["synth", "--spec", "/nonexistent", "--out", "/nonexistent"])
        .env("NEPTUNE_THREADS", "zero")
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("NEPTUNE_THREADS"));
}
