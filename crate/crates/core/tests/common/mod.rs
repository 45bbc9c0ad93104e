#![allow(dead_code)]

pub mod oracles;

use std::sync::OnceLock;

use neptune_core::labels::LabelRow;
use neptune_core::segmentation::BBox;
use neptune_core::synth::{render, Scene, SceneSpec, Struggle};
use neptune_core::training::{train, TrainingOutcome};
use neptune_core::RunConfig;

pub const FPS: u32 = 25;
pub const SECONDS: u32 = 120;

/// Pool with low, slow ripple and a fast, strong oscillation in one box
/// between 40 s and 80 s.
pub fn corpus_spec() -> SceneSpec {
    SceneSpec {
        width: 48,
        height: 36,
        fps: FPS,
        duration_s: SECONDS,
        water_base: 120.0,
        ripple_amp: 6.0,
        ripple_freq: 0.7,
        struggle: Some(Struggle {
            bbox: BBox {
                min_x: 20,
                min_y: 14,
                max_x: 27,
                max_y: 21,
            },
            amp: 40.0,
            freq: 3.0,
            start_s: 40.0,
            end_s: 80.0,
        }),
        rng_seed: 20_240_917,
    }
}

pub fn corpus() -> &'static Scene {
    static SCENE: OnceLock<Scene> = OnceLock::new();
    SCENE.get_or_init(|| render(&corpus_spec()).expect("valid scene"))
}

pub fn corpus_config() -> RunConfig {
    RunConfig {
        fps: FPS,
        ..RunConfig::default()
    }
}

pub fn trained() -> &'static TrainingOutcome {
    static OUTCOME: OnceLock<TrainingOutcome> = OnceLock::new();
    OUTCOME.get_or_init(|| {
        let scene = corpus();
        train(&scene.frames, &scene.labels, &corpus_config()).expect("training succeeds")
    })
}

/// Seconds whose every frame lies inside a labeled range.
pub fn struggle_seconds(labels: &[LabelRow], fps: usize, seconds: usize) -> Vec<usize> {
    (1..=seconds)
        .filter(|&t| {
            let (a, b) = ((t - 1) * fps + 1, t * fps);
            labels.iter().any(|r| r.start_frame <= a && b <= r.end_frame)
        })
        .collect()
}

/// Seconds whose trailing five-second span touches no labeled frame.
pub fn negative_seconds(labels: &[LabelRow], fps: usize, seconds: usize) -> Vec<usize> {
    (1..=seconds)
        .filter(|&t| {
            let a = (t.saturating_sub(5) * fps + 1).max(1);
            let b = t * fps;
            labels.iter().all(|r| !r.overlaps(a, b))
        })
        .collect()
}
