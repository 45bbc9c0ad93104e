//! Trained detector: model file, per-window evaluation and per-second timelines.

pub mod baseline;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{
    PercentileSource, PipelineConfig, RunConfig, LARGEST_CLUSTER_TIE, PERCENTILE_METHOD,
    STD_CONVENTION,
};
use crate::error::{NeptuneError, Result};
use crate::image::GrayImage;
use crate::ingest::{CropRect, FrameWindow};
use crate::pipeline::analyze_window;
use crate::quantization::{quantize, PercentileTable};
use crate::rules::{RuleSet, RuleSetJson};
use crate::segmentation::{Adjacency, BBox, KmeansInit};
use crate::spectral::DcPolicy;

pub const MODEL_VERSION: u32 = 1;
pub const WINDOW_LENGTHS: std::ops::RangeInclusive<u32> = 1..=5;

#[derive(Clone, Debug, PartialEq)]
pub struct WindowModel {
    pub table: PercentileTable,
    pub rules: RuleSet,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectorModel {
    pub fps: u32,
    pub crop: Option<CropRect>,
    pub pipeline: PipelineConfig,
    pub percentile_source: PercentileSource,
    /// Entries for 1..=5 seconds, in that order.
    pub windows: Vec<WindowModel>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: u32,
    fps: u32,
    crop: Option<CropRect>,
    dc_policy: DcPolicy,
    adjacency: Adjacency,
    kmeans_init: KmeansInit,
    kmeans_max_iters: usize,
    std_convention: String,
    percentile_method: String,
    largest_cluster_tie: String,
    percentile_source: PercentileSource,
    windows: BTreeMap<String, WindowFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WindowFile {
    percentile_table: PercentileTable,
    ruleset: RuleSetJson,
}

impl DetectorModel {
    pub fn new(
        fps: u32,
        crop: Option<CropRect>,
        pipeline: PipelineConfig,
        percentile_source: PercentileSource,
        windows: Vec<WindowModel>,
    ) -> Result<Self> {
        let model = DetectorModel {
            fps,
            crop,
            pipeline,
            percentile_source,
            windows,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        if self.fps == 0 {
            return Err(NeptuneError::InvalidModel("fps is zero".into()));
        }
        if self.windows.len() != WINDOW_LENGTHS.count() {
            return Err(NeptuneError::InvalidModel(format!(
                "expected 5 window lengths, found {}",
                self.windows.len()
            )));
        }
        for (m, w) in WINDOW_LENGTHS.zip(&self.windows) {
            if w.table.window_s != m || w.rules.window_s != m {
                return Err(NeptuneError::InvalidModel(format!(
                    "entry for {m} s holds tables for another length"
                )));
            }
        }
        Ok(())
    }

    pub fn window(&self, window_s: u32) -> Result<&WindowModel> {
        if !WINDOW_LENGTHS.contains(&window_s) {
            return Err(NeptuneError::BadWindowLength(window_s));
        }
        Ok(&self.windows[window_s as usize - 1])
    }

    /// Refuses to run under settings other than those the model was trained with.
    pub fn check_config(&self, config: &RunConfig) -> Result<()> {
        let mut diffs = Vec::new();
        if config.fps != self.fps {
            diffs.push(format!("fps {} vs model {}", config.fps, self.fps));
        }
        if config.crop != self.crop {
            diffs.push(format!("crop {:?} vs model {:?}", config.crop, self.crop));
        }
        let p = config.pipeline();
        if p.dc_policy != self.pipeline.dc_policy {
            diffs.push(format!(
                "dc_policy {:?} vs model {:?}",
                p.dc_policy, self.pipeline.dc_policy
            ));
        }
        if p.adjacency != self.pipeline.adjacency {
            diffs.push(format!(
                "adjacency {:?} vs model {:?}",
                p.adjacency, self.pipeline.adjacency
            ));
        }
        if p.kmeans_init != self.pipeline.kmeans_init
            || p.kmeans_max_iters != self.pipeline.kmeans_max_iters
        {
            diffs.push("k-means settings differ from the model".into());
        }
        if diffs.is_empty() {
            Ok(())
        } else {
            Err(NeptuneError::ConfigMismatch(diffs.join("; ")))
        }
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            version: MODEL_VERSION,
            fps: self.fps,
            crop: self.crop,
            dc_policy: self.pipeline.dc_policy,
            adjacency: self.pipeline.adjacency,
            kmeans_init: self.pipeline.kmeans_init,
            kmeans_max_iters: self.pipeline.kmeans_max_iters,
            std_convention: STD_CONVENTION.into(),
            percentile_method: PERCENTILE_METHOD.into(),
            largest_cluster_tie: LARGEST_CLUSTER_TIE.into(),
            percentile_source: self.percentile_source,
            windows: self
                .windows
                .iter()
                .map(|w| {
                    (
                        w.table.window_s.to_string(),
                        WindowFile {
                            percentile_table: w.table.clone(),
                            ruleset: w.rules.to_json(),
                        },
                    )
                })
                .collect(),
        };
        let mut text = serde_json::to_string_pretty(&file).expect("model serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.version != MODEL_VERSION {
            return Err(NeptuneError::InvalidModel(format!(
                "unsupported model version {}",
                file.version
            )));
        }
        for (field, got, want) in [
            ("std_convention", &file.std_convention, STD_CONVENTION),
            ("percentile_method", &file.percentile_method, PERCENTILE_METHOD),
            ("largest_cluster_tie", &file.largest_cluster_tie, LARGEST_CLUSTER_TIE),
        ] {
            if got != want {
                return Err(NeptuneError::ConfigMismatch(format!(
                    "model uses {field} {got:?}, this build implements {want:?}"
                )));
            }
        }
        let mut entries = file.windows;
        let mut windows = Vec::new();
        for m in WINDOW_LENGTHS {
            let entry = entries
                .remove(&m.to_string())
                .ok_or_else(|| NeptuneError::InvalidModel(format!("no entry for {m} s")))?;
            windows.push(WindowModel {
                table: entry.percentile_table,
                rules: RuleSet::from_json(m, entry.ruleset)?,
            });
        }
        if let Some(extra) = entries.keys().next() {
            return Err(NeptuneError::InvalidModel(format!(
                "unexpected window entry {extra:?}"
            )));
        }
        DetectorModel::new(
            file.fps,
            file.crop,
            PipelineConfig {
                dc_policy: file.dc_policy,
                adjacency: file.adjacency,
                kmeans_init: file.kmeans_init,
                kmeans_max_iters: file.kmeans_max_iters,
            },
            file.percentile_source,
            windows,
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| NeptuneError::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowDetection {
    pub detected: bool,
    /// `S_a` segments matched by at least one rule, ascending.
    pub segment_ids: Vec<usize>,
    pub bboxes: Vec<BBox>,
}

/// Runs one window through the model using its frozen cut-off table.
pub fn detect_window(model: &DetectorModel, window: &FrameWindow) -> Result<WindowDetection> {
    if window.fps != model.fps {
        return Err(NeptuneError::ConfigMismatch(format!(
            "window at {} fps, model trained at {}",
            window.fps, model.fps
        )));
    }
    let entry = model.window(window.duration_s)?;
    let analysis = analyze_window(window, &model.pipeline)?;
    let mut segment_ids = Vec::new();
    let mut bboxes = Vec::new();
    for fv in &analysis.features {
        let qv = quantize(fv, &entry.table);
        if entry.rules.matching(&qv).next().is_some() {
            segment_ids.push(fv.segment_id);
            let seg = analysis.segmentation.sa.iter().find(|s| s.id == fv.segment_id);
            bboxes.push(seg.expect("features describe S_a segments").bbox);
        }
    }
    Ok(WindowDetection {
        detected: !segment_ids.is_empty(),
        segment_ids,
        bboxes,
    })
}

/// Evaluation of the window of `window_s` seconds ending at `second`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimelineCell {
    pub second: usize,
    pub window_s: u32,
    pub start_frame: usize,
    pub end_frame: usize,
    pub detection: WindowDetection,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectionTimeline {
    pub seconds: usize,
    /// Sorted by `(second, window_s)`; a window is only evaluated once
    /// `second >= window_s`.
    pub cells: Vec<TimelineCell>,
    /// `union[t - 1]` for second `t`.
    pub union: Vec<bool>,
}

impl DetectionTimeline {
    pub fn from_cells(seconds: usize, mut cells: Vec<TimelineCell>) -> Self {
        cells.sort_by_key(|c| (c.second, c.window_s));
        let mut union = vec![false; seconds];
        for c in &cells {
            union[c.second - 1] |= c.detection.detected;
        }
        DetectionTimeline {
            seconds,
            cells,
            union,
        }
    }

    pub fn get(&self, second: usize, window_s: u32) -> Option<&TimelineCell> {
        self.cells
            .binary_search_by_key(&(second, window_s), |c| (c.second, c.window_s))
            .ok()
            .map(|i| &self.cells[i])
    }

    pub fn detected(&self, second: usize, window_s: u32) -> bool {
        self.get(second, window_s).is_some_and(|c| c.detection.detected)
    }

    /// `second,window_s,detected,segment_ids` with ids joined by `;`.
    pub fn detections_csv(&self) -> String {
        let mut out = String::from("second,window_s,detected,segment_ids\n");
        for c in &self.cells {
            let ids: Vec<String> = c.detection.segment_ids.iter().map(|i| i.to_string()).collect();
            let _ = writeln!(
                out,
                "{},{},{},{}",
                c.second,
                c.window_s,
                c.detection.detected,
                ids.join(";")
            );
        }
        out
    }

    pub fn union_csv(&self) -> String {
        let mut out = String::from("second,union\n");
        for (i, u) in self.union.iter().enumerate() {
            let _ = writeln!(out, "{},{}", i + 1, u);
        }
        out
    }

    /// One row per window length plus a union row; detected seconds in red.
    pub fn to_svg(&self) -> String {
        const LEFT: usize = 64;
        const TOP: usize = 16;
        const CELL_W: usize = 6;
        const ROW_H: usize = 22;
        let rows: Vec<(String, Vec<bool>)> = WINDOW_LENGTHS
            .map(|m| {
                let row = (1..=self.seconds).map(|t| self.detected(t, m)).collect();
                (format!("{m} s"), row)
            })
            .chain(std::iter::once(("union".to_string(), self.union.clone())))
            .collect();
        let width = LEFT + self.seconds.max(1) * CELL_W + 16;
        let height = TOP + rows.len() * ROW_H + 28;
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(svg, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
        for (r, (name, row)) in rows.iter().enumerate() {
            let y = TOP + r * ROW_H;
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" text-anchor="end">{name}</text>"#,
                LEFT - 8,
                y + ROW_H / 2 + 4
            );
            let _ = writeln!(
                svg,
                r##"<rect x="{LEFT}" y="{}" width="{}" height="{}" fill="#eeeeee"/>"##,
                y + 3,
                self.seconds * CELL_W,
                ROW_H - 6
            );
            for (i, _) in row.iter().enumerate().filter(|(_, d)| **d) {
                let _ = writeln!(
                    svg,
                    r##"<rect x="{}" y="{}" width="{CELL_W}" height="{}" fill="#d62728"/>"##,
                    LEFT + i * CELL_W,
                    y + 3,
                    ROW_H - 6
                );
            }
        }
        let axis_y = TOP + rows.len() * ROW_H + 4;
        let step = if self.seconds > 100 { 20 } else { 10 };
        for t in (0..=self.seconds).step_by(step) {
            let x = LEFT + t * CELL_W;
            let _ = writeln!(
                svg,
                r#"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="black"/>"#,
                axis_y,
                axis_y + 4
            );
            let _ = writeln!(
                svg,
                r#"<text x="{x}" y="{}" text-anchor="middle">{t}</text>"#,
                axis_y + 16
            );
        }
        svg.push_str("</svg>\n");
        svg
    }
}

fn evaluate_cell(
    model: &DetectorModel,
    frames: &[GrayImage],
    second: usize,
    window_s: u32,
) -> Result<TimelineCell> {
    let fps = model.fps as usize;
    let start_frame = (second - window_s as usize) * fps + 1;
    let end_frame = second * fps;
    let window = FrameWindow::new(
        frames[start_frame - 1..end_frame].to_vec(),
        model.fps,
        window_s,
        start_frame,
    )?;
    Ok(TimelineCell {
        second,
        window_s,
        start_frame,
        end_frame,
        detection: detect_window(model, &window)?,
    })
}

/// All window lengths that can end at `second`, evaluated concurrently.
/// Only frames up to `second * fps` are read.
pub fn detect_second(model: &DetectorModel, frames: &[GrayImage], second: usize) -> Result<Vec<TimelineCell>> {
    let fps = model.fps as usize;
    if second == 0 || second * fps > frames.len() {
        return Err(NeptuneError::InvalidArgument(format!(
            "second {second} is outside a stream of {} frames",
            frames.len()
        )));
    }
    WINDOW_LENGTHS
        .filter(|&m| m as usize <= second)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|m| evaluate_cell(model, frames, second, m))
        .collect()
}

/// Evaluates every `(second, window_s)` pair of the stream.
pub fn detect_stream(model: &DetectorModel, frames: &[GrayImage]) -> Result<DetectionTimeline> {
    let fps = model.fps as usize;
    let needed = 5 * fps;
    if frames.len() < needed {
        return Err(NeptuneError::TooFewFrames {
            needed,
            available: frames.len(),
        });
    }
    let seconds = frames.len() / fps;
    let tasks: Vec<(usize, u32)> = (1..=seconds)
        .flat_map(|t| WINDOW_LENGTHS.filter(move |&m| m as usize <= t).map(move |m| (t, m)))
        .collect();
    let cells = tasks
        .into_par_iter()
        .map(|(t, m)| evaluate_cell(model, frames, t, m))
        .collect::<Result<Vec<_>>>()?;
    Ok(DetectionTimeline::from_cells(seconds, cells))
}
