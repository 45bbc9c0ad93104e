//! Labeling training windows and fitting one cut-off table and rule set per
//! window length.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::config::{PercentileSource, PipelineConfig, RunConfig};
use crate::detection::baseline::{eval_baseline, formula_for_window, BaselineReport, BaselineRow};
use crate::detection::{DetectorModel, WindowModel, WINDOW_LENGTHS};
use crate::error::{NeptuneError, Result};
use crate::features::{label_positive, FeatureVector, Labeling};
use crate::image::GrayImage;
use crate::ingest::{window_starts, FrameWindow};
use crate::labels::{truth_for_window, LabelRow};
use crate::pipeline::analyze_window;
use crate::quantization::{builtin_repaired, builtin_table, compute_percentiles, quantize, PercentileTable};
use crate::rules::{train_ruleset, LabeledDataset, RuleSet, SweepPoint};
use crate::segmentation::BBox;

/// Features of one window with `v1` filled in.
#[derive(Clone, Debug)]
pub struct LabeledWindow {
    pub start_frame: usize,
    pub end_frame: usize,
    pub truth: Option<BBox>,
    pub features: Vec<FeatureVector>,
}

impl LabeledWindow {
    pub fn is_positive(&self) -> bool {
        self.features.iter().any(|f| f.v1 == Some(true))
    }
}

/// Analyzes and labels every window of `window_s` seconds.
pub fn labeled_windows(
    frames: &[GrayImage],
    fps: u32,
    window_s: u32,
    stride_s: u32,
    labels: &[LabelRow],
    pipeline: &PipelineConfig,
) -> Result<Vec<LabeledWindow>> {
    let len = (fps * window_s) as usize;
    window_starts(frames.len(), fps, window_s, stride_s)?
        .into_par_iter()
        .map(|start| {
            let end = start + len - 1;
            let window = FrameWindow::new(frames[start - 1..end].to_vec(), fps, window_s, start)?;
            let analysis = analyze_window(&window, pipeline)?;
            let truth = truth_for_window(labels, start, end);
            let mut features = analysis.features;
            if !features.is_empty() {
                if let Labeling::Labels(flags) = label_positive(&analysis.segmentation.sa, truth) {
                    let segments = &analysis.segmentation.sa;
                    for ((fv, seg), flag) in features.iter_mut().zip(segments).zip(flags) {
                        debug_assert_eq!(fv.segment_id, seg.id);
                        fv.v1 = Some(flag);
                    }
                }
            }
            Ok(LabeledWindow {
                start_frame: start,
                end_frame: end,
                truth,
                features,
            })
        })
        .collect()
}

/// Training summary for one window length.
#[derive(Clone, Debug, PartialEq)]
pub struct LengthReport {
    pub window_s: u32,
    pub windows: usize,
    /// Windows contributing a positive segment.
    pub positives: usize,
    /// Windows without any labeled victim.
    pub negatives: usize,
    /// Labeled windows whose victim has no segment to attach to.
    pub undetectable: usize,
    pub segments: usize,
    pub positive_segments: usize,
    pub sweep: Vec<SweepPoint>,
    pub selected: Option<SweepPoint>,
    /// Negative training segments matched by the chosen rules.
    pub training_false_positives: usize,
    pub warning: Option<String>,
}

impl LengthReport {
    pub fn counts_line(&self) -> String {
        format!(
            "m={} positives={} negatives={}",
            self.window_s, self.positives, self.negatives
        )
    }
}

#[derive(Clone, Debug)]
pub struct TrainingOutcome {
    pub model: DetectorModel,
    pub reports: Vec<LengthReport>,
}

impl TrainingOutcome {
    pub fn summary_csv(&self) -> String {
        let mut out = String::from(
            "window_s,windows,positives,negatives,undetectable,segments,positive_segments,num_variables,rules,positives_covered,training_false_positives\n",
        );
        for (r, w) in self.reports.iter().zip(&self.model.windows) {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.window_s,
                r.windows,
                r.positives,
                r.negatives,
                r.undetectable,
                r.segments,
                r.positive_segments,
                w.rules.num_variables,
                w.rules.rules.len(),
                w.rules.total_positives_covered,
                r.training_false_positives
            );
        }
        out
    }

    pub fn sweep_csv(&self) -> String {
        let mut out = String::from(
            "window_s,num_variables,rules,multi_positive_rules,multi_positive_proportion,positives_covered,selected\n",
        );
        for r in &self.reports {
            for p in &r.sweep {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    r.window_s,
                    p.num_variables,
                    p.rule_count,
                    p.multi_positive_rules,
                    p.multi_positive_proportion(),
                    p.positives_covered,
                    r.selected == Some(*p)
                );
            }
        }
        out
    }
}

fn cutoff_table(source: PercentileSource, window_s: u32, features: &[FeatureVector]) -> Result<PercentileTable> {
    match source {
        PercentileSource::Builtin => builtin_table(window_s),
        PercentileSource::Computed => compute_percentiles(features, window_s),
        PercentileSource::BuiltinRepaired => {
            builtin_repaired(window_s, &compute_percentiles(features, window_s)?)
        }
    }
}

fn train_length(
    frames: &[GrayImage],
    labels: &[LabelRow],
    config: &RunConfig,
    window_s: u32,
) -> Result<(WindowModel, LengthReport)> {
    let pipeline = config.pipeline();
    let windows = labeled_windows(frames, config.fps, window_s, config.stride_s, labels, &pipeline)?;
    let features: Vec<FeatureVector> = windows.iter().flat_map(|w| w.features.clone()).collect();
    let table = cutoff_table(config.percentile_source, window_s, &features)?;
    let rows: Vec<_> = features.iter().map(|f| quantize(f, &table)).collect();
    let data = LabeledDataset::new(window_s, rows)?;

    let mut report = LengthReport {
        window_s,
        windows: windows.len(),
        positives: windows.iter().filter(|w| w.is_positive()).count(),
        negatives: windows.iter().filter(|w| w.truth.is_none()).count(),
        undetectable: windows
            .iter()
            .filter(|w| w.truth.is_some() && !w.is_positive())
            .count(),
        segments: data.rows.len(),
        positive_segments: data.positives(),
        sweep: Vec::new(),
        selected: None,
        training_false_positives: 0,
        warning: None,
    };
    let rules = if data.positives() == 0 {
        report.warning = Some(format!("no positive segments for {window_s} s windows"));
        RuleSet::empty(window_s)
    } else {
        match train_ruleset(&data) {
            Ok((sweep, rules)) => {
                report.selected = Some(rules.summary());
                report.sweep = sweep;
                rules
            }
            Err(NeptuneError::EmptySweep) => {
                report.warning = Some(format!(
                    "positives are indistinguishable from negatives for {window_s} s windows"
                ));
                RuleSet::empty(window_s)
            }
            Err(e) => return Err(e),
        }
    };
    report.training_false_positives = data
        .rows
        .iter()
        .filter(|r| r.v1 == Some(false) && rules.matching(r).next().is_some())
        .count();
    Ok((WindowModel { table, rules }, report))
}

/// Fits all five window lengths on a labeled stream. Frames must already be
/// cropped as `config.crop` describes.
pub fn train(frames: &[GrayImage], labels: &[LabelRow], config: &RunConfig) -> Result<TrainingOutcome> {
    config.validate()?;
    let parts = WINDOW_LENGTHS
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|m| train_length(frames, labels, config, m))
        .collect::<Result<Vec<_>>>()?;
    if parts.iter().all(|(_, r)| r.positive_segments == 0) {
        return Err(NeptuneError::NoPositives);
    }
    let (windows, reports): (Vec<_>, Vec<_>) = parts.into_iter().unzip();
    let model = DetectorModel::new(
        config.fps,
        config.crop,
        config.pipeline(),
        config.percentile_source,
        windows,
    )?;
    Ok(TrainingOutcome { model, reports })
}

/// Scores every labeled segment of `window_s` windows with the published
/// regression formula for that length.
pub fn baseline_report(
    frames: &[GrayImage],
    labels: &[LabelRow],
    config: &RunConfig,
    window_s: u32,
) -> Result<BaselineReport> {
    let formula = formula_for_window(window_s)?;
    let windows = labeled_windows(
        frames,
        config.fps,
        window_s,
        config.stride_s,
        labels,
        &config.pipeline(),
    )?;
    let rows = windows
        .iter()
        .flat_map(|w| {
            w.features.iter().map(|f| BaselineRow {
                start_frame: w.start_frame,
                segment_id: f.segment_id,
                actual: f.v1 == Some(true),
                predicted: eval_baseline(&formula, f),
            })
        })
        .collect();
    Ok(BaselineReport::new(formula, rows))
}
