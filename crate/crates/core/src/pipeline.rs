//! One window through merge, segmentation and feature extraction.

use crate::config::PipelineConfig;
use crate::error::Result;
use crate::features::{window_features, FeatureVector};
use crate::ingest::FrameWindow;
use crate::segmentation::{extract_sa_sb, Segmentation};
use crate::spectral::{merge_window, MergedMatrix};

#[derive(Clone, Debug)]
pub struct WindowAnalysis {
    pub matrix: MergedMatrix,
    pub segmentation: Segmentation,
    /// One vector per `S_a` segment, in segment order. Empty when either set is.
    pub features: Vec<FeatureVector>,
}

pub fn analyze_window(window: &FrameWindow, config: &PipelineConfig) -> Result<WindowAnalysis> {
    let matrix = merge_window(window, config.dc_policy);
    let segmentation = extract_sa_sb(&matrix, config.segmentation());
    let features = window_features(&segmentation.sa, &segmentation.sb, &matrix)?;
    Ok(WindowAnalysis {
        matrix,
        segmentation,
        features,
    })
}
