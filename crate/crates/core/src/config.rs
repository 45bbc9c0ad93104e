use serde::{Deserialize, Serialize};

use crate::error::{NeptuneError, Result};
use crate::ingest::{CropRect, FrameFormat};
use crate::segmentation::{Adjacency, KmeansInit, KmeansOptions, SegmentationOptions};
use crate::spectral::DcPolicy;

pub const STD_CONVENTION: &str = "population";
pub const PERCENTILE_METHOD: &str = "linear_closest_ranks";
pub const LARGEST_CLUSTER_TIE: &str = "exclude_larger_centroid";

/// Choices that change what the pipeline computes. A model is only valid for
/// the settings it was trained with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub dc_policy: DcPolicy,
    pub adjacency: Adjacency,
    pub kmeans_init: KmeansInit,
    #[serde(default = "default_max_iters")]
    pub kmeans_max_iters: usize,
}

fn default_max_iters() -> usize {
    KmeansOptions::default().max_iters
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            dc_policy: DcPolicy::default(),
            adjacency: Adjacency::default(),
            kmeans_init: KmeansInit::default(),
            kmeans_max_iters: default_max_iters(),
        }
    }
}

impl PipelineConfig {
    pub fn segmentation(&self) -> SegmentationOptions {
        SegmentationOptions {
            adjacency: self.adjacency,
            kmeans: KmeansOptions {
                max_iters: self.kmeans_max_iters,
                init: self.kmeans_init,
            },
        }
    }
}

/// Where the quantization cut-offs come from at training time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PercentileSource {
    /// Recomputed from the training segments.
    #[default]
    Computed,
    /// The published tables, verbatim.
    Builtin,
    /// Published tables with the 1 s ratio rows recomputed from training data.
    BuiltinRepaired,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub fps: u32,
    #[serde(default)]
    pub crop: Option<CropRect>,
    #[serde(default = "default_stride")]
    pub stride_s: u32,
    #[serde(default)]
    pub dc_policy: DcPolicy,
    #[serde(default)]
    pub adjacency: Adjacency,
    #[serde(default)]
    pub kmeans_init: KmeansInit,
    #[serde(default = "default_max_iters")]
    pub kmeans_max_iters: usize,
    #[serde(default)]
    pub percentile_source: PercentileSource,
    #[serde(default = "default_format")]
    pub format: FrameFormat,
}

fn default_stride() -> u32 {
    1
}

fn default_format() -> FrameFormat {
    FrameFormat::PgmDir
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            fps: 25,
            crop: None,
            stride_s: default_stride(),
            dc_policy: DcPolicy::default(),
            adjacency: Adjacency::default(),
            kmeans_init: KmeansInit::default(),
            kmeans_max_iters: default_max_iters(),
            percentile_source: PercentileSource::default(),
            format: default_format(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.fps == 0 {
            return Err(NeptuneError::InvalidArgument("fps must be positive".into()));
        }
        if self.stride_s == 0 {
            return Err(NeptuneError::InvalidArgument("stride_s must be positive".into()));
        }
        if self.kmeans_max_iters == 0 {
            return Err(NeptuneError::InvalidArgument(
                "kmeans_max_iters must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            dc_policy: self.dc_policy,
            adjacency: self.adjacency,
            kmeans_init: self.kmeans_init,
            kmeans_max_iters: self.kmeans_max_iters,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = RunConfig::from_json(r#"{"fps": 25}"#).unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn full_config() {
        let cfg = RunConfig::from_json(
            r#"{"fps": 30, "crop": {"x0": 1, "y0": 2, "w": 447, "h": 281}, "stride_s": 2,
                "dc_policy": "include_dc", "adjacency": "eight", "kmeans_init": "quantile",
                "percentile_source": "builtin_repaired",
                "format": {"kind": "raw_y8", "width": 64, "height": 48}}"#,
        )
        .unwrap();
        assert_eq!(cfg.dc_policy, DcPolicy::IncludeDc);
        assert_eq!(cfg.adjacency, Adjacency::Eight);
        assert_eq!(cfg.crop.unwrap().w, 447);
        assert_eq!(cfg.format, FrameFormat::RawY8 { width: 64, height: 48 });
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::from_json(r#"{"fps": 0}"#).is_err());
        assert!(RunConfig::from_json(r#"{"fps": 25, "stride_s": 0}"#).is_err());
        assert!(RunConfig::from_json(r#"{"fps": 25, "bogus": 1}"#).is_err());
        assert!(RunConfig::from_json("{").is_err());
    }
}
