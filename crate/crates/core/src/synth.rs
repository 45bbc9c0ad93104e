//! Synthetic pool footage: sinusoidal ripple everywhere plus an optional
//! stronger oscillation inside a box for a set time span.
//!
//! Per-pixel phases come from SplitMix64. For channel `c` (0 ripple,
//! 1 struggle) the 64-bit hash is
//! `h = mix(mix(mix(seed ^ c) ^ x) ^ y)` where `mix(z)` adds
//! `0x9E3779B97F4A7C15` and applies the SplitMix64 finalizer
//! (shifts 30, 27, 31; multipliers `0xBF58476D1CE4E5B9`, `0x94D049BB133111EB`).
//! The phase is `2 pi (h >> 11) / 2^53`.

use std::f64::consts::TAU;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{NeptuneError, Result};
use crate::image::GrayImage;
use crate::labels::LabelRow;
use crate::segmentation::BBox;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Struggle {
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub amp: f64,
    pub freq: f64,
    pub start_s: f64,
    pub end_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub width: u32,
    pub height: u32,
    pub fps: u32,
    pub duration_s: u32,
    pub water_base: f64,
    pub ripple_amp: f64,
    pub ripple_freq: f64,
    #[serde(default)]
    pub struggle: Option<Struggle>,
    pub rng_seed: u64,
}

pub struct Scene {
    pub frames: Vec<GrayImage>,
    pub labels: Vec<LabelRow>,
}

pub fn splitmix64(z: u64) -> u64 {
    let mut z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Phase in `[0, 2 pi)` for pixel `(x, y)` on a channel.
pub fn phase(seed: u64, x: u32, y: u32, channel: u64) -> f64 {
    let h = splitmix64(splitmix64(splitmix64(seed ^ channel) ^ x as u64) ^ y as u64);
    TAU * (h >> 11) as f64 / (1u64 << 53) as f64
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(NeptuneError::InvalidScene(msg));
        if self.width == 0 || self.height == 0 || self.fps == 0 || self.duration_s == 0 {
            return bad("width, height, fps and duration_s must be positive".into());
        }
        let nyquist = self.fps as f64 / 2.0;
        let finite = [self.water_base, self.ripple_amp, self.ripple_freq];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("scene values must be finite".into());
        }
        if !(0.0..=255.0).contains(&self.water_base) {
            return bad(format!("water_base {} outside 0..=255", self.water_base));
        }
        if self.ripple_amp < 0.0 || self.ripple_freq < 0.0 || self.ripple_freq >= nyquist {
            return bad(format!(
                "ripple needs amp >= 0 and 0 <= freq < {nyquist} Hz"
            ));
        }
        if let Some(s) = &self.struggle {
            let b = s.bbox;
            if b.min_x == 0 || b.min_y == 0 || b.min_x > b.max_x || b.min_y > b.max_y
                || b.max_x > self.width || b.max_y > self.height
            {
                return bad(format!("struggle box {b:?} is not inside the frame"));
            }
            if ![s.amp, s.freq, s.start_s, s.end_s].iter().all(|v| v.is_finite())
                || s.amp < 0.0
                || s.freq <= 0.0
                || s.freq >= nyquist
            {
                return bad(format!("struggle needs amp >= 0 and 0 < freq < {nyquist} Hz"));
            }
            if s.start_s < 0.0 || s.end_s <= s.start_s || s.end_s > self.duration_s as f64 {
                return bad(format!(
                    "struggle span {}..{} s is not inside the scene",
                    s.start_s, s.end_s
                ));
            }
        }
        Ok(())
    }

    pub fn frame_count(&self) -> usize {
        self.fps as usize * self.duration_s as usize
    }

    /// 0-based frame indices `i` with `start_s <= i / fps < end_s`.
    fn struggle_frames(&self, s: &Struggle) -> std::ops::Range<usize> {
        let fps = self.fps as f64;
        let first = (s.start_s * fps).ceil() as usize;
        let last = ((s.end_s * fps).ceil() as usize).min(self.frame_count());
        first..last
    }

    fn render_frame(&self, index: usize, ripple: &[f64], struggle: &[f64]) -> GrayImage {
        let t = index as f64 / self.fps as f64;
        let active = self
            .struggle
            .as_ref()
            .filter(|s| self.struggle_frames(s).contains(&index));
        let w = self.width as usize;
        let values = (0..self.width as usize * self.height as usize)
            .map(|i| {
                let mut v = self.water_base
                    + self.ripple_amp * (TAU * self.ripple_freq * t + ripple[i]).sin();
                if let Some(s) = active {
                    let (x, y) = ((i % w) as u32 + 1, (i / w) as u32 + 1);
                    if s.bbox.contains(crate::segmentation::Point { x, y }) {
                        v += s.amp * (TAU * s.freq * t + struggle[i]).sin();
                    }
                }
                v.round().clamp(0.0, 255.0) as u8
            })
            .collect();
        GrayImage::new(self.width, self.height, values).expect("dimensions match")
    }
}

/// Renders every frame and the label row covering the struggle, if any.
pub fn render(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let field = |channel| -> Vec<f64> {
        (0..spec.height)
            .flat_map(|y| (0..spec.width).map(move |x| (x + 1, y + 1)))
            .map(|(x, y)| phase(spec.rng_seed, x, y, channel))
            .collect()
    };
    let (ripple, struggle) = (field(0), field(1));
    let frames = (0..spec.frame_count())
        .into_par_iter()
        .map(|i| spec.render_frame(i, &ripple, &struggle))
        .collect();
    let labels = spec
        .struggle
        .iter()
        .filter_map(|s| {
            let r = spec.struggle_frames(s);
            (!r.is_empty()).then(|| LabelRow {
                start_frame: r.start + 1,
                end_frame: r.end,
                min_x: s.bbox.min_x,
                min_y: s.bbox.min_y,
                max_x: s.bbox.max_x,
                max_y: s.bbox.max_y,
            })
        })
        .collect();
    Ok(Scene { frames, labels })
}

/// Writes `frame_000001.pgm`, `frame_000002.pgm`, ... into `dir`.
pub fn write_frames(dir: &Path, frames: &[GrayImage]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| NeptuneError::io(dir, e))?;
    frames
        .par_iter()
        .enumerate()
        .try_for_each(|(i, f)| f.write_pgm(&dir.join(format!("frame_{:06}.pgm", i + 1))))
}
