//! Per-pixel temporal spectrum reduction.
//!
//! Every pixel of a window contributes one intensity series (one sample per
//! frame). The series is transformed with an FFT of exactly the window length,
//! reduced to its largest bin magnitude, and the resulting raw matrix is
//! min-max normalized into `[0, 1]`.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{NeptuneError, Result};
use crate::image::GrayImage;
use crate::ingest::FrameWindow;

/// Which DFT bins take part in the maximum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DcPolicy {
    /// Bins `0..L`. For non-negative series the DC bin (the sum) always wins.
    IncludeDc,
    /// Bins `1..L`: temporal oscillation only.
    #[default]
    ExcludeDc,
}

impl DcPolicy {
    fn first_bin(self) -> usize {
        match self {
            DcPolicy::IncludeDc => 0,
            DcPolicy::ExcludeDc => 1,
        }
    }
}

/// Normalized merged matrix for one window, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct MergedMatrix {
    width: u32,
    height: u32,
    values: Vec<f64>,
    pub dc_policy: DcPolicy,
    pub raw_min: f64,
    pub raw_max: f64,
}

impl MergedMatrix {
    /// Builds a matrix from already-normalized values. `raw_min`/`raw_max` are
    /// set to the value range.
    pub fn from_values(width: u32, height: u32, values: Vec<f64>, dc_policy: DcPolicy) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width as usize * height as usize {
            return Err(NeptuneError::InvalidArgument(format!(
                "{} values for a {width}x{height} matrix",
                values.len()
            )));
        }
        let (raw_min, raw_max) = min_max(&values);
        Ok(MergedMatrix {
            width,
            height,
            values,
            dc_policy,
            raw_min,
            raw_max,
        })
    }

    /// Min-max normalizes a raw matrix. A constant raw matrix maps to all zeros.
    pub fn normalize(width: u32, height: u32, raw: Vec<f64>, dc_policy: DcPolicy) -> Result<Self> {
        let mut m = Self::from_values(width, height, raw, dc_policy)?;
        let (lo, hi) = (m.raw_min, m.raw_max);
        let span = hi - lo;
        if span > 0.0 {
            for v in &mut m.values {
                *v = ((*v - lo) / span).clamp(0.0, 1.0);
            }
        } else {
            m.values.iter_mut().for_each(|v| *v = 0.0);
        }
        Ok(m)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at 1-based `(x, y)`.
    pub fn get(&self, x: u32, y: u32) -> f64 {
        assert!((1..=self.width).contains(&x) && (1..=self.height).contains(&y));
        self.values[(y as usize - 1) * self.width as usize + (x as usize - 1)]
    }

    /// True when the raw matrix had no variation: the window carries no signal.
    pub fn is_no_signal(&self) -> bool {
        self.raw_max.partial_cmp(&self.raw_min) != Some(std::cmp::Ordering::Greater)
    }

    /// Same geometry and raw range, every value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> MergedMatrix {
        MergedMatrix {
            values: self.values.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }

    pub fn to_image(&self) -> GrayImage {
        let values = self
            .values
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect();
        GrayImage::new(self.width, self.height, values).expect("matrix dimensions are valid")
    }

    /// `x,y,value` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,value\n");
        for y in 1..=self.height {
            for x in 1..=self.width {
                let _ = writeln!(out, "{x},{y},{}", self.get(x, y));
            }
        }
        out
    }
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

/// Largest DFT magnitude over the bins selected by `dc_policy`.
pub fn max_abs_fft(series: &[f64], dc_policy: DcPolicy) -> Result<f64> {
    let len = series.len();
    if len < 2 {
        return Err(NeptuneError::SeriesTooShort(len));
    }
    let fft = FftPlanner::<f64>::new().plan_fft_forward(len);
    let mut buf: Vec<Complex<f64>> = series.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft.process(&mut buf);
    Ok(max_bin(&buf, dc_policy))
}

// Real input: |X[k]| = |X[L-k]|, so only bins up to L/2 need scanning.
fn max_bin(spectrum: &[Complex<f64>], dc_policy: DcPolicy) -> f64 {
    let half = spectrum.len() / 2;
    spectrum[dc_policy.first_bin()..=half]
        .iter()
        .map(|c| c.norm_sqr())
        .fold(0.0, f64::max)
        .sqrt()
}

/// Reduces every pixel's intensity series to `max_abs_fft`, without normalizing.
pub fn raw_merge(window: &FrameWindow, dc_policy: DcPolicy) -> Vec<f64> {
    let len = window.len();
    let width = window.width() as usize;
    let height = window.height() as usize;
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(len);
    let scratch_len = fft.get_inplace_scratch_len();

    let mut raw = vec![0.0; width * height];
    raw.par_chunks_mut(width)
        .enumerate()
        .for_each_init(
            || {
                (
                    vec![Complex::new(0.0, 0.0); width * len],
                    vec![Complex::new(0.0, 0.0); scratch_len],
                )
            },
            |(buf, scratch), (row, out)| {
                let offset = row * width;
                for (t, frame) in window.frames.iter().enumerate() {
                    let pixels = &frame.values()[offset..offset + width];
                    for (x, &p) in pixels.iter().enumerate() {
                        buf[x * len + t] = Complex::new(p as f64, 0.0);
                    }
                }
                fft.process_with_scratch(buf, scratch);
                for (x, cell) in out.iter_mut().enumerate() {
                    *cell = max_bin(&buf[x * len..(x + 1) * len], dc_policy);
                }
            },
        );
    raw
}

pub fn merge_window(window: &FrameWindow, dc_policy: DcPolicy) -> MergedMatrix {
    let raw = raw_merge(window, dc_policy);
    MergedMatrix::normalize(window.width(), window.height(), raw, dc_policy)
        .expect("window dimensions are valid")
}

/// Row-major 1-D view of a matrix.
///
/// The outer loop runs over rows and the inner loop over the `width` columns,
/// so the 1-based flat index of `(x, y)` is `(y - 1) * width + x`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlatArray {
    pub values: Vec<f64>,
    pub width: u32,
    pub height: u32,
}

impl FlatArray {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// 1-based flat position of 1-based `(x, y)`.
    pub fn flat_index(&self, x: u32, y: u32) -> usize {
        flat_index(self.width, x, y)
    }

    /// Inverse of [`FlatArray::flat_index`].
    pub fn coords(&self, index: usize) -> (u32, u32) {
        let zero = index - 1;
        (
            (zero % self.width as usize) as u32 + 1,
            (zero / self.width as usize) as u32 + 1,
        )
    }
}

pub fn flat_index(width: u32, x: u32, y: u32) -> usize {
    (y as usize - 1) * width as usize + x as usize
}

pub fn flatten(matrix: &MergedMatrix) -> FlatArray {
    FlatArray {
        values: matrix.values.clone(),
        width: matrix.width,
        height: matrix.height,
    }
}

pub fn unflatten(flat: &FlatArray, dc_policy: DcPolicy) -> Result<MergedMatrix> {
    MergedMatrix::from_values(flat.width, flat.height, flat.values.clone(), dc_policy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series() {
        let s = [5.0; 4];
        assert_eq!(max_abs_fft(&s, DcPolicy::ExcludeDc).unwrap(), 0.0);
        assert!((max_abs_fft(&s, DcPolicy::IncludeDc).unwrap() - 20.0).abs() < 1e-12);
    }

    #[test]
    fn nyquist_bin() {
        let v = max_abs_fft(&[1.0, 0.0, 1.0, 0.0], DcPolicy::ExcludeDc).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn too_short() {
        assert!(matches!(
            max_abs_fft(&[1.0], DcPolicy::ExcludeDc),
            Err(NeptuneError::SeriesTooShort(1))
        ));
    }

    fn window_from(frames: Vec<GrayImage>) -> FrameWindow {
        let n = frames.len() as u32;
        FrameWindow::new(frames, n, 1, 1).unwrap()
    }

    #[test]
    fn static_window_is_no_signal() {
        let frames = vec![GrayImage::filled(3, 2, 80).unwrap(); 25];
        let m = merge_window(&window_from(frames), DcPolicy::ExcludeDc);
        assert!(m.is_no_signal());
        assert!(m.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_flicker_pixel() {
        let frames = (0..25)
            .map(|t| {
                GrayImage::from_fn(4, 3, |x, y| {
                    if (x, y) == (2, 3) {
                        if t % 2 == 0 { 255 } else { 0 }
                    } else {
                        40
                    }
                })
                .unwrap()
            })
            .collect();
        let m = merge_window(&window_from(frames), DcPolicy::ExcludeDc);
        for y in 1..=3 {
            for x in 1..=4 {
                let want = if (x, y) == (2, 3) { 1.0 } else { 0.0 };
                assert_eq!(m.get(x, y), want);
            }
        }
    }

    #[test]
    fn flat_layout() {
        assert_eq!(flat_index(447, 1, 1), 1);
        assert_eq!(flat_index(447, 447, 1), 447);
        assert_eq!(flat_index(447, 1, 2), 448);
        assert_eq!(flat_index(447, 447, 2), 894);
        let m = MergedMatrix::from_values(2, 2, vec![0.1, 0.2, 0.3, 0.4], DcPolicy::ExcludeDc).unwrap();
        let f = flatten(&m);
        assert_eq!(f.values, vec![0.1, 0.2, 0.3, 0.4]);
        assert_eq!(f.coords(3), (1, 2));
        assert_eq!(unflatten(&f, DcPolicy::ExcludeDc).unwrap(), m);
    }

    #[test]
    fn image_dump_scales() {
        let m = MergedMatrix::from_values(2, 1, vec![0.0, 1.0], DcPolicy::ExcludeDc).unwrap();
        assert_eq!(m.to_image().values(), &[0, 255]);
        assert!(m.to_csv().starts_with("x,y,value\n1,1,0\n2,1,1\n"));
    }
}
