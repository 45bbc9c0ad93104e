//! Loading frame sequences, cropping, and cutting the stream into fixed-length windows.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{NeptuneError, Result};
use crate::image::{luma, GrayImage};

/// On-disk layout of a frame sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FrameFormat {
    PgmDir,
    PngDir,
    /// One headerless file of back-to-back `width * height` byte frames.
    RawY8 { width: u32, height: u32 },
}

/// Pixel rectangle with a 1-based origin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropRect {
    pub x0: u32,
    pub y0: u32,
    pub w: u32,
    pub h: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameWindow {
    pub frames: Vec<GrayImage>,
    pub fps: u32,
    pub duration_s: u32,
    /// 1-based index of the first frame in the source stream.
    pub start_frame: usize,
}

impl FrameWindow {
    pub fn new(frames: Vec<GrayImage>, fps: u32, duration_s: u32, start_frame: usize) -> Result<Self> {
        if !(1..=5).contains(&duration_s) {
            return Err(NeptuneError::BadWindowLength(duration_s));
        }
        let expected = fps as usize * duration_s as usize;
        if fps == 0 || frames.len() != expected {
            return Err(NeptuneError::InvalidArgument(format!(
                "window needs {expected} frames ({fps} fps x {duration_s} s), got {}",
                frames.len()
            )));
        }
        let dims = frames[0].dims();
        if frames.iter().any(|f| f.dims() != dims) {
            return Err(NeptuneError::InvalidArgument(
                "window frames differ in dimensions".into(),
            ));
        }
        Ok(FrameWindow {
            frames,
            fps,
            duration_s,
            start_frame,
        })
    }

    pub fn width(&self) -> u32 {
        self.frames[0].width()
    }

    pub fn height(&self) -> u32 {
        self.frames[0].height()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// 1-based index of the last frame (inclusive).
    pub fn end_frame(&self) -> usize {
        self.start_frame + self.frames.len() - 1
    }
}

pub fn load_frame_sequence(path: &Path, format: FrameFormat) -> Result<Vec<GrayImage>> {
    if !path.exists() {
        return Err(NeptuneError::MissingPath(path.to_path_buf()));
    }
    let frames = match format {
        FrameFormat::PgmDir => {
            let paths = list_frames(path, &["pgm"])?;
            let frames = paths
                .iter()
                .map(|p| GrayImage::read_pgm(p))
                .collect::<Result<Vec<_>>>()?;
            check_uniform(&frames, &paths)?;
            frames
        }
        FrameFormat::PngDir => {
            let paths = list_frames(path, &["png"])?;
            let frames = paths
                .iter()
                .map(|p| read_png_gray(p))
                .collect::<Result<Vec<_>>>()?;
            check_uniform(&frames, &paths)?;
            frames
        }
        FrameFormat::RawY8 { width, height } => read_raw_y8(path, width, height)?,
    };
    if frames.is_empty() {
        return Err(NeptuneError::NoFrames(path.to_path_buf()));
    }
    Ok(frames)
}

/// Fails with the offending file name when sizes differ.
fn check_uniform(frames: &[GrayImage], names: &[PathBuf]) -> Result<()> {
    let Some(first) = frames.first() else {
        return Ok(());
    };
    let (want_w, want_h) = first.dims();
    for (frame, name) in frames.iter().zip(names) {
        let (got_w, got_h) = frame.dims();
        if (got_w, got_h) != (want_w, want_h) {
            return Err(NeptuneError::MixedDimensions {
                path: name.clone(),
                want_w,
                want_h,
                got_w,
                got_h,
            });
        }
    }
    Ok(())
}

fn list_frames(dir: &Path, extensions: &[&str]) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| NeptuneError::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| NeptuneError::io(dir, e))?;
        let path = entry.path();
        let matches = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| extensions.iter().any(|x| e.eq_ignore_ascii_case(x)));
        if matches && path.is_file() {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

fn read_png_gray(path: &Path) -> Result<GrayImage> {
    let bad = |reason: String| NeptuneError::BadFrame {
        path: path.to_path_buf(),
        reason,
    };
    let file = File::open(path).map_err(|e| NeptuneError::io(path, e))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder.read_info().map_err(|e| bad(e.to_string()))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| bad("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(|e| bad(e.to_string()))?;
    let data = &buf[..info.buffer_size()];
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Indexed => return Err(bad("palette was not expanded".into())),
    };
    let (w, h) = (info.width as usize, info.height as usize);
    let mut values = Vec::with_capacity(w * h);
    for row in data.chunks_exact(info.line_size).take(h) {
        for px in row[..w * channels].chunks_exact(channels) {
            values.push(match channels {
                1 | 2 => px[0],
                _ => luma(px[0], px[1], px[2]),
            });
        }
    }
    GrayImage::new(info.width, info.height, values).map_err(|e| bad(e.to_string()))
}

fn read_raw_y8(path: &Path, width: u32, height: u32) -> Result<Vec<GrayImage>> {
    let data = std::fs::read(path).map_err(|e| NeptuneError::io(path, e))?;
    let frame_len = width as usize * height as usize;
    if frame_len == 0 || data.len() % frame_len != 0 {
        return Err(NeptuneError::BadFrame {
            path: path.to_path_buf(),
            reason: format!(
                "file size {} is not a multiple of {width}x{height}",
                data.len()
            ),
        });
    }
    data.chunks_exact(frame_len)
        .map(|chunk| GrayImage::new(width, height, chunk.to_vec()))
        .collect()
}

/// Sub-image whose `(1, 1)` is `(x0, y0)` of the input.
pub fn crop(img: &GrayImage, rect: CropRect) -> Result<GrayImage> {
    let CropRect { x0, y0, w, h } = rect;
    let fits = x0 >= 1
        && y0 >= 1
        && w >= 1
        && h >= 1
        && (x0 as u64 + w as u64 - 1) <= img.width() as u64
        && (y0 as u64 + h as u64 - 1) <= img.height() as u64;
    if !fits {
        return Err(NeptuneError::CropOutOfBounds {
            x0,
            y0,
            w,
            h,
            width: img.width(),
            height: img.height(),
        });
    }
    let src_w = img.width() as usize;
    let mut values = Vec::with_capacity(w as usize * h as usize);
    for y in (y0 - 1) as usize..(y0 - 1 + h) as usize {
        let row = y * src_w + (x0 - 1) as usize;
        values.extend_from_slice(&img.values()[row..row + w as usize]);
    }
    GrayImage::new(w, h, values)
}

/// Cuts `frames` into windows of `fps * duration_s` frames whose starts advance
/// by `fps * stride_s`. A trailing partial window is dropped.
pub fn partition_windows(
    frames: &[GrayImage],
    fps: u32,
    duration_s: u32,
    stride_s: u32,
) -> Result<Vec<FrameWindow>> {
    window_starts(frames.len(), fps, duration_s, stride_s)?
        .into_iter()
        .map(|start| {
            let len = (fps * duration_s) as usize;
            FrameWindow::new(
                frames[start - 1..start - 1 + len].to_vec(),
                fps,
                duration_s,
                start,
            )
        })
        .collect()
}

/// 1-based start frames of the windows `partition_windows` would produce.
pub fn window_starts(
    frame_count: usize,
    fps: u32,
    duration_s: u32,
    stride_s: u32,
) -> Result<Vec<usize>> {
    if !(1..=5).contains(&duration_s) {
        return Err(NeptuneError::BadWindowLength(duration_s));
    }
    if fps == 0 || stride_s == 0 {
        return Err(NeptuneError::InvalidArgument(
            "fps and stride must be positive".into(),
        ));
    }
    let len = fps as usize * duration_s as usize;
    if frame_count < len {
        return Err(NeptuneError::TooFewFrames {
            needed: len,
            available: frame_count,
        });
    }
    let step = fps as usize * stride_s as usize;
    Ok((0..=frame_count - len).step_by(step).map(|s| s + 1).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(n: usize) -> Vec<GrayImage> {
        (0..n)
            .map(|i| GrayImage::filled(4, 3, (i % 256) as u8).unwrap())
            .collect()
    }

    #[test]
    fn exact_division() {
        let w = partition_windows(&stream(250), 25, 5, 5).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(w[1].start_frame, 126);
        assert!(w.iter().all(|w| w.len() == 125));
    }

    #[test]
    fn strided_windows_drop_partial_tail() {
        let w = partition_windows(&stream(125), 25, 4, 1).unwrap();
        let starts: Vec<_> = w.iter().map(|w| w.start_frame).collect();
        assert_eq!(starts, vec![1, 26]);
        assert_eq!(w[1].end_frame(), 125);
        assert_eq!(w[1].frames[0].get(1, 1), 25);
    }

    #[test]
    fn too_few_frames() {
        assert!(matches!(
            partition_windows(&stream(100), 25, 5, 1),
            Err(NeptuneError::TooFewFrames { needed: 125, available: 100 })
        ));
        assert!(partition_windows(&stream(100), 25, 6, 1).is_err());
    }

    #[test]
    fn crop_identity_and_bounds() {
        let img = GrayImage::from_fn(5, 4, |x, y| (x * 7 + y) as u8).unwrap();
        let full = CropRect { x0: 1, y0: 1, w: 5, h: 4 };
        assert_eq!(crop(&img, full).unwrap(), img);
        let sub = crop(&img, CropRect { x0: 2, y0: 3, w: 3, h: 2 }).unwrap();
        assert_eq!(sub.get(1, 1), img.get(2, 3));
        assert_eq!(sub.get(3, 2), img.get(4, 4));
        assert!(crop(&img, CropRect { x0: 4, y0: 1, w: 3, h: 1 }).is_err());
        assert!(crop(&img, CropRect { x0: 0, y0: 1, w: 1, h: 1 }).is_err());
    }

    #[test]
    fn crop_to_training_dimensions() {
        let img = GrayImage::filled(500, 300, 9).unwrap();
        let out = crop(&img, CropRect { x0: 10, y0: 5, w: 447, h: 281 }).unwrap();
        assert_eq!(out.dims(), (447, 281));
    }
}
