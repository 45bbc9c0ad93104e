//! Ground-truth victim boxes per frame range.
//!
//! CSV with header `start_frame,end_frame,min_x,min_y,max_x,max_y`; frames are
//! 1-based and inclusive, coordinates 1-based.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{NeptuneError, Result};
use crate::segmentation::BBox;

pub const LABELS_HEADER: [&str; 6] = ["start_frame", "end_frame", "min_x", "min_y", "max_x", "max_y"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRow {
    pub start_frame: usize,
    pub end_frame: usize,
    pub min_x: u32,
    pub min_y: u32,
    pub max_x: u32,
    pub max_y: u32,
}

impl LabelRow {
    pub fn bbox(&self) -> BBox {
        BBox {
            min_x: self.min_x,
            min_y: self.min_y,
            max_x: self.max_x,
            max_y: self.max_y,
        }
    }

    pub fn overlaps(&self, start: usize, end: usize) -> bool {
        self.start_frame <= end && start <= self.end_frame
    }

    pub fn covers(&self, frame: usize) -> bool {
        (self.start_frame..=self.end_frame).contains(&frame)
    }

    fn validate(&self) -> Result<()> {
        if self.start_frame == 0 || self.end_frame < self.start_frame {
            return Err(NeptuneError::Labels(format!(
                "bad frame range {}..{}",
                self.start_frame, self.end_frame
            )));
        }
        if self.min_x == 0 || self.min_y == 0 || self.max_x < self.min_x || self.max_y < self.min_y {
            return Err(NeptuneError::Labels(format!(
                "bad box ({},{})-({},{})",
                self.min_x, self.min_y, self.max_x, self.max_y
            )));
        }
        Ok(())
    }
}

pub fn parse_labels(text: &str) -> Result<Vec<LabelRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| NeptuneError::Labels(e.to_string()))?;
    if header.iter().ne(LABELS_HEADER) {
        return Err(NeptuneError::Labels(format!(
            "expected header {}, got {}",
            LABELS_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for record in reader.deserialize() {
        let row: LabelRow = record.map_err(|e| NeptuneError::Labels(e.to_string()))?;
        row.validate()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_labels(path: &Path) -> Result<Vec<LabelRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| NeptuneError::io(path, e))?;
    parse_labels(&text)
}

pub fn labels_csv(rows: &[LabelRow]) -> String {
    let mut out = LABELS_HEADER.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.start_frame, r.end_frame, r.min_x, r.min_y, r.max_x, r.max_y
        ));
    }
    out
}

/// Victim box for a window spanning frames `start..=end`, if any.
///
/// With several overlapping rows the one covering the window's centre frame
/// wins; if none covers it, the first overlapping row in file order.
pub fn truth_for_window(rows: &[LabelRow], start: usize, end: usize) -> Option<BBox> {
    let centre = (start + end) / 2;
    let mut overlapping = rows.iter().filter(|r| r.overlaps(start, end));
    let first = overlapping.clone().next()?;
    overlapping
        .find(|r| r.covers(centre))
        .or(Some(first))
        .map(LabelRow::bbox)
}
