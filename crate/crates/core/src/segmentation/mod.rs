//! 3-means / 4-means clustering of the merged matrix and extraction of the
//! segment sets `S_a` (from 3 clusters) and `S_b` (from 4 clusters).

mod components;
mod kmeans;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use components::{connected_segments, sort_segments, Adjacency, BBox, Point, Segment};
pub use kmeans::{kmeans_1d, ClusterAssignment, KmeansInit, KmeansOptions};

use crate::error::NeptuneError;
use crate::image::GrayImage;
use crate::spectral::{flatten, MergedMatrix};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentationOptions {
    pub adjacency: Adjacency,
    pub kmeans: KmeansOptions,
}

/// Every cluster id except the largest one (the water). On a size tie the
/// cluster with the larger centroid is the one dropped.
pub fn exclude_largest(assign: &ClusterAssignment) -> Vec<u8> {
    let mut water = 0;
    for c in 1..assign.k {
        let (size, best) = (assign.sizes[c], assign.sizes[water]);
        if size > best || (size == best && assign.centroids[c] >= assign.centroids[water]) {
            water = c;
        }
    }
    (0..assign.k as u8).filter(|&c| c as usize != water).collect()
}

/// Both segment sets for one merged matrix plus the clusterings behind them.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Segmentation {
    pub sa: Vec<Segment>,
    pub sb: Vec<Segment>,
    pub three: Option<ClusterAssignment>,
    pub four: Option<ClusterAssignment>,
}

impl Segmentation {
    pub fn is_no_signal(&self) -> bool {
        self.three.is_none()
    }
}

fn segments_for(
    matrix: &MergedMatrix,
    values: &[f64],
    k: usize,
    options: SegmentationOptions,
) -> Option<(ClusterAssignment, Vec<Segment>)> {
    match kmeans_1d(values, k, options.kmeans) {
        Ok(assign) => {
            let retained = exclude_largest(&assign);
            let segs = connected_segments(
                matrix.width(),
                matrix.height(),
                &assign.labels,
                &retained,
                options.adjacency,
            );
            Some((assign, segs))
        }
        Err(NeptuneError::DegenerateInput { .. }) => None,
        Err(e) => panic!("k-means on a merged matrix failed: {e}"),
    }
}

/// `S_a` from 3-means and `S_b` from 4-means, each with its largest cluster
/// removed. A no-signal matrix, or one too flat to cluster, yields empty sets.
pub fn extract_sa_sb(matrix: &MergedMatrix, options: SegmentationOptions) -> Segmentation {
    if matrix.is_no_signal() {
        return Segmentation::default();
    }
    let flat = flatten(matrix);
    let Some((three, sa)) = segments_for(matrix, &flat.values, 3, options) else {
        return Segmentation::default();
    };
    let (four, sb) = match segments_for(matrix, &flat.values, 4, options) {
        Some((a, s)) => (Some(a), s),
        None => (None, Vec::new()),
    };
    Segmentation {
        sa,
        sb,
        three: Some(three),
        four,
    }
}

/// Cluster map in the style of a water/segment overlay: the excluded cluster
/// is white, retained clusters get increasingly dark greys.
pub fn cluster_map(width: u32, height: u32, assign: &ClusterAssignment) -> GrayImage {
    let retained = exclude_largest(assign);
    let mut shade = [255u8; 256];
    for (rank, &c) in retained.iter().enumerate() {
        shade[c as usize] = (170 - 150 * rank / retained.len().max(1)) as u8;
    }
    let values = assign.labels.iter().map(|&l| shade[l as usize]).collect();
    GrayImage::new(width, height, values).expect("labels cover the grid")
}

/// `id,cluster,pixels,min_x,min_y,max_x,max_y` rows with a header.
pub fn segments_csv(segments: &[Segment]) -> String {
    let mut out = String::from("id,cluster,pixels,min_x,min_y,max_x,max_y\n");
    for s in segments {
        let b = s.bbox;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            s.id,
            s.cluster_id,
            s.len(),
            b.min_x,
            b.min_y,
            b.max_x,
            b.max_y
        );
    }
    out
}
