//! Connected segments within retained clusters (two-pass union-find labeling).

use serde::{Deserialize, Serialize};

/// Neighborhood used to decide whether two pixels are "beside" each other.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adjacency {
    #[default]
    Four,
    Eight,
}

/// 1-based pixel coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Point {
    pub x: u32,
    pub y: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub min_x: u32,
    pub min_y: u32,
    pub max_x: u32,
    pub max_y: u32,
}

impl BBox {
    pub fn contains(&self, p: Point) -> bool {
        (self.min_x..=self.max_x).contains(&p.x) && (self.min_y..=self.max_y).contains(&p.y)
    }

    pub fn centre(&self) -> (f64, f64) {
        (
            (self.min_x as f64 + self.max_x as f64) / 2.0,
            (self.min_y as f64 + self.max_y as f64) / 2.0,
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub id: usize,
    pub cluster_id: u8,
    /// Member pixels in raster order.
    pub pixels: Vec<Point>,
    pub bbox: BBox,
    /// Mean pixel coordinate.
    pub centroid: (f64, f64),
}

impl Segment {
    /// Builds a segment from raster-ordered pixels.
    pub fn from_pixels(id: usize, cluster_id: u8, mut pixels: Vec<Point>) -> Segment {
        assert!(!pixels.is_empty(), "segment needs at least one pixel");
        pixels.sort_by_key(|p| (p.y, p.x));
        let mut bbox = BBox {
            min_x: u32::MAX,
            min_y: u32::MAX,
            max_x: 0,
            max_y: 0,
        };
        let (mut sx, mut sy) = (0u64, 0u64);
        for p in &pixels {
            bbox.min_x = bbox.min_x.min(p.x);
            bbox.min_y = bbox.min_y.min(p.y);
            bbox.max_x = bbox.max_x.max(p.x);
            bbox.max_y = bbox.max_y.max(p.y);
            sx += p.x as u64;
            sy += p.y as u64;
        }
        let n = pixels.len() as f64;
        Segment {
            id,
            cluster_id,
            centroid: (sx as f64 / n, sy as f64 / n),
            pixels,
            bbox,
        }
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    /// Coordinate sums, used for exact rounding of the centre.
    pub fn coordinate_sums(&self) -> (u64, u64) {
        self.pixels
            .iter()
            .fold((0, 0), |(sx, sy), p| (sx + p.x as u64, sy + p.y as u64))
    }
}

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n as u32).collect(),
        }
    }

    fn find(&mut self, mut i: u32) -> u32 {
        while self.parent[i as usize] != i {
            let grand = self.parent[self.parent[i as usize] as usize];
            self.parent[i as usize] = grand;
            i = grand;
        }
        i
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // the smaller index stays the root
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

/// Maximal connected groups of same-cluster pixels among the `retained`
/// clusters. `labels` is row-major over a `width` x `height` grid.
///
/// Segments are ordered by the top-left corner of their bounding box
/// (`min_y`, then `min_x`), then by cluster and first raster pixel; ids follow
/// that order starting at 0.
pub fn connected_segments(
    width: u32,
    height: u32,
    labels: &[u8],
    retained: &[u8],
    adjacency: Adjacency,
) -> Vec<Segment> {
    let (w, h) = (width as usize, height as usize);
    assert_eq!(labels.len(), w * h, "labels must cover the grid");
    let mut keep = [false; 256];
    for &c in retained {
        keep[c as usize] = true;
    }
    let kept = |i: usize| keep[labels[i] as usize];

    let mut sets = DisjointSet::new(w * h);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !kept(i) {
                continue;
            }
            let mut link = |j: usize| {
                if labels[j] == labels[i] {
                    sets.union(i as u32, j as u32);
                }
            };
            if x > 0 {
                link(i - 1);
            }
            if y > 0 {
                link(i - w);
                if adjacency == Adjacency::Eight {
                    if x > 0 {
                        link(i - w - 1);
                    }
                    if x + 1 < w {
                        link(i - w + 1);
                    }
                }
            }
        }
    }

    // roots are the first raster pixel of each component
    let mut slot = vec![usize::MAX; w * h];
    let mut groups: Vec<(u8, Vec<Point>)> = Vec::new();
    for (i, &label) in labels.iter().enumerate().take(w * h) {
        if !kept(i) {
            continue;
        }
        let root = sets.find(i as u32) as usize;
        if slot[root] == usize::MAX {
            slot[root] = groups.len();
            groups.push((label, Vec::new()));
        }
        groups[slot[root]].1.push(Point {
            x: (i % w) as u32 + 1,
            y: (i / w) as u32 + 1,
        });
    }

    let mut segments: Vec<Segment> = groups
        .into_iter()
        .map(|(cluster, pixels)| Segment::from_pixels(0, cluster, pixels))
        .collect();
    sort_segments(&mut segments);
    segments
}

/// Canonical order and ids: `(min_y, min_x, cluster_id, first pixel)`.
pub fn sort_segments(segments: &mut [Segment]) {
    segments.sort_by_key(|s| {
        (
            s.bbox.min_y,
            s.bbox.min_x,
            s.cluster_id,
            s.pixels[0].y,
            s.pixels[0].x,
        )
    });
    for (id, s) in segments.iter_mut().enumerate() {
        s.id = id;
    }
}
