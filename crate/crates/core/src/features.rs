//! Per-segment variables.
//!
//! For each segment of `S_a`: its size, the spread of the merged matrix at five
//! reference points, the ratio of the two, and each of those as a share of the
//! window total. The same three quantities are taken from the nearest segment
//! of `S_b`, and six ratios relate the two sides.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{NeptuneError, Result};
use crate::segmentation::{BBox, Point, Segment};
use crate::spectral::MergedMatrix;

/// The 18 derived variables, in canonical order.
#[allow(non_camel_case_types)]
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variable {
    V2,
    V3,
    V4,
    V5,
    V6,
    V7,
    V8,
    V9,
    V10,
    V11,
    V12,
    V13,
    V2_8,
    V3_9,
    V4_10,
    V5_11,
    V6_12,
    V7_13,
}

pub const NUM_VARIABLES: usize = 18;

impl Variable {
    pub const ALL: [Variable; NUM_VARIABLES] = [
        Variable::V2,
        Variable::V3,
        Variable::V4,
        Variable::V5,
        Variable::V6,
        Variable::V7,
        Variable::V8,
        Variable::V9,
        Variable::V10,
        Variable::V11,
        Variable::V12,
        Variable::V13,
        Variable::V2_8,
        Variable::V3_9,
        Variable::V4_10,
        Variable::V5_11,
        Variable::V6_12,
        Variable::V7_13,
    ];

    const NAMES: [&'static str; NUM_VARIABLES] = [
        "V2", "V3", "V4", "V5", "V6", "V7", "V8", "V9", "V10", "V11", "V12", "V13", "V2_8",
        "V3_9", "V4_10", "V5_11", "V6_12", "V7_13",
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Variable> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        Self::NAMES[self.index()]
    }

    /// True for the six cross-set ratios (V2_8 .. V7_13).
    pub fn is_ratio(self) -> bool {
        self >= Variable::V2_8
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variable {
    type Err = NeptuneError;

    fn from_str(s: &str) -> Result<Variable> {
        Self::NAMES
            .iter()
            .position(|&n| n == s)
            .map(|i| Self::ALL[i])
            .ok_or_else(|| NeptuneError::InvalidArgument(format!("unknown variable {s:?}")))
    }
}

/// Stand-in for a ratio whose denominator is zero. Quantizes to the top bin.
pub const RATIO_SENTINEL: f64 = f64::INFINITY;

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    /// Id of the `S_a` segment these values describe.
    pub segment_id: usize,
    pub v2: f64,
    pub v3: f64,
    pub v4: f64,
    pub v5: f64,
    pub v6: f64,
    pub v7: f64,
    pub v8: f64,
    pub v9: f64,
    pub v10: f64,
    pub v11: f64,
    pub v12: f64,
    pub v13: f64,
    pub r2_8: f64,
    pub r3_9: f64,
    pub r4_10: f64,
    pub r5_11: f64,
    pub r6_12: f64,
    pub r7_13: f64,
    pub nearest_sb_id: usize,
    pub v1: Option<bool>,
}

impl FeatureVector {
    pub fn get(&self, var: Variable) -> f64 {
        self.values()[var.index()]
    }

    /// All 18 values in canonical order.
    pub fn values(&self) -> [f64; NUM_VARIABLES] {
        [
            self.v2, self.v3, self.v4, self.v5, self.v6, self.v7, self.v8, self.v9, self.v10,
            self.v11, self.v12, self.v13, self.r2_8, self.r3_9, self.r4_10, self.r5_11,
            self.r6_12, self.r7_13,
        ]
    }
}

/// Four bounding-box corners followed by the rounded centroid.
///
/// The centre is rounded half-up per axis; like the corners it may fall
/// outside the segment itself.
pub fn five_points(seg: &Segment) -> [Point; 5] {
    let BBox {
        min_x,
        min_y,
        max_x,
        max_y,
    } = seg.bbox;
    let n = seg.len() as u64;
    let (sx, sy) = seg.coordinate_sums();
    // floor(sum / n + 1/2) in integers
    let centre = Point {
        x: ((2 * sx + n) / (2 * n)) as u32,
        y: ((2 * sy + n) / (2 * n)) as u32,
    };
    [
        Point { x: min_x, y: min_y },
        Point { x: min_x, y: max_y },
        Point { x: max_x, y: min_y },
        Point { x: max_x, y: max_y },
        centre,
    ]
}

/// Population standard deviation (divisor 5) of five values.
pub fn population_std(values: &[f64; 5]) -> f64 {
    let mean = values.iter().sum::<f64>() / 5.0;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 5.0).sqrt()
}

pub fn five_point_std(seg: &Segment, matrix: &MergedMatrix) -> f64 {
    let pts = five_points(seg);
    population_std(&pts.map(|p| matrix.get(p.x, p.y)))
}

/// Size, spread, spread-per-pixel and their window shares for one segment set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SetFeatures {
    /// spread / size
    pub ratio: f64,
    /// pixel count
    pub size: f64,
    /// five-point standard deviation
    pub spread: f64,
    pub ratio_share: f64,
    pub size_share: f64,
    pub spread_share: f64,
}

/// Shares fall back to a uniform `1 / n` when the total is zero.
fn shares(values: &[f64]) -> Vec<f64> {
    let total: f64 = values.iter().sum();
    if total > 0.0 {
        values.iter().map(|v| v / total).collect()
    } else {
        vec![1.0 / values.len() as f64; values.len()]
    }
}

/// Per-segment size/spread/ratio and shares over the whole set.
pub fn set_features(segments: &[Segment], matrix: &MergedMatrix) -> Result<Vec<SetFeatures>> {
    if segments.is_empty() {
        return Err(NeptuneError::NoSegments);
    }
    let size: Vec<f64> = segments.iter().map(|s| s.len() as f64).collect();
    let spread: Vec<f64> = segments.iter().map(|s| five_point_std(s, matrix)).collect();
    let ratio: Vec<f64> = spread.iter().zip(&size).map(|(d, n)| d / n).collect();
    let (ratio_share, size_share, spread_share) = (shares(&ratio), shares(&size), shares(&spread));
    Ok((0..segments.len())
        .map(|i| SetFeatures {
            ratio: ratio[i],
            size: size[i],
            spread: spread[i],
            ratio_share: ratio_share[i],
            size_share: size_share[i],
            spread_share: spread_share[i],
        })
        .collect())
}

/// Own-set values (V2..V7) for every `S_a` segment.
pub fn table1_features(segments: &[Segment], matrix: &MergedMatrix) -> Result<Vec<SetFeatures>> {
    set_features(segments, matrix)
}

/// Index into `segments_b` of the segment whose centroid is closest to
/// `seg_a`'s centroid; ties go to the smaller id.
pub fn nearest_sb(seg_a: &Segment, segments_b: &[Segment]) -> Result<usize> {
    let (ax, ay) = seg_a.centroid;
    segments_b
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let (dx, dy) = (b.centroid.0 - ax, b.centroid.1 - ay);
            (i, dx * dx + dy * dy)
        })
        .min_by(|(i, d), (j, e)| {
            d.total_cmp(e)
                .then(segments_b[*i].id.cmp(&segments_b[*j].id))
        })
        .map(|(i, _)| i)
        .ok_or(NeptuneError::NoPairing)
}

fn closer(a: (f64, usize), b: (f64, usize)) -> bool {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).is_lt()
}

/// Uniform grid over `S_b` centroids answering the same query as
/// [`nearest_sb`] without scanning every segment.
pub struct NearestIndex<'a> {
    segments: &'a [Segment],
    origin: (f64, f64),
    cell: f64,
    cols: usize,
    rows: usize,
    buckets: Vec<Vec<usize>>,
}

impl<'a> NearestIndex<'a> {
    pub fn new(segments: &'a [Segment]) -> Self {
        let (mut lo, mut hi) = ((f64::INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::NEG_INFINITY));
        for s in segments {
            lo = (lo.0.min(s.centroid.0), lo.1.min(s.centroid.1));
            hi = (hi.0.max(s.centroid.0), hi.1.max(s.centroid.1));
        }
        let (w, h) = ((hi.0 - lo.0).max(1.0), (hi.1 - lo.1).max(1.0));
        let cell = (w * h / segments.len().max(1) as f64).sqrt().max(1.0);
        let cols = (w / cell) as usize + 1;
        let rows = (h / cell) as usize + 1;
        let mut index = NearestIndex {
            segments,
            origin: lo,
            cell,
            cols,
            rows,
            buckets: vec![Vec::new(); cols * rows],
        };
        for (i, s) in segments.iter().enumerate() {
            let (cx, cy) = index.cell_of(s.centroid);
            index.buckets[cy * cols + cx].push(i);
        }
        index
    }

    fn cell_of(&self, (x, y): (f64, f64)) -> (usize, usize) {
        let cx = ((x - self.origin.0) / self.cell).floor().clamp(0.0, (self.cols - 1) as f64);
        let cy = ((y - self.origin.1) / self.cell).floor().clamp(0.0, (self.rows - 1) as f64);
        (cx as usize, cy as usize)
    }

    /// Index of the nearest segment; ties go to the smaller id.
    pub fn nearest(&self, seg_a: &Segment) -> Result<usize> {
        if self.segments.is_empty() {
            return Err(NeptuneError::NoPairing);
        }
        let (ax, ay) = seg_a.centroid;
        let (qx, qy) = self.cell_of(seg_a.centroid);
        let mut best: Option<(f64, usize, usize)> = None;
        for r in 0..=self.cols.max(self.rows) {
            // a ring of cells r away is at least (r - 1) cells from the query point
            if let Some((d, _, _)) = best {
                let gap = (r as f64 - 1.0) * self.cell;
                if r >= 1 && gap * gap > d {
                    break;
                }
            }
            let (x0, x1) = (qx as isize - r as isize, qx + r);
            let (y0, y1) = (qy as isize - r as isize, qy + r);
            for cy in y0.max(0) as usize..=y1.min(self.rows - 1) {
                let edge_row = cy as isize == y0 || cy == y1;
                for cx in x0.max(0) as usize..=x1.min(self.cols - 1) {
                    if !edge_row && cx as isize != x0 && cx != x1 {
                        continue;
                    }
                    for &i in &self.buckets[cy * self.cols + cx] {
                        let b = &self.segments[i];
                        let (dx, dy) = (b.centroid.0 - ax, b.centroid.1 - ay);
                        let d = dx * dx + dy * dy;
                        if best.is_none_or(|(bd, bid, _)| closer((d, b.id), (bd, bid))) {
                            best = Some((d, b.id, i));
                        }
                    }
                }
            }
        }
        Ok(best.expect("non-empty index").2)
    }
}

/// Neighbour values (V8..V13) for the segment at `index` in `S_b`.
pub fn table2_features(
    index: usize,
    segments_b: &[Segment],
    matrix: &MergedMatrix,
) -> Result<SetFeatures> {
    Ok(set_features(segments_b, matrix)?[index])
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        RATIO_SENTINEL
    } else {
        num / den
    }
}

/// Fills the six cross-set ratios from the V2..V13 values already present.
pub fn table3_features(fv: &mut FeatureVector) {
    fv.r2_8 = ratio(fv.v2, fv.v8);
    fv.r3_9 = ratio(fv.v3, fv.v9);
    fv.r4_10 = ratio(fv.v4, fv.v10);
    fv.r5_11 = ratio(fv.v5, fv.v11);
    fv.r6_12 = ratio(fv.v6, fv.v12);
    fv.r7_13 = ratio(fv.v7, fv.v13);
}

/// Feature vectors for every `S_a` segment, paired with its nearest `S_b`
/// segment. With an empty `S_b` no pairing exists and nothing is returned.
pub fn window_features(
    sa: &[Segment],
    sb: &[Segment],
    matrix: &MergedMatrix,
) -> Result<Vec<FeatureVector>> {
    if sa.is_empty() || sb.is_empty() {
        return Ok(Vec::new());
    }
    let a = table1_features(sa, matrix)?;
    let b = set_features(sb, matrix)?;
    let index = NearestIndex::new(sb);
    sa.par_iter()
        .zip(&a)
        .map(|(seg, fa)| {
            let j = index.nearest(seg)?;
            let fb = &b[j];
            let mut fv = FeatureVector {
                segment_id: seg.id,
                v2: fa.ratio,
                v3: fa.size,
                v4: fa.spread,
                v5: fa.ratio_share,
                v6: fa.size_share,
                v7: fa.spread_share,
                v8: fb.ratio,
                v9: fb.size,
                v10: fb.spread,
                v11: fb.ratio_share,
                v12: fb.size_share,
                v13: fb.spread_share,
                r2_8: 0.0,
                r3_9: 0.0,
                r4_10: 0.0,
                r5_11: 0.0,
                r6_12: 0.0,
                r7_13: 0.0,
                nearest_sb_id: sb[j].id,
                v1: None,
            };
            table3_features(&mut fv);
            Ok(fv)
        })
        .collect()
}

/// Outcome of labeling one window's segments.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Labeling {
    /// Labels in the order of the input segments.
    Labels(Vec<bool>),
    /// A victim is present but the window has no segments.
    UndetectablePositive,
}

/// Marks the single segment that holds the victim.
///
/// Segments overlapping `truth` compete on pixels inside the box; without any
/// overlap the segment whose centroid is nearest to the box centre wins. Ties
/// go to the lower id.
pub fn label_positive(segments: &[Segment], truth: Option<BBox>) -> Labeling {
    let Some(truth) = truth else {
        return Labeling::Labels(vec![false; segments.len()]);
    };
    if segments.is_empty() {
        return Labeling::UndetectablePositive;
    }
    let inside: Vec<usize> = segments
        .iter()
        .map(|s| s.pixels.iter().filter(|&&p| truth.contains(p)).count())
        .collect();
    let winner = if inside.iter().any(|&n| n > 0) {
        (0..segments.len())
            .max_by(|&i, &j| inside[i].cmp(&inside[j]).then(segments[j].id.cmp(&segments[i].id)))
            .unwrap()
    } else {
        let (cx, cy) = truth.centre();
        (0..segments.len())
            .min_by(|&i, &j| {
                let di = (segments[i].centroid.0 - cx).powi(2) + (segments[i].centroid.1 - cy).powi(2);
                let dj = (segments[j].centroid.0 - cx).powi(2) + (segments[j].centroid.1 - cy).powi(2);
                di.total_cmp(&dj).then(segments[i].id.cmp(&segments[j].id))
            })
            .unwrap()
    };
    Labeling::Labels((0..segments.len()).map(|i| i == winner).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::DcPolicy;

    fn seg(id: usize, pts: &[(u32, u32)]) -> Segment {
        Segment::from_pixels(id, 1, pts.iter().map(|&(x, y)| Point { x, y }).collect())
    }

    #[test]
    fn five_points_cases() {
        let p = five_points(&seg(0, &[(7, 9)]));
        assert!(p.iter().all(|&q| q == Point { x: 7, y: 9 }));

        let p = five_points(&seg(0, &[(1, 1), (3, 1), (1, 3), (3, 3)]));
        assert_eq!(
            p,
            [
                Point { x: 1, y: 1 },
                Point { x: 1, y: 3 },
                Point { x: 3, y: 1 },
                Point { x: 3, y: 3 },
                Point { x: 2, y: 2 }
            ]
        );

        // centroid (4/3, 4/3) rounds to (1, 1)
        assert_eq!(five_points(&seg(0, &[(1, 1), (2, 1), (1, 2)]))[4], Point { x: 1, y: 1 });
        // exact halves round up: (1 + 2) / 2 = 1.5 -> 2
        assert_eq!(five_points(&seg(0, &[(1, 1), (2, 1)]))[4], Point { x: 2, y: 1 });
    }

    #[test]
    fn std_of_five() {
        assert_eq!(population_std(&[1.0; 5]), 0.0);
        assert!((population_std(&[0.0, 0.0, 0.0, 0.0, 1.0]) - 0.4).abs() < 1e-15);
    }

    fn matrix(w: u32, h: u32, f: impl Fn(u32, u32) -> f64) -> MergedMatrix {
        let mut v = Vec::new();
        for y in 1..=h {
            for x in 1..=w {
                v.push(f(x, y));
            }
        }
        MergedMatrix::from_values(w, h, v, DcPolicy::ExcludeDc).unwrap()
    }

    #[test]
    fn single_segment_takes_full_share() {
        let m = matrix(4, 4, |x, y| (x * y) as f64 / 16.0);
        let f = table1_features(&[seg(0, &[(1, 1), (2, 1), (2, 2)])], &m).unwrap();
        assert_eq!(f[0].ratio_share, 1.0);
        assert_eq!(f[0].size_share, 1.0);
        assert_eq!(f[0].spread_share, 1.0);
        assert!(table1_features(&[], &m).is_err());
    }

    #[test]
    fn size_shares_and_uniform_fallback() {
        let m = matrix(40, 2, |_, _| 0.5);
        let a: Vec<(u32, u32)> = (1..=10).map(|x| (x, 1)).collect();
        let b: Vec<(u32, u32)> = (1..=30).map(|x| (x, 2)).collect();
        let f = table1_features(&[seg(0, &a), seg(1, &b)], &m).unwrap();
        assert_eq!(f[0].size_share, 0.25);
        assert_eq!(f[1].size_share, 0.75);
        // constant matrix: every spread is zero, shares become uniform
        assert_eq!(f[0].spread_share, 0.5);
        assert_eq!(f[1].ratio_share, 0.5);
    }

    #[test]
    fn grid_index_agrees_with_scan() {
        let mut state = 17u64;
        let mut next = |m: u32| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) % m as u64) as u32 + 1
        };
        for round in 0..40 {
            let nb = next(60) as usize;
            let sb: Vec<Segment> = (0..nb)
                .map(|i| {
                    let (x, y) = (next(30), next(20));
                    let pts: Vec<(u32, u32)> = (0..next(3)).map(|k| (x + k, y)).collect();
                    seg(i, &pts)
                })
                .collect();
            let index = NearestIndex::new(&sb);
            for _ in 0..50 {
                let a = seg(0, &[(next(34), next(22))]);
                assert_eq!(index.nearest(&a).unwrap(), nearest_sb(&a, &sb).unwrap(), "round {round}");
            }
        }
        assert!(NearestIndex::new(&[]).nearest(&seg(0, &[(1, 1)])).is_err());
    }

    #[test]
    fn nearest_pairing() {
        let a = seg(0, &[(5, 5)]);
        let b = vec![seg(0, &[(7, 5)]), seg(1, &[(6, 5)]), seg(2, &[(5, 5)])];
        assert_eq!(nearest_sb(&a, &b).unwrap(), 2);
        assert_eq!(nearest_sb(&a, &b[..2]).unwrap(), 1);
        let tied = vec![seg(0, &[(4, 5)]), seg(1, &[(6, 5)])];
        assert_eq!(nearest_sb(&a, &tied).unwrap(), 0);
        assert!(matches!(nearest_sb(&a, &[]), Err(NeptuneError::NoPairing)));
    }

    fn base_vector() -> FeatureVector {
        FeatureVector {
            segment_id: 0,
            v2: 0.5,
            v3: 10.0,
            v4: 0.0,
            v5: 0.3,
            v6: 0.2,
            v7: 0.1,
            v8: 0.5,
            v9: 4.0,
            v10: 2.0,
            v11: 0.3,
            v12: 0.2,
            v13: 0.0,
            r2_8: 0.0,
            r3_9: 0.0,
            r4_10: 0.0,
            r5_11: 0.0,
            r6_12: 0.0,
            r7_13: 0.0,
            nearest_sb_id: 0,
            v1: None,
        }
    }

    #[test]
    fn cross_ratios() {
        let mut fv = base_vector();
        table3_features(&mut fv);
        assert_eq!(fv.r2_8, 1.0);
        assert_eq!(fv.r3_9, 2.5);
        assert_eq!(fv.r4_10, 0.0);
        assert_eq!(fv.r5_11, 1.0);
        assert_eq!(fv.r7_13, RATIO_SENTINEL);
    }

    #[test]
    fn labeling() {
        let segs = vec![seg(0, &[(1, 1), (2, 1)]), seg(1, &[(10, 10), (11, 10)])];
        assert_eq!(label_positive(&segs, None), Labeling::Labels(vec![false, false]));
        let inside = BBox { min_x: 9, min_y: 9, max_x: 12, max_y: 12 };
        assert_eq!(label_positive(&segs, Some(inside)), Labeling::Labels(vec![false, true]));
        assert_eq!(label_positive(&[], Some(inside)), Labeling::UndetectablePositive);
    }

    #[test]
    fn labeling_by_distance() {
        // box centre (20, 1); centroids at distance 9 and 5
        let segs = vec![seg(0, &[(11, 1)]), seg(1, &[(25, 1)])];
        let truth = BBox { min_x: 19, min_y: 1, max_x: 21, max_y: 1 };
        assert_eq!(label_positive(&segs, Some(truth)), Labeling::Labels(vec![false, true]));
    }

    #[test]
    fn variable_names_round_trip() {
        for v in Variable::ALL {
            assert_eq!(v.name().parse::<Variable>().unwrap(), v);
            assert_eq!(Variable::from_index(v.index()), Some(v));
        }
        assert!(Variable::V2_8.is_ratio() && !Variable::V13.is_ratio());
    }
}
