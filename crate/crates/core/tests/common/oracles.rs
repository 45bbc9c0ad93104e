//! Slow, direct reference implementations.

use std::collections::{BTreeMap, VecDeque};

use neptune_core::features::Variable;
use neptune_core::quantization::QuantizedVector;
use neptune_core::rules::{Antecedent, Item};
use neptune_core::segmentation::Adjacency;

/// max_k |X_k| by the O(L^2) definition, over all bins (or all but bin 0).
pub fn naive_dft_max(series: &[f64], include_dc: bool) -> f64 {
    let n = series.len();
    let first = if include_dc { 0 } else { 1 };
    (first..n)
        .map(|k| {
            let (mut re, mut im) = (0.0f64, 0.0f64);
            for (j, &x) in series.iter().enumerate() {
                let angle = -2.0 * std::f64::consts::PI * ((k * j) % n) as f64 / n as f64;
                re += x * angle.cos();
                im += x * angle.sin();
            }
            re.hypot(im)
        })
        .fold(0.0, f64::max)
}

fn sse_of(group: &[(f64, usize)]) -> f64 {
    let w: usize = group.iter().map(|g| g.1).sum();
    let mean = group.iter().map(|g| g.0 * g.1 as f64).sum::<f64>() / w as f64;
    group.iter().map(|g| g.1 as f64 * (g.0 - mean).powi(2)).sum()
}

/// Minimum within-cluster SSE over every split of the sorted distinct values
/// into `k` contiguous non-empty groups.
pub fn kmeans_oracle_sse(values: &[f64], k: usize) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct: Vec<(f64, usize)> = Vec::new();
    for v in sorted {
        match distinct.last_mut() {
            Some(last) if last.0 == v => last.1 += 1,
            _ => distinct.push((v, 1)),
        }
    }
    fn best(d: &[(f64, usize)], k: usize) -> f64 {
        if k == 1 {
            return sse_of(d);
        }
        (1..=d.len() - (k - 1))
            .map(|cut| sse_of(&d[..cut]) + best(&d[cut..], k - 1))
            .fold(f64::INFINITY, f64::min)
    }
    assert!(distinct.len() >= k);
    best(&distinct, k)
}

/// Components as `(cluster, sorted pixels)`, sorted.
pub fn flood_fill(
    width: u32,
    height: u32,
    labels: &[u8],
    retained: &[u8],
    adjacency: Adjacency,
) -> Vec<(u8, Vec<(u32, u32)>)> {
    let (w, h) = (width as i64, height as i64);
    let mut seen = vec![false; labels.len()];
    let mut out = Vec::new();
    let steps: &[(i64, i64)] = match adjacency {
        Adjacency::Four => &[(1, 0), (-1, 0), (0, 1), (0, -1)],
        Adjacency::Eight => &[
            (1, 0),
            (-1, 0),
            (0, 1),
            (0, -1),
            (1, 1),
            (1, -1),
            (-1, 1),
            (-1, -1),
        ],
    };
    for start in 0..labels.len() {
        let c = labels[start];
        if seen[start] || !retained.contains(&c) {
            continue;
        }
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut pixels = Vec::new();
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i as i64 % w, i as i64 / w);
            pixels.push((x as u32 + 1, y as u32 + 1));
            for (dx, dy) in steps {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w || ny >= h {
                    continue;
                }
                let j = (ny * w + nx) as usize;
                if !seen[j] && labels[j] == c {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        pixels.sort();
        out.push((c, pixels));
    }
    out.sort();
    out
}

/// Every antecedent over `variables` of exactly `size` items matching at
/// least one positive and no negative, with its positive count.
pub fn enumerate_rules(
    rows: &[QuantizedVector],
    variables: &[Variable],
    size: usize,
) -> BTreeMap<Antecedent, usize> {
    let mut out = BTreeMap::new();
    let n = variables.len();
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != size {
            continue;
        }
        let vars: Vec<Variable> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| variables[i]).collect();
        for code in 0..4usize.pow(size as u32) {
            let items: Vec<Item> = vars
                .iter()
                .enumerate()
                .map(|(i, &variable)| Item {
                    variable,
                    bin: (code / 4usize.pow(i as u32) % 4) as u8 + 1,
                })
                .collect();
            let hits = |want: bool| {
                rows.iter()
                    .filter(|r| r.v1 == Some(want))
                    .filter(|r| items.iter().all(|it| r.bin(it.variable) == it.bin))
                    .count()
            };
            let (pos, neg) = (hits(true), hits(false));
            if pos > 0 && neg == 0 {
                out.insert(Antecedent::from_items(&items).unwrap(), pos);
            }
        }
    }
    out
}

/// Percentile by sorting and indexing with exact integer rank arithmetic;
/// `p` in whole percent.
pub fn percentile_oracle(values: &[f64], p: usize) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let scaled = (v.len() - 1) * p;
    let (lo, rem) = (scaled / 100, scaled % 100);
    if rem == 0 {
        v[lo]
    } else {
        v[lo] + (rem as f64 / 100.0) * (v[lo + 1] - v[lo])
    }
}
