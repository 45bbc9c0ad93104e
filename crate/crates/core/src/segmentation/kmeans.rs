//! Deterministic 1-D k-means.
//!
//! Values are collapsed to sorted distinct values with multiplicities. The
//! default start is the exact least-squares partition computed by dynamic
//! programming over contiguous intervals (optimal 1-D clusters are intervals),
//! after which Lloyd iterations run to a fixed point. Quantile seeding is
//! available as an alternative start.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{NeptuneError, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KmeansInit {
    /// Globally optimal interval partition, refined by Lloyd.
    #[default]
    Optimal,
    /// Centroids at the `(2i - 1) / 2k` quantiles, refined by Lloyd.
    Quantile,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KmeansOptions {
    pub max_iters: usize,
    pub init: KmeansInit,
}

impl Default for KmeansOptions {
    fn default() -> Self {
        KmeansOptions {
            max_iters: 300,
            init: KmeansInit::Optimal,
        }
    }
}

/// Result of clustering. Cluster ids are ordered by ascending centroid.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterAssignment {
    pub k: usize,
    pub centroids: Vec<f64>,
    pub labels: Vec<u8>,
    pub sizes: Vec<usize>,
}

impl ClusterAssignment {
    /// Within-cluster sum of squared distances to the centroids.
    pub fn sse(&self, values: &[f64]) -> f64 {
        values
            .iter()
            .zip(&self.labels)
            .map(|(v, &l)| {
                let d = v - self.centroids[l as usize];
                d * d
            })
            .sum()
    }
}

/// Sorted distinct values with their multiplicities.
struct Distinct {
    values: Vec<f64>,
    weights: Vec<f64>,
    /// For every input position, the index of its distinct value.
    slot: Vec<usize>,
}

impl Distinct {
    fn new(values: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let mut distinct = Distinct {
            values: Vec::new(),
            weights: Vec::new(),
            slot: vec![0; values.len()],
        };
        for &i in &order {
            let v = values[i];
            if distinct.values.last() != Some(&v) {
                distinct.values.push(v);
                distinct.weights.push(0.0);
            }
            *distinct.weights.last_mut().unwrap() += 1.0;
            distinct.slot[i] = distinct.values.len() - 1;
        }
        distinct
    }

    fn len(&self) -> usize {
        self.values.len()
    }
}

pub fn kmeans_1d(values: &[f64], k: usize, options: KmeansOptions) -> Result<ClusterAssignment> {
    if k == 0 || k > u8::MAX as usize {
        return Err(NeptuneError::InvalidArgument(format!("cluster count {k}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(NeptuneError::InvalidArgument(
            "k-means input contains a non-finite value".into(),
        ));
    }
    let distinct = Distinct::new(values);
    if distinct.len() < k {
        return Err(NeptuneError::DegenerateInput {
            distinct: distinct.len(),
            k,
        });
    }

    let start = match options.init {
        KmeansInit::Optimal => optimal_centroids(&distinct.values, &distinct.weights, k),
        KmeansInit::Quantile => quantile_centroids(values, k),
    };
    let (centroids, groups) = lloyd(&distinct, start, options.max_iters);

    let labels: Vec<u8> = distinct.slot.iter().map(|&s| groups[s] as u8).collect();
    let mut sizes = vec![0usize; k];
    for &l in &labels {
        sizes[l as usize] += 1;
    }
    Ok(ClusterAssignment {
        k,
        centroids,
        labels,
        sizes,
    })
}

fn nearest(v: f64, centroids: &[f64]) -> usize {
    // strict comparison keeps the lower centroid on ties
    let mut best = 0;
    let mut best_d = (v - centroids[0]).abs();
    for (j, &c) in centroids.iter().enumerate().skip(1) {
        let d = (v - c).abs();
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    best
}

fn weighted_means(d: &Distinct, groups: &[usize], k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut sum = vec![0.0; k];
    let mut weight = vec![0.0; k];
    for ((&v, &w), &g) in d.values.iter().zip(&d.weights).zip(groups) {
        sum[g] += w * v;
        weight[g] += w;
    }
    let means = sum
        .iter()
        .zip(&weight)
        .map(|(&s, &w)| if w > 0.0 { s / w } else { f64::NAN })
        .collect();
    (means, weight)
}

fn lloyd(d: &Distinct, mut centroids: Vec<f64>, max_iters: usize) -> (Vec<f64>, Vec<usize>) {
    let k = centroids.len();
    centroids.sort_by(f64::total_cmp);
    let mut groups: Vec<usize> = Vec::new();
    let mut last_sse = f64::INFINITY;

    let mut iter = 0;
    loop {
        if iter >= max_iters && !groups.is_empty() {
            break;
        }
        iter += 1;
        let next: Vec<usize> = d.values.iter().map(|&v| nearest(v, &centroids)).collect();
        let sse: f64 = d
            .values
            .iter()
            .zip(&d.weights)
            .zip(&next)
            .map(|((&v, &w), &g)| w * (v - centroids[g]).powi(2))
            .sum();
        debug_assert!(
            sse <= last_sse * (1.0 + 1e-9) + 1e-12,
            "Lloyd objective increased: {last_sse} -> {sse}"
        );
        last_sse = sse;

        let mut counts = vec![0usize; k];
        next.iter().for_each(|&g| counts[g] += 1);
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            // reseed at the value farthest from its own centroid
            let far = (0..d.len())
                .max_by(|&a, &b| {
                    let da = (d.values[a] - centroids[next[a]]).abs();
                    let db = (d.values[b] - centroids[next[b]]).abs();
                    da.total_cmp(&db).then(b.cmp(&a))
                })
                .expect("non-empty input");
            centroids[empty] = d.values[far];
            centroids.sort_by(f64::total_cmp);
            continue;
        }

        if next == groups {
            break;
        }
        groups = next;
        centroids = weighted_means(d, &groups, k).0;
    }

    // report means of the final assignment
    let (means, _) = weighted_means(d, &groups, k);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        means[a]
            .partial_cmp(&means[b])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut rank = vec![0; k];
    for (new, &old) in order.iter().enumerate() {
        rank[old] = new;
    }
    let centroids = order.iter().map(|&i| means[i]).collect();
    let groups = groups.iter().map(|&g| rank[g]).collect();
    (centroids, groups)
}

fn quantile_centroids(values: &[f64], k: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    (1..=k)
        .map(|i| crate::quantization::percentile(&sorted, 100.0 * (2 * i - 1) as f64 / (2 * k) as f64))
        .collect()
}

/// Cost of grouping a contiguous run of distinct values, via prefix sums.
struct IntervalCost {
    w: Vec<f64>,
    s1: Vec<f64>,
    s2: Vec<f64>,
}

impl IntervalCost {
    fn new(values: &[f64], weights: &[f64]) -> Self {
        let total: f64 = weights.iter().sum();
        let shift = values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / total;
        let n = values.len();
        let mut cost = IntervalCost {
            w: vec![0.0; n + 1],
            s1: vec![0.0; n + 1],
            s2: vec![0.0; n + 1],
        };
        for i in 0..n {
            let x = values[i] - shift;
            cost.w[i + 1] = cost.w[i] + weights[i];
            cost.s1[i + 1] = cost.s1[i] + weights[i] * x;
            cost.s2[i + 1] = cost.s2[i] + weights[i] * x * x;
        }
        cost
    }

    /// SSE of distinct values `a..b` around their weighted mean.
    fn of(&self, a: usize, b: usize) -> f64 {
        let w = self.w[b] - self.w[a];
        let s1 = self.s1[b] - self.s1[a];
        let s2 = self.s2[b] - self.s2[a];
        (s2 - s1 * s1 / w).max(0.0)
    }
}

/// Least-squares partition of sorted distinct values into `k` intervals.
///
/// `best[c][j]` is the minimal cost of splitting the first `j` values into
/// `c + 1` intervals. The split point is monotone in `j`, which allows the
/// divide-and-conquer evaluation of each layer.
fn optimal_centroids(values: &[f64], weights: &[f64], k: usize) -> Vec<f64> {
    let n = values.len();
    let cost = IntervalCost::new(values, weights);
    let mut best = vec![vec![f64::INFINITY; n + 1]; k];
    let mut split = vec![vec![0usize; n + 1]; k];
    for (j, b) in best[0].iter_mut().enumerate().skip(1) {
        *b = cost.of(0, j);
    }
    for c in 1..k {
        let (prev, cur) = best.split_at_mut(c);
        fill_layer(
            &cost,
            &prev[c - 1],
            &mut cur[0],
            &mut split[c],
            c,
            (c + 1, n),
            (c, n - 1),
        );
    }

    let mut bounds = vec![n];
    let mut j = n;
    for c in (1..k).rev() {
        j = split[c][j];
        bounds.push(j);
    }
    bounds.push(0);
    bounds.reverse();
    bounds
        .windows(2)
        .map(|r| {
            let (a, b) = (r[0], r[1]);
            let w: f64 = weights[a..b].iter().sum();
            values[a..b].iter().zip(&weights[a..b]).map(|(v, w)| v * w).sum::<f64>() / w
        })
        .collect()
}

fn fill_layer(
    cost: &IntervalCost,
    prev: &[f64],
    cur: &mut [f64],
    split: &mut [usize],
    c: usize,
    (lo, hi): (usize, usize),
    (opt_lo, opt_hi): (usize, usize),
) {
    if lo > hi {
        return;
    }
    let mid = (lo + hi) / 2;
    let mut best = f64::INFINITY;
    let mut arg = opt_lo.max(c);
    let first = opt_lo.max(c);
    let last = opt_hi.min(mid - 1);
    for (i, p) in prev.iter().enumerate().take(last + 1).skip(first) {
        let v = p + cost.of(i, mid);
        if v < best {
            best = v;
            arg = i;
        }
    }
    cur[mid] = best;
    split[mid] = arg;
    if mid > lo {
        fill_layer(cost, prev, cur, split, c, (lo, mid - 1), (opt_lo, arg));
    }
    fill_layer(cost, prev, cur, split, c, (mid + 1, hi), (arg, opt_hi));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_obvious_groups() {
        let v = [0.0, 0.1, 0.5, 0.6, 1.0];
        let a = kmeans_1d(&v, 3, KmeansOptions::default()).unwrap();
        assert_eq!(a.labels, vec![0, 0, 1, 1, 2]);
        assert_eq!(a.sizes, vec![2, 2, 1]);
        assert!((a.centroids[0] - 0.05).abs() < 1e-15);
        assert!((a.centroids[1] - 0.55).abs() < 1e-15);
        assert_eq!(a.centroids[2], 1.0);
    }

    #[test]
    fn quantile_start_on_same_groups() {
        let v = [0.0, 0.1, 0.5, 0.6, 1.0];
        let opts = KmeansOptions {
            init: KmeansInit::Quantile,
            ..Default::default()
        };
        let a = kmeans_1d(&v, 3, opts).unwrap();
        assert_eq!(a.labels, vec![0, 0, 1, 1, 2]);
    }

    #[test]
    fn degenerate_inputs() {
        let v = [0.2, 0.2, 0.2, 0.9, 0.9];
        assert!(matches!(
            kmeans_1d(&v, 3, KmeansOptions::default()),
            Err(NeptuneError::DegenerateInput { distinct: 2, k: 3 })
        ));
        // three distinct values in two tight blobs still split three ways
        let v = [0.2, 0.2, 0.2001, 0.9, 0.9];
        let a = kmeans_1d(&v, 3, KmeansOptions::default()).unwrap();
        assert_eq!(a.labels, vec![0, 0, 1, 2, 2]);
    }

    #[test]
    fn deterministic() {
        let v: Vec<f64> = (0..500).map(|i| ((i * 7919) % 101) as f64 / 100.0).collect();
        for init in [KmeansInit::Optimal, KmeansInit::Quantile] {
            let opts = KmeansOptions { init, ..Default::default() };
            assert_eq!(kmeans_1d(&v, 4, opts).unwrap(), kmeans_1d(&v, 4, opts).unwrap());
        }
    }

    #[test]
    fn centroids_are_means_and_sorted() {
        let v: Vec<f64> = (0..300).map(|i| ((i * 37) % 53) as f64 / 53.0).collect();
        let a = kmeans_1d(&v, 4, KmeansOptions::default()).unwrap();
        assert!(a.centroids.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(a.sizes.iter().sum::<usize>(), v.len());
        for c in 0..4 {
            let members: Vec<f64> = v
                .iter()
                .zip(&a.labels)
                .filter(|(_, &l)| l as usize == c)
                .map(|(&x, _)| x)
                .collect();
            let mean = members.iter().sum::<f64>() / members.len() as f64;
            assert!((mean - a.centroids[c]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_nan() {
        assert!(kmeans_1d(&[0.0, f64::NAN, 1.0, 2.0], 3, KmeansOptions::default()).is_err());
    }
}
