//! Percentile cut-offs and 4-level binning of feature vectors.

mod builtin;

use std::collections::BTreeMap;

use serde::de::Error as _;
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{NeptuneError, Result};
use crate::features::{FeatureVector, Variable, NUM_VARIABLES};

/// Percentile of ascending `sorted` by linear interpolation between closest
/// ranks: rank `h = (n - 1) p / 100 + 1`, value
/// `x[floor h] + (h - floor h) (x[ceil h] - x[floor h])` (1-based ranks).
///
/// Infinite values are allowed; the interpolation never mixes `inf - inf`.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let h = (sorted.len() - 1) as f64 * p / 100.0;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    let (a, b) = (sorted[lo], sorted[hi]);
    if frac == 0.0 || a == b {
        a
    } else {
        a + frac * (b - a)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PercentileTable {
    pub window_s: u32,
    /// `(p25, p50, p75)` per variable, canonical order.
    pub cutoffs: [[f64; 3]; NUM_VARIABLES],
}

impl PercentileTable {
    pub fn get(&self, var: Variable) -> [f64; 3] {
        self.cutoffs[var.index()]
    }

    pub fn bin(&self, var: Variable, value: f64) -> u8 {
        bin_for(value, self.get(var))
    }
}

/// 1 if `v <= p25`, 2 if `<= p50`, 3 if `<= p75`, else 4. The ratio sentinel
/// (positive infinity) is always 4.
pub fn bin_for(value: f64, [p25, p50, p75]: [f64; 3]) -> u8 {
    if value == f64::INFINITY {
        4
    } else if value <= p25 {
        1
    } else if value <= p50 {
        2
    } else if value <= p75 {
        3
    } else {
        4
    }
}

pub fn compute_percentiles(features: &[FeatureVector], window_s: u32) -> Result<PercentileTable> {
    if features.len() < 4 {
        return Err(NeptuneError::TooFewVectors(features.len()));
    }
    let mut cutoffs = [[0.0; 3]; NUM_VARIABLES];
    let mut column = Vec::with_capacity(features.len());
    for var in Variable::ALL {
        column.clear();
        column.extend(features.iter().map(|f| f.get(var)));
        if column.iter().any(|v| v.is_nan()) {
            return Err(NeptuneError::InvalidArgument(format!("NaN in {var}")));
        }
        column.sort_by(f64::total_cmp);
        cutoffs[var.index()] = [25.0, 50.0, 75.0].map(|p| percentile(&column, p));
    }
    Ok(PercentileTable { window_s, cutoffs })
}

/// Published cut-offs for a 1..=5 second window.
pub fn builtin_table(window_s: u32) -> Result<PercentileTable> {
    if !(1..=5).contains(&window_s) {
        return Err(NeptuneError::BadWindowLength(window_s));
    }
    Ok(PercentileTable {
        window_s,
        cutoffs: builtin::BUILTIN_CUTOFFS[5 - window_s as usize],
    })
}

/// Published cut-offs with the ratio rows replaced by those of `computed`.
/// Only the 1 s table has suspect ratio rows; other lengths are returned as
/// published.
pub fn builtin_repaired(window_s: u32, computed: &PercentileTable) -> Result<PercentileTable> {
    let mut table = builtin_table(window_s)?;
    if window_s == 1 {
        for var in Variable::ALL.into_iter().filter(|v| v.is_ratio()) {
            table.cutoffs[var.index()] = computed.get(var);
        }
    }
    Ok(table)
}

/// Bins for all 18 variables plus the optional label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct QuantizedVector {
    pub bins: [u8; NUM_VARIABLES],
    pub v1: Option<bool>,
}

impl QuantizedVector {
    pub fn bin(&self, var: Variable) -> u8 {
        self.bins[var.index()]
    }
}

pub fn quantize(fv: &FeatureVector, table: &PercentileTable) -> QuantizedVector {
    let values = fv.values();
    let mut bins = [0u8; NUM_VARIABLES];
    for (i, b) in bins.iter_mut().enumerate() {
        *b = bin_for(values[i], table.cutoffs[i]);
    }
    QuantizedVector { bins, v1: fv.v1 }
}

/// Cut-off value in JSON: a number, or the strings `"inf"` / `"-inf"`.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum JsonReal {
    Number(f64),
    Text(String),
}

impl JsonReal {
    fn from_f64(v: f64) -> JsonReal {
        if v.is_finite() {
            JsonReal::Number(v)
        } else if v > 0.0 {
            JsonReal::Text("inf".into())
        } else {
            JsonReal::Text("-inf".into())
        }
    }

    fn to_f64(&self) -> Option<f64> {
        match self {
            JsonReal::Number(v) => Some(*v),
            JsonReal::Text(s) if s == "inf" => Some(f64::INFINITY),
            JsonReal::Text(s) if s == "-inf" => Some(f64::NEG_INFINITY),
            JsonReal::Text(_) => None,
        }
    }
}

struct OrderedCutoffs<'a>(&'a [[f64; 3]; NUM_VARIABLES]);

impl Serialize for OrderedCutoffs<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(NUM_VARIABLES))?;
        for var in Variable::ALL {
            map.serialize_entry(var.name(), &self.0[var.index()].map(JsonReal::from_f64))?;
        }
        map.end()
    }
}

#[derive(Serialize)]
struct TableOut<'a> {
    window_s: u32,
    variables: OrderedCutoffs<'a>,
}

#[derive(Deserialize)]
struct TableIn {
    window_s: u32,
    variables: BTreeMap<String, [JsonReal; 3]>,
}

impl Serialize for PercentileTable {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        TableOut {
            window_s: self.window_s,
            variables: OrderedCutoffs(&self.cutoffs),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PercentileTable {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = TableIn::deserialize(deserializer)?;
        if raw.variables.len() != NUM_VARIABLES {
            return Err(D::Error::custom(format!(
                "expected {NUM_VARIABLES} variables, found {}",
                raw.variables.len()
            )));
        }
        let mut cutoffs = [[0.0; 3]; NUM_VARIABLES];
        for (name, triple) in &raw.variables {
            let var: Variable = name.parse().map_err(D::Error::custom)?;
            for (slot, v) in cutoffs[var.index()].iter_mut().zip(triple) {
                *slot = v
                    .to_f64()
                    .ok_or_else(|| D::Error::custom(format!("bad cut-off for {name}")))?;
            }
            let [a, b, c] = cutoffs[var.index()];
            if !(a <= b && b <= c) {
                return Err(D::Error::custom(format!("cut-offs for {name} are not ordered")));
            }
        }
        Ok(PercentileTable {
            window_s: raw.window_s,
            cutoffs,
        })
    }
}
