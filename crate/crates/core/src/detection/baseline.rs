//! Published linear-regression baselines, evaluated on raw feature values.

use std::fmt::Write as _;

use crate::error::{NeptuneError, Result};
use crate::features::{FeatureVector, Variable};

/// Maps a formula variable name to the feature vocabulary. `V14`..`V19` are the
/// six ratio variables in order, so `V15` is `V3_9` and `V16` is `V4_10`.
pub fn resolve_alias(name: &str) -> Result<Variable> {
    const RATIOS: [Variable; 6] = [
        Variable::V2_8,
        Variable::V3_9,
        Variable::V4_10,
        Variable::V5_11,
        Variable::V6_12,
        Variable::V7_13,
    ];
    let numbered = name
        .strip_prefix('V')
        .and_then(|n| n.parse::<usize>().ok())
        .filter(|n| (14..=19).contains(n));
    match numbered {
        Some(n) => Ok(RATIOS[n - 14]),
        None => name.parse(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineFormula {
    pub window_s: u32,
    /// Panel label of the formula, e.g. `3a`.
    pub panel: &'static str,
    pub terms: Vec<(Variable, f64)>,
    pub intercept: f64,
}

/// Window length, panel, (alias, coefficient) terms, intercept.
type FormulaRow = (u32, &'static str, &'static [(&'static str, f64)], f64);

const FORMULAS: [FormulaRow; 5] = [
    (
        5,
        "3a",
        &[
            ("V2", -0.6882),
            ("V6", 0.8153),
            ("V7", -1.1143),
            ("V9", -0.0003874),
            ("V12", 13.0915),
            ("V6_12", -0.001769),
            ("V7_13", 0.002818),
        ],
        0.1227,
    ),
    (4, "3b", &[("V4", 0.01103), ("V15", 0.00107)], -0.00123),
    (
        3,
        "3c",
        &[("V2", -0.3232), ("V3", 0.0001431), ("V6", -0.1553), ("V8", -0.2502)],
        -0.09636,
    ),
    (
        2,
        "3d",
        &[
            ("V4", 0.01665),
            ("V6", -0.1753),
            ("V8", -0.2300),
            ("V9", 0.0002441),
            ("V12", -7.6024),
            ("V4_10", -0.005745),
        ],
        0.03580,
    ),
    (
        1,
        "3e",
        &[
            ("V2", -0.2072),
            ("V4", 0.01528),
            ("V6", -0.1563),
            ("V9", 0.000243),
            ("V10", -0.01994),
            ("V11", -2.9549),
            ("V12", -7.4156),
            ("V13", 7.6710),
            ("V16", -0.004826),
        ],
        0.58134,
    ),
];

pub fn formula_for_window(window_s: u32) -> Result<BaselineFormula> {
    let (_, panel, terms, intercept) = FORMULAS
        .iter()
        .find(|f| f.0 == window_s)
        .ok_or(NeptuneError::BadWindowLength(window_s))?;
    let terms = terms
        .iter()
        .map(|&(name, c)| Ok((resolve_alias(name)?, c)))
        .collect::<Result<_>>()?;
    Ok(BaselineFormula {
        window_s,
        panel,
        terms,
        intercept: *intercept,
    })
}

/// Intercept plus the weighted raw feature values.
pub fn eval_baseline(formula: &BaselineFormula, fv: &FeatureVector) -> f64 {
    formula
        .terms
        .iter()
        .fold(formula.intercept, |acc, &(var, c)| acc + c * fv.get(var))
}

/// Pearson product-moment correlation.
pub fn pearson(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    if actual.len() != predicted.len() {
        return Err(NeptuneError::LengthMismatch(actual.len(), predicted.len()));
    }
    let n = actual.len();
    if n < 2 {
        return Err(NeptuneError::SeriesTooShort(n));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n as f64;
    let (ma, mp) = (mean(actual), mean(predicted));
    let (mut sab, mut saa, mut spp) = (0.0, 0.0, 0.0);
    for (a, p) in actual.iter().zip(predicted) {
        let (da, dp) = (a - ma, p - mp);
        sab += da * dp;
        saa += da * da;
        spp += dp * dp;
    }
    if saa == 0.0 || spp == 0.0 {
        return Err(NeptuneError::ZeroVariance);
    }
    Ok((sab / (saa.sqrt() * spp.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineRow {
    pub start_frame: usize,
    pub segment_id: usize,
    pub actual: bool,
    pub predicted: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineReport {
    pub formula: BaselineFormula,
    pub rows: Vec<BaselineRow>,
    /// Rows with a non-finite score, left out of the correlation.
    pub excluded: usize,
    pub correlation: std::result::Result<f64, String>,
}

impl BaselineReport {
    pub fn new(formula: BaselineFormula, rows: Vec<BaselineRow>) -> Self {
        let (actual, predicted): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .filter(|r| r.predicted.is_finite())
            .map(|r| (f64::from(u8::from(r.actual)), r.predicted))
            .unzip();
        let excluded = rows.len() - actual.len();
        let correlation = pearson(&actual, &predicted).map_err(|e| e.to_string());
        BaselineReport {
            formula,
            rows,
            excluded,
            correlation,
        }
    }

    /// `window_s,start_frame,segment_id,actual,predicted` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("window_s,start_frame,segment_id,actual,predicted\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                self.formula.window_s,
                r.start_frame,
                r.segment_id,
                u8::from(r.actual),
                r.predicted
            );
        }
        out
    }

    pub fn summary(&self) -> String {
        let corr = match &self.correlation {
            Ok(r) => format!("pearson={r}"),
            Err(e) => format!("pearson=undefined ({e})"),
        };
        format!(
            "formula={} window_s={} rows={} excluded_non_finite={} {corr}",
            self.formula.panel,
            self.formula.window_s,
            self.rows.len(),
            self.excluded
        )
    }
}
