//! Confidence-1 association rules with a positive-label consequent.
//!
//! An antecedent is a set of `variable = bin` items over distinct variables.
//! A rule is kept when it matches at least one positive row and no negative
//! row. Enumeration is depth-first over variables in canonical order; only
//! bins that occur among the still-matched positives are explored, so any
//! branch that loses every positive is pruned. Negatives can only be checked at
//! the target size, since adding items may still shed them.

use std::cmp::Ordering;
use std::fmt;

use rayon::prelude::*;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{NeptuneError, Result};
use crate::features::{Variable, NUM_VARIABLES};
use crate::quantization::QuantizedVector;

const BITS: u32 = 3;
const FIELD: u64 = 0b111;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Item {
    #[serde(rename = "var", with = "variable_name")]
    pub variable: Variable,
    pub bin: u8,
}

mod variable_name {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Variable, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(v.name())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Variable, D::Error> {
        let name = String::deserialize(d)?;
        name.parse().map_err(D::Error::custom)
    }
}

/// Item set packed three bits per variable (0 = variable unused).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Antecedent {
    code: u64,
    mask: u64,
}

impl Antecedent {
    pub fn from_items(items: &[Item]) -> Result<Antecedent> {
        let mut a = Antecedent::default();
        for item in items {
            if !(1..=4).contains(&item.bin) {
                return Err(NeptuneError::InvalidArgument(format!(
                    "bin {} for {} is outside 1..=4",
                    item.bin, item.variable
                )));
            }
            if a.bin(item.variable).is_some() {
                return Err(NeptuneError::InvalidArgument(format!(
                    "{} appears twice in one antecedent",
                    item.variable
                )));
            }
            a = a.with(item.variable, item.bin);
        }
        Ok(a)
    }

    fn with(self, var: Variable, bin: u8) -> Antecedent {
        let shift = var.index() as u32 * BITS;
        Antecedent {
            code: self.code | (bin as u64) << shift,
            mask: self.mask | FIELD << shift,
        }
    }

    pub fn bin(&self, var: Variable) -> Option<u8> {
        let b = (self.code >> (var.index() as u32 * BITS)) & FIELD;
        (b != 0).then_some(b as u8)
    }

    pub fn items(&self) -> impl Iterator<Item = Item> + '_ {
        Variable::ALL
            .into_iter()
            .filter_map(|v| self.bin(v).map(|bin| Item { variable: v, bin }))
    }

    pub fn len(&self) -> usize {
        (self.mask.count_ones() / BITS) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.mask == 0
    }

    pub fn matches(&self, qv: &QuantizedVector) -> bool {
        pack(&qv.bins) & self.mask == self.code
    }

    fn matches_packed(&self, packed: u64) -> bool {
        packed & self.mask == self.code
    }
}

fn pack(bins: &[u8; NUM_VARIABLES]) -> u64 {
    bins.iter()
        .enumerate()
        .fold(0, |acc, (i, &b)| acc | ((b as u64 & FIELD) << (i as u32 * BITS)))
}

impl Ord for Antecedent {
    fn cmp(&self, other: &Self) -> Ordering {
        self.items()
            .map(|i| (i.variable, i.bin))
            .cmp(other.items().map(|i| (i.variable, i.bin)))
    }
}

impl PartialOrd for Antecedent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Antecedent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Antecedent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .items()
            .map(|i| format!("{}={}", i.variable, i.bin))
            .collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub antecedent: Antecedent,
    pub positives_covered: usize,
    /// Always zero: rules are only built at confidence 1.
    pub negatives_covered: usize,
}

/// Quantized rows with labels, restricted to a set of active variables.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub window_s: u32,
    /// Variables available to antecedents, in canonical order.
    pub variables: Vec<Variable>,
    pub rows: Vec<QuantizedVector>,
}

impl LabeledDataset {
    /// All 18 variables active. Every row must carry a label.
    pub fn new(window_s: u32, rows: Vec<QuantizedVector>) -> Result<Self> {
        Self::with_variables(window_s, Variable::ALL.to_vec(), rows)
    }

    pub fn with_variables(
        window_s: u32,
        mut variables: Vec<Variable>,
        rows: Vec<QuantizedVector>,
    ) -> Result<Self> {
        variables.sort();
        variables.dedup();
        if let Some(i) = rows.iter().position(|r| r.v1.is_none()) {
            return Err(NeptuneError::InvalidArgument(format!("row {i} has no label")));
        }
        for r in &rows {
            if variables.iter().any(|v| !(1..=4).contains(&r.bin(*v))) {
                return Err(NeptuneError::InvalidArgument("bin outside 1..=4".into()));
            }
        }
        Ok(LabeledDataset {
            window_s,
            variables,
            rows,
        })
    }

    pub fn positives(&self) -> usize {
        self.rows.iter().filter(|r| r.v1 == Some(true)).count()
    }

    pub fn negatives(&self) -> usize {
        self.rows.len() - self.positives()
    }
}

type Bits = Vec<u64>;

fn words(n: usize) -> usize {
    n.div_ceil(64)
}

fn count(bits: &[u64]) -> usize {
    bits.iter().map(|w| w.count_ones() as usize).sum()
}

/// Row bitsets per (active variable, bin).
struct Index {
    vars: Vec<Variable>,
    pos_words: usize,
    neg_words: usize,
    /// `[var][bin - 1]`
    pos: Vec<[Bits; 4]>,
    neg: Vec<[Bits; 4]>,
}

impl Index {
    fn new(data: &LabeledDataset) -> Self {
        let positives: Vec<&QuantizedVector> =
            data.rows.iter().filter(|r| r.v1 == Some(true)).collect();
        let negatives: Vec<&QuantizedVector> =
            data.rows.iter().filter(|r| r.v1 == Some(false)).collect();
        let (pw, nw) = (words(positives.len()), words(negatives.len()));
        let build = |rows: &[&QuantizedVector], w: usize| -> Vec<[Bits; 4]> {
            data.variables
                .iter()
                .map(|&v| {
                    let mut per_bin: [Bits; 4] = std::array::from_fn(|_| vec![0; w]);
                    for (i, r) in rows.iter().enumerate() {
                        per_bin[r.bin(v) as usize - 1][i / 64] |= 1 << (i % 64);
                    }
                    per_bin
                })
                .collect()
        };
        Index {
            vars: data.variables.clone(),
            pos_words: pw,
            neg_words: nw,
            pos: build(&positives, pw),
            neg: build(&negatives, nw),
        }
    }

    fn all(&self, n_words: usize, n: usize) -> Bits {
        let mut b = vec![u64::MAX; n_words];
        if !n.is_multiple_of(64) {
            b[n_words - 1] = (1u64 << (n % 64)) - 1;
        }
        b
    }
}

/// Receives every confidence-1 antecedent found, with its positive cover.
trait Visit {
    fn rule(&mut self, antecedent: Antecedent, positives: &[u64]);
}

/// Depth-first walk emitting zero-negative antecedents of sizes in `sizes`.
struct Walk<'a> {
    index: &'a Index,
    min_size: usize,
    max_size: usize,
}

impl Walk<'_> {
    #[allow(clippy::too_many_arguments)]
    fn descend<V: Visit>(
        &self,
        visit: &mut V,
        (start, end): (usize, usize),
        antecedent: Antecedent,
        pos: &[u64],
        neg: &[u64],
        neg_clear: bool,
        pos_stack: &mut [Bits],
        neg_stack: &mut [Bits],
    ) {
        let size = antecedent.len() + 1;
        let n = self.index.vars.len();
        let Some(((pos_next, pos_rest), (neg_next, neg_rest))) = pos_stack
            .split_first_mut()
            .zip(neg_stack.split_first_mut())
        else {
            return;
        };
        for vi in start..end {
            // enough variables left to reach the smallest emitted size
            if size + (n - vi - 1) < self.min_size {
                break;
            }
            let var = self.index.vars[vi];
            for bin in 1..=4u8 {
                let pmask = &self.index.pos[vi][bin as usize - 1];
                let mut any = false;
                for ((o, a), b) in pos_next.iter_mut().zip(pos).zip(pmask) {
                    *o = a & b;
                    any |= *o != 0;
                }
                if !any {
                    continue;
                }
                let clear = if neg_clear {
                    true
                } else {
                    let nmask = &self.index.neg[vi][bin as usize - 1];
                    let mut any_neg = false;
                    for ((o, a), b) in neg_next.iter_mut().zip(neg).zip(nmask) {
                        *o = a & b;
                        any_neg |= *o != 0;
                    }
                    !any_neg
                };
                let child = antecedent.with(var, bin);
                if clear && size >= self.min_size {
                    visit.rule(child, pos_next);
                }
                if size < self.max_size {
                    self.descend(
                        visit,
                        (vi + 1, n),
                        child,
                        pos_next,
                        neg_next,
                        clear,
                        pos_rest,
                        neg_rest,
                    );
                }
            }
        }
    }

    /// Runs the walk with one independent task per first variable and returns
    /// the per-task visitors in variable order.
    fn run<V: Visit + Send>(&self, make: impl Fn() -> V + Sync) -> Vec<V> {
        let idx = self.index;
        let n_pos = (0..4).map(|b| count(&idx.pos[0][b])).sum::<usize>();
        let n_neg = (0..4).map(|b| count(&idx.neg[0][b])).sum::<usize>();
        let all_pos = idx.all(idx.pos_words, n_pos);
        let all_neg = idx.all(idx.neg_words, n_neg);
        (0..idx.vars.len())
            .into_par_iter()
            .map(|first| {
                let mut visit = make();
                let depth = self.max_size + 1;
                let mut pos_stack = vec![vec![0; idx.pos_words]; depth];
                let mut neg_stack = vec![vec![0; idx.neg_words]; depth];
                self.descend(
                    &mut visit,
                    (first, first + 1),
                    Antecedent::default(),
                    &all_pos,
                    &all_neg,
                    n_neg == 0,
                    &mut pos_stack,
                    &mut neg_stack,
                );
                visit
            })
            .collect()
    }
}

fn check_size(data: &LabeledDataset, size: usize) -> Result<()> {
    if size == 0 || size > data.variables.len() {
        return Err(NeptuneError::BadAntecedentSize {
            size,
            max: data.variables.len(),
        });
    }
    if data.positives() == 0 {
        return Err(NeptuneError::NoPositives);
    }
    Ok(())
}

struct Collect {
    size: usize,
    rules: Vec<Rule>,
}

impl Visit for Collect {
    fn rule(&mut self, antecedent: Antecedent, positives: &[u64]) {
        if antecedent.len() == self.size {
            self.rules.push(Rule {
                antecedent,
                positives_covered: count(positives),
                negatives_covered: 0,
            });
        }
    }
}

/// Every antecedent of exactly `antecedent_size` items that matches at least
/// one positive row and no negative row, in canonical order.
pub fn mine_rules(data: &LabeledDataset, antecedent_size: usize) -> Result<Vec<Rule>> {
    check_size(data, antecedent_size)?;
    let index = Index::new(data);
    let walk = Walk {
        index: &index,
        min_size: antecedent_size,
        max_size: antecedent_size,
    };
    let parts = walk.run(|| Collect {
        size: antecedent_size,
        rules: Vec::new(),
    });
    Ok(parts.into_iter().flat_map(|c| c.rules).collect())
}

/// Rule statistics for one antecedent size.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// Antecedent size plus one for the label.
    pub num_variables: usize,
    pub rule_count: usize,
    /// Rules whose antecedent matches two or more positives.
    pub multi_positive_rules: usize,
    /// Positives matched by at least one rule.
    pub positives_covered: usize,
}

impl SweepPoint {
    pub fn multi_positive_proportion(&self) -> f64 {
        if self.rule_count == 0 {
            0.0
        } else {
            self.multi_positive_rules as f64 / self.rule_count as f64
        }
    }
}

struct Tally {
    min_size: usize,
    counts: Vec<(usize, usize, Bits)>,
}

impl Visit for Tally {
    fn rule(&mut self, antecedent: Antecedent, positives: &[u64]) {
        let (rules, multi, union) = &mut self.counts[antecedent.len() - self.min_size];
        *rules += 1;
        if count(positives) >= 2 {
            *multi += 1;
        }
        union.iter_mut().zip(positives).for_each(|(u, p)| *u |= p);
    }
}

/// Rule counts and coverage for `num_variables` 3 up to one more than the
/// number of active variables, computed in one pass without storing rules.
pub fn sweep(data: &LabeledDataset) -> Result<Vec<SweepPoint>> {
    let max = data.variables.len();
    check_size(data, 2.min(max))?;
    if max < 2 {
        return Ok(Vec::new());
    }
    let index = Index::new(data);
    let walk = Walk {
        index: &index,
        min_size: 2,
        max_size: max,
    };
    let pw = index.pos_words;
    let parts = walk.run(|| Tally {
        min_size: 2,
        counts: vec![(0, 0, vec![0; pw]); max - 1],
    });
    Ok((2..=max)
        .map(|size| {
            let mut point = SweepPoint {
                num_variables: size + 1,
                rule_count: 0,
                multi_positive_rules: 0,
                positives_covered: 0,
            };
            let mut union = vec![0u64; pw];
            for part in &parts {
                let (r, m, u) = &part.counts[size - 2];
                point.rule_count += r;
                point.multi_positive_rules += m;
                union.iter_mut().zip(u).for_each(|(a, b)| *a |= b);
            }
            point.positives_covered = count(&union);
            point
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct RuleSet {
    pub window_s: u32,
    pub num_variables: usize,
    pub rules: Vec<Rule>,
    pub total_positives_covered: usize,
}

impl RuleSet {
    /// Mines all rules with `num_variables - 1` items.
    pub fn mine(data: &LabeledDataset, num_variables: usize) -> Result<RuleSet> {
        let rules = mine_rules(data, num_variables.saturating_sub(1))?;
        let total_positives_covered = data
            .rows
            .iter()
            .filter(|r| r.v1 == Some(true))
            .filter(|r| rules.iter().any(|rule| rule.antecedent.matches(r)))
            .count();
        Ok(RuleSet {
            window_s: data.window_s,
            num_variables,
            rules,
            total_positives_covered,
        })
    }

    pub fn empty(window_s: u32) -> RuleSet {
        RuleSet {
            window_s,
            num_variables: 0,
            rules: Vec::new(),
            total_positives_covered: 0,
        }
    }

    pub fn summary(&self) -> SweepPoint {
        SweepPoint {
            num_variables: self.num_variables,
            rule_count: self.rules.len(),
            multi_positive_rules: self
                .rules
                .iter()
                .filter(|r| r.positives_covered >= 2)
                .count(),
            positives_covered: self.total_positives_covered,
        }
    }

    /// Indices of rules matched by `qv`.
    pub fn matching(&self, qv: &QuantizedVector) -> impl Iterator<Item = usize> + '_ {
        let packed = pack(&qv.bins);
        self.rules
            .iter()
            .enumerate()
            .filter(move |(_, r)| r.antecedent.matches_packed(packed))
            .map(|(i, _)| i)
    }
}

/// One fully materialized rule set per `num_variables`.
pub fn sweep_rulesets(data: &LabeledDataset) -> Result<Vec<RuleSet>> {
    let max = data.variables.len();
    check_size(data, 2.min(max))?;
    (3..=max + 1).map(|nv| RuleSet::mine(data, nv)).collect()
}

/// Picks the sweep entry to keep: maximum coverage first, then the highest
/// share of rules matching two or more positives, then fewer variables.
pub fn select_final(points: &[SweepPoint]) -> Result<SweepPoint> {
    let best_cover = points
        .iter()
        .filter(|p| p.rule_count > 0)
        .map(|p| p.positives_covered)
        .max()
        .ok_or(NeptuneError::EmptySweep)?;
    points
        .iter()
        .filter(|p| p.rule_count > 0 && p.positives_covered == best_cover)
        .min_by(|a, b| {
            // compare multi/rules exactly by cross-multiplying
            let lhs = b.multi_positive_rules as u128 * a.rule_count as u128;
            let rhs = a.multi_positive_rules as u128 * b.rule_count as u128;
            lhs.cmp(&rhs).then(a.num_variables.cmp(&b.num_variables))
        })
        .copied()
        .ok_or(NeptuneError::EmptySweep)
}

/// Sweep, select, and materialize the chosen rule set.
pub fn train_ruleset(data: &LabeledDataset) -> Result<(Vec<SweepPoint>, RuleSet)> {
    let points = sweep(data)?;
    let chosen = select_final(&points)?;
    let set = RuleSet::mine(data, chosen.num_variables)?;
    Ok((points, set))
}

pub fn apply_rules(rules: &RuleSet, qv: &QuantizedVector) -> bool {
    rules.matching(qv).next().is_some()
}

/// Serialized form of a rule set inside a model file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub(crate) struct RuleSetJson {
    num_variables: usize,
    total_positives_covered: usize,
    rules: Vec<Vec<Item>>,
    positives_covered: Vec<usize>,
}

impl RuleSet {
    pub(crate) fn to_json(&self) -> RuleSetJson {
        RuleSetJson {
            num_variables: self.num_variables,
            total_positives_covered: self.total_positives_covered,
            rules: self
                .rules
                .iter()
                .map(|r| r.antecedent.items().collect())
                .collect(),
            positives_covered: self.rules.iter().map(|r| r.positives_covered).collect(),
        }
    }

    pub(crate) fn from_json(window_s: u32, raw: RuleSetJson) -> Result<RuleSet> {
        if raw.positives_covered.len() != raw.rules.len() {
            return Err(NeptuneError::InvalidModel(
                "rules and positives_covered differ in length".into(),
            ));
        }
        let rules = raw
            .rules
            .iter()
            .zip(&raw.positives_covered)
            .map(|(items, &p)| {
                let antecedent = Antecedent::from_items(items)?;
                if antecedent.len() + 1 != raw.num_variables {
                    return Err(NeptuneError::InvalidModel(format!(
                        "rule {antecedent} does not use {} variables",
                        raw.num_variables - 1
                    )));
                }
                Ok(Rule {
                    antecedent,
                    positives_covered: p,
                    negatives_covered: 0,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RuleSet {
            window_s,
            num_variables: raw.num_variables,
            rules,
            total_positives_covered: raw.total_positives_covered,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: Variable = Variable::V2;
    const B: Variable = Variable::V3;

    fn row(a: u8, b: u8, label: bool) -> QuantizedVector {
        let mut bins = [1u8; NUM_VARIABLES];
        bins[A.index()] = a;
        bins[B.index()] = b;
        QuantizedVector {
            bins,
            v1: Some(label),
        }
    }

    fn two_var(rows: Vec<QuantizedVector>) -> LabeledDataset {
        LabeledDataset::with_variables(5, vec![A, B], rows).unwrap()
    }

    #[test]
    fn single_separating_rule() {
        let d = two_var(vec![row(1, 2, true), row(1, 1, false), row(2, 2, false)]);
        let rules = mine_rules(&d, 2).unwrap();
        assert_eq!(rules.len(), 1);
        assert_eq!(rules[0].antecedent.to_string(), "{V2=1, V3=2}");
        assert_eq!(rules[0].positives_covered, 1);
        assert!(mine_rules(&d, 1).unwrap().is_empty());
    }

    #[test]
    fn indistinguishable_rows() {
        let d = two_var(vec![row(3, 4, true), row(3, 4, false)]);
        assert!(mine_rules(&d, 1).unwrap().is_empty());
        assert!(mine_rules(&d, 2).unwrap().is_empty());
        assert!(matches!(select_final(&sweep(&d).unwrap()), Err(NeptuneError::EmptySweep)));
    }

    #[test]
    fn errors() {
        let d = two_var(vec![row(1, 1, false)]);
        assert!(matches!(mine_rules(&d, 1), Err(NeptuneError::NoPositives)));
        let d = two_var(vec![row(1, 1, true)]);
        assert!(matches!(
            mine_rules(&d, 3),
            Err(NeptuneError::BadAntecedentSize { size: 3, max: 2 })
        ));
        assert!(mine_rules(&d, 0).is_err());
    }

    #[test]
    fn no_negatives_means_every_positive_signature() {
        let d = two_var(vec![row(1, 2, true), row(1, 3, true)]);
        let rules = mine_rules(&d, 1).unwrap();
        let names: Vec<String> = rules.iter().map(|r| r.antecedent.to_string()).collect();
        assert_eq!(names, vec!["{V2=1}", "{V3=2}", "{V3=3}"]);
        assert_eq!(rules[0].positives_covered, 2);
    }

    fn point(nv: usize, rules: usize, multi: usize, cover: usize) -> SweepPoint {
        SweepPoint {
            num_variables: nv,
            rule_count: rules,
            multi_positive_rules: multi,
            positives_covered: cover,
        }
    }

    #[test]
    fn selection_rules() {
        let pts = [point(3, 10, 9, 3), point(4, 10, 4, 5), point(5, 10, 7, 5)];
        assert_eq!(select_final(&pts).unwrap().num_variables, 5);
        let tied = [point(6, 10, 5, 5), point(4, 20, 10, 5)];
        assert_eq!(select_final(&tied).unwrap().num_variables, 4);
        assert!(select_final(&[point(3, 0, 0, 0)]).is_err());
        assert!(select_final(&[]).is_err());
    }

    #[test]
    fn apply_semantics() {
        let empty = RuleSet::empty(5);
        assert!(!apply_rules(&empty, &row(1, 1, false)));
        let d = two_var(vec![row(1, 2, true), row(1, 1, false), row(2, 2, false)]);
        let set = RuleSet::mine(&d, 3).unwrap();
        assert!(apply_rules(&set, &row(1, 2, true)));
        assert!(!apply_rules(&set, &row(1, 1, false)));
        assert!(!apply_rules(&set, &row(2, 2, false)));
        assert_eq!(set.total_positives_covered, 1);
    }

    #[test]
    fn antecedent_packing() {
        let items = [
            Item { variable: Variable::V7_13, bin: 4 },
            Item { variable: Variable::V2, bin: 1 },
        ];
        let a = Antecedent::from_items(&items).unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(a.bin(Variable::V7_13), Some(4));
        assert_eq!(a.bin(Variable::V3), None);
        assert_eq!(a.items().next().unwrap().variable, Variable::V2);
        assert!(Antecedent::from_items(&[Item { variable: A, bin: 5 }]).is_err());
        assert!(Antecedent::from_items(&[items[1], items[1]]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let d = two_var(vec![row(1, 2, true), row(1, 3, true), row(2, 2, false)]);
        let set = RuleSet::mine(&d, 2).unwrap();
        let json = serde_json::to_string(&set.to_json()).unwrap();
        assert!(json.contains(r#""rules":[[{"var":"V2","bin":1}]"#), "{json}");
        let back = serde_json::from_str(&json).unwrap();
        assert_eq!(RuleSet::from_json(5, back).unwrap(), set);
    }
}
