//! Metric consistency: how well a metric's ranking of fusion methods agrees
//! with a reference ranking.
//!
//! With 1-based ranks `R^M`, `R^Ref` over `L` methods:
//!
//! ```text
//! dR_i = |R^M_i - R^Ref_i|
//! W_i  = (alpha^R^M_i + beta^R^Ref_i) / 2
//! MC   = exp(-s * sum_i W_i dR_i)
//! ```
//!
//! Top-ranked methods carry the largest weights, so disagreements at the top
//! cost more than at the bottom.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.9;
pub const DEFAULT_BETA: f64 = 0.9;
pub const DEFAULT_S: f64 = 0.0125;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyParams {
    pub alpha: f64,
    pub beta: f64,
    pub s: f64,
}

impl ConsistencyParams {
    pub fn new(alpha: f64, beta: f64, s: f64) -> Result<Self> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !open_unit(alpha) || !open_unit(beta) {
            return Err(Error::InvalidArgument(format!(
                "alpha and beta must lie in (0, 1), got {alpha}, {beta}"
            )));
        }
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidArgument(format!("s must be > 0, got {s}")));
        }
        Ok(ConsistencyParams { alpha, beta, s })
    }
}

impl Default for ConsistencyParams {
    fn default() -> Self {
        ConsistencyParams {
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            s: DEFAULT_S,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ranking {
    /// 1-based rank per method, in input order.
    pub ranks: Vec<usize>,
    /// At least two methods had equal scores.
    pub tied: bool,
}

/// Ranks methods by score, best first. Equal scores are ordered by ascending
/// method id.
pub fn rank<S: AsRef<str>>(methods: &[S], scores: &[f64], higher_is_better: bool) -> Result<Ranking> {
    if methods.len() != scores.len() {
        return Err(Error::LengthMismatch(methods.len(), scores.len()));
    }
    if scores.len() < 2 {
        return Err(Error::TooFewMethods(scores.len()));
    }
    if let Some(i) = scores.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteScore(i));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        let by_score = if higher_is_better {
            scores[b].total_cmp(&scores[a])
        } else {
            scores[a].total_cmp(&scores[b])
        };
        by_score.then_with(|| methods[a].as_ref().cmp(methods[b].as_ref()))
    });
    let mut ranks = vec![0; scores.len()];
    for (pos, &i) in order.iter().enumerate() {
        ranks[i] = pos + 1;
    }
    let tied = order.windows(2).any(|w| scores[w[0]] == scores[w[1]]);
    Ok(Ranking { ranks, tied })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McTerm {
    pub rank_metric: usize,
    pub rank_reference: usize,
    pub delta_rank: usize,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub mc: f64,
    /// `sum_i W_i dR_i`, accumulated in method order.
    pub weighted_sum: f64,
    pub terms: Vec<McTerm>,
}

impl McResult {
    /// Recomputes the score from the per-method breakdown.
    pub fn recompute(terms: &[McTerm], s: f64) -> f64 {
        (-s * weighted_sum(terms)).exp()
    }
}

fn weighted_sum(terms: &[McTerm]) -> f64 {
    terms.iter().map(|t| t.weight * t.delta_rank as f64).sum()
}

fn check_permutation(r: &[usize]) -> Result<()> {
    let mut seen = vec![false; r.len()];
    for &v in r {
        if v == 0 || v > r.len() || seen[v - 1] {
            return Err(Error::NotAPermutation(r.len()));
        }
        seen[v - 1] = true;
    }
    Ok(())
}

pub fn mc(ranks_m: &[usize], ranks_ref: &[usize], p: &ConsistencyParams) -> Result<McResult> {
    if ranks_m.len() != ranks_ref.len() {
        return Err(Error::LengthMismatch(ranks_m.len(), ranks_ref.len()));
    }
    if ranks_m.len() < 2 {
        return Err(Error::TooFewMethods(ranks_m.len()));
    }
    check_permutation(ranks_m)?;
    check_permutation(ranks_ref)?;
    let terms: Vec<McTerm> = ranks_m
        .iter()
        .zip(ranks_ref)
        .map(|(&rm, &rr)| McTerm {
            rank_metric: rm,
            rank_reference: rr,
            delta_rank: rm.abs_diff(rr),
            weight: 0.5 * (p.alpha.powi(rm as i32) + p.beta.powi(rr as i32)),
        })
        .collect();
    let weighted_sum = weighted_sum(&terms);
    Ok(McResult {
        mc: (-p.s * weighted_sum).exp(),
        weighted_sum,
        terms,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Metric,
    Reference,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub kind: ColumnKind,
    pub higher_is_better: bool,
    pub values: Vec<f64>,
}

/// Per-method scores, one column per metric or reference.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreTable {
    methods: Vec<String>,
    columns: BTreeMap<String, Column>,
}

impl ScoreTable {
    pub fn new(methods: Vec<String>) -> Result<Self> {
        if methods.len() < 2 {
            return Err(Error::TooFewMethods(methods.len()));
        }
        let mut sorted = methods.clone();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(format!("duplicate method {:?}", w[0])));
        }
        Ok(ScoreTable {
            methods,
            columns: BTreeMap::new(),
        })
    }

    pub fn add_column(&mut self, name: &str, column: Column) -> Result<()> {
        if column.values.len() != self.methods.len() {
            return Err(Error::LengthMismatch(self.methods.len(), column.values.len()));
        }
        if let Some(i) = column.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteScore(i));
        }
        self.columns.insert(name.to_string(), column);
        Ok(())
    }

    pub fn methods(&self) -> &[String] {
        &self.methods
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.columns.get(name).ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn column_names(&self, kind: ColumnKind) -> Vec<String> {
        self.columns.iter().filter(|(_, c)| c.kind == kind).map(|(n, _)| n.clone()).collect()
    }

    pub fn ranking(&self, name: &str) -> Result<Ranking> {
        let c = self.column(name)?;
        rank(&self.methods, &c.values, c.higher_is_better)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McCell {
    pub metric: String,
    pub reference: String,
    pub result: McResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub methods: Vec<String>,
    pub params: ConsistencyParams,
    /// Metric-major: all references of the first metric, then the next.
    pub cells: Vec<McCell>,
}

impl McReport {
    pub fn get(&self, metric: &str, reference: &str) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.metric == metric && c.reference == reference)
            .map(|c| c.result.mc)
    }
}

/// MC for every (metric column, reference column) pair.
pub fn mc_report(
    table: &ScoreTable,
    metric_cols: &[String],
    reference_cols: &[String],
    p: &ConsistencyParams,
) -> Result<McReport> {
    let mut ranks = BTreeMap::new();
    for name in metric_cols.iter().chain(reference_cols) {
        if !ranks.contains_key(name) {
            ranks.insert(name.clone(), table.ranking(name)?.ranks);
        }
    }
    let mut cells = Vec::with_capacity(metric_cols.len() * reference_cols.len());
    for m in metric_cols {
        for r in reference_cols {
            cells.push(McCell {
                metric: m.clone(),
                reference: r.clone(),
                result: mc(&ranks[m], &ranks[r], p)?,
            });
        }
    }
    Ok(McReport {
        methods: table.methods().to_vec(),
        params: *p,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("m{i:02}")).collect()
    }

    #[test]
    fn ranks_best_first() {
        let r = rank(&names(3), &[0.9, 0.5, 0.7], true).unwrap();
        assert_eq!(r.ranks, vec![1, 3, 2]);
        assert!(!r.tied);
        assert_eq!(rank(&names(3), &[0.9, 0.5, 0.7], false).unwrap().ranks, vec![3, 1, 2]);
    }

    #[test]
    fn ties_follow_method_id() {
        let r = rank(&["c", "a", "b"], &[1.0, 1.0, 1.0], true).unwrap();
        assert_eq!(r.ranks, vec![3, 1, 2]);
        assert!(r.tied);
    }

    #[test]
    fn rank_errors() {
        assert!(matches!(rank(&["a"], &[1.0], true), Err(Error::TooFewMethods(1))));
        assert!(matches!(rank(&["a", "b"], &[1.0, f64::NAN], true), Err(Error::NonFiniteScore(1))));
    }

    #[test]
    fn hand_case() {
        let p = ConsistencyParams::new(0.9, 0.9, 0.1).unwrap();
        let r = mc(&[1, 2, 3], &[2, 1, 3], &p).unwrap();
        assert!((r.terms[0].weight - 0.855).abs() < 1e-12);
        assert!((r.weighted_sum - 1.71).abs() < 1e-12);
        assert!((r.mc - (-0.171f64).exp()).abs() < 1e-12);
        assert!((r.mc - 0.8428).abs() < 1e-4);
        assert_eq!(McResult::recompute(&r.terms, p.s), r.mc);
    }

    #[test]
    fn identical_rankings_score_one() {
        let p = ConsistencyParams::default();
        assert_eq!(mc(&[3, 1, 2, 4], &[3, 1, 2, 4], &p).unwrap().mc, 1.0);
    }

    #[test]
    fn mc_errors() {
        let p = ConsistencyParams::default();
        assert!(matches!(mc(&[1, 2], &[1, 2, 3], &p), Err(Error::LengthMismatch(2, 3))));
        assert!(matches!(mc(&[1, 1, 3], &[1, 2, 3], &p), Err(Error::NotAPermutation(3))));
        assert!(matches!(mc(&[0, 1, 2], &[1, 2, 3], &p), Err(Error::NotAPermutation(3))));
        assert!(ConsistencyParams::new(1.0, 0.9, 0.1).is_err());
        assert!(ConsistencyParams::new(0.9, 0.9, 0.0).is_err());
    }

    #[test]
    fn top_errors_cost_more() {
        let p = ConsistencyParams::default();
        let base: Vec<usize> = (1..=6).collect();
        let top = mc(&[2, 1, 3, 4, 5, 6], &base, &p).unwrap().mc;
        let bottom = mc(&[1, 2, 3, 4, 6, 5], &base, &p).unwrap().mc;
        assert!(top < bottom);
    }

    #[test]
    fn report_cells_and_unknown_columns() {
        let mut t = ScoreTable::new(names(4)).unwrap();
        let col = |kind, values: Vec<f64>| Column {
            kind,
            higher_is_better: true,
            values,
        };
        t.add_column("psnr", col(ColumnKind::Metric, vec![30.0, 20.0, 25.0, 10.0])).unwrap();
        t.add_column("ref", col(ColumnKind::Reference, vec![30.0, 20.0, 25.0, 10.0])).unwrap();
        t.add_column("ref2", col(ColumnKind::Reference, vec![1.0, 2.0, 3.0, 4.0])).unwrap();
        let rep = mc_report(&t, &["psnr".into()], &["ref".into(), "ref2".into()], &ConsistencyParams::default())
            .unwrap();
        assert_eq!(rep.get("psnr", "ref"), Some(1.0));
        assert!(rep.get("psnr", "ref2").unwrap() < 1.0);
        let err = mc_report(&t, &["nope".into()], &["ref".into()], &ConsistencyParams::default());
        assert!(matches!(err, Err(Error::UnknownColumn(c)) if c == "nope"));
        assert!(t.add_column("bad", col(ColumnKind::Metric, vec![1.0])).is_err());
    }
}
