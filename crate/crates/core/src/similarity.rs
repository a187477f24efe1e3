//! Similarity between the pattern stores of two architectures.
//!
//! With P₁, P₂ unique patterns, E₁, E₂ expressions, p common patterns and
//! e₁′, e₂′ the expressions of each side whose pattern is common:
//!
//! * pattern similarity    = 2p / (P₁ + P₂) × 100
//! * expression similarity = (e₁′ + e₂′) / (E₁ + E₂) × 100
//! * target coverage       = e_t′ / E_t × 100 (not symmetric)

use serde::Serialize;
use thiserror::Error;

use crate::analysis::MdAnalysis;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum SimilarityError {
    #[error("both sides are empty")]
    BothEmpty,
    #[error("target has no expressions")]
    EmptyTarget,
}

pub fn pattern_similarity_pct(p1: u64, p2: u64, common: u64) -> Result<f64, SimilarityError> {
    if p1 + p2 == 0 {
        return Err(SimilarityError::BothEmpty);
    }
    Ok(200.0 * common as f64 / (p1 + p2) as f64)
}

pub fn expression_similarity_pct(covered1: u64, covered2: u64, e1: u64, e2: u64) -> Result<f64, SimilarityError> {
    if e1 + e2 == 0 {
        return Err(SimilarityError::BothEmpty);
    }
    Ok(100.0 * (covered1 + covered2) as f64 / (e1 + e2) as f64)
}

pub fn coverage_pct(covered: u64, target_total: u64) -> Result<f64, SimilarityError> {
    if target_total == 0 {
        return Err(SimilarityError::EmptyTarget);
    }
    Ok(100.0 * covered as f64 / target_total as f64)
}

/// Rounds a percentage to two decimals.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Pairs of pattern ids `(id in a, id in b)` whose canonical patterns are
/// equal, ordered by height and then by id in `a`.
pub fn common_patterns(a: &MdAnalysis, b: &MdAnalysis) -> Vec<(u64, u64)> {
    a.store
        .iter()
        .filter_map(|entry| b.store.lookup(&entry.pattern).map(|other| (entry.id, other.id)))
        .collect()
}

fn covered(a: &MdAnalysis, ids: impl Iterator<Item = u64>) -> u64 {
    ids.map(|id| a.store.get(id).map_or(0, |e| e.count)).sum()
}

pub fn pattern_similarity(a: &MdAnalysis, b: &MdAnalysis) -> Result<f64, SimilarityError> {
    pattern_similarity_pct(a.pattern_count() as u64, b.pattern_count() as u64, common_patterns(a, b).len() as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairReport {
    pub common_pattern_count: u64,
    pub pattern_similarity_pct: f64,
    pub covered_expr_a: u64,
    pub covered_expr_b: u64,
    pub expression_similarity_pct: f64,
}

pub fn expression_similarity(a: &MdAnalysis, b: &MdAnalysis) -> Result<PairReport, SimilarityError> {
    let common = common_patterns(a, b);
    let covered_expr_a = covered(a, common.iter().map(|c| c.0));
    let covered_expr_b = covered(b, common.iter().map(|c| c.1));
    let expression_similarity_pct = expression_similarity_pct(covered_expr_a, covered_expr_b, a.expr_count(), b.expr_count())?;
    Ok(PairReport {
        common_pattern_count: common.len() as u64,
        pattern_similarity_pct: pattern_similarity_pct(a.pattern_count() as u64, b.pattern_count() as u64, common.len() as u64)?,
        covered_expr_a,
        covered_expr_b,
        expression_similarity_pct,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Coverage {
    /// Target expressions whose pattern also occurs in the source.
    pub covered: u64,
    pub target_total: u64,
    pub pct: f64,
}

/// How much of `target` can be written from the patterns of `source`.
pub fn target_coverage(source: &MdAnalysis, target: &MdAnalysis) -> Result<Coverage, SimilarityError> {
    let covered = covered(target, common_patterns(source, target).into_iter().map(|c| c.1));
    Ok(Coverage {
        covered,
        target_total: target.expr_count(),
        pct: coverage_pct(covered, target.expr_count())?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    /// Common patterns, upper triangle.
    Pattern,
    /// Expressions covered by common patterns, upper triangle.
    Expression,
    /// Target expressions covered by source patterns; rows are sources.
    Coverage,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub row: String,
    pub col: String,
    pub count: u64,
    /// `None` when the percentage is undefined (empty inputs).
    pub pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityMatrix {
    pub metric: Metric,
    pub archs: Vec<String>,
    pub cells: Vec<Cell>,
}

pub fn pair_cell(a: &MdAnalysis, b: &MdAnalysis, metric: Metric) -> Cell {
    let (count, pct) = match metric {
        Metric::Pattern => {
            let p = common_patterns(a, b).len() as u64;
            (p, pattern_similarity_pct(a.pattern_count() as u64, b.pattern_count() as u64, p).ok())
        }
        Metric::Expression => match expression_similarity(a, b) {
            Ok(r) => (r.covered_expr_a + r.covered_expr_b, Some(r.expression_similarity_pct)),
            Err(_) => (0, None),
        },
        Metric::Coverage => match target_coverage(a, b) {
            Ok(c) => (c.covered, Some(c.pct)),
            Err(_) => (0, None),
        },
    };
    Cell {
        row: a.arch_name.clone(),
        col: b.arch_name.clone(),
        count,
        pct,
    }
}

/// All-pairs report: upper triangle for the symmetric metrics, every
/// ordered off-diagonal pair for coverage.
pub fn similarity_matrix(analyses: &[MdAnalysis], metric: Metric) -> SimilarityMatrix {
    let n = analyses.len();
    let mut cells = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let wanted = match metric {
                Metric::Coverage => i != j,
                _ => i < j,
            };
            if wanted {
                cells.push(pair_cell(&analyses[i], &analyses[j], metric));
            }
        }
    }
    SimilarityMatrix {
        metric,
        archs: analyses.iter().map(|a| a.arch_name.clone()).collect(),
        cells,
    }
}
