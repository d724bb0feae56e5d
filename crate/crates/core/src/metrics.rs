//! Correlation, inter-annotator agreement and label resolution.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 paired observations, got {0}")]
    TooFewObservations(usize),
    #[error("correlation undefined: {0} input is constant")]
    ConstantInput(&'static str),
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("no pairable ratings: need at least one item with two or more ratings")]
    NoPairableValues,
    #[error("no rater labels")]
    NoLabels,
    #[error("unresolved tie among labels {labels:?}{}", item.as_ref().map(|i| format!(" for {i}")).unwrap_or_default())]
    UnresolvedTie { labels: Vec<i64>, item: Option<String> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub pearson: f64,
    pub spearman: f64,
    pub n: usize,
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<(), MetricsError> {
    if x.len() != y.len() {
        return Err(MetricsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(MetricsError::TooFewObservations(x.len()));
    }
    if let Some(i) = x.iter().chain(y).position(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite(i % x.len()));
    }
    Ok(())
}

/// Sample Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, MetricsError> {
    check_pair(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(MetricsError::ConstantInput("first"));
    }
    if syy == 0.0 {
        return Err(MetricsError::ConstantInput("second"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the average of the ranks they span.
pub fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Spearman rank correlation: Pearson over fractional ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, MetricsError> {
    check_pair(x, y)?;
    pearson(&fractional_ranks(x), &fractional_ranks(y))
}

pub fn correlate(x: &[f64], y: &[f64]) -> Result<CorrelationResult, MetricsError> {
    Ok(CorrelationResult {
        pearson: pearson(x, y)?,
        spearman: spearman(x, y)?,
        n: x.len(),
    })
}

/// Measurement level, which selects Krippendorff's distance metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Nominal,
    Ordinal,
    Interval,
}

impl Level {
    pub fn name(self) -> &'static str {
        match self {
            Level::Nominal => "nominal",
            Level::Ordinal => "ordinal",
            Level::Interval => "interval",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementResult {
    pub alpha: f64,
    /// Items with at least two ratings.
    pub n_items: usize,
    /// Widest row of the ratings matrix.
    pub n_raters: usize,
    pub level: Level,
}

/// Krippendorff's alpha over an items x raters matrix; `None` marks a missing
/// rating. Items with fewer than two ratings are not pairable and are dropped.
pub fn krippendorff_alpha(ratings: &[Vec<Option<f64>>], level: Level) -> Result<AgreementResult, MetricsError> {
    let units: Vec<Vec<f64>> = ratings
        .iter()
        .map(|row| row.iter().flatten().copied().collect::<Vec<_>>())
        .filter(|vals| vals.len() >= 2)
        .collect();
    if units.is_empty() {
        return Err(MetricsError::NoPairableValues);
    }
    if let Some(i) = units.iter().flatten().position(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite(i));
    }

    let mut categories: Vec<f64> = units.iter().flatten().copied().collect();
    categories.sort_by(f64::total_cmp);
    categories.dedup();
    let k = categories.len();
    let idx = |v: f64| categories.binary_search_by(|c| c.total_cmp(&v)).unwrap();

    // Coincidence matrix: each ordered pair within a unit contributes 1/(m_u - 1).
    let mut coincidence = vec![vec![0.0; k]; k];
    for unit in &units {
        let w = 1.0 / (unit.len() - 1) as f64;
        for (a, &va) in unit.iter().enumerate() {
            for (b, &vb) in unit.iter().enumerate() {
                if a != b {
                    coincidence[idx(va)][idx(vb)] += w;
                }
            }
        }
    }
    let marginals: Vec<f64> = coincidence.iter().map(|row| row.iter().sum()).collect();
    let n: f64 = marginals.iter().sum();

    let delta = |c: usize, d: usize| -> f64 {
        match level {
            Level::Nominal => {
                if c == d {
                    0.0
                } else {
                    1.0
                }
            }
            Level::Interval => (categories[c] - categories[d]).powi(2),
            Level::Ordinal => {
                let (lo, hi) = if c <= d { (c, d) } else { (d, c) };
                let span: f64 = marginals[lo..=hi].iter().sum();
                (span - (marginals[lo] + marginals[hi]) / 2.0).powi(2)
            }
        }
    };

    let (mut observed, mut expected) = (0.0, 0.0);
    for c in 0..k {
        for d in 0..k {
            let dist = delta(c, d);
            observed += coincidence[c][d] * dist;
            expected += marginals[c] * marginals[d] * dist;
        }
    }
    // A single category everywhere leaves nothing to disagree on.
    let alpha = if expected == 0.0 {
        1.0
    } else {
        1.0 - (n - 1.0) * observed / expected
    };
    Ok(AgreementResult {
        alpha,
        n_items: units.len(),
        n_raters: ratings.iter().map(Vec::len).max().unwrap_or(0),
        level,
    })
}

/// Modal label; ties go to the adjudicator.
pub fn majority_vote(labels: &[i64], adjudicator: Option<i64>) -> Result<i64, MetricsError> {
    if labels.is_empty() {
        return Err(MetricsError::NoLabels);
    }
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_default() += 1;
    }
    let top = *counts.values().max().unwrap();
    let mut modal = counts.iter().filter(|(_, &c)| c == top).map(|(&l, _)| l);
    let first = modal.next().unwrap();
    if modal.next().is_none() {
        return Ok(first);
    }
    adjudicator.ok_or_else(|| {
        let mut sorted = labels.to_vec();
        sorted.sort_unstable();
        MetricsError::UnresolvedTie {
            labels: sorted,
            item: None,
        }
    })
}
