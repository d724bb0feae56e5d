//! Turn scores to dialog scores.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scores::ScoreTable;

#[derive(Debug, Error, PartialEq)]
pub enum AggregateError {
    #[error("nothing to aggregate")]
    Empty,
    #[error("non-finite turn score")]
    NonFinite,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogScore {
    pub dialog_id: String,
    pub value: f64,
    pub n_turns: usize,
}

/// A rule for folding a dialog's turn scores into one value.
pub trait Aggregator: Send + Sync {
    fn name(&self) -> &str;

    fn aggregate(&self, turn_scores: &[f64]) -> Result<f64, AggregateError>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Mean;

impl Aggregator for Mean {
    fn name(&self) -> &str {
        "mean"
    }

    fn aggregate(&self, turn_scores: &[f64]) -> Result<f64, AggregateError> {
        aggregate_mean(turn_scores)
    }
}

pub fn aggregate_mean(turn_scores: &[f64]) -> Result<f64, AggregateError> {
    if turn_scores.is_empty() {
        return Err(AggregateError::Empty);
    }
    if turn_scores.iter().any(|s| !s.is_finite()) {
        return Err(AggregateError::NonFinite);
    }
    let (min, max) = turn_scores
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
            (lo.min(s), hi.max(s))
        });
    let mean = turn_scores.iter().sum::<f64>() / turn_scores.len() as f64;
    // rounding in the sum can nudge the mean just outside the observed range
    Ok(mean.clamp(min, max))
}

/// One mean-aggregated score per dialog in the table, sorted by dialog id.
pub fn aggregate_corpus(table: &ScoreTable) -> Result<Vec<DialogScore>, AggregateError> {
    aggregate_corpus_with(table, &Mean)
}

pub fn aggregate_corpus_with(
    table: &ScoreTable,
    aggregator: &dyn Aggregator,
) -> Result<Vec<DialogScore>, AggregateError> {
    if table.is_empty() {
        return Err(AggregateError::Empty);
    }
    table
        .by_dialog()
        .into_iter()
        .map(|(id, turns)| {
            let scores: Vec<f64> = turns.iter().map(|(_, s)| *s).collect();
            Ok(DialogScore {
                dialog_id: id.to_string(),
                value: aggregator.aggregate(&scores)?,
                n_turns: scores.len(),
            })
        })
        .collect()
}

pub const DIALOG_SCORE_HEADER: [&str; 3] = ["dialog_id", "score", "n_turns"];

pub fn write_dialog_scores<W: Write>(mut w: W, scores: &[DialogScore], preamble: &[String]) -> std::io::Result<()> {
    for line in preamble {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "{}", DIALOG_SCORE_HEADER.join("\t"))?;
    for s in scores {
        writeln!(w, "{}\t{}\t{}", s.dialog_id, s.value, s.n_turns)?;
    }
    Ok(())
}

pub fn read_dialog_scores<R: BufRead>(reader: R) -> Result<Vec<DialogScore>, AggregateError> {
    let mut out = Vec::new();
    let mut header = false;
    for (n, line) in reader.lines().enumerate() {
        let err = |message: String| AggregateError::Parse { line: n + 1, message };
        let line = line.map_err(|e| err(e.to_string()))?;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if !header {
            if cols != DIALOG_SCORE_HEADER {
                return Err(err("expected dialog score header".into()));
            }
            header = true;
            continue;
        }
        if cols.len() != 3 {
            return Err(err(format!("expected 3 columns, found {}", cols.len())));
        }
        out.push(DialogScore {
            dialog_id: cols[0].to_string(),
            value: cols[1].parse().map_err(|_| err(format!("bad score {:?}", cols[1])))?,
            n_turns: cols[2].parse().map_err(|_| err(format!("bad n_turns {:?}", cols[2])))?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scores::ScoreRow;
    use proptest::prelude::*;

    #[test]
    fn mean_examples() {
        assert_eq!(aggregate_mean(&[1.0, 1.0, 1.0]), Ok(1.0));
        assert_eq!(aggregate_mean(&[0.0, 1.0]), Ok(0.5));
        // (0.2 + 0.4 + 0.9) / 3 = 1.5 / 3
        assert!((aggregate_mean(&[0.2, 0.4, 0.9]).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(aggregate_mean(&[]), Err(AggregateError::Empty));
    }

    fn row(id: &str, i: u32, s: f64) -> ScoreRow {
        ScoreRow {
            dialog_id: id.into(),
            turn_index: i,
            score: s,
        }
    }

    #[test]
    fn corpus() {
        let table = ScoreTable::new(vec![
            row("a", 1, 1.0),
            row("b", 1, 1.0),
            row("a", 2, 0.0),
            row("b", 2, 1.0),
            row("c", 4, 0.3),
        ]);
        let out = aggregate_corpus(&table).unwrap();
        let got: Vec<(&str, f64, usize)> = out.iter().map(|d| (d.dialog_id.as_str(), d.value, d.n_turns)).collect();
        assert_eq!(got, vec![("a", 0.5, 2), ("b", 1.0, 2), ("c", 0.3, 1)]);

        let mut rev = table.clone();
        rev.rows.reverse();
        assert_eq!(aggregate_corpus(&rev).unwrap(), out);
        assert_eq!(aggregate_corpus(&ScoreTable::default()), Err(AggregateError::Empty));

        let mut buf = Vec::new();
        write_dialog_scores(&mut buf, &out, &["seed=1".into()]).unwrap();
        assert_eq!(read_dialog_scores(buf.as_slice()).unwrap(), out);
    }

    proptest! {
        #[test]
        fn mean_invariants(mut xs in proptest::collection::vec(-10.0f64..10.0, 1..40)) {
            let m = aggregate_mean(&xs).unwrap();
            let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(lo <= m && m <= hi);
            xs.reverse();
            prop_assert!((aggregate_mean(&xs).unwrap() - m).abs() < 1e-12);
            xs.push(m);
            prop_assert!((aggregate_mean(&xs).unwrap() - m).abs() < 1e-12);
        }
    }
}
