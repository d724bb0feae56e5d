//! Per-turn score tables.
//!
//! Tab-separated, after optional `#` preamble lines: a `dialog_id`,
//! `turn_index`, `score` header, then one row per scored turn.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::weak::LabelRecord;

pub const SCORE_HEADER: [&str; 3] = ["dialog_id", "turn_index", "score"];

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate score row for dialog `{dialog_id}` turn {turn_index}")]
    Duplicate { dialog_id: String, turn_index: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub dialog_id: String,
    pub turn_index: u32,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreTable {
    pub rows: Vec<ScoreRow>,
}

impl ScoreTable {
    pub fn new(rows: Vec<ScoreRow>) -> Self {
        ScoreTable { rows }
    }

    /// Uses each label's `q` as the turn's score.
    pub fn from_labels(records: &[LabelRecord]) -> Self {
        ScoreTable::new(
            records
                .iter()
                .map(|r| ScoreRow {
                    dialog_id: r.dialog_id.clone(),
                    turn_index: r.turn_index,
                    score: r.label.q,
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Orders rows by (dialog_id, turn_index).
    pub fn sort(&mut self) {
        self.rows
            .sort_by(|a, b| a.dialog_id.cmp(&b.dialog_id).then(a.turn_index.cmp(&b.turn_index)));
    }

    /// Scores grouped by dialog, turns in index order.
    pub fn by_dialog(&self) -> BTreeMap<&str, Vec<(u32, f64)>> {
        let mut out: BTreeMap<&str, Vec<(u32, f64)>> = BTreeMap::new();
        for r in &self.rows {
            out.entry(r.dialog_id.as_str())
                .or_default()
                .push((r.turn_index, r.score));
        }
        for v in out.values_mut() {
            v.sort_by_key(|(i, _)| *i);
        }
        out
    }

    pub fn check_unique(&self) -> Result<(), ScoreError> {
        let mut seen = HashSet::with_capacity(self.rows.len());
        for r in &self.rows {
            if !seen.insert((r.dialog_id.as_str(), r.turn_index)) {
                return Err(ScoreError::Duplicate {
                    dialog_id: r.dialog_id.clone(),
                    turn_index: r.turn_index,
                });
            }
        }
        Ok(())
    }

    pub fn write_tsv<W: Write>(&self, mut w: W, preamble: &[String]) -> std::io::Result<()> {
        for line in preamble {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "{}", SCORE_HEADER.join("\t"))?;
        for r in &self.rows {
            writeln!(w, "{}\t{}\t{}", r.dialog_id, r.turn_index, r.score)?;
        }
        Ok(())
    }

    /// Parses a score TSV, rejecting duplicate (dialog_id, turn_index) rows.
    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self, ScoreError> {
        let mut rows = Vec::new();
        let mut header_seen = false;
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = n + 1;
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if !header_seen {
                if cols != SCORE_HEADER {
                    return Err(ScoreError::Parse {
                        line: lineno,
                        message: format!("expected header `{}`", SCORE_HEADER.join("\\t")),
                    });
                }
                header_seen = true;
                continue;
            }
            let parse_err = |message: String| ScoreError::Parse { line: lineno, message };
            if cols.len() != 3 {
                return Err(parse_err(format!("expected 3 columns, found {}", cols.len())));
            }
            let turn_index = cols[1]
                .parse()
                .map_err(|_| parse_err(format!("bad turn index {:?}", cols[1])))?;
            let score: f64 = cols[2]
                .parse()
                .map_err(|_| parse_err(format!("bad score {:?}", cols[2])))?;
            if !score.is_finite() {
                return Err(parse_err("non-finite score".into()));
            }
            rows.push(ScoreRow {
                dialog_id: cols[0].to_string(),
                turn_index,
                score,
            });
        }
        if !header_seen {
            return Err(ScoreError::Parse {
                line: 0,
                message: "missing header".into(),
            });
        }
        let table = ScoreTable::new(rows);
        table.check_unique()?;
        Ok(table)
    }
}
