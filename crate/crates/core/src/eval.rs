//! Correlating turn and dialog scores with human judgments.
//!
//! Any [`ScoreTable`] can be evaluated: model predictions, an external
//! baseline's score file, or weak labels (e.g. next-user sentiment) treated as
//! scores.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::aggregate::{aggregate_corpus, AggregateError, DialogScore};
use crate::dialog::Dialog;
use crate::metrics::{correlate, CorrelationResult, MetricsError};
use crate::scores::{ScoreError, ScoreTable};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{what}: need at least 2 paired observations, found {n}")]
    TooFewPairs { what: String, n: usize },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Scores(#[from] ScoreError),
    #[error(transparent)]
    Aggregate(#[from] AggregateError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// How the rows of a score table joined against the corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Coverage {
    /// Rows in the score table.
    pub rows: usize,
    /// Rows paired with a 3P turn label.
    pub scored: usize,
    /// Rows whose turn exists but carries no label.
    pub unlabeled: usize,
    /// Rows naming a dialog or turn absent from the corpus.
    pub unjoined: usize,
    /// Corpus turns with no score row.
    pub missing: usize,
}

impl Coverage {
    /// Rows that did not contribute a pair.
    pub fn skipped(&self) -> usize {
        self.unlabeled + self.unjoined
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TurnLevelEval {
    pub correlation: CorrelationResult,
    pub coverage: Coverage,
}

/// Pairs each score row with the 3P label of the same (dialog_id, turn).
pub fn join_turn_labels(table: &ScoreTable, dialogs: &[Dialog]) -> (Vec<f64>, Vec<f64>, Coverage) {
    let mut labels: HashMap<(&str, u32), Option<i64>> = HashMap::new();
    for d in dialogs {
        for t in &d.turns {
            labels.insert((d.dialog_id.as_str(), t.index), t.turn_quality_3p);
        }
    }
    let mut cov = Coverage {
        rows: table.len(),
        ..Coverage::default()
    };
    let mut seen = HashSet::with_capacity(table.len());
    let (mut scores, mut targets) = (Vec::new(), Vec::new());
    for row in &table.rows {
        let key = (row.dialog_id.as_str(), row.turn_index);
        match labels.get(&key) {
            None => cov.unjoined += 1,
            Some(None) => {
                seen.insert(key);
                cov.unlabeled += 1;
            }
            Some(Some(label)) => {
                seen.insert(key);
                cov.scored += 1;
                scores.push(row.score);
                targets.push(*label as f64);
            }
        }
    }
    cov.missing = labels.len() - seen.len();
    (scores, targets, cov)
}

pub fn evaluate_turn_level(table: &ScoreTable, dialogs: &[Dialog]) -> Result<TurnLevelEval, EvalError> {
    let (scores, targets, coverage) = join_turn_labels(table, dialogs);
    if scores.len() < 2 {
        return Err(EvalError::TooFewPairs {
            what: "turn-level evaluation".into(),
            n: scores.len(),
        });
    }
    Ok(TurnLevelEval {
        correlation: correlate(&scores, &targets)?,
        coverage,
    })
}

/// Dialog-level human judgment to correlate against.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DialogTarget {
    Rating1p,
    Rating3p,
    /// A numeric field among the dialog's extra annotations; dots descend
    /// into nested objects (`dstc9.overall`).
    Extra(String),
}

impl DialogTarget {
    pub fn name(&self) -> &str {
        match self {
            DialogTarget::Rating1p => "rating_1p",
            DialogTarget::Rating3p => "rating_3p",
            DialogTarget::Extra(k) => k,
        }
    }

    pub fn value(&self, dialog: &Dialog) -> Option<f64> {
        match self {
            DialogTarget::Rating1p => dialog.rating_1p,
            DialogTarget::Rating3p => dialog.rating_3p,
            DialogTarget::Extra(key) => {
                if let Some(v) = dialog.extras.get(key) {
                    return v.as_f64();
                }
                let mut parts = key.split('.');
                let mut cur: &Value = dialog.extras.get(parts.next()?)?;
                for p in parts {
                    cur = cur.get(p)?;
                }
                cur.as_f64()
            }
        }
    }
}

pub fn evaluate_dialog_level(
    dialog_scores: &[DialogScore],
    dialogs: &[Dialog],
    target: &DialogTarget,
) -> Result<CorrelationResult, EvalError> {
    let by_id: HashMap<&str, &Dialog> = dialogs.iter().map(|d| (d.dialog_id.as_str(), d)).collect();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for s in dialog_scores {
        if let Some(y) = by_id.get(s.dialog_id.as_str()).and_then(|d| target.value(d)) {
            xs.push(s.value);
            ys.push(y);
        }
    }
    if xs.len() < 2 {
        return Err(EvalError::TooFewPairs {
            what: format!("dialog-level evaluation against {}", target.name()),
            n: xs.len(),
        });
    }
    Ok(correlate(&xs, &ys)?)
}

/// Reads a baseline's score TSV; duplicate rows are an error.
pub fn ingest_external_scores(path: impl AsRef<Path>) -> Result<ScoreTable, EvalError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(ScoreTable::read_tsv(BufReader::new(file))?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub model_id: String,
    pub turn_correlation: Option<CorrelationResult>,
    pub dialog_correlation_3p: Option<CorrelationResult>,
    pub dialog_correlation_1p: Option<CorrelationResult>,
    pub coverage: Coverage,
}

fn optional(result: Result<CorrelationResult, EvalError>, what: &str, model_id: &str) -> Option<CorrelationResult> {
    match result {
        Ok(c) => Some(c),
        Err(e) => {
            log::info!("{model_id}: no {what} correlation: {e}");
            None
        }
    }
}

/// Turn-level correlation against 3P turn quality, then mean-aggregated
/// dialog scores against 3P and 1P ratings. Correlations that cannot be
/// computed (too few pairs, constant input) are left empty.
pub fn build_report(
    dataset: &str,
    model_id: &str,
    table: &ScoreTable,
    dialogs: &[Dialog],
) -> Result<EvalReport, EvalError> {
    table.check_unique()?;
    let (_, _, coverage) = join_turn_labels(table, dialogs);
    let turn = optional(
        evaluate_turn_level(table, dialogs).map(|t| t.correlation),
        "turn-level",
        model_id,
    );
    let dialog_scores = aggregate_corpus(table)?;
    let d3 = optional(
        evaluate_dialog_level(&dialog_scores, dialogs, &DialogTarget::Rating3p),
        "3P dialog",
        model_id,
    );
    let d1 = optional(
        evaluate_dialog_level(&dialog_scores, dialogs, &DialogTarget::Rating1p),
        "1P dialog",
        model_id,
    );
    Ok(EvalReport {
        dataset: dataset.to_string(),
        model_id: model_id.to_string(),
        turn_correlation: turn,
        dialog_correlation_3p: d3,
        dialog_correlation_1p: d1,
        coverage,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Tsv,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tsv" => Ok(ReportFormat::Tsv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(format!("unknown report format `{other}`")),
        }
    }
}

pub const REPORT_COLUMNS: [&str; 11] = [
    "model",
    "dataset",
    "turn_pearson",
    "turn_spearman",
    "turn_n",
    "dialog_3p_pearson",
    "dialog_3p_spearman",
    "dialog_3p_n",
    "dialog_1p_pearson",
    "dialog_1p_spearman",
    "dialog_1p_n",
];

fn cells(report: &EvalReport) -> Vec<String> {
    let mut out = vec![report.model_id.clone(), report.dataset.clone()];
    for c in [
        &report.turn_correlation,
        &report.dialog_correlation_3p,
        &report.dialog_correlation_1p,
    ] {
        match c {
            Some(c) => {
                out.push(format!("{:.4}", c.pearson));
                out.push(format!("{:.4}", c.spearman));
                out.push(c.n.to_string());
            }
            None => out.extend(std::iter::repeat_n("-".to_string(), 3)),
        }
    }
    out
}

/// One row per report, in input order.
pub fn render_report(reports: &[EvalReport], format: ReportFormat) -> String {
    let mut s = String::new();
    match format {
        ReportFormat::Tsv => {
            let _ = writeln!(s, "{}", REPORT_COLUMNS.join("\t"));
            for r in reports {
                let _ = writeln!(s, "{}", cells(r).join("\t"));
            }
        }
        ReportFormat::Markdown => {
            let _ = writeln!(s, "| {} |", REPORT_COLUMNS.join(" | "));
            let _ = writeln!(s, "|{}", "---|".repeat(REPORT_COLUMNS.len()));
            for r in reports {
                let escaped: Vec<String> = cells(r).iter().map(|c| c.replace('|', "\\|")).collect();
                let _ = writeln!(s, "| {} |", escaped.join(" | "));
            }
        }
    }
    s
}

/// Correlation of aggregated scores against every numeric dialog-level
/// field found under `extras[group]`, keyed by field name.
pub fn evaluate_dimensions(
    dialog_scores: &[DialogScore],
    dialogs: &[Dialog],
    group: &str,
) -> BTreeMap<String, Result<CorrelationResult, EvalError>> {
    let mut keys = std::collections::BTreeSet::new();
    for d in dialogs {
        if let Some(Value::Object(map)) = d.extras.get(group) {
            keys.extend(map.iter().filter(|(_, v)| v.is_number()).map(|(k, _)| k.clone()));
        }
    }
    keys.into_iter()
        .map(|k| {
            let target = DialogTarget::Extra(format!("{group}.{k}"));
            (k, evaluate_dialog_level(dialog_scores, dialogs, &target))
        })
        .collect()
}
