//! Dialogs, turns and dataset manifests.
//!
//! On disk a corpus is JSON Lines, one dialog per line:
//!
//! ```json
//! {"dialog_id": "d1", "source": "spoken", "user_terminated": true, "rating_1p": 4,
//!  "turns": [{"index": 1, "user": "hi", "system": "hello", "quality_3p": 1}]}
//! ```
//!
//! Fields the schema does not know about are kept in `extras` and written back
//! unchanged, so third-party annotations survive a parse/serialize cycle.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DialogError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed dialog record: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("dialog `{dialog_id}`: invalid `{field}`: {message}")]
    Validation {
        dialog_id: String,
        field: String,
        message: String,
    },
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("manifest references unknown dialog ids: {}", .0.join(", "))]
    MissingIds(Vec<String>),
    #[error("dialog `{id}` appears in more than one split ({first}, {second})")]
    Overlap { id: String, first: String, second: String },
    #[error("empty corpus")]
    EmptyCorpus,
}

impl DialogError {
    fn invalid(dialog_id: &str, field: impl Into<String>, message: impl Into<String>) -> Self {
        DialogError::Validation {
            dialog_id: dialog_id.to_string(),
            field: field.into(),
            message: message.into(),
        }
    }
}

/// Where a dialog came from. Spoken dialogs are voice interactions that end
/// when the user asks to stop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Spoken,
    Written,
}

/// The label vocabulary a dataset's turn annotations are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LabelScale {
    /// Appropriate (1) / inappropriate (0).
    #[serde(rename = "binary01")]
    Binary01,
    /// Dislike (0) / somewhat like (1) / like (2).
    #[serde(rename = "ordinal012")]
    Ordinal012,
    /// No turn annotations expected.
    #[default]
    #[serde(rename = "none")]
    None,
}

impl LabelScale {
    pub fn labels(self) -> &'static [i64] {
        match self {
            LabelScale::Binary01 => &[0, 1],
            LabelScale::Ordinal012 => &[0, 1, 2],
            LabelScale::None => &[],
        }
    }

    pub fn contains(self, label: i64) -> bool {
        self.labels().contains(&label)
    }

    pub fn name(self) -> &'static str {
        match self {
            LabelScale::Binary01 => "binary01",
            LabelScale::Ordinal012 => "ordinal012",
            LabelScale::None => "none",
        }
    }
}

/// One user utterance followed by one system response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    /// 1-based position within the dialog.
    pub index: u32,
    #[serde(rename = "user")]
    pub user_utterance: String,
    #[serde(rename = "system")]
    pub system_response: String,
    /// Resolved third-party quality label for the system response.
    #[serde(rename = "quality_3p", default, skip_serializing_if = "Option::is_none")]
    pub turn_quality_3p: Option<i64>,
    #[serde(rename = "raters", default, skip_serializing_if = "Option::is_none")]
    pub rater_labels: Option<Vec<i64>>,
    #[serde(rename = "adjudicator", default, skip_serializing_if = "Option::is_none")]
    pub adjudicator_label: Option<i64>,
    #[serde(flatten)]
    pub extras: BTreeMap<String, Value>,
}

impl Turn {
    pub fn new(index: u32, user: impl Into<String>, system: impl Into<String>) -> Self {
        Turn {
            index,
            user_utterance: user.into(),
            system_response: system.into(),
            turn_quality_3p: None,
            rater_labels: None,
            adjudicator_label: None,
            extras: BTreeMap::new(),
        }
    }

    pub fn with_quality(mut self, label: i64) -> Self {
        self.turn_quality_3p = Some(label);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "DialogRecord")]
pub struct Dialog {
    pub dialog_id: String,
    pub source: Source,
    pub user_terminated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating_1p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating_3p: Option<f64>,
    pub turns: Vec<Turn>,
    #[serde(flatten)]
    pub extras: BTreeMap<String, Value>,
}

/// Wire form; `user_terminated` is optional and defaults by source.
#[derive(Deserialize)]
struct DialogRecord {
    dialog_id: String,
    source: Source,
    #[serde(default)]
    user_terminated: Option<bool>,
    #[serde(default)]
    rating_1p: Option<f64>,
    #[serde(default)]
    rating_3p: Option<f64>,
    turns: Vec<Turn>,
    #[serde(flatten)]
    extras: BTreeMap<String, Value>,
}

impl From<DialogRecord> for Dialog {
    fn from(r: DialogRecord) -> Self {
        Dialog {
            user_terminated: r.user_terminated.unwrap_or(matches!(r.source, Source::Spoken)),
            dialog_id: r.dialog_id,
            source: r.source,
            rating_1p: r.rating_1p,
            rating_3p: r.rating_3p,
            turns: r.turns,
            extras: r.extras,
        }
    }
}

impl Dialog {
    pub fn new(dialog_id: impl Into<String>, source: Source, turns: Vec<Turn>) -> Self {
        Dialog {
            dialog_id: dialog_id.into(),
            source,
            user_terminated: matches!(source, Source::Spoken),
            rating_1p: None,
            rating_3p: None,
            turns,
            extras: BTreeMap::new(),
        }
    }

    /// Looks up a turn by its 1-based index.
    pub fn turn(&self, index: u32) -> Option<&Turn> {
        self.position(index).map(|p| &self.turns[p])
    }

    /// Position in `turns` of the turn with the given index.
    pub fn position(&self, index: u32) -> Option<usize> {
        self.turns.binary_search_by_key(&index, |t| t.index).ok()
    }

    /// Checks every invariant, including that labels lie in `scale`.
    pub fn validate(&self, scale: LabelScale) -> Result<(), DialogError> {
        self.validate_structure()?;
        let id = self.dialog_id.as_str();
        for turn in &self.turns {
            let check = |field: &str, label: i64| {
                if scale.contains(label) {
                    Ok(())
                } else {
                    Err(DialogError::invalid(
                        id,
                        format!("turns[{}].{field}", turn.index),
                        format!("label {label} not in label scale {} {:?}", scale.name(), scale.labels()),
                    ))
                }
            };
            if let Some(label) = turn.turn_quality_3p {
                check("quality_3p", label)?;
            }
            for &label in turn.rater_labels.iter().flatten() {
                check("raters", label)?;
            }
            if let Some(label) = turn.adjudicator_label {
                check("adjudicator", label)?;
            }
        }
        Ok(())
    }

    /// Ids, turn ordering and rating ranges; labels are not checked.
    pub fn validate_structure(&self) -> Result<(), DialogError> {
        let id = self.dialog_id.as_str();
        if id.is_empty() {
            return Err(DialogError::invalid(id, "dialog_id", "must be non-empty"));
        }
        if self.turns.is_empty() {
            return Err(DialogError::invalid(id, "turns", "dialog has no turns"));
        }
        for (field, rating) in [("rating_1p", self.rating_1p), ("rating_3p", self.rating_3p)] {
            if let Some(r) = rating {
                if !(1.0..=5.0).contains(&r) {
                    return Err(DialogError::invalid(id, field, format!("{r} outside [1, 5]")));
                }
            }
        }
        let mut prev = 0u32;
        for turn in &self.turns {
            if turn.index < 1 {
                return Err(DialogError::invalid(id, "turns.index", "indices are 1-based"));
            }
            if turn.index <= prev {
                return Err(DialogError::invalid(
                    id,
                    "turns.index",
                    format!("index {} does not increase after {prev}", turn.index),
                ));
            }
            prev = turn.index;
        }
        Ok(())
    }
}

/// Dataset name, label scale and named splits.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DatasetManifest {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub label_scale: LabelScale,
    #[serde(default)]
    pub splits: BTreeMap<String, Vec<String>>,
}

impl DatasetManifest {
    pub fn new(name: impl Into<String>, label_scale: LabelScale) -> Self {
        DatasetManifest {
            name: name.into(),
            label_scale,
            splits: BTreeMap::new(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DialogError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| DialogError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut manifest: DatasetManifest =
            serde_json::from_str(&text).map_err(|e| DialogError::Manifest(e.to_string()))?;
        if manifest.name.is_empty() {
            if let Some(stem) = path.file_stem() {
                manifest.name = stem.to_string_lossy().into_owned();
            }
        }
        Ok(manifest)
    }
}

/// Reads and validates a JSONL corpus.
pub fn parse_dialogs(path: impl AsRef<Path>, manifest: &DatasetManifest) -> Result<Vec<Dialog>, DialogError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| DialogError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_dialogs(BufReader::new(file), manifest.label_scale).map_err(|e| match e {
        DialogError::Io { source, .. } => DialogError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

/// Parses JSONL from any reader. Blank lines are ignored.
pub fn read_dialogs<R: BufRead>(reader: R, scale: LabelScale) -> Result<Vec<Dialog>, DialogError> {
    let mut dialogs = Vec::new();
    let mut seen = BTreeSet::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| DialogError::Io {
            path: PathBuf::new(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let dialog: Dialog =
            serde_json::from_str(&line).map_err(|source| DialogError::Parse { line: n + 1, source })?;
        dialog.validate(scale)?;
        if !seen.insert(dialog.dialog_id.clone()) {
            return Err(DialogError::invalid(
                &dialog.dialog_id,
                "dialog_id",
                "duplicate dialog id",
            ));
        }
        dialogs.push(dialog);
    }
    Ok(dialogs)
}

/// Writes dialogs as JSONL, one per line.
pub fn write_dialogs<W: Write>(mut writer: W, dialogs: &[Dialog]) -> std::io::Result<()> {
    for d in dialogs {
        serde_json::to_writer(&mut writer, d)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    pub n_dialogs: usize,
    pub n_turns: usize,
    pub mean_turns: f64,
    pub n_labeled_turns: usize,
    pub label_counts: BTreeMap<i64, usize>,
    /// Percentage of labeled turns carrying each label.
    pub label_percent: BTreeMap<i64, f64>,
}

pub fn dataset_stats(dialogs: &[Dialog]) -> Result<DatasetStats, DialogError> {
    if dialogs.is_empty() {
        return Err(DialogError::EmptyCorpus);
    }
    let n_turns: usize = dialogs.iter().map(|d| d.turns.len()).sum();
    let mut label_counts = BTreeMap::new();
    for label in dialogs.iter().flat_map(|d| &d.turns).filter_map(|t| t.turn_quality_3p) {
        *label_counts.entry(label).or_insert(0usize) += 1;
    }
    let n_labeled: usize = label_counts.values().sum();
    let label_percent = label_counts
        .iter()
        .map(|(&label, &count)| (label, 100.0 * count as f64 / n_labeled as f64))
        .collect();
    Ok(DatasetStats {
        n_dialogs: dialogs.len(),
        n_turns,
        mean_turns: n_turns as f64 / dialogs.len() as f64,
        n_labeled_turns: n_labeled,
        label_counts,
        label_percent,
    })
}

/// Partitions dialogs according to the manifest's splits.
pub fn split_dialogs(
    dialogs: &[Dialog],
    manifest: &DatasetManifest,
) -> Result<BTreeMap<String, Vec<Dialog>>, DialogError> {
    let by_id: BTreeMap<&str, &Dialog> = dialogs.iter().map(|d| (d.dialog_id.as_str(), d)).collect();

    let mut missing: Vec<String> = manifest
        .splits
        .values()
        .flatten()
        .filter(|id| !by_id.contains_key(id.as_str()))
        .cloned()
        .collect();
    if !missing.is_empty() {
        missing.sort();
        missing.dedup();
        return Err(DialogError::MissingIds(missing));
    }

    let mut owner: BTreeMap<&str, &str> = BTreeMap::new();
    let mut out = BTreeMap::new();
    for (split, ids) in &manifest.splits {
        let mut members = Vec::with_capacity(ids.len());
        for id in ids {
            if let Some(first) = owner.insert(id, split) {
                return Err(DialogError::Overlap {
                    id: id.clone(),
                    first: first.to_string(),
                    second: split.clone(),
                });
            }
            members.push(by_id[id.as_str()].clone());
        }
        out.insert(split.clone(), members);
    }
    Ok(out)
}
