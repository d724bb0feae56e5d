//! Weak reference labels read off the next user utterance.
//!
//! For a system response `r_i` the label comes from `u_{i+1}`: its sentiment
//! valence `s` in [-3, 3], optionally plus a stop signal `e` (0 when the user
//! ends the dialog there, 1 otherwise). With turn annotations available the
//! label is simply the annotation.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dialog::Dialog;

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("sentiment provider `{provider}` failed{}: {message}", turn.map(|t| format!(" at turn {t}")).unwrap_or_default())]
    Provider {
        provider: String,
        turn: Option<u32>,
        message: String,
    },
    #[error("dialog `{dialog_id}` turn {turn}: no next user utterance")]
    NoNextUtterance { dialog_id: String, turn: u32 },
    #[error("dialog `{dialog_id}` has no turn {turn}")]
    UnknownTurn { dialog_id: String, turn: u32 },
    #[error("label mode `{0}` cannot be built from next-user signals")]
    InvalidMode(&'static str),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("invalid lexicon line {line}: {message}")]
    Lexicon { line: usize, message: String },
}

/// Valence in [-3, 3]; out-of-range inputs are clamped.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct SentimentScore(f64);

impl SentimentScore {
    pub const MIN: f64 = -3.0;
    pub const MAX: f64 = 3.0;

    pub fn new(valence: f64) -> Self {
        SentimentScore(valence.clamp(Self::MIN, Self::MAX))
    }

    pub fn valence(self) -> f64 {
        self.0
    }
}

/// Whether the user carried on after a system response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopSignal {
    Stop,
    Continue,
}

impl StopSignal {
    /// 0 when the user stops, 1 when they continue.
    pub fn value(self) -> u8 {
        match self {
            StopSignal::Stop => 0,
            StopSignal::Continue => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    SentimentOnly,
    SentimentPlusStop,
    Annotation,
}

impl LabelMode {
    pub fn name(self) -> &'static str {
        match self {
            LabelMode::SentimentOnly => "sentiment_only",
            LabelMode::SentimentPlusStop => "sentiment_plus_stop",
            LabelMode::Annotation => "annotation",
        }
    }
}

impl std::str::FromStr for LabelMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sentiment_only" => Ok(LabelMode::SentimentOnly),
            "sentiment_plus_stop" => Ok(LabelMode::SentimentPlusStop),
            "annotation" => Ok(LabelMode::Annotation),
            other => Err(format!("unknown label mode `{other}`")),
        }
    }
}

/// Reference label for one system response. `s` and `e` record the signals a
/// weak label was built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakLabel {
    pub q: f64,
    pub mode: LabelMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e: Option<u8>,
}

/// Provider-side failure; wrapped with provider id and turn by the caller.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct ProviderFailure(pub String);

/// Source of sentiment valence for user utterances.
pub trait SentimentProvider: Send + Sync {
    fn id(&self) -> &str;

    /// Unclamped valence for a non-empty utterance.
    fn raw_valence(&self, utterance: &str) -> Result<f64, ProviderFailure>;

    /// `false` if the provider serializes calls internally, in which case
    /// corpus labeling runs single-threaded.
    fn concurrent(&self) -> bool {
        true
    }
}

pub fn score_sentiment(utterance: &str, provider: &dyn SentimentProvider) -> Result<SentimentScore, LabelError> {
    if utterance.trim().is_empty() {
        return Ok(SentimentScore::new(0.0));
    }
    let fail = |message: String| LabelError::Provider {
        provider: provider.id().to_string(),
        turn: None,
        message,
    };
    let raw = provider.raw_valence(utterance).map_err(|e| fail(e.0))?;
    if !raw.is_finite() {
        return Err(fail(format!("non-finite valence {raw}")));
    }
    Ok(SentimentScore::new(raw))
}

/// Lowercases, strips punctuation other than apostrophes and collapses
/// whitespace.
pub fn normalize_utterance(text: &str) -> String {
    let cleaned: String = text
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || c == '\'' {
                c.to_ascii_lowercase()
            } else {
                ' '
            }
        })
        .collect();
    cleaned.split_whitespace().collect::<Vec<_>>().join(" ")
}

const LEXICON: &[(&str, f64)] = &[
    ("love", 3.0),
    ("loved", 3.0),
    ("awesome", 2.5),
    ("amazing", 2.5),
    ("fantastic", 2.5),
    ("wonderful", 2.5),
    ("excellent", 2.5),
    ("great", 2.0),
    ("favorite", 1.5),
    ("fun", 1.5),
    ("funny", 1.5),
    ("happy", 2.0),
    ("glad", 1.5),
    ("enjoy", 2.0),
    ("enjoyed", 2.0),
    ("like", 1.0),
    ("liked", 1.0),
    ("good", 1.5),
    ("nice", 1.5),
    ("cool", 1.5),
    ("interesting", 1.5),
    ("thanks", 1.0),
    ("thank", 1.0),
    ("yes", 0.5),
    ("yeah", 0.5),
    ("sure", 0.5),
    ("wow", 1.5),
    ("haha", 1.5),
    ("right", 0.5),
    ("agree", 1.0),
    ("hate", -3.0),
    ("hated", -3.0),
    ("terrible", -2.5),
    ("horrible", -2.5),
    ("awful", -2.5),
    ("worst", -2.5),
    ("stupid", -2.5),
    ("dumb", -2.0),
    ("boring", -2.0),
    ("bored", -2.0),
    ("bad", -1.5),
    ("sad", -1.5),
    ("annoying", -2.0),
    ("annoyed", -2.0),
    ("angry", -2.0),
    ("wrong", -1.5),
    ("confusing", -1.5),
    ("confused", -1.5),
    ("nonsense", -2.0),
    ("weird", -1.0),
    ("shut", -2.0),
    ("useless", -2.5),
    ("ridiculous", -2.0),
    ("sucks", -2.5),
    ("whatever", -1.0),
    ("ugh", -1.5),
    ("sorry", -0.5),
    ("repeat", -0.5),
];

const NEGATORS: &[&str] = &[
    "not", "never", "don't", "dont", "didn't", "isn't", "wasn't", "can't", "no",
];

/// Squashing width: a polarity sum of 2 maps to roughly 2.3.
const LEXICON_SQUASH: f64 = 2.0;

/// Token-polarity lexicon scorer.
///
/// Sums word polarities (a negator flips the next polar word) and maps the
/// sum onto (-3, 3) with `3 * tanh(sum / 2)`. A bare "no" carries no polarity
/// of its own, so plain negative answers come out neutral.
#[derive(Debug, Clone)]
pub struct LexiconProvider {
    id: String,
    polarity: HashMap<String, f64>,
}

impl Default for LexiconProvider {
    fn default() -> Self {
        LexiconProvider {
            id: "lexicon".into(),
            polarity: LEXICON.iter().map(|&(w, v)| (w.to_string(), v)).collect(),
        }
    }
}

impl LexiconProvider {
    /// Loads `word<TAB>polarity` lines; `#` starts a comment.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, LabelError> {
        let text = std::fs::read_to_string(path)?;
        let mut polarity = HashMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (word, value) = line.split_once('\t').ok_or_else(|| LabelError::Lexicon {
                line: n + 1,
                message: "expected word<TAB>polarity".into(),
            })?;
            let value: f64 = value.trim().parse().map_err(|e| LabelError::Lexicon {
                line: n + 1,
                message: format!("{e}"),
            })?;
            polarity.insert(normalize_utterance(word), value);
        }
        Ok(LexiconProvider {
            id: "lexicon".into(),
            polarity,
        })
    }

    pub fn polarity_sum(&self, utterance: &str) -> f64 {
        let norm = normalize_utterance(utterance);
        let mut sum = 0.0;
        let mut negate = false;
        for token in norm.split(' ') {
            if NEGATORS.contains(&token) {
                negate = true;
                continue;
            }
            if let Some(&p) = self.polarity.get(token) {
                sum += if negate { -p } else { p };
                negate = false;
            }
        }
        sum
    }
}

impl SentimentProvider for LexiconProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn raw_valence(&self, utterance: &str) -> Result<f64, ProviderFailure> {
        Ok(SentimentScore::MAX * (self.polarity_sum(utterance) / LEXICON_SQUASH).tanh())
    }
}

/// Fixed utterance → valence table, for tests and precomputed scores.
/// Unknown utterances are an error, never a silent zero.
#[derive(Debug, Clone, Default)]
pub struct TableProvider {
    table: HashMap<String, f64>,
}

impl TableProvider {
    pub fn new<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        TableProvider {
            table: entries
                .into_iter()
                .map(|(k, v)| (k.into().trim().to_string(), v))
                .collect(),
        }
    }
}

impl SentimentProvider for TableProvider {
    fn id(&self) -> &str {
        "table"
    }

    fn raw_valence(&self, utterance: &str) -> Result<f64, ProviderFailure> {
        self.table
            .get(utterance.trim())
            .copied()
            .ok_or_else(|| ProviderFailure(format!("no table entry for {utterance:?}")))
    }
}

struct ChildIo {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

/// Runs a user-supplied scorer as a child process: one utterance per stdin
/// line in, one decimal valence per stdout line out.
pub struct ExternalProvider {
    id: String,
    io: Mutex<ChildIo>,
}

impl ExternalProvider {
    pub fn spawn(command: &str, args: &[String]) -> Result<Self, LabelError> {
        let mut child = Command::new(command)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| LabelError::Provider {
                provider: format!("external:{command}"),
                turn: None,
                message: format!("cannot start: {e}"),
            })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(ExternalProvider {
            id: format!("external:{command}"),
            io: Mutex::new(ChildIo { child, stdin, stdout }),
        })
    }
}

/// Sends one line to a child process and reads one line back.
pub(crate) fn line_exchange(
    stdin: &mut ChildStdin,
    stdout: &mut BufReader<ChildStdout>,
    text: &str,
) -> Result<String, String> {
    let line = text.replace(['\n', '\r'], " ");
    writeln!(stdin, "{line}").map_err(|e| format!("write failed: {e}"))?;
    stdin.flush().map_err(|e| format!("flush failed: {e}"))?;
    let mut reply = String::new();
    let n = stdout.read_line(&mut reply).map_err(|e| format!("read failed: {e}"))?;
    if n == 0 {
        return Err("process closed its output".into());
    }
    Ok(reply.trim().to_string())
}

impl SentimentProvider for ExternalProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn raw_valence(&self, utterance: &str) -> Result<f64, ProviderFailure> {
        let mut io = self
            .io
            .lock()
            .map_err(|_| ProviderFailure("provider lock poisoned".into()))?;
        let ChildIo { stdin, stdout, .. } = &mut *io;
        let reply = line_exchange(stdin, stdout, utterance).map_err(ProviderFailure)?;
        reply
            .parse::<f64>()
            .map_err(|_| ProviderFailure(format!("unparseable valence {reply:?}")))
    }

    fn concurrent(&self) -> bool {
        false
    }
}

impl Drop for ExternalProvider {
    fn drop(&mut self) {
        if let Ok(io) = self.io.get_mut() {
            let _ = io.child.kill();
            let _ = io.child.wait();
        }
    }
}

pub const DEFAULT_STOP_PHRASES: &[&str] = &[
    "stop",
    "alexa stop",
    "goodbye",
    "good bye",
    "bye",
    "bye bye",
    "exit",
    "quit",
    "stop talking",
    "end conversation",
];

/// Matches normalized utterances against a stop-phrase list.
#[derive(Debug, Clone)]
pub struct StopDetector {
    phrases: BTreeSet<String>,
}

impl Default for StopDetector {
    fn default() -> Self {
        StopDetector::new(DEFAULT_STOP_PHRASES.iter().copied())
    }
}

impl StopDetector {
    pub fn new<I, S>(phrases: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        StopDetector {
            phrases: phrases
                .into_iter()
                .map(|p| normalize_utterance(p.as_ref()))
                .filter(|p| !p.is_empty())
                .collect(),
        }
    }

    /// One phrase per line; blank lines ignored.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, LabelError> {
        let text = std::fs::read_to_string(path)?;
        Ok(StopDetector::new(text.lines()))
    }

    pub fn is_stop(&self, utterance: &str) -> bool {
        self.phrases.contains(&normalize_utterance(utterance))
    }
}

/// Stop signal for the response of turn `turn_index`, read from `u_{i+1}`.
pub fn detect_stop(dialog: &Dialog, turn_index: u32, detector: &StopDetector) -> Result<StopSignal, LabelError> {
    let pos = dialog.position(turn_index).ok_or_else(|| LabelError::UnknownTurn {
        dialog_id: dialog.dialog_id.clone(),
        turn: turn_index,
    })?;
    let next = dialog.turns.get(pos + 1).ok_or_else(|| LabelError::NoNextUtterance {
        dialog_id: dialog.dialog_id.clone(),
        turn: turn_index,
    })?;
    let is_final = pos + 1 == dialog.turns.len() - 1;
    if detector.is_stop(&next.user_utterance) || (is_final && dialog.user_terminated) {
        Ok(StopSignal::Stop)
    } else {
        Ok(StopSignal::Continue)
    }
}

/// Labels for one dialog, with the number of turns that got none.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabelSet {
    pub labels: Vec<(u32, WeakLabel)>,
    pub skipped: usize,
}

/// One weak label per system response followed by a user utterance.
pub fn build_weak_labels(
    dialog: &Dialog,
    mode: LabelMode,
    provider: &dyn SentimentProvider,
    detector: &StopDetector,
) -> Result<LabelSet, LabelError> {
    if mode == LabelMode::Annotation {
        return Err(LabelError::InvalidMode(mode.name()));
    }
    let mut labels = Vec::with_capacity(dialog.turns.len().saturating_sub(1));
    for pair in dialog.turns.windows(2) {
        let (turn, next) = (&pair[0], &pair[1]);
        let s = score_sentiment(&next.user_utterance, provider)
            .map_err(|e| match e {
                LabelError::Provider { provider, message, .. } => LabelError::Provider {
                    provider,
                    turn: Some(turn.index),
                    message,
                },
                other => other,
            })?
            .valence();
        let label = match mode {
            LabelMode::SentimentOnly => WeakLabel {
                q: s,
                mode,
                s: Some(s),
                e: None,
            },
            _ => {
                let e = detect_stop(dialog, turn.index, detector)?.value();
                WeakLabel {
                    q: s + f64::from(e),
                    mode,
                    s: Some(s),
                    e: Some(e),
                }
            }
        };
        labels.push((turn.index, label));
    }
    Ok(LabelSet {
        skipped: dialog.turns.len() - labels.len(),
        labels,
    })
}

/// Uses resolved 3P turn annotations as labels; unlabeled turns are skipped.
pub fn build_annotation_labels(dialog: &Dialog) -> LabelSet {
    let labels: Vec<(u32, WeakLabel)> = dialog
        .turns
        .iter()
        .filter_map(|t| {
            t.turn_quality_3p.map(|l| {
                (
                    t.index,
                    WeakLabel {
                        q: l as f64,
                        mode: LabelMode::Annotation,
                        s: None,
                        e: None,
                    },
                )
            })
        })
        .collect();
    LabelSet {
        skipped: dialog.turns.len() - labels.len(),
        labels,
    }
}

/// A label keyed to its dialog and turn, as written to label files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub dialog_id: String,
    pub turn_index: u32,
    #[serde(flatten)]
    pub label: WeakLabel,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorpusLabels {
    pub records: Vec<LabelRecord>,
    pub skipped: usize,
}

/// Labels a corpus, in input order. Runs across dialogs in parallel when the
/// provider allows it.
pub fn label_corpus(
    dialogs: &[Dialog],
    mode: LabelMode,
    provider: &dyn SentimentProvider,
    detector: &StopDetector,
) -> Result<CorpusLabels, LabelError> {
    let one = |d: &Dialog| -> Result<(String, LabelSet), LabelError> {
        let set = match mode {
            LabelMode::Annotation => build_annotation_labels(d),
            _ => build_weak_labels(d, mode, provider, detector)?,
        };
        Ok((d.dialog_id.clone(), set))
    };
    let sets: Vec<(String, LabelSet)> = if provider.concurrent() {
        dialogs.par_iter().map(one).collect::<Result<_, _>>()?
    } else {
        dialogs.iter().map(one).collect::<Result<_, _>>()?
    };
    let mut out = CorpusLabels::default();
    for (dialog_id, set) in sets {
        out.skipped += set.skipped;
        out.records
            .extend(set.labels.into_iter().map(|(turn_index, label)| LabelRecord {
                dialog_id: dialog_id.clone(),
                turn_index,
                label,
            }));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dialog::{Source, Turn};

    fn dialog(users: &[&str], terminated: bool) -> Dialog {
        let turns = users
            .iter()
            .enumerate()
            .map(|(i, u)| Turn::new(i as u32 + 1, *u, format!("response {i}")))
            .collect();
        let mut d = Dialog::new("d", Source::Spoken, turns);
        d.user_terminated = terminated;
        d
    }

    #[test]
    fn lexicon_signs() {
        let p = LexiconProvider::default();
        assert!(score_sentiment("i love this", &p).unwrap().valence() > 0.0);
        assert!(score_sentiment("that is so boring", &p).unwrap().valence() < 0.0);
        assert!(score_sentiment("not good", &p).unwrap().valence() < 0.0);
        assert_eq!(score_sentiment("", &p).unwrap().valence(), 0.0);
        assert_eq!(score_sentiment("   ", &p).unwrap().valence(), 0.0);
        // Bare "no" answers are not read as negative.
        assert_eq!(score_sentiment("no", &p).unwrap().valence(), 0.0);
    }

    #[test]
    fn table_provider_lookup_and_failure() {
        let p = TableProvider::new([("that was rude", -1.97), ("wild", 9.0)]);
        assert_eq!(score_sentiment("that was rude", &p).unwrap().valence(), -1.97);
        assert_eq!(score_sentiment("wild", &p).unwrap().valence(), 3.0);
        match score_sentiment("unknown", &p).unwrap_err() {
            LabelError::Provider { provider, .. } => assert_eq!(provider, "table"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn stop_detection() {
        let det = StopDetector::default();
        let d = dialog(&["hi", "Alexa, stop!", "tell me more", "ok"], false);
        assert_eq!(detect_stop(&d, 1, &det).unwrap(), StopSignal::Stop);
        assert_eq!(detect_stop(&d, 2, &det).unwrap(), StopSignal::Continue);
        assert_eq!(detect_stop(&d, 3, &det).unwrap(), StopSignal::Continue);
        assert!(matches!(
            detect_stop(&d, 4, &det),
            Err(LabelError::NoNextUtterance { .. })
        ));
        assert!(matches!(detect_stop(&d, 9, &det), Err(LabelError::UnknownTurn { .. })));

        let d = dialog(&["hi", "tell me more", "i'm done now"], true);
        assert_eq!(detect_stop(&d, 1, &det).unwrap(), StopSignal::Continue);
        assert_eq!(detect_stop(&d, 2, &det).unwrap(), StopSignal::Stop);
    }

    #[test]
    fn weak_label_arithmetic() {
        let p = TableProvider::new([("hi", 0.0), ("that's wrong", -1.97), ("stop", -1.97)]);
        let det = StopDetector::default();

        let d = dialog(&["hi", "that's wrong", "hi"], false);
        let only = build_weak_labels(&d, LabelMode::SentimentOnly, &p, &det).unwrap();
        assert_eq!(only.labels[0].1.q, -1.97);
        let plus = build_weak_labels(&d, LabelMode::SentimentPlusStop, &p, &det).unwrap();
        assert_eq!(plus.labels[0].1.q, -1.97 + 1.0);
        assert_eq!(plus.labels.len(), 2);
        assert_eq!(plus.skipped, 1);

        let d = dialog(&["hi", "stop"], true);
        let plus = build_weak_labels(&d, LabelMode::SentimentPlusStop, &p, &det).unwrap();
        assert_eq!(
            plus.labels,
            vec![(
                1,
                WeakLabel {
                    q: -1.97,
                    mode: LabelMode::SentimentPlusStop,
                    s: Some(-1.97),
                    e: Some(0)
                }
            )]
        );
    }

    #[test]
    fn provider_failure_carries_turn() {
        let p = TableProvider::new([("hi", 0.0)]);
        let d = dialog(&["hi", "hi", "mystery"], false);
        match build_weak_labels(&d, LabelMode::SentimentOnly, &p, &StopDetector::default()).unwrap_err() {
            LabelError::Provider { turn, .. } => assert_eq!(turn, Some(2)),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn annotation_labels() {
        let mut d = dialog(&["a", "b", "c"], false);
        d.turns[0].turn_quality_3p = Some(1);
        d.turns[2].turn_quality_3p = Some(0);
        let set = build_annotation_labels(&d);
        assert_eq!(
            set.labels.iter().map(|(i, l)| (*i, l.q)).collect::<Vec<_>>(),
            vec![(1, 1.0), (3, 0.0)]
        );
        assert_eq!(set.skipped, 1);
        assert!(set.labels.iter().all(|(_, l)| l.mode == LabelMode::Annotation));

        let d = dialog(&["a", "b"], false);
        let set = build_annotation_labels(&d);
        assert!(set.labels.is_empty());
        assert_eq!(set.skipped, 2);
    }

    #[test]
    fn external_provider_protocol() {
        let p = ExternalProvider::spawn("sh", &["-c".into(), "while read l; do echo 7.5; done".into()]).unwrap();
        assert!(!p.concurrent());
        assert_eq!(score_sentiment("anything\nat all", &p).unwrap().valence(), 3.0);
        assert_eq!(score_sentiment("again", &p).unwrap().valence(), 3.0);

        let bad = ExternalProvider::spawn("sh", &["-c".into(), "read l; echo nope".into()]).unwrap();
        assert!(matches!(score_sentiment("x", &bad), Err(LabelError::Provider { .. })));
        assert!(matches!(score_sentiment("x", &bad), Err(LabelError::Provider { .. })));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn clamping(x in -1e6f64..1e6) {
                prop_assert_eq!(SentimentScore::new(x).valence(), x.clamp(-3.0, 3.0));
            }

            #[test]
            fn coverage_and_provider_substitution(
                users in proptest::collection::vec("[a-z ]{0,12}", 1..8),
                terminated: bool,
            ) {
                let refs: Vec<&str> = users.iter().map(String::as_str).collect();
                let d = dialog(&refs, terminated);
                let det = StopDetector::default();
                let lex = build_weak_labels(&d, LabelMode::SentimentPlusStop, &LexiconProvider::default(), &det).unwrap();
                let table = TableProvider::new(users.iter().map(|u| (u.clone(), 1.25)));
                let tab = build_weak_labels(&d, LabelMode::SentimentPlusStop, &table, &det).unwrap();
                prop_assert_eq!(lex.labels.len(), d.turns.len() - 1);
                let idx = |s: &LabelSet| s.labels.iter().map(|(i, _)| *i).collect::<Vec<_>>();
                prop_assert_eq!(idx(&lex), idx(&tab));
                for (_, l) in &lex.labels {
                    prop_assert_eq!(l.q, l.s.unwrap() + f64::from(l.e.unwrap()));
                    prop_assert!((-3.0..=4.0).contains(&l.q));
                }
            }
        }
    }
}
