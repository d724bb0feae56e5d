//! Python bindings: metrics, dialogs, weak labels, the hash-bag encoder and
//! quality models.

use std::collections::HashMap;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

use turnqual::aggregate;
use turnqual::dialog::{self, DatasetManifest, LabelScale};
use turnqual::encoder::{self, Encoder, EncoderSpec};
use turnqual::metrics::{self, Level};
use turnqual::model::{self, Mode, ModelConfig, SelectionMetric};
use turnqual::weak::{self, LabelMode, LabelRecord, LexiconProvider, StopDetector};

type LabelRow = (u32, f64, Option<f64>, Option<u8>);
type EpochRow = (usize, f64, Option<f64>);
type ScoredCorpus = (Vec<(String, u32, f64)>, Vec<(String, String)>);

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse<T: std::str::FromStr<Err = String>>(s: &str) -> PyResult<T> {
    s.parse().map_err(PyValueError::new_err)
}

fn level(name: &str) -> PyResult<Level> {
    match name {
        "nominal" => Ok(Level::Nominal),
        "ordinal" => Ok(Level::Ordinal),
        "interval" => Ok(Level::Interval),
        other => Err(PyValueError::new_err(format!("unknown level `{other}`"))),
    }
}

#[pyfunction]
fn pearson(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    metrics::pearson(&x, &y).map_err(value_err)
}

#[pyfunction]
fn spearman(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    metrics::spearman(&x, &y).map_err(value_err)
}

/// Rows are items, columns raters; `None` marks a missing rating.
#[pyfunction]
#[pyo3(signature = (ratings, level = "ordinal"))]
fn krippendorff_alpha(ratings: Vec<Vec<Option<f64>>>, level: &str) -> PyResult<f64> {
    let lv = self::level(level)?;
    metrics::krippendorff_alpha(&ratings, lv)
        .map(|r| r.alpha)
        .map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (labels, adjudicator = None))]
fn majority_vote(labels: Vec<i64>, adjudicator: Option<i64>) -> PyResult<i64> {
    metrics::majority_vote(&labels, adjudicator).map_err(value_err)
}

#[pyfunction]
fn aggregate_mean(scores: Vec<f64>) -> PyResult<f64> {
    aggregate::aggregate_mean(&scores).map_err(value_err)
}

#[pyclass(name = "Dialog", from_py_object)]
#[derive(Clone)]
struct PyDialog {
    inner: dialog::Dialog,
}

#[pymethods]
impl PyDialog {
    /// Parses one JSONL record.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: dialog::Dialog = serde_json::from_str(text).map_err(value_err)?;
        inner.validate_structure().map_err(value_err)?;
        Ok(PyDialog { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(value_err)
    }

    #[getter]
    fn dialog_id(&self) -> &str {
        &self.inner.dialog_id
    }

    #[getter]
    fn turn_indices(&self) -> Vec<u32> {
        self.inner.turns.iter().map(|t| t.index).collect()
    }

    /// (user, system, quality_3p) per turn.
    #[getter]
    fn turns(&self) -> Vec<(u32, String, String, Option<i64>)> {
        self.inner
            .turns
            .iter()
            .map(|t| {
                (
                    t.index,
                    t.user_utterance.clone(),
                    t.system_response.clone(),
                    t.turn_quality_3p,
                )
            })
            .collect()
    }

    #[getter]
    fn rating_3p(&self) -> Option<f64> {
        self.inner.rating_3p
    }

    #[getter]
    fn rating_1p(&self) -> Option<f64> {
        self.inner.rating_1p
    }

    fn __len__(&self) -> usize {
        self.inner.turns.len()
    }

    fn __repr__(&self) -> String {
        format!("Dialog({:?}, {} turns)", self.inner.dialog_id, self.inner.turns.len())
    }
}

/// Reads a JSONL corpus, validated against the manifest's label scale (or
/// `label_scale` when no manifest is given).
#[pyfunction]
#[pyo3(signature = (path, manifest = None, label_scale = "ordinal012"))]
fn load_dialogs(path: &str, manifest: Option<&str>, label_scale: &str) -> PyResult<Vec<PyDialog>> {
    let m = match manifest {
        Some(p) => DatasetManifest::load(p).map_err(value_err)?,
        None => {
            let scale: LabelScale =
                serde_json::from_value(serde_json::Value::String(label_scale.into())).map_err(value_err)?;
            DatasetManifest::new("", scale)
        }
    };
    let dialogs = dialog::parse_dialogs(path, &m).map_err(|e| match e {
        dialog::DialogError::Io { .. } => PyOSError::new_err(e.to_string()),
        other => value_err(other),
    })?;
    Ok(dialogs.into_iter().map(|inner| PyDialog { inner }).collect())
}

#[pyfunction]
#[pyo3(signature = (dialog, turn_index, max_tokens = encoder::DEFAULT_MAX_TOKENS))]
fn serialize_context(dialog: &PyDialog, turn_index: u32, max_tokens: usize) -> PyResult<String> {
    encoder::serialize_context(&dialog.inner, turn_index, max_tokens)
        .map(|c| c.text)
        .map_err(value_err)
}

/// Valence in [-3, 3] from the built-in lexicon.
#[pyfunction]
fn lexicon_valence(utterance: &str) -> PyResult<f64> {
    weak::score_sentiment(utterance, &LexiconProvider::default())
        .map(|s| s.valence())
        .map_err(value_err)
}

/// Labels with the built-in lexicon and stop phrases: (turn_index, q, s, e).
#[pyfunction]
#[pyo3(signature = (dialog, mode = "sentiment_plus_stop"))]
fn weak_labels(dialog: &PyDialog, mode: &str) -> PyResult<Vec<LabelRow>> {
    let mode: LabelMode = parse(mode)?;
    let set = match mode {
        LabelMode::Annotation => weak::build_annotation_labels(&dialog.inner),
        _ => weak::build_weak_labels(
            &dialog.inner,
            mode,
            &LexiconProvider::default(),
            &StopDetector::default(),
        )
        .map_err(value_err)?,
    };
    Ok(set.labels.into_iter().map(|(i, l)| (i, l.q, l.s, l.e)).collect())
}

#[pyclass(name = "HashBagEncoder")]
struct PyHashBagEncoder {
    inner: encoder::HashBagEncoder,
}

#[pymethods]
impl PyHashBagEncoder {
    #[new]
    #[pyo3(signature = (dimension, max_tokens = encoder::DEFAULT_MAX_TOKENS))]
    fn new(dimension: usize, max_tokens: usize) -> PyResult<Self> {
        let mut spec = EncoderSpec::hash_bag(dimension);
        spec.max_tokens = max_tokens;
        Ok(PyHashBagEncoder {
            inner: encoder::HashBagEncoder::new(spec).map_err(value_err)?,
        })
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.spec().dimension
    }

    fn encode(&self, text: &str) -> PyResult<Vec<f64>> {
        self.inner.encode(text).map(|v| v.into_inner()).map_err(value_err)
    }
}

#[pyclass(name = "QualityModel")]
struct PyQualityModel {
    inner: model::QualityModel,
}

#[pymethods]
impl PyQualityModel {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        model::load_model(path)
            .map(|inner| PyQualityModel { inner })
            .map_err(value_err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        model::save_model(&self.inner, path).map_err(value_err)
    }

    #[getter]
    fn mode(&self) -> &'static str {
        self.inner.mode().name()
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.config.encoder.dimension
    }

    #[getter]
    fn best_epoch(&self) -> usize {
        self.inner.best_epoch
    }

    #[getter]
    fn dev_score(&self) -> Option<f64> {
        self.inner.dev_score
    }

    #[getter]
    fn metadata(&self) -> HashMap<String, String> {
        self.inner.metadata.clone().into_iter().collect()
    }

    fn predict_text(&self, encoder: &PyHashBagEncoder, text: &str) -> PyResult<f64> {
        self.inner.predict_text(&encoder.inner, text).map_err(value_err)
    }

    fn predict_turn(&self, encoder: &PyHashBagEncoder, dialog: &PyDialog, turn_index: u32) -> PyResult<f64> {
        self.inner
            .predict_turn(&encoder.inner, &dialog.inner, turn_index)
            .map_err(value_err)
    }

    /// (dialog_id, turn_index, score) rows; dialogs that fail are skipped
    /// and reported in the second element.
    fn predict_corpus(&self, encoder: &PyHashBagEncoder, dialogs: Vec<PyDialog>) -> PyResult<ScoredCorpus> {
        let dialogs: Vec<dialog::Dialog> = dialogs.into_iter().map(|d| d.inner).collect();
        let out = self.inner.predict_corpus(&encoder.inner, &dialogs).map_err(value_err)?;
        let rows = out
            .table
            .rows
            .into_iter()
            .map(|r| (r.dialog_id, r.turn_index, r.score))
            .collect();
        Ok((rows, out.failures))
    }
}

/// Trains a head on the hash-bag encoder. Labels come from `label_mode`
/// (built-in lexicon and stop phrases for weak modes); dev selection uses the
/// dev dialogs' 3P turn labels. Returns the model and per-epoch
/// (epoch, train_loss, dev_metric).
#[pyfunction]
#[pyo3(signature = (
    train_dialogs, dev_dialogs, mode = "regression", label_mode = "sentiment_plus_stop",
    dimension = 256, epochs = 10, learning_rate = 1e-5, batch_size = 8,
    selection_metric = "dev_pearson", seed = 0
))]
#[allow(clippy::too_many_arguments)]
fn train(
    train_dialogs: Vec<PyDialog>,
    dev_dialogs: Vec<PyDialog>,
    mode: &str,
    label_mode: &str,
    dimension: usize,
    epochs: usize,
    learning_rate: f64,
    batch_size: usize,
    selection_metric: &str,
    seed: u64,
) -> PyResult<(PyQualityModel, Vec<EpochRow>)> {
    let mode: Mode = parse(mode)?;
    let label_mode: LabelMode = parse(label_mode)?;
    let train_d: Vec<dialog::Dialog> = train_dialogs.into_iter().map(|d| d.inner).collect();
    let dev_d: Vec<dialog::Dialog> = dev_dialogs.into_iter().map(|d| d.inner).collect();
    let labels: Vec<LabelRecord> = weak::label_corpus(
        &train_d,
        label_mode,
        &LexiconProvider::default(),
        &StopDetector::default(),
    )
    .map_err(value_err)?
    .records;

    let mut config = ModelConfig::new(mode, EncoderSpec::hash_bag(dimension));
    config.epochs = epochs;
    config.learning_rate = learning_rate;
    config.batch_size = batch_size;
    config.selection_metric = parse::<SelectionMetric>(selection_metric)?;
    config.seed = seed;
    let enc = encoder::HashBagEncoder::new(config.encoder.clone()).map_err(value_err)?;
    let examples = model::training_examples(&train_d, &labels, config.encoder.max_tokens).map_err(value_err)?;
    let out = model::train(&examples, &dev_d, &config, &enc).map_err(value_err)?;
    let log = out.log.iter().map(|e| (e.epoch, e.train_loss, e.dev_metric)).collect();
    Ok((PyQualityModel { inner: out.model }, log))
}

#[pymodule]
fn turnqual_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", turnqual::VERSION)?;
    m.add_function(wrap_pyfunction!(pearson, m)?)?;
    m.add_function(wrap_pyfunction!(spearman, m)?)?;
    m.add_function(wrap_pyfunction!(krippendorff_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(majority_vote, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate_mean, m)?)?;
    m.add_function(wrap_pyfunction!(load_dialogs, m)?)?;
    m.add_function(wrap_pyfunction!(serialize_context, m)?)?;
    m.add_function(wrap_pyfunction!(lexicon_valence, m)?)?;
    m.add_function(wrap_pyfunction!(weak_labels, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_class::<PyDialog>()?;
    m.add_class::<PyHashBagEncoder>()?;
    m.add_class::<PyQualityModel>()?;
    Ok(())
}
