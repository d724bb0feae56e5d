//! The turn-quality estimator: pooled encoder features through a linear head.
//!
//! Classification heads are trained with binary cross-entropy on a sigmoid
//! and output the probability of an appropriate response. Regression heads
//! are trained with squared error on weak labels and output an unbounded
//! score. Training keeps the epoch whose dev selection metric is best.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dialog::{Dialog, DialogError};
use crate::encoder::{serialize_context, Encoder, EncoderError, EncoderSpec};
use crate::metrics::{pearson, spearman};
use crate::scores::{ScoreRow, ScoreTable};
use crate::weak::{LabelMode, LabelRecord};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("no training examples")]
    EmptyTrainingSet,
    #[error("training example {index} has label {label}, which a {mode} head cannot fit")]
    LabelModeMismatch {
        index: usize,
        label: f64,
        mode: &'static str,
    },
    #[error("no dev turns carry a 3P quality label")]
    NoDevLabels,
    #[error("label for dialog `{dialog_id}` turn {turn} does not match any turn")]
    UnknownTurn { dialog_id: String, turn: u32 },
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("encoder mismatch: model expects {expected}, got {found}")]
    EncoderMismatch { expected: String, found: String },
    #[error("checkpoint dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unsupported checkpoint version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Dialog(#[from] DialogError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Classification,
    Regression,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Classification => "classification",
            Mode::Regression => "regression",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "classification" => Ok(Mode::Classification),
            "regression" => Ok(Mode::Regression),
            other => Err(format!("unknown model mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMetric {
    DevPearson,
    DevSpearman,
    DevLoss,
}

impl std::str::FromStr for SelectionMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dev_pearson" => Ok(SelectionMetric::DevPearson),
            "dev_spearman" => Ok(SelectionMetric::DevSpearman),
            "dev_loss" => Ok(SelectionMetric::DevLoss),
            other => Err(format!("unknown selection metric `{other}`")),
        }
    }
}

impl SelectionMetric {
    /// Whether `a` beats `b`; a missing value never wins.
    fn better(self, a: Option<f64>, b: Option<f64>) -> bool {
        match (a, b) {
            (Some(a), Some(b)) => match self {
                SelectionMetric::DevLoss => a < b,
                _ => a > b,
            },
            (Some(_), None) => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub mode: Mode,
    pub encoder: EncoderSpec,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub optimizer: Optimizer,
    pub selection_metric: SelectionMetric,
    pub seed: u64,
}

impl ModelConfig {
    /// Batch 8, learning rate 1e-5, Adam, 10 epochs, selection by dev Pearson.
    pub fn new(mode: Mode, encoder: EncoderSpec) -> Self {
        ModelConfig {
            mode,
            encoder,
            batch_size: 8,
            learning_rate: 1e-5,
            epochs: 10,
            optimizer: Optimizer::Adam,
            selection_metric: SelectionMetric::DevPearson,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.batch_size < 1 {
            return Err(ModelError::Config("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ModelError::Config("learning_rate must be positive".into()));
        }
        if self.epochs < 1 {
            return Err(ModelError::Config("epochs must be at least 1".into()));
        }
        self.encoder.validate()?;
        Ok(())
    }
}

/// Serialized context + response with its reference label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub dialog_id: String,
    pub turn_index: u32,
    pub text: String,
    pub label: f64,
    pub mode: LabelMode,
}

/// Joins label records to their dialogs and serializes each labeled context.
pub fn training_examples(
    dialogs: &[Dialog],
    labels: &[LabelRecord],
    max_tokens: usize,
) -> Result<Vec<TrainingExample>, ModelError> {
    let by_id: HashMap<&str, &Dialog> = dialogs.iter().map(|d| (d.dialog_id.as_str(), d)).collect();
    labels
        .iter()
        .map(|rec| {
            let unknown = || ModelError::UnknownTurn {
                dialog_id: rec.dialog_id.clone(),
                turn: rec.turn_index,
            };
            let dialog = by_id.get(rec.dialog_id.as_str()).ok_or_else(unknown)?;
            dialog.turn(rec.turn_index).ok_or_else(unknown)?;
            let ctx = serialize_context(dialog, rec.turn_index, max_tokens)?;
            Ok(TrainingExample {
                dialog_id: rec.dialog_id.clone(),
                turn_index: rec.turn_index,
                text: ctx.text,
                label: rec.label.q,
                mode: rec.label.mode,
            })
        })
        .collect()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean loss over a batch and its gradient with respect to (weights, bias).
///
/// Regression: mean of `(z - y)^2`. Classification: mean binary
/// cross-entropy of `sigmoid(z)` against `y`, computed from the logit.
pub fn batch_loss_and_grad(mode: Mode, weights: &[f64], bias: f64, xs: &[&[f64]], ys: &[f64]) -> (f64, Vec<f64>, f64) {
    let n = xs.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; weights.len()];
    let mut grad_b = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        let z: f64 = bias + weights.iter().zip(x.iter()).map(|(w, v)| w * v).sum::<f64>();
        let dz = match mode {
            Mode::Regression => {
                loss += (z - y).powi(2);
                2.0 * (z - y)
            }
            Mode::Classification => {
                // log(1 + e^z) - y z, stable for large |z|
                loss += z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z;
                sigmoid(z) - y
            }
        };
        for (g, v) in grad.iter_mut().zip(x.iter()) {
            *g += dz * v;
        }
        grad_b += dz;
    }
    grad.iter_mut().for_each(|g| *g /= n);
    (loss / n, grad, grad_b / n)
}

/// Linear map from pooled features to one logit, stored at f32 precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearHead {
    pub weights: Vec<f32>,
    pub bias: f32,
}

impl LinearHead {
    pub fn zeros(dimension: usize) -> Self {
        LinearHead {
            weights: vec![0.0; dimension],
            bias: 0.0,
        }
    }

    fn from_f64(weights: &[f64], bias: f64) -> Self {
        LinearHead {
            weights: weights.iter().map(|&w| w as f32).collect(),
            bias: bias as f32,
        }
    }

    pub fn logit(&self, features: &[f64]) -> f64 {
        f64::from(self.bias)
            + self
                .weights
                .iter()
                .zip(features)
                .map(|(&w, v)| f64::from(w) * v)
                .sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityModel {
    pub config: ModelConfig,
    pub head: LinearHead,
    /// 1-based epoch the parameters come from.
    pub best_epoch: usize,
    pub dev_score: Option<f64>,
    /// Free-form provenance (tool version, config hash, seed).
    pub metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_metric: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: QualityModel,
    pub log: Vec<EpochLog>,
}

struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    fn new(lr: f64, n_params: usize) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    fn update(&mut self, params: &mut [f64], grads: &[f64]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

fn check_encoder(spec: &EncoderSpec, encoder: &dyn Encoder) -> Result<(), ModelError> {
    let found = encoder.spec();
    if found.adapter_id != spec.adapter_id || found.dimension != spec.dimension {
        return Err(ModelError::EncoderMismatch {
            expected: format!("{}/{}", spec.adapter_id, spec.dimension),
            found: format!("{}/{}", found.adapter_id, found.dimension),
        });
    }
    Ok(())
}

fn output(mode: Mode, logit: f64) -> f64 {
    match mode {
        Mode::Classification => sigmoid(logit),
        Mode::Regression => logit,
    }
}

/// Fits the head on `examples`, scoring every labeled dev turn after each
/// epoch and keeping the best epoch by the configured metric (ties go to the
/// earlier epoch).
pub fn train(
    examples: &[TrainingExample],
    dev_dialogs: &[Dialog],
    config: &ModelConfig,
    encoder: &dyn Encoder,
) -> Result<TrainOutcome, ModelError> {
    config.validate()?;
    check_encoder(&config.encoder, encoder)?;
    if examples.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    for (index, ex) in examples.iter().enumerate() {
        let ok = match config.mode {
            Mode::Classification => ex.label == 0.0 || ex.label == 1.0,
            Mode::Regression => ex.label.is_finite(),
        };
        if !ok {
            return Err(ModelError::LabelModeMismatch {
                index,
                label: ex.label,
                mode: config.mode.name(),
            });
        }
    }

    let mut dev_texts = Vec::new();
    let mut dev_labels = Vec::new();
    for d in dev_dialogs {
        for t in &d.turns {
            if let Some(label) = t.turn_quality_3p {
                dev_texts.push(serialize_context(d, t.index, config.encoder.max_tokens)?.text);
                dev_labels.push(label as f64);
            }
        }
    }
    if dev_labels.is_empty() {
        return Err(ModelError::NoDevLabels);
    }

    let encode_all = |texts: Vec<&str>| -> Result<Vec<Vec<f64>>, ModelError> {
        texts.par_iter().map(|t| Ok(encoder.encode(t)?.into_inner())).collect()
    };
    let features = encode_all(examples.iter().map(|e| e.text.as_str()).collect())?;
    let labels: Vec<f64> = examples.iter().map(|e| e.label).collect();
    let dev_features = encode_all(dev_texts.iter().map(String::as_str).collect())?;

    let dim = config.encoder.dimension;
    // weights followed by the bias
    let mut params = vec![0.0; dim + 1];
    let mut adam = Adam::new(config.learning_rate, dim + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();

    let mut log = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, Option<f64>, LinearHead)> = None;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch, idx) in order.chunks(config.batch_size).enumerate() {
            let xs: Vec<&[f64]> = idx.iter().map(|&i| features[i].as_slice()).collect();
            let ys: Vec<f64> = idx.iter().map(|&i| labels[i]).collect();
            let (loss, mut grad, grad_b) = batch_loss_and_grad(config.mode, &params[..dim], params[dim], &xs, &ys);
            if !loss.is_finite() || grad_b.is_nan() {
                return Err(ModelError::NonFiniteLoss {
                    epoch,
                    batch: batch + 1,
                });
            }
            grad.push(grad_b);
            adam.update(&mut params, &grad);
            epoch_loss += loss * idx.len() as f64;
        }
        let train_loss = epoch_loss / examples.len() as f64;

        let head = LinearHead::from_f64(&params[..dim], params[dim]);
        let dev_pred: Vec<f64> = dev_features
            .iter()
            .map(|x| output(config.mode, head.logit(x)))
            .collect();
        let dev_metric = match config.selection_metric {
            SelectionMetric::DevPearson => pearson(&dev_pred, &dev_labels).ok(),
            SelectionMetric::DevSpearman => spearman(&dev_pred, &dev_labels).ok(),
            SelectionMetric::DevLoss => {
                let xs: Vec<&[f64]> = dev_features.iter().map(Vec::as_slice).collect();
                let w: Vec<f64> = head.weights.iter().map(|&w| f64::from(w)).collect();
                let (loss, _, _) = batch_loss_and_grad(config.mode, &w, f64::from(head.bias), &xs, &dev_labels);
                Some(loss).filter(|l| l.is_finite())
            }
        };
        log::info!(
            "epoch {epoch}: train_loss={train_loss:.6} dev_metric={}",
            dev_metric.map_or("undefined".to_string(), |m| format!("{m:.6}"))
        );
        log.push(EpochLog {
            epoch,
            train_loss,
            dev_metric,
        });
        let replace = match &best {
            None => true,
            Some((_, score, _)) => config.selection_metric.better(dev_metric, *score),
        };
        if replace {
            best = Some((epoch, dev_metric, head));
        }
    }

    let (best_epoch, dev_score, head) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        model: QualityModel {
            config: config.clone(),
            head,
            best_epoch,
            dev_score,
            metadata: BTreeMap::new(),
        },
        log,
    })
}

/// Scores for a corpus plus the dialogs that could not be scored.
#[derive(Debug, Clone, Default)]
pub struct CorpusScores {
    pub table: ScoreTable,
    pub failures: Vec<(String, String)>,
}

impl QualityModel {
    pub fn mode(&self) -> Mode {
        self.config.mode
    }

    pub fn check_encoder(&self, encoder: &dyn Encoder) -> Result<(), ModelError> {
        check_encoder(&self.config.encoder, encoder)
    }

    /// Score from pooled features: probability for classification, raw
    /// output for regression.
    pub fn score_features(&self, features: &[f64]) -> f64 {
        output(self.config.mode, self.head.logit(features))
    }

    pub fn predict_text(&self, encoder: &dyn Encoder, text: &str) -> Result<f64, ModelError> {
        self.check_encoder(encoder)?;
        Ok(self.score_features(encoder.encode(text)?.values()))
    }

    pub fn predict_turn(&self, encoder: &dyn Encoder, dialog: &Dialog, turn_index: u32) -> Result<f64, ModelError> {
        let ctx = serialize_context(dialog, turn_index, self.config.encoder.max_tokens)?;
        self.predict_text(encoder, &ctx.text)
    }

    /// Scores every turn of every dialog. A dialog that fails is recorded
    /// and skipped; rows come out ordered by (dialog_id, turn_index).
    pub fn predict_corpus(&self, encoder: &dyn Encoder, dialogs: &[Dialog]) -> Result<CorpusScores, ModelError> {
        self.check_encoder(encoder)?;
        let done = AtomicUsize::new(0);
        let total = dialogs.len();
        let results: Vec<Result<Vec<ScoreRow>, (String, String)>> = dialogs
            .par_iter()
            .map(|d| {
                let rows = d
                    .validate_structure()
                    .map_err(ModelError::from)
                    .and_then(|()| {
                        d.turns
                            .iter()
                            .map(|t| {
                                Ok(ScoreRow {
                                    dialog_id: d.dialog_id.clone(),
                                    turn_index: t.index,
                                    score: self.predict_turn(encoder, d, t.index)?,
                                })
                            })
                            .collect::<Result<Vec<_>, ModelError>>()
                    })
                    .map_err(|e| (d.dialog_id.clone(), e.to_string()));
                let n = done.fetch_add(1, Ordering::Relaxed) + 1;
                if n.is_multiple_of(100) || n == total {
                    log::info!("scored {n}/{total} dialogs");
                }
                rows
            })
            .collect();

        let mut out = CorpusScores::default();
        for r in results {
            match r {
                Ok(rows) => out.table.rows.extend(rows),
                Err((id, msg)) => {
                    log::warn!("dialog `{id}` not scored: {msg}");
                    out.failures.push((id, msg));
                }
            }
        }
        out.table.sort();
        Ok(out)
    }
}

const MAGIC: &[u8; 4] = b"TQCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct BlockInfo {
    name: String,
    len: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointHeader {
    format: String,
    config: ModelConfig,
    dimension: usize,
    best_epoch: usize,
    dev_score: Option<f64>,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
    blocks: Vec<BlockInfo>,
}

/// Writes `TQCK`, a little-endian u32 version, a u64 header length, the JSON
/// header, then the parameter blocks as little-endian f32.
pub fn save_model(model: &QualityModel, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let dim = model.head.weights.len();
    let header = CheckpointHeader {
        format: "turnqual-checkpoint".into(),
        config: model.config.clone(),
        dimension: dim,
        best_epoch: model.best_epoch,
        dev_score: model.dev_score,
        metadata: model.metadata.clone(),
        blocks: vec![
            BlockInfo {
                name: "head.weight".into(),
                len: dim,
            },
            BlockInfo {
                name: "head.bias".into(),
                len: 1,
            },
        ],
    };
    let json = serde_json::to_vec(&header).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    for v in model.head.weights.iter().chain(std::iter::once(&model.head.bias)) {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<QualityModel, ModelError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(ModelError::Checkpoint("bad magic bytes".into()));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != CHECKPOINT_VERSION {
        return Err(ModelError::VersionMismatch {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let header_len = u64::from_le_bytes(b8) as usize;
    let mut json = vec![0u8; header_len];
    r.read_exact(&mut json)?;
    let header: CheckpointHeader = serde_json::from_slice(&json).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    if header.dimension != header.config.encoder.dimension {
        return Err(ModelError::DimensionMismatch {
            expected: header.config.encoder.dimension,
            found: header.dimension,
        });
    }
    let mut blocks = Vec::with_capacity(header.blocks.len());
    for block in &header.blocks {
        let mut values = vec![0f32; block.len];
        for v in values.iter_mut() {
            r.read_exact(&mut b4)?;
            *v = f32::from_le_bytes(b4);
        }
        blocks.push((block.name.as_str(), values));
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(ModelError::Checkpoint(format!("{} trailing bytes", rest.len())));
    }
    let take = |name: &str| {
        blocks
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| v.clone())
            .ok_or_else(|| ModelError::Checkpoint(format!("missing block {name}")))
    };
    let weights = take("head.weight")?;
    if weights.len() != header.dimension {
        return Err(ModelError::DimensionMismatch {
            expected: header.dimension,
            found: weights.len(),
        });
    }
    let bias = take("head.bias")?;
    let [bias] = bias[..] else {
        return Err(ModelError::Checkpoint("bias block must hold one value".into()));
    };
    Ok(QualityModel {
        config: header.config,
        head: LinearHead { weights, bias },
        best_epoch: header.best_epoch,
        dev_score: header.dev_score,
        metadata: header.metadata,
    })
}

/// Loads a checkpoint and checks it against the encoder it will run with.
pub fn load_model_for(path: impl AsRef<Path>, encoder: &EncoderSpec) -> Result<QualityModel, ModelError> {
    let model = load_model(path)?;
    let spec = &model.config.encoder;
    if spec.dimension != encoder.dimension {
        return Err(ModelError::DimensionMismatch {
            expected: encoder.dimension,
            found: spec.dimension,
        });
    }
    if spec.adapter_id != encoder.adapter_id {
        return Err(ModelError::EncoderMismatch {
            expected: spec.adapter_id.clone(),
            found: encoder.adapter_id.clone(),
        });
    }
    Ok(model)
}
