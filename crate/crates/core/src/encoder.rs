//! Context serialization and text encoders.
//!
//! A turn is scored from `u_1 r_1 ... u_i r_i` rendered with `<usr>`/`<sys>`
//! speaker markers. Encoders map that text to a fixed-width pooled vector; the
//! quality head sits on top.

use std::collections::BTreeMap;
use std::io::BufReader;
use std::path::PathBuf;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dialog::Dialog;
use crate::weak::line_exchange;

pub const USER_MARKER: &str = "<usr>";
pub const SYSTEM_MARKER: &str = "<sys>";
pub const DEFAULT_MAX_TOKENS: usize = 512;
pub const HASH_BAG_ID: &str = "hash-bag";
pub const PRETRAINED_ID: &str = "pretrained";

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("dialog `{dialog_id}` has no turn {turn}")]
    TurnOutOfRange { dialog_id: String, turn: u32 },
    #[error("encoder adapter `{0}` is not registered")]
    AdapterUnavailable(String),
    #[error("invalid encoder spec: {0}")]
    InvalidSpec(String),
    #[error("encoder produced {got} values, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("encoder produced a non-finite value")]
    NonFinite,
    #[error("encoder `{adapter}` failed: {message}")]
    Process { adapter: String, message: String },
    #[error("encoder `{0}` cannot be fine-tuned; set trainable = false")]
    NotTrainable(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub adapter_id: String,
    pub dimension: usize,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: usize,
    #[serde(default)]
    pub trainable: bool,
}

fn default_max_tokens() -> usize {
    DEFAULT_MAX_TOKENS
}

impl EncoderSpec {
    pub fn hash_bag(dimension: usize) -> Self {
        EncoderSpec {
            adapter_id: HASH_BAG_ID.into(),
            dimension,
            max_tokens: DEFAULT_MAX_TOKENS,
            trainable: false,
        }
    }

    pub fn validate(&self) -> Result<(), EncoderError> {
        if self.dimension == 0 {
            return Err(EncoderError::InvalidSpec("dimension must be positive".into()));
        }
        if self.max_tokens == 0 {
            return Err(EncoderError::InvalidSpec("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PooledVector(Vec<f64>);

impl PooledVector {
    pub fn new(values: Vec<f64>, spec: &EncoderSpec) -> Result<Self, EncoderError> {
        if values.len() != spec.dimension {
            return Err(EncoderError::DimensionMismatch {
                expected: spec.dimension,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EncoderError::NonFinite);
        }
        Ok(PooledVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SerializedContext {
    pub text: String,
    /// Older utterances dropped to fit the budget.
    pub dropped_utterances: usize,
    /// `r_i` alone exceeded the budget and lost its tail.
    pub response_truncated: bool,
}

/// Renders `u_1 r_1 ... u_i r_i` for the turn with index `turn_index`,
/// dropping the oldest utterances until at most `max_tokens` whitespace
/// tokens (markers included) remain. Later turns are never read.
pub fn serialize_context(
    dialog: &Dialog,
    turn_index: u32,
    max_tokens: usize,
) -> Result<SerializedContext, EncoderError> {
    let pos = dialog
        .position(turn_index)
        .ok_or_else(|| EncoderError::TurnOutOfRange {
            dialog_id: dialog.dialog_id.clone(),
            turn: turn_index,
        })?;
    let mut segments: Vec<Vec<&str>> = Vec::with_capacity(2 * (pos + 1));
    for turn in &dialog.turns[..=pos] {
        for (marker, text) in [
            (USER_MARKER, &turn.user_utterance),
            (SYSTEM_MARKER, &turn.system_response),
        ] {
            let mut seg = vec![marker];
            seg.extend(text.split_whitespace());
            segments.push(seg);
        }
    }

    let mut total: usize = segments.iter().map(Vec::len).sum();
    let mut first = 0;
    while total > max_tokens && first + 1 < segments.len() {
        total -= segments[first].len();
        first += 1;
    }
    let mut kept = segments.split_off(first);
    let mut response_truncated = false;
    if total > max_tokens {
        let last = kept.last_mut().expect("response segment");
        last.truncate(max_tokens.max(1));
        response_truncated = true;
    }
    Ok(SerializedContext {
        text: kept.iter().flatten().copied().collect::<Vec<_>>().join(" "),
        dropped_utterances: first,
        response_truncated,
    })
}

pub trait Encoder: Send + Sync {
    fn spec(&self) -> &EncoderSpec;

    fn encode(&self, text: &str) -> Result<PooledVector, EncoderError>;
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
pub const HASH_BAG_SEED: u64 = 0x7475_726e_7175_616c;

fn stable_hash(seed: u64, parts: &[&str]) -> u64 {
    let mut h = FNV_OFFSET ^ seed;
    for (i, part) in parts.iter().enumerate() {
        if i > 0 {
            h ^= 0x1f;
            h = h.wrapping_mul(FNV_PRIME);
        }
        for b in part.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    // splitmix64 finalizer to spread low-entropy FNV output
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// Feature-hashed bag of lowercased unigrams and unordered adjacent pairs,
/// signed-hashed into `dimension` buckets and L2-normalized. Has no
/// parameters and gives the same vector in every process.
#[derive(Debug, Clone)]
pub struct HashBagEncoder {
    spec: EncoderSpec,
    seed: u64,
}

impl HashBagEncoder {
    pub fn new(spec: EncoderSpec) -> Result<Self, EncoderError> {
        spec.validate()?;
        if spec.trainable {
            return Err(EncoderError::NotTrainable(spec.adapter_id));
        }
        Ok(HashBagEncoder {
            spec,
            seed: HASH_BAG_SEED,
        })
    }

    fn add(&self, out: &mut [f64], parts: &[&str]) {
        let h = stable_hash(self.seed, parts);
        let bucket = (h % out.len() as u64) as usize;
        out[bucket] += if h >> 63 == 0 { 1.0 } else { -1.0 };
    }
}

impl Encoder for HashBagEncoder {
    fn spec(&self) -> &EncoderSpec {
        &self.spec
    }

    fn encode(&self, text: &str) -> Result<PooledVector, EncoderError> {
        let tokens: Vec<String> = text.split_whitespace().map(str::to_lowercase).collect();
        let mut out = vec![0.0; self.spec.dimension];
        for tok in &tokens {
            self.add(&mut out, &[tok]);
        }
        for pair in tokens.windows(2) {
            let (a, b) = if pair[0] <= pair[1] {
                (&pair[0], &pair[1])
            } else {
                (&pair[1], &pair[0])
            };
            self.add(&mut out, &[a, b]);
        }
        let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            out.iter_mut().for_each(|v| *v /= norm);
        }
        PooledVector::new(out, &self.spec)
    }
}

/// Where a pretrained transformer lives and how to run it.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PretrainedConfig {
    /// Model name handed to the encoder process, e.g. `bert-base-uncased`.
    pub model_name: String,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    /// Program speaking the line protocol: one text per stdin line in, one
    /// line of whitespace-separated floats out.
    pub command: String,
    #[serde(default)]
    pub args: Vec<String>,
}

struct EncoderProcess {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

/// Frozen pretrained encoder running in a child process. The process gets
/// `TURNQUAL_MODEL_NAME`, `TURNQUAL_CACHE_DIR`, `TURNQUAL_DIMENSION` and
/// `TURNQUAL_MAX_TOKENS` in its environment.
pub struct ExternalEncoder {
    spec: EncoderSpec,
    process: Mutex<EncoderProcess>,
}

impl ExternalEncoder {
    pub fn spawn(spec: EncoderSpec, config: &PretrainedConfig) -> Result<Self, EncoderError> {
        spec.validate()?;
        if spec.trainable {
            return Err(EncoderError::NotTrainable(spec.adapter_id));
        }
        let mut cmd = Command::new(&config.command);
        cmd.args(&config.args)
            .env("TURNQUAL_MODEL_NAME", &config.model_name)
            .env("TURNQUAL_DIMENSION", spec.dimension.to_string())
            .env("TURNQUAL_MAX_TOKENS", spec.max_tokens.to_string())
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit());
        if let Some(dir) = &config.cache_dir {
            cmd.env("TURNQUAL_CACHE_DIR", dir);
        }
        let mut child = cmd.spawn().map_err(|e| EncoderError::Process {
            adapter: spec.adapter_id.clone(),
            message: format!("cannot start `{}`: {e}", config.command),
        })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(ExternalEncoder {
            spec,
            process: Mutex::new(EncoderProcess { child, stdin, stdout }),
        })
    }
}

impl Encoder for ExternalEncoder {
    fn spec(&self) -> &EncoderSpec {
        &self.spec
    }

    fn encode(&self, text: &str) -> Result<PooledVector, EncoderError> {
        let fail = |message: String| EncoderError::Process {
            adapter: self.spec.adapter_id.clone(),
            message,
        };
        let mut guard = self.process.lock().map_err(|_| fail("lock poisoned".into()))?;
        let EncoderProcess { stdin, stdout, .. } = &mut *guard;
        let reply = line_exchange(stdin, stdout, text).map_err(fail)?;
        let values = reply
            .split_whitespace()
            .map(|v| v.parse::<f64>().map_err(|_| fail(format!("unparseable value {v:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        PooledVector::new(values, &self.spec)
    }
}

impl Drop for ExternalEncoder {
    fn drop(&mut self) {
        if let Ok(p) = self.process.get_mut() {
            let _ = p.child.kill();
            let _ = p.child.wait();
        }
    }
}

pub type EncoderFactory = Box<dyn Fn(&EncoderSpec) -> Result<Box<dyn Encoder>, EncoderError> + Send + Sync>;

/// Encoder constructors keyed by adapter id.
pub struct AdapterRegistry {
    factories: BTreeMap<String, EncoderFactory>,
}

impl Default for AdapterRegistry {
    fn default() -> Self {
        let mut r = AdapterRegistry::empty();
        r.register(
            HASH_BAG_ID,
            Box::new(|spec| Ok(Box::new(HashBagEncoder::new(spec.clone())?))),
        );
        r
    }
}

impl AdapterRegistry {
    pub fn empty() -> Self {
        AdapterRegistry {
            factories: BTreeMap::new(),
        }
    }

    /// Default adapters plus the pretrained adapter under [`PRETRAINED_ID`].
    pub fn with_pretrained(config: PretrainedConfig) -> Self {
        let mut r = AdapterRegistry::default();
        r.register(
            PRETRAINED_ID,
            Box::new(move |spec| Ok(Box::new(ExternalEncoder::spawn(spec.clone(), &config)?))),
        );
        r
    }

    pub fn register(&mut self, adapter_id: impl Into<String>, factory: EncoderFactory) {
        self.factories.insert(adapter_id.into(), factory);
    }

    pub fn adapters(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn build(&self, spec: &EncoderSpec) -> Result<Box<dyn Encoder>, EncoderError> {
        spec.validate()?;
        let factory = self
            .factories
            .get(&spec.adapter_id)
            .ok_or_else(|| EncoderError::AdapterUnavailable(spec.adapter_id.clone()))?;
        factory(spec)
    }

    /// One-shot encode; builds the adapter for this call.
    pub fn encode(&self, text: &str, spec: &EncoderSpec) -> Result<PooledVector, EncoderError> {
        self.build(spec)?.encode(text)
    }
}
