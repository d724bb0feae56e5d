//! TOML run configuration, provenance hashing and output preambles.
//!
//! Command-line flags always win over the file. Relative paths in the file
//! resolve against the file's directory.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Deserialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use turnqual::dialog::LabelScale;
use turnqual::encoder::PretrainedConfig;

use crate::exit::{Failure, ResultExt};

/// Environment variable naming the encoder cache directory.
pub const CACHE_DIR_ENV: &str = "TURNQUAL_CACHE_DIR";

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub label: LabelSection,
    #[serde(default)]
    pub encoder: EncoderSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(skip)]
    base: PathBuf,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub dialogs: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub label_scale: Option<LabelScale>,
    pub split: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelSection {
    pub mode: Option<String>,
    pub provider: Option<String>,
    pub lexicon: Option<PathBuf>,
    pub command: Option<String>,
    #[serde(default)]
    pub args: Vec<String>,
    pub stop_phrases: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderSection {
    pub adapter: Option<String>,
    pub dimension: Option<usize>,
    pub max_tokens: Option<usize>,
    pub pretrained: Option<PretrainedConfig>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub mode: Option<String>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub selection_metric: Option<String>,
    pub train_split: Option<String>,
    pub dev_split: Option<String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))
            .usage()?;
        let mut cfg: FileConfig = toml::from_str(&text)
            .with_context(|| format!("invalid config {}", path.display()))
            .usage()?;
        cfg.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// Resolves a path taken from the file.
    pub fn path(&self, p: &Option<PathBuf>) -> Option<PathBuf> {
        p.as_ref()
            .map(|p| if p.is_absolute() { p.clone() } else { self.base.join(p) })
    }

    /// Pretrained adapter settings; the cache directory comes from the
    /// environment when set.
    pub fn pretrained(&self) -> Option<PretrainedConfig> {
        let mut p = self.encoder.pretrained.clone()?;
        if let Some(dir) = std::env::var_os(CACHE_DIR_ENV) {
            p.cache_dir = Some(PathBuf::from(dir));
        } else if let Some(dir) = &p.cache_dir {
            if dir.is_relative() {
                p.cache_dir = Some(self.base.join(dir));
            }
        }
        Some(p)
    }
}

/// First flag, then file value, then default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

pub fn required_path(flag: &Option<PathBuf>, file: Option<PathBuf>, what: &str) -> Result<PathBuf, Failure> {
    let p = flag
        .clone()
        .or(file)
        .ok_or_else(|| Failure::usage(anyhow::anyhow!("missing --{what}")))?;
    if !p.exists() {
        return Err(Failure::usage(anyhow::anyhow!(
            "{what} path {} does not exist",
            p.display()
        )));
    }
    Ok(p)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Stands in for an input path in hashed settings, so that provenance tracks
/// file contents rather than where the file lives.
pub fn file_digest(path: &Path) -> Result<Value, Failure> {
    let bytes = fs::read(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .usage()?;
    Ok(json!({ "sha256": sha256_hex(&bytes) }))
}

/// Provenance shared by every artifact a command writes.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub command: &'static str,
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    /// `settings` holds every effective setting that can change outputs.
    pub fn new(command: &'static str, seed: u64, settings: Value) -> Self {
        let canonical = json!({ "command": command, "seed": seed, "settings": settings });
        Provenance {
            command,
            config_hash: sha256_hex(canonical.to_string().as_bytes()),
            seed,
        }
    }

    pub fn header(&self) -> String {
        format!(
            "turnqual {} command={} config_sha256={} seed={}",
            turnqual::VERSION,
            self.command,
            self.config_hash,
            self.seed
        )
    }

    pub fn json(&self) -> Value {
        json!({
            "tool": "turnqual",
            "version": turnqual::VERSION,
            "command": self.command,
            "config_sha256": self.config_hash,
            "seed": self.seed,
        })
    }
}

pub fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create {}", dir.display()))
            .runtime()?;
    }
    let f = File::create(path)
        .with_context(|| format!("cannot create {}", path.display()))
        .runtime()?;
    Ok(BufWriter::new(f))
}

pub fn finish(mut w: BufWriter<File>, path: &Path) -> Result<(), Failure> {
    w.flush()
        .with_context(|| format!("cannot write {}", path.display()))
        .runtime()
}
