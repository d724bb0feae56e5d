//! Reference-free turn-quality estimation for open-domain dialog.
//!
//! The crate trains a linear head over pooled text-encoder features to score
//! system responses. Training targets come either from third-party turn
//! annotations or from weak signals read off the *next* user utterance
//! (sentiment valence plus whether the user stopped the conversation).
//! Turn scores are mean-aggregated into dialog scores and validated against
//! human judgments with Pearson/Spearman correlation; annotation quality is
//! summarised with Krippendorff's alpha.
//!
//! Modules, bottom-up:
//!
//! * [`dialog`]: dialogs, turns, manifests, JSONL ingestion and splits.
//! * [`weak`]: sentiment providers, stop detection and label construction.
//! * [`encoder`]: context serialization and encoder adapters.
//! * [`model`]: the quality head, training, inference and checkpoints.
//! * [`scores`]: per-turn score tables shared by the model and the harness.
//! * [`aggregate`]: turn-score to dialog-score aggregation.
//! * [`metrics`]: correlation, agreement and majority voting.
//! * [`eval`]: end-to-end evaluation reports.
//! * [`synth`]: seeded synthetic corpora with planted turn quality.

pub mod aggregate;
pub mod dialog;
pub mod encoder;
mod error;
pub mod eval;
pub mod metrics;
pub mod model;
pub mod scores;
pub mod synth;
pub mod weak;

pub use error::{Error, Result};

/// Tool version recorded in every output artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
