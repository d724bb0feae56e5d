use thiserror::Error;

use crate::aggregate::AggregateError;
use crate::dialog::DialogError;
use crate::encoder::EncoderError;
use crate::eval::EvalError;
use crate::metrics::MetricsError;
use crate::model::ModelError;
use crate::scores::ScoreError;
use crate::weak::LabelError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Umbrella error for callers that drive several modules at once.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Dialog(#[from] DialogError),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Scores(#[from] ScoreError),
    #[error(transparent)]
    Aggregate(#[from] AggregateError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}
