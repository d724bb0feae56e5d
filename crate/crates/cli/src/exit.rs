//! Exit-code classification: 1 usage/config, 2 data validation, 3 runtime.

use turnqual::aggregate::AggregateError;
use turnqual::dialog::DialogError;
use turnqual::encoder::EncoderError;
use turnqual::eval::EvalError;
use turnqual::metrics::MetricsError;
use turnqual::model::ModelError;
use turnqual::scores::ScoreError;
use turnqual::weak::LabelError;

pub const USAGE: u8 = 1;
pub const DATA: u8 = 2;
pub const RUNTIME: u8 = 3;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code,
            error: error.into(),
        }
    }

    pub fn usage(error: impl Into<anyhow::Error>) -> Self {
        Failure::new(USAGE, error)
    }

    pub fn data(error: impl Into<anyhow::Error>) -> Self {
        Failure::new(DATA, error)
    }
}

pub trait ResultExt<T> {
    fn usage(self) -> Result<T, Failure>;
    fn data(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> ResultExt<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::new(USAGE, e))
    }
    fn data(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::new(DATA, e))
    }
    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::new(RUNTIME, e))
    }
}

fn dialog_code(e: &DialogError) -> u8 {
    match e {
        DialogError::Io { .. } => USAGE,
        _ => DATA,
    }
}

fn encoder_code(e: &EncoderError) -> u8 {
    match e {
        EncoderError::AdapterUnavailable(_) | EncoderError::InvalidSpec(_) | EncoderError::NotTrainable(_) => USAGE,
        EncoderError::TurnOutOfRange { .. } => DATA,
        _ => RUNTIME,
    }
}

macro_rules! classify {
    ($ty:ty, |$e:ident| $body:expr) => {
        impl From<$ty> for Failure {
            fn from($e: $ty) -> Self {
                let code = $body;
                Failure::new(code, $e)
            }
        }
    };
}

classify!(DialogError, |e| dialog_code(&e));
classify!(EncoderError, |e| encoder_code(&e));
classify!(LabelError, |e| match &e {
    LabelError::Provider { .. } => RUNTIME,
    LabelError::Io(_) => USAGE,
    LabelError::InvalidMode(_) => USAGE,
    _ => DATA,
});
classify!(ModelError, |e| match &e {
    ModelError::Config(_) => USAGE,
    ModelError::NonFiniteLoss { .. } | ModelError::Io(_) => RUNTIME,
    ModelError::Encoder(inner) => encoder_code(inner),
    ModelError::Dialog(inner) => dialog_code(inner),
    _ => DATA,
});
classify!(ScoreError, |e| match &e {
    ScoreError::Io(_) => USAGE,
    _ => DATA,
});
classify!(EvalError, |e| match &e {
    EvalError::Io { .. } => USAGE,
    EvalError::Scores(ScoreError::Io(_)) => USAGE,
    _ => DATA,
});
classify!(AggregateError, |_e| DATA);
classify!(MetricsError, |_e| DATA);
