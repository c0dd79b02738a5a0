use std::path::Path;

use facedct::gallery::GalleryError;
use facedct::synth::SynthError;
use facedct::Error;
use thiserror::Error;

/// Failure classes with stable process exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Data(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Data(format!("{}: {err}", path.display()))
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        let msg = err.to_string();
        match err.root() {
            Error::Gallery(GalleryError::InvalidSplit(_)) => CliError::Validation(msg),
            Error::Synth(SynthError::Io { .. }) => CliError::Data(msg),
            Error::Image(_) | Error::Dataset(_) | Error::Gallery(_) | Error::Match(_) => CliError::Data(msg),
            Error::Feature(_) | Error::Verify(_) | Error::Significance(_) | Error::Fusion(_) | Error::Synth(_) => {
                CliError::Validation(msg)
            }
            Error::Subject { .. } => CliError::Internal(msg),
        }
    }
}

macro_rules! lift {
    ($($ty:ty),*) => {
        $(impl From<$ty> for CliError {
            fn from(err: $ty) -> Self {
                Error::from(err).into()
            }
        })*
    };
}

lift!(
    facedct::ImageError,
    facedct::DatasetError,
    facedct::FeatureError,
    GalleryError,
    facedct::MatchError,
    facedct::VerifyError,
    facedct::SignificanceError,
    facedct::FusionError,
    SynthError
);

impl From<serde_json::Error> for CliError {
    fn from(err: serde_json::Error) -> Self {
        CliError::Internal(err.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(err: csv::Error) -> Self {
        CliError::Data(err.to_string())
    }
}
