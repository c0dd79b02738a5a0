//! DCT-based face recognition with verification-style evaluation.
//!
//! The crate reads PNM images, reduces them to a zigzag-ordered block of
//! low-frequency DCT coefficients, enrolls per-subject galleries, scores
//! probes against every gallery identity and reports identification rate,
//! DET curves, equal error rate and minimum detection cost. Score tensors
//! from different colour channels can be fused before evaluation.

pub mod dataset;
pub mod features;
pub mod fusion;
pub mod gallery;
pub mod image;
pub mod matching;
pub mod pipeline;
pub mod plot;
pub mod probit;
pub mod significance;
pub mod synth;
pub mod verification;

pub use dataset::{DatasetError, Manifest};
pub use features::{
    dct2, extract_features, idct2, zigzag_order, DctPlan, DctSpectrum, FeatureError, FeatureExtractor,
    FeatureVector, SourceChannel,
};
pub use fusion::{fuse_scores_sum, fuse_scores_weighted, FusionError, FusionSpec};
pub use gallery::{apply_split, Gallery, GalleryError, SplitSpec, SubjectSamples};
pub use image::{
    normalize, read_pnm, resize_bilinear, select_channel, to_luminance, write_pnm, ColorChannel, GrayPlane,
    ImageError, PnmError, RasterImage,
};
pub use matching::{
    build_score_tensor, identification_rate, IdentificationResult, MatchError, Metric, ScoreTensor,
};
pub use pipeline::{Evaluation, PipelineConfig};
pub use significance::{SignificanceError, SignificanceParams, SizingRule};
pub use synth::{SignalPlacement, SynthError, SynthSpec};
pub use verification::{DcfParams, DetPoint, MinDcf, TrialScores, VerifyError};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Gallery(#[from] GalleryError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Significance(#[from] SignificanceError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("subject {subject}: {source}")]
    Subject {
        subject: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn for_subject(self, subject: &str) -> Self {
        Error::Subject {
            subject: subject.to_string(),
            source: Box::new(self),
        }
    }

    /// The underlying error with any subject context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Subject { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
