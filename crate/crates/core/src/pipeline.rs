//! End-to-end glue: image -> signal plane -> canonical window -> features,
//! and dataset -> gallery + probes -> score tensor -> evaluation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::features::{FeatureExtractor, FeatureVector, SourceChannel};
use crate::gallery::{apply_split, Gallery, SplitSpec, SubjectSamples};
use crate::image::{normalize, resize_bilinear, select_channel, to_luminance, ColorChannel, ImageError, RasterImage};
use crate::matching::{build_score_tensor, identification_rate, IdentificationResult, Metric, ScoreTensor};
use crate::verification::{det_curve, eer_from_curve, min_dcf_from_curve, split_intra_inter, DcfParams, MinDcf};
use crate::Error;

pub const DEFAULT_WINDOW: usize = 64;
pub const DEFAULT_DIM: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub window: usize,
    pub dim: usize,
    pub split: SplitSpec,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
            dim: DEFAULT_DIM,
            split: SplitSpec::orl(),
        }
    }
}

impl PipelineConfig {
    pub fn extractor(&self) -> Result<FeatureExtractor, Error> {
        Ok(FeatureExtractor::new(self.window, self.dim)?)
    }
}

/// Single-channel raster carrying `channel`. Gray input only yields `Gray`;
/// RGB input yields one of its planes or the luminance image (`Y`).
pub fn signal_image(img: &RasterImage, channel: SourceChannel) -> Result<RasterImage, ImageError> {
    let color = |c| select_channel(img, c);
    match channel {
        SourceChannel::Gray if img.channels() == 1 => Ok(img.clone()),
        SourceChannel::Gray => Err(ImageError::ChannelCount {
            expected: 1,
            found: img.channels(),
        }),
        SourceChannel::R => color(ColorChannel::Red),
        SourceChannel::G => color(ColorChannel::Green),
        SourceChannel::B => color(ColorChannel::Blue),
        SourceChannel::Y => to_luminance(img),
    }
}

pub fn image_features(
    img: &RasterImage,
    channel: SourceChannel,
    extractor: &FeatureExtractor,
) -> Result<FeatureVector, Error> {
    let plane = normalize(&signal_image(img, channel)?)?;
    let window = extractor.window();
    let plane = if plane.width() == window && plane.height() == window {
        plane
    } else {
        resize_bilinear(&plane, window, window)?
    };
    Ok(extractor.extract(&plane, channel)?)
}

/// Features for every image, labelled with their subject. Runs in parallel;
/// output order follows input order.
pub fn extract_all(
    images: &SubjectSamples<RasterImage>,
    channel: SourceChannel,
    extractor: &FeatureExtractor,
) -> Result<SubjectSamples<FeatureVector>, Error> {
    images
        .iter()
        .map(|(id, list)| {
            let vectors = list
                .par_iter()
                .map(|img| image_features(img, channel, extractor).map(|v| v.with_subject(id.as_str())))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| e.for_subject(id))?;
            Ok((id.clone(), vectors))
        })
        .collect()
}

pub fn enroll_all(train: &SubjectSamples<FeatureVector>) -> Result<Gallery, Error> {
    let mut gallery = Gallery::new();
    for (id, list) in train {
        for v in list {
            gallery.enroll(id, v.clone())?;
        }
    }
    Ok(gallery)
}

/// Splits the dataset, enrolls the training images and scores the test
/// images for one signal channel.
pub fn channel_tensor(
    images: &SubjectSamples<RasterImage>,
    config: &PipelineConfig,
    channel: SourceChannel,
    metric: Metric,
) -> Result<ScoreTensor, Error> {
    let extractor = config.extractor()?;
    let (train, test) = apply_split(images, &config.split)?;
    let gallery = enroll_all(&extract_all(&train, channel, &extractor)?)?;
    let probes = extract_all(&test, channel, &extractor)?;
    Ok(build_score_tensor(&probes, &gallery, metric)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub identification: IdentificationResult,
    pub eer: f64,
    pub min_dcf: MinDcf,
    pub genuine_trials: usize,
    pub impostor_trials: usize,
}

pub fn evaluate_tensor(tensor: &ScoreTensor, params: &DcfParams) -> Result<Evaluation, Error> {
    params.validate()?;
    let trials = split_intra_inter(tensor)?;
    let curve = det_curve(&trials);
    Ok(Evaluation {
        identification: identification_rate(tensor),
        eer: eer_from_curve(&curve),
        min_dcf: min_dcf_from_curve(&curve, params),
        genuine_trials: trials.genuine().len(),
        impostor_trials: trials.impostor().len(),
    })
}

/// One row of a per-signal results table: extract on `channel` (luminance
/// for `Y`), enroll, score and evaluate.
pub fn run_channel_pipeline(
    images: &SubjectSamples<RasterImage>,
    config: &PipelineConfig,
    channel: SourceChannel,
    metric: Metric,
    params: &DcfParams,
) -> Result<Evaluation, Error> {
    evaluate_tensor(&channel_tensor(images, config, channel, metric)?, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signal_selection_rules() {
        let gray = RasterImage::new(1, 1, 1, 255, vec![5]).unwrap();
        let rgb = RasterImage::new(1, 1, 3, 255, vec![100, 0, 0]).unwrap();
        assert_eq!(signal_image(&gray, SourceChannel::Gray).unwrap(), gray);
        assert!(signal_image(&gray, SourceChannel::R).is_err());
        assert!(signal_image(&rgb, SourceChannel::Gray).is_err());
        assert_eq!(signal_image(&rgb, SourceChannel::Y).unwrap().samples(), &[30]);
        assert_eq!(signal_image(&rgb, SourceChannel::R).unwrap().samples(), &[100]);
    }

    #[test]
    fn features_resize_to_window() {
        let img = RasterImage::new(7, 9, 1, 255, (0..63).map(|v| v * 4).collect()).unwrap();
        let ex = FeatureExtractor::new(8, 10).unwrap();
        let v = image_features(&img, SourceChannel::Gray, &ex).unwrap();
        assert_eq!(v.dim(), 10);
        assert_eq!(v.channel(), SourceChannel::Gray);
    }
}
