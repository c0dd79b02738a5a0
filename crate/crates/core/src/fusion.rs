//! Color experiments: per-channel runs, feature-level luminance fusion
//! (`Y`, handled by the pipeline) and score-level fusion of per-channel
//! distance tensors.
//!
//! Score fusion adds raw distances with no per-channel normalization, so a
//! channel with a larger distance range carries more weight in the sum.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use thiserror::Error;

use crate::features::SourceChannel;
use crate::gallery::SubjectSamples;
use crate::image::RasterImage;
use crate::matching::{Metric, ScoreTensor};
use crate::pipeline::{channel_tensor, evaluate_tensor, Evaluation, PipelineConfig};
use crate::verification::DcfParams;
use crate::Error as CrateError;

#[derive(Debug, Error, PartialEq)]
pub enum FusionError {
    #[error("nothing to fuse")]
    Empty,
    #[error("tensor shapes differ: {0:?} vs {1:?}")]
    ShapeMismatch((usize, usize, usize), (usize, usize, usize)),
    #[error("tensors use different metrics ({0} vs {1})")]
    MetricMismatch(Metric, Metric),
    #[error("{tensors} tensors but {weights} weights")]
    WeightCount { tensors: usize, weights: usize },
    #[error("fusion weights must be finite and >= 0, got {0}")]
    BadWeight(f64),
    #[error("all fusion weights are zero")]
    ZeroWeights,
    #[error("invalid fusion spec {spec:?}: {reason}")]
    Parse { spec: String, reason: String },
    #[error("no score tensor for channel {0}")]
    MissingChannel(SourceChannel),
}

fn check_compatible(tensors: &[&ScoreTensor]) -> Result<(), FusionError> {
    let first = tensors.first().ok_or(FusionError::Empty)?;
    for t in &tensors[1..] {
        if t.shape() != first.shape() {
            return Err(FusionError::ShapeMismatch(first.shape(), t.shape()));
        }
        if t.metric() != first.metric() {
            return Err(FusionError::MetricMismatch(first.metric(), t.metric()));
        }
    }
    Ok(())
}

/// Cellwise sum.
pub fn fuse_scores_sum(tensors: &[&ScoreTensor]) -> Result<ScoreTensor, FusionError> {
    check_compatible(tensors)?;
    let mut scores = vec![0.0; tensors[0].scores().len()];
    for t in tensors {
        for (acc, s) in scores.iter_mut().zip(t.scores()) {
            *acc += s;
        }
    }
    Ok(ScoreTensor::from_parts_unchecked(tensors[0], scores))
}

/// Cellwise `sum_c w_c * s_c`.
pub fn fuse_scores_weighted(tensors: &[&ScoreTensor], weights: &[f64]) -> Result<ScoreTensor, FusionError> {
    check_compatible(tensors)?;
    if weights.len() != tensors.len() {
        return Err(FusionError::WeightCount {
            tensors: tensors.len(),
            weights: weights.len(),
        });
    }
    if let Some(&w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(FusionError::BadWeight(w));
    }
    if weights.iter().all(|&w| w == 0.0) {
        return Err(FusionError::ZeroWeights);
    }
    let mut scores = vec![0.0; tensors[0].scores().len()];
    for (t, &w) in tensors.iter().zip(weights) {
        for (acc, s) in scores.iter_mut().zip(t.scores()) {
            *acc += w * s;
        }
    }
    Ok(ScoreTensor::from_parts_unchecked(tensors[0], scores))
}

/// Which signal an experiment row evaluates.
///
/// Textual forms: a channel name (`GRAY`, `R`, `G`, `B`, `Y`),
/// `sum:R,G,B`, or `w:0.3R+0.59G+0.11B`.
#[derive(Debug, Clone, PartialEq)]
pub enum FusionSpec {
    Single(SourceChannel),
    Sum(Vec<SourceChannel>),
    Weighted(Vec<(f64, SourceChannel)>),
}

impl FusionSpec {
    /// Channels whose tensors this spec consumes, without duplicates.
    pub fn channels(&self) -> Vec<SourceChannel> {
        let mut out: Vec<SourceChannel> = match self {
            FusionSpec::Single(c) => vec![*c],
            FusionSpec::Sum(cs) => cs.clone(),
            FusionSpec::Weighted(ws) => ws.iter().map(|(_, c)| *c).collect(),
        };
        out.sort();
        out.dedup();
        out
    }

    pub fn fuse(&self, tensors: &BTreeMap<SourceChannel, ScoreTensor>) -> Result<ScoreTensor, FusionError> {
        let get = |c: &SourceChannel| tensors.get(c).ok_or(FusionError::MissingChannel(*c));
        match self {
            FusionSpec::Single(c) => get(c).cloned(),
            FusionSpec::Sum(cs) => {
                let ts = cs.iter().map(get).collect::<Result<Vec<_>, _>>()?;
                fuse_scores_sum(&ts)
            }
            FusionSpec::Weighted(ws) => {
                let ts = ws.iter().map(|(_, c)| get(c)).collect::<Result<Vec<_>, _>>()?;
                let weights: Vec<f64> = ws.iter().map(|(w, _)| *w).collect();
                fuse_scores_weighted(&ts, &weights)
            }
        }
    }
}

impl fmt::Display for FusionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FusionSpec::Single(c) => write!(f, "{c}"),
            FusionSpec::Sum(cs) => {
                let names: Vec<&str> = cs.iter().map(|c| c.as_str()).collect();
                write!(f, "sum:{}", names.join(","))
            }
            FusionSpec::Weighted(ws) => {
                let terms: Vec<String> = ws.iter().map(|(w, c)| format!("{w}{c}")).collect();
                write!(f, "w:{}", terms.join("+"))
            }
        }
    }
}

impl FromStr for FusionSpec {
    type Err = FusionError;

    fn from_str(spec: &str) -> Result<Self, Self::Err> {
        let fail = |reason: &str| FusionError::Parse {
            spec: spec.to_string(),
            reason: reason.to_string(),
        };
        let channel = |s: &str| {
            s.trim()
                .parse::<SourceChannel>()
                .map_err(|_| fail(&format!("unknown channel {:?}", s.trim())))
        };
        let text = spec.trim();
        if let Some(rest) = text.strip_prefix("sum:") {
            let cs = rest.split(',').map(channel).collect::<Result<Vec<_>, _>>()?;
            return Ok(FusionSpec::Sum(cs));
        }
        if let Some(rest) = text.strip_prefix("w:") {
            let mut terms = Vec::new();
            for term in rest.split('+') {
                let term = term.trim();
                let split = term
                    .rfind(|c: char| c.is_ascii_digit() || c == '.')
                    .map(|i| i + 1)
                    .ok_or_else(|| fail(&format!("term {term:?} has no weight")))?;
                let (w, c) = term.split_at(split);
                let w: f64 = w
                    .trim()
                    .trim_end_matches('*')
                    .parse()
                    .map_err(|_| fail(&format!("bad weight in {term:?}")))?;
                terms.push((w, channel(c.trim_start_matches('*'))?));
            }
            if terms.iter().any(|(w, _)| !(w.is_finite() && *w >= 0.0)) {
                return Err(fail("weights must be >= 0"));
            }
            if terms.iter().all(|(w, _)| *w == 0.0) {
                return Err(fail("weights are all zero"));
            }
            return Ok(FusionSpec::Weighted(terms));
        }
        Ok(FusionSpec::Single(channel(text)?))
    }
}

/// Evaluates several signal specs on one dataset, computing each underlying
/// channel tensor once.
pub fn evaluate_specs(
    images: &SubjectSamples<RasterImage>,
    config: &PipelineConfig,
    metric: Metric,
    specs: &[FusionSpec],
    params: &DcfParams,
) -> Result<Vec<(FusionSpec, ScoreTensor, Evaluation)>, CrateError> {
    let mut tensors = BTreeMap::new();
    for c in specs.iter().flat_map(FusionSpec::channels) {
        if let std::collections::btree_map::Entry::Vacant(slot) = tensors.entry(c) {
            slot.insert(channel_tensor(images, config, c, metric)?);
        }
    }
    specs
        .iter()
        .map(|spec| {
            let fused = spec.fuse(&tensors)?;
            let eval = evaluate_tensor(&fused, params)?;
            Ok((spec.clone(), fused, eval))
        })
        .collect()
}

/// `input,identification_rate,min_dcf` rows.
pub fn write_results_table<W: Write>(out: W, rows: &[(String, Evaluation)]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["input", "identification_rate", "min_dcf"])?;
    for (label, e) in rows {
        w.write_record([
            label.clone(),
            format!("{:.6}", e.identification.rate),
            format!("{:.6}", e.min_dcf.value),
        ])?;
    }
    w.flush()?;
    Ok(())
}
