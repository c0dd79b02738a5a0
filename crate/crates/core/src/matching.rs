//! Template distances, the probe x model x trial score tensor, and rank-1
//! identification.
//!
//! Scores are distances: smaller means closer. A probe is identified
//! correctly when its own subject's cell is the strict row minimum; any tie
//! with another subject counts as an error.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{format_f64, FeatureVector, SourceChannel};
use crate::gallery::{Gallery, SubjectSamples};

#[derive(Debug, Error, PartialEq)]
pub enum MatchError {
    #[error("vector dimensions differ ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("probe channel {probe} does not match gallery channel {gallery}")]
    ChannelMismatch {
        probe: SourceChannel,
        gallery: SourceChannel,
    },
    #[error("subject has no templates")]
    EmptyTemplates,
    #[error("probe subject {0:?} is not enrolled in the gallery")]
    UnknownSubject(String),
    #[error("subject {subject:?} has {found} probes, expected {expected} like the others")]
    RaggedTrials {
        subject: String,
        expected: usize,
        found: usize,
    },
    #[error("no probes supplied")]
    NoProbes,
    #[error("invalid score tensor: {0}")]
    InvalidTensor(String),
    #[error("unknown metric {0:?} (expected MSE or MAD)")]
    UnknownMetric(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Metric {
    /// Sum of squared differences.
    Mse,
    /// Sum of absolute differences.
    Mad,
}

impl Metric {
    pub fn eval(self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), y.len());
        match self {
            Metric::Mse => x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum(),
            Metric::Mad => x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum(),
        }
    }

    pub fn distance(self, x: &FeatureVector, y: &FeatureVector) -> Result<f64, MatchError> {
        if x.dim() != y.dim() {
            return Err(MatchError::DimensionMismatch(x.dim(), y.dim()));
        }
        Ok(self.eval(x.coeffs(), y.coeffs()))
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Mse => "MSE",
            Metric::Mad => "MAD",
        })
    }
}

impl FromStr for Metric {
    type Err = MatchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "MSE" => Ok(Metric::Mse),
            "MAD" => Ok(Metric::Mad),
            _ => Err(MatchError::UnknownMetric(s.to_string())),
        }
    }
}

pub fn mse(x: &FeatureVector, y: &FeatureVector) -> Result<f64, MatchError> {
    Metric::Mse.distance(x, y)
}

pub fn mad(x: &FeatureVector, y: &FeatureVector) -> Result<f64, MatchError> {
    Metric::Mad.distance(x, y)
}

/// Distance to the nearest of a subject's templates.
pub fn person_score(
    probe: &FeatureVector,
    templates: &[FeatureVector],
    metric: Metric,
) -> Result<f64, MatchError> {
    if templates.is_empty() {
        return Err(MatchError::EmptyTemplates);
    }
    templates.iter().try_fold(f64::INFINITY, |best, t| {
        Ok(best.min(metric.distance(probe, t)?))
    })
}

/// `s[i][j][k]`: distance from trial `k` of probe subject `i` to model
/// subject `j`.
///
/// Columns list the probe subjects first, in row order, followed by any
/// enrolled subjects that have no probes. Row `i`'s own model is therefore
/// always column `i`, and the genuine cells are exactly the diagonal even
/// when the gallery holds more subjects than the probe set.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTensor {
    rows: usize,
    cols: usize,
    trials: usize,
    metric: Metric,
    subject_ids: Vec<String>,
    scores: Vec<f64>,
}

impl ScoreTensor {
    pub fn new(
        rows: usize,
        cols: usize,
        trials: usize,
        metric: Metric,
        scores: Vec<f64>,
    ) -> Result<Self, MatchError> {
        if rows == 0 || trials == 0 {
            return Err(MatchError::InvalidTensor("empty tensor".into()));
        }
        if cols < rows {
            return Err(MatchError::InvalidTensor(format!(
                "{cols} model subjects cannot cover {rows} probe subjects"
            )));
        }
        if scores.len() != rows * cols * trials {
            return Err(MatchError::InvalidTensor(format!(
                "{} scores for a {rows}x{cols}x{trials} tensor",
                scores.len()
            )));
        }
        if let Some(bad) = scores.iter().find(|s| !s.is_finite() || **s < 0.0) {
            return Err(MatchError::InvalidTensor(format!(
                "score {bad} is negative or non-finite"
            )));
        }
        Ok(Self {
            rows,
            cols,
            trials,
            metric,
            subject_ids: (0..cols).map(|j| j.to_string()).collect(),
            scores,
        })
    }

    /// Square `n x n x trials` tensor.
    pub fn square(n: usize, trials: usize, metric: Metric, scores: Vec<f64>) -> Result<Self, MatchError> {
        Self::new(n, n, trials, metric, scores)
    }

    pub fn with_subject_ids(mut self, ids: Vec<String>) -> Result<Self, MatchError> {
        if ids.len() != self.cols {
            return Err(MatchError::InvalidTensor(format!(
                "{} subject ids for {} columns",
                ids.len(),
                self.cols
            )));
        }
        self.subject_ids = ids;
        Ok(self)
    }

    pub fn probe_subjects(&self) -> usize {
        self.rows
    }

    pub fn model_subjects(&self) -> usize {
        self.cols
    }

    pub fn trials(&self) -> usize {
        self.trials
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn subject_ids(&self) -> &[String] {
        &self.subject_ids
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.rows, self.cols, self.trials)
    }

    #[inline]
    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.cols + j) * self.trials + k
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.scores[self.index(i, j, k)]
    }

    pub fn genuine_count(&self) -> usize {
        self.rows * self.trials
    }

    pub fn impostor_count(&self) -> usize {
        self.rows * (self.cols - 1) * self.trials
    }

    /// Applies `f` to every cell; the result must still be a valid tensor.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self, MatchError> {
        let scores = self.scores.iter().map(|&s| f(s)).collect();
        Ok(Self::new(self.rows, self.cols, self.trials, self.metric, scores)?
            .with_subject_ids(self.subject_ids.clone())
            .expect("same column count"))
    }

    pub(crate) fn from_parts_unchecked(template: &ScoreTensor, scores: Vec<f64>) -> Self {
        Self {
            scores,
            ..template.clone()
        }
    }

    /// Writes `i,j,k,score` rows with a header line.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "j", "k", "score"])?;
        for i in 0..self.rows {
            for j in 0..self.cols {
                for k in 0..self.trials {
                    w.write_record([
                        i.to_string(),
                        j.to_string(),
                        k.to_string(),
                        format_f64(self.get(i, j, k)),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the `i,j,k,score` format. Every cell of the implied
    /// `(max i + 1) x (max j + 1) x (max k + 1)` box must appear exactly once.
    pub fn read_csv<R: Read>(input: R, metric: Metric) -> Result<Self, MatchError> {
        let bad = |m: String| MatchError::InvalidTensor(m);
        let mut reader = csv::Reader::from_reader(input);
        let mut cells = Vec::new();
        for (n, record) in reader.records().enumerate() {
            let record = record.map_err(|e| bad(e.to_string()))?;
            if record.len() != 4 {
                return Err(bad(format!("row {}: expected 4 fields", n + 2)));
            }
            let idx = |f: usize| {
                record[f]
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| bad(format!("row {}: bad index {:?}", n + 2, &record[f])))
            };
            let score: f64 = record[3]
                .trim()
                .parse()
                .map_err(|_| bad(format!("row {}: bad score {:?}", n + 2, &record[3])))?;
            cells.push((idx(0)?, idx(1)?, idx(2)?, score));
        }
        if cells.is_empty() {
            return Err(bad("no score rows".into()));
        }
        let rows = cells.iter().map(|c| c.0).max().unwrap() + 1;
        let cols = cells.iter().map(|c| c.1).max().unwrap() + 1;
        let trials = cells.iter().map(|c| c.2).max().unwrap() + 1;
        let total = rows * cols * trials;
        if cells.len() != total {
            return Err(bad(format!("{} rows for a {rows}x{cols}x{trials} tensor", cells.len())));
        }
        let mut scores = vec![f64::NAN; total];
        for (i, j, k, s) in cells {
            let slot = &mut scores[(i * cols + j) * trials + k];
            if !slot.is_nan() {
                return Err(bad(format!("duplicate cell ({i},{j},{k})")));
            }
            *slot = s;
        }
        Self::new(rows, cols, trials, metric, scores)
    }
}

/// Scores every probe against every enrolled subject.
///
/// All probe subjects must be enrolled and have the same number of probes.
/// Cells are computed in parallel; the result is identical to sequential
/// evaluation.
pub fn build_score_tensor(
    probes: &SubjectSamples<FeatureVector>,
    gallery: &Gallery,
    metric: Metric,
) -> Result<ScoreTensor, MatchError> {
    let trials = probes.values().next().map(Vec::len).ok_or(MatchError::NoProbes)?;
    if trials == 0 {
        return Err(MatchError::NoProbes);
    }
    let dim = gallery.feature_dim().ok_or(MatchError::EmptyTemplates)?;
    let channel = gallery.channel().ok_or(MatchError::EmptyTemplates)?;
    for (id, list) in probes {
        if gallery.templates(id).is_none() {
            return Err(MatchError::UnknownSubject(id.clone()));
        }
        if list.len() != trials {
            return Err(MatchError::RaggedTrials {
                subject: id.clone(),
                expected: trials,
                found: list.len(),
            });
        }
        for p in list {
            if p.dim() != dim {
                return Err(MatchError::DimensionMismatch(p.dim(), dim));
            }
            if p.channel() != channel {
                return Err(MatchError::ChannelMismatch {
                    probe: p.channel(),
                    gallery: channel,
                });
            }
        }
    }

    let probe_ids: BTreeSet<&str> = probes.keys().map(String::as_str).collect();
    let columns: Vec<&str> = probe_ids
        .iter()
        .copied()
        .chain(gallery.subject_ids().filter(|id| !probe_ids.contains(id)))
        .collect();
    let models: Vec<&[FeatureVector]> = columns
        .iter()
        .map(|id| gallery.templates(id).expect("column ids come from the gallery"))
        .collect();

    let rows = probes.len();
    let cols = columns.len();
    let probe_list: Vec<&FeatureVector> = probes.values().flatten().collect();
    // one (row, trial) pair per probe, each yielding a full row of columns
    let per_probe: Vec<Vec<f64>> = probe_list
        .par_iter()
        .map(|probe| {
            models
                .iter()
                .map(|templates| {
                    templates
                        .iter()
                        .map(|t| metric.eval(probe.coeffs(), t.coeffs()))
                        .fold(f64::INFINITY, f64::min)
                })
                .collect()
        })
        .collect();

    let mut scores = vec![0.0; rows * cols * trials];
    for (p, row) in per_probe.iter().enumerate() {
        let (i, k) = (p / trials, p % trials);
        for (j, &s) in row.iter().enumerate() {
            scores[(i * cols + j) * trials + k] = s;
        }
    }
    ScoreTensor::new(rows, cols, trials, metric, scores)?
        .with_subject_ids(columns.into_iter().map(str::to_string).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentificationResult {
    pub successes: usize,
    pub errors: usize,
    pub rate: f64,
}

/// Rank-1 identification: a trial succeeds iff its diagonal cell is strictly
/// smaller than every other cell in its row.
pub fn identification_rate(tensor: &ScoreTensor) -> IdentificationResult {
    let mut successes = 0;
    let mut errors = 0;
    for i in 0..tensor.rows {
        for k in 0..tensor.trials {
            let own = tensor.get(i, i, k);
            let wins = (0..tensor.cols)
                .filter(|&j| j != i)
                .all(|j| own < tensor.get(i, j, k));
            if wins {
                successes += 1;
            } else {
                errors += 1;
            }
        }
    }
    IdentificationResult {
        successes,
        errors,
        rate: successes as f64 / (successes + errors) as f64,
    }
}

/// All enrolled subjects ordered by nearest-template distance to `probe`.
/// Equal distances keep lexicographic subject order.
pub fn rank_subjects(
    probe: &FeatureVector,
    gallery: &Gallery,
    metric: Metric,
) -> Result<Vec<(String, f64)>, MatchError> {
    let mut ranked = gallery
        .subjects()
        .map(|(id, templates)| Ok((id.to_string(), person_score(probe, templates, metric)?)))
        .collect::<Result<Vec<_>, MatchError>>()?;
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1));
    Ok(ranked)
}
