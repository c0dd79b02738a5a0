//! Verification analytics over genuine/impostor distance sets: FAR/FRR at a
//! threshold, the DET staircase, EER, and the detection cost function.
//!
//! Convention: a claim is accepted iff its distance is `<= threshold`.
//! The DET curve is evaluated at one threshold per reachable
//! (false-alarm, miss) state, so minima over it are exact.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::format_f64;
use crate::matching::ScoreTensor;
use crate::probit::normal_deviate;

#[derive(Debug, Error, PartialEq)]
pub enum VerifyError {
    #[error("no genuine trials")]
    NoGenuine,
    #[error("no impostor trials (a single-subject tensor has no cross-subject claims)")]
    NoImpostor,
    #[error("non-finite score")]
    NonFinite,
    #[error("invalid DCF parameters: {0}")]
    InvalidParams(String),
}

/// Genuine (same-subject) and impostor (cross-subject) distances, each kept
/// sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialScores {
    genuine: Vec<f64>,
    impostor: Vec<f64>,
}

impl TrialScores {
    pub fn new(mut genuine: Vec<f64>, mut impostor: Vec<f64>) -> Result<Self, VerifyError> {
        if genuine.is_empty() {
            return Err(VerifyError::NoGenuine);
        }
        if impostor.is_empty() {
            return Err(VerifyError::NoImpostor);
        }
        if genuine.iter().chain(&impostor).any(|s| !s.is_finite()) {
            return Err(VerifyError::NonFinite);
        }
        genuine.sort_by(f64::total_cmp);
        impostor.sort_by(f64::total_cmp);
        Ok(Self { genuine, impostor })
    }

    pub fn genuine(&self) -> &[f64] {
        &self.genuine
    }

    pub fn impostor(&self) -> &[f64] {
        &self.impostor
    }

    /// Fraction of all trials that are genuine.
    pub fn target_fraction(&self) -> f64 {
        self.genuine.len() as f64 / (self.genuine.len() + self.impostor.len()) as f64
    }
}

/// Diagonal cells are genuine, every other cell is an impostor claim.
pub fn split_intra_inter(tensor: &ScoreTensor) -> Result<TrialScores, VerifyError> {
    let (rows, cols, trials) = tensor.shape();
    let mut genuine = Vec::with_capacity(tensor.genuine_count());
    let mut impostor = Vec::with_capacity(tensor.impostor_count());
    for i in 0..rows {
        for j in 0..cols {
            let target = if i == j { &mut genuine } else { &mut impostor };
            target.extend((0..trials).map(|k| tensor.get(i, j, k)));
        }
    }
    TrialScores::new(genuine, impostor)
}

fn count_at_most(sorted: &[f64], t: f64) -> usize {
    sorted.partition_point(|&s| s <= t)
}

/// `(p_fa, p_miss)` when accepting distances `<= threshold`.
pub fn far_frr_at(trials: &TrialScores, threshold: f64) -> (f64, f64) {
    let fa = count_at_most(&trials.impostor, threshold);
    let accepted_genuine = count_at_most(&trials.genuine, threshold);
    (
        fa as f64 / trials.impostor.len() as f64,
        (trials.genuine.len() - accepted_genuine) as f64 / trials.genuine.len() as f64,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetPoint {
    pub threshold: f64,
    pub p_fa: f64,
    pub p_miss: f64,
}

/// A threshold strictly separating `a < b`: their midpoint, or `a` itself
/// when the midpoint rounds onto `b`.
fn separating_threshold(a: f64, b: f64) -> f64 {
    let mid = a + (b - a) / 2.0;
    if mid.is_finite() && mid < b {
        mid.max(a)
    } else {
        a
    }
}

/// Candidate thresholds in descending order: `+inf`, the midpoints between
/// consecutive distinct pooled scores, then `-inf`.
pub fn candidate_thresholds(trials: &TrialScores) -> Vec<f64> {
    let mut pooled: Vec<f64> = trials.genuine.iter().chain(&trials.impostor).copied().collect();
    pooled.sort_by(f64::total_cmp);
    pooled.dedup();
    let mut out = Vec::with_capacity(pooled.len() + 1);
    out.push(f64::INFINITY);
    out.extend(pooled.windows(2).rev().map(|w| separating_threshold(w[0], w[1])));
    out.push(f64::NEG_INFINITY);
    out
}

/// DET staircase from accept-all `(1, 0)` down to reject-all `(0, 1)`,
/// ordered by decreasing threshold.
pub fn det_curve(trials: &TrialScores) -> Vec<DetPoint> {
    candidate_thresholds(trials)
        .into_iter()
        .map(|threshold| {
            let (p_fa, p_miss) = far_frr_at(trials, threshold);
            DetPoint {
                threshold,
                p_fa,
                p_miss,
            }
        })
        .collect()
}

/// Equal error rate: where the false-alarm and miss staircases cross,
/// linearly interpolated between the two DET points that straddle it.
pub fn eer(trials: &TrialScores) -> f64 {
    eer_from_curve(&det_curve(trials))
}

pub fn eer_from_curve(points: &[DetPoint]) -> f64 {
    // p_fa - p_miss goes from +1 to -1 along the curve
    let cross = points
        .iter()
        .position(|p| p.p_miss >= p.p_fa)
        .expect("reject-all point always has p_miss >= p_fa");
    let b = points[cross];
    if b.p_miss == b.p_fa || cross == 0 {
        return b.p_fa;
    }
    let a = points[cross - 1];
    let gap_a = a.p_fa - a.p_miss;
    let gap_b = b.p_fa - b.p_miss;
    let lambda = gap_a / (gap_a - gap_b);
    a.p_fa + lambda * (b.p_fa - a.p_fa)
}

/// Detection cost parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcfParams {
    pub c_miss: f64,
    pub c_fa: f64,
    pub p_true: f64,
}

impl Default for DcfParams {
    fn default() -> Self {
        Self {
            c_miss: 1.0,
            c_fa: 1.0,
            p_true: 0.5,
        }
    }
}

impl DcfParams {
    pub fn new(c_miss: f64, c_fa: f64, p_true: f64) -> Result<Self, VerifyError> {
        let params = Self {
            c_miss,
            c_fa,
            p_true,
        };
        params.validate()?;
        Ok(params)
    }

    /// Unit costs with the given target prior.
    pub fn with_prior(p_true: f64) -> Result<Self, VerifyError> {
        Self::new(1.0, 1.0, p_true)
    }

    pub fn validate(&self) -> Result<(), VerifyError> {
        if !(self.c_miss >= 0.0 && self.c_miss.is_finite()) || !(self.c_fa >= 0.0 && self.c_fa.is_finite()) {
            return Err(VerifyError::InvalidParams("costs must be finite and >= 0".into()));
        }
        if !(self.p_true > 0.0 && self.p_true < 1.0) {
            return Err(VerifyError::InvalidParams(format!(
                "target prior {} outside (0, 1)",
                self.p_true
            )));
        }
        Ok(())
    }

    pub fn p_false(&self) -> f64 {
        1.0 - self.p_true
    }

    pub fn cost(&self, p_fa: f64, p_miss: f64) -> f64 {
        self.c_miss * p_miss * self.p_true + self.c_fa * p_fa * self.p_false()
    }
}

pub fn dcf(trials: &TrialScores, threshold: f64, params: &DcfParams) -> f64 {
    let (p_fa, p_miss) = far_frr_at(trials, threshold);
    params.cost(p_fa, p_miss)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinDcf {
    pub value: f64,
    pub threshold: f64,
}

/// Minimum DCF over the DET candidate thresholds. Ties resolve to the
/// smallest threshold.
pub fn min_dcf(trials: &TrialScores, params: &DcfParams) -> MinDcf {
    min_dcf_from_curve(&det_curve(trials), params)
}

pub fn min_dcf_from_curve(points: &[DetPoint], params: &DcfParams) -> MinDcf {
    let mut best = MinDcf {
        value: f64::INFINITY,
        threshold: f64::INFINITY,
    };
    // thresholds descend, so `<=` keeps the last (smallest) of equal minima
    for p in points {
        let value = params.cost(p.p_fa, p.p_miss);
        if value <= best.value {
            best = MinDcf {
                value,
                threshold: p.threshold,
            };
        }
    }
    best
}

/// Probability clamp applied before taking normal deviates of DET
/// coordinates, so the 0 and 1 sentinels stay plottable.
pub const PROBIT_CLAMP: f64 = 1e-6;

pub fn clamped_deviate(p: f64) -> f64 {
    if p > 0.5 {
        -clamped_deviate(1.0 - p)
    } else {
        normal_deviate(p.max(PROBIT_CLAMP)).expect("clamped into (0, 1)")
    }
}

/// `threshold,p_fa,p_miss,probit_fa,probit_miss`
pub fn write_det_csv<W: Write>(out: W, points: &[DetPoint]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["threshold", "p_fa", "p_miss", "probit_fa", "probit_miss"])?;
    for p in points {
        w.write_record([
            format_f64(p.threshold),
            format_f64(p.p_fa),
            format_f64(p.p_miss),
            format_f64(clamped_deviate(p.p_fa)),
            format_f64(clamped_deviate(p.p_miss)),
        ])?;
    }
    w.flush()?;
    Ok(())
}
