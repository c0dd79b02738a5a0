//! Test-set sizing for statistically significant error-rate estimates.
//!
//! Treating errors as i.i.d. Bernoulli trials, guaranteeing with risk
//! `alpha` that the true error rate does not exceed the measured one by
//! more than `beta * p` needs about `N = -ln(alpha) / (beta^2 p)` trials.
//! At `alpha = 0.05`, `beta = 0.2` this is `74.89 / p`, customarily rounded
//! up to the simplified rule `N = 100 / p`.
//!
//! Correlated test samples need more trials than either rule gives.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_BETA: f64 = 0.2;
/// Numerator of the simplified rule.
pub const SIMPLIFIED_CONSTANT: f64 = 100.0;

#[derive(Debug, Error, PartialEq)]
pub enum SignificanceError {
    #[error("alpha {0} outside (0, 1)")]
    Alpha(f64),
    #[error("beta {0} outside (0, 1]")]
    Beta(f64),
    #[error("error rate {0} outside (0, 1]")]
    ErrorRate(f64),
    #[error("trial count must be at least 1")]
    ZeroTrials,
    #[error("unknown sizing rule {0:?} (expected EXACT or SIMPLIFIED)")]
    UnknownRule(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignificanceParams {
    pub alpha: f64,
    pub beta: f64,
    pub p: f64,
}

impl SignificanceParams {
    pub fn new(alpha: f64, beta: f64, p: f64) -> Result<Self, SignificanceError> {
        check_alpha_beta(alpha, beta)?;
        if !(p > 0.0 && p <= 1.0) {
            return Err(SignificanceError::ErrorRate(p));
        }
        Ok(Self { alpha, beta, p })
    }
}

fn check_alpha_beta(alpha: f64, beta: f64) -> Result<(), SignificanceError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(SignificanceError::Alpha(alpha));
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(SignificanceError::Beta(beta));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SizingRule {
    Exact,
    #[default]
    Simplified,
}

impl fmt::Display for SizingRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SizingRule::Exact => "EXACT",
            SizingRule::Simplified => "SIMPLIFIED",
        })
    }
}

impl FromStr for SizingRule {
    type Err = SignificanceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "EXACT" => Ok(SizingRule::Exact),
            "SIMPLIFIED" => Ok(SizingRule::Simplified),
            _ => Err(SignificanceError::UnknownRule(s.to_string())),
        }
    }
}

/// `-ln(alpha) / (beta^2 p)` before rounding.
pub fn required_n_real(params: &SignificanceParams) -> f64 {
    -params.alpha.ln() / (params.beta * params.beta * params.p)
}

pub fn required_n(params: &SignificanceParams) -> u64 {
    required_n_real(params).ceil() as u64
}

pub fn simplified_n(p: f64) -> Result<u64, SignificanceError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(SignificanceError::ErrorRate(p));
    }
    Ok((SIMPLIFIED_CONSTANT / p).ceil() as u64)
}

/// Smallest empirical error rate that `n` trials resolve under `rule`.
/// `alpha` and `beta` only matter for [`SizingRule::Exact`].
pub fn min_resolvable_error_rate(
    n: u64,
    rule: SizingRule,
    alpha: f64,
    beta: f64,
) -> Result<f64, SignificanceError> {
    if n == 0 {
        return Err(SignificanceError::ZeroTrials);
    }
    match rule {
        SizingRule::Simplified => Ok(SIMPLIFIED_CONSTANT / n as f64),
        SizingRule::Exact => {
            check_alpha_beta(alpha, beta)?;
            Ok(-alpha.ln() / (beta * beta * n as f64))
        }
    }
}

/// Verification trial accounting when every probe is scored against every
/// enrolled identity: one genuine claim per probe, plus one impostor claim
/// per probe and per other enrolled identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialCount {
    pub genuine: u64,
    pub impostor: u64,
}

impl TrialCount {
    pub fn total(&self) -> u64 {
        self.genuine + self.impostor
    }
}

pub fn enumerate_trials(probe_subjects: u64, enrolled_subjects: u64, probes_per_subject: u64) -> TrialCount {
    TrialCount {
        genuine: probe_subjects * probes_per_subject,
        impostor: probe_subjects * enrolled_subjects.saturating_sub(1) * probes_per_subject,
    }
}
