//! Experiment configuration: one JSON file, with command-line overrides.
//!
//! ```json
//! {
//!   "manifest": "data/manifest.json",
//!   "split": { "train": [1, 2, 3, 4, 5], "test": [6, 7, 8, 9, 10] },
//!   "window": 64,
//!   "dim": 100,
//!   "metrics": ["MSE", "MAD"],
//!   "signal": "GRAY",
//!   "fusion": ["R", "G", "B", "sum:R,G,B"],
//!   "dcf": { "cMiss": 1.0, "cFa": 1.0, "pTrue": 0.5 },
//!   "outputDir": "out"
//! }
//! ```
//!
//! Relative paths are resolved against the directory of the config file.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use facedct::pipeline::{DEFAULT_DIM, DEFAULT_WINDOW};
use facedct::{DcfParams, FusionSpec, Metric, PipelineConfig, SplitSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct DcfConfig {
    pub c_miss: f64,
    pub c_fa: f64,
    pub p_true: f64,
}

impl Default for DcfConfig {
    fn default() -> Self {
        let d = DcfParams::default();
        Self {
            c_miss: d.c_miss,
            c_fa: d.c_fa,
            p_true: d.p_true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ExperimentConfig {
    pub manifest: PathBuf,
    #[serde(default = "SplitSpec::orl")]
    pub split: SplitSpec,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    #[serde(default = "default_signal")]
    pub signal: String,
    #[serde(default)]
    pub fusion: Vec<String>,
    #[serde(default)]
    pub dcf: DcfConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_window() -> usize {
    DEFAULT_WINDOW
}

fn default_dim() -> usize {
    DEFAULT_DIM
}

fn default_metrics() -> Vec<Metric> {
    vec![Metric::Mse, Metric::Mad]
}

fn default_signal() -> String {
    "GRAY".into()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Flags shared by the dataset-driven commands. Each one overrides the
/// matching config field.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// Experiment config (JSON)
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Dataset manifest (JSON)
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Canonical square window size in pixels
    #[arg(long)]
    pub window: Option<usize>,
    /// Number of zigzag DCT coefficients
    #[arg(long)]
    pub dim: Option<usize>,
    /// Distance metric; repeat for several
    #[arg(long = "metric")]
    pub metrics: Vec<Metric>,
    /// Signal: GRAY, R, G, B, Y, sum:R,G,B or w:0.3R+0.59G+0.11B
    #[arg(long)]
    pub signal: Option<String>,
    /// Target prior for the detection cost
    #[arg(long)]
    pub p_true: Option<f64>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn resolve(base: &Path, path: PathBuf) -> PathBuf {
    if path.is_absolute() {
        path
    } else {
        base.join(path)
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        let mut cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| CliError::Validation(format!("invalid config: {e}")))?;
        cfg.manifest = resolve(base, cfg.manifest);
        cfg.output_dir = resolve(base, cfg.output_dir);
        Ok(cfg)
    }

    /// Reads the config file if given, applies flag overrides and validates.
    pub fn from_args(args: &ConfigArgs) -> Result<Self, CliError> {
        let mut cfg = match &args.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                let base = path.parent().unwrap_or(Path::new("."));
                Self::parse(&text, base)?
            }
            None => {
                let manifest = args.manifest.clone().ok_or_else(|| {
                    CliError::Validation("either --config or --manifest is required".into())
                })?;
                Self {
                    manifest,
                    split: SplitSpec::orl(),
                    window: DEFAULT_WINDOW,
                    dim: DEFAULT_DIM,
                    metrics: default_metrics(),
                    signal: default_signal(),
                    fusion: Vec::new(),
                    dcf: DcfConfig::default(),
                    output_dir: default_output_dir(),
                }
            }
        };
        if let Some(m) = &args.manifest {
            cfg.manifest = m.clone();
        }
        if let Some(w) = args.window {
            cfg.window = w;
        }
        if let Some(d) = args.dim {
            cfg.dim = d;
        }
        if !args.metrics.is_empty() {
            cfg.metrics = args.metrics.clone();
        }
        if let Some(s) = &args.signal {
            cfg.signal = s.clone();
        }
        if let Some(p) = args.p_true {
            cfg.dcf.p_true = p;
        }
        if let Some(o) = &args.out {
            cfg.output_dir = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !self.manifest.is_file() {
            return Err(CliError::Validation(format!(
                "manifest {} does not exist",
                self.manifest.display()
            )));
        }
        if self.window == 0 {
            return Err(CliError::Validation("window must be positive".into()));
        }
        if self.dim == 0 || self.dim > self.window * self.window {
            return Err(CliError::Validation(format!(
                "dim {} must be in 1..={}",
                self.dim,
                self.window * self.window
            )));
        }
        if self.metrics.is_empty() {
            return Err(CliError::Validation("no metric requested".into()));
        }
        self.signal_spec()?;
        self.fusion_specs()?;
        self.dcf_params()?;
        Ok(())
    }

    pub fn signal_spec(&self) -> Result<FusionSpec, CliError> {
        Ok(self.signal.parse()?)
    }

    pub fn fusion_specs(&self) -> Result<Vec<FusionSpec>, CliError> {
        self.fusion.iter().map(|s| Ok(s.parse()?)).collect()
    }

    pub fn dcf_params(&self) -> Result<DcfParams, CliError> {
        Ok(DcfParams::new(self.dcf.c_miss, self.dcf.c_fa, self.dcf.p_true)?)
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            window: self.window,
            dim: self.dim,
            split: self.split.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the effective (post-override) configuration.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_relative_paths() {
        let cfg = ExperimentConfig::parse(r#"{"manifest": "m.json"}"#, Path::new("/data")).unwrap();
        assert_eq!(cfg.manifest, PathBuf::from("/data/m.json"));
        assert_eq!(cfg.output_dir, PathBuf::from("/data/out"));
        assert_eq!((cfg.window, cfg.dim), (64, 100));
        assert_eq!(cfg.metrics, vec![Metric::Mse, Metric::Mad]);
        assert_eq!(cfg.split, SplitSpec::orl());
    }

    #[test]
    fn rejects_unknown_fields_and_bad_values() {
        assert!(ExperimentConfig::parse(r#"{"manifest": "m", "colour": 1}"#, Path::new(".")).is_err());
        let dir = tempfile::tempdir().unwrap();
        let manifest = dir.path().join("m.json");
        fs::write(&manifest, "{}").unwrap();
        let mut cfg = ExperimentConfig::parse(r#"{"manifest": "m.json", "dim": 5000}"#, dir.path()).unwrap();
        assert!(matches!(cfg.validate(), Err(CliError::Validation(_))));
        cfg.dim = 100;
        cfg.validate().unwrap();
        cfg.signal = "sum:R,Q".into();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("m.json"), "{}").unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, r#"{"manifest": "m.json", "window": 32, "dim": 50}"#).unwrap();
        let args = ConfigArgs {
            config: Some(path),
            dim: Some(20),
            metrics: vec![Metric::Mad],
            ..Default::default()
        };
        let cfg = ExperimentConfig::from_args(&args).unwrap();
        assert_eq!((cfg.window, cfg.dim), (32, 20));
        assert_eq!(cfg.metrics, vec![Metric::Mad]);
        let again = ExperimentConfig::from_args(&args).unwrap();
        assert_eq!(cfg.digest(), again.digest());
    }
}
