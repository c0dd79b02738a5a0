//! `facedct` command-line front end.
//!
//! Exit codes: 0 success, 1 validation error, 2 data error, 3 internal error.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use facedct::significance::{SizingRule, DEFAULT_ALPHA, DEFAULT_BETA};
use facedct::synth::{SignalPlacement, SynthSpec};
use facedct::{DcfParams, Metric};

use crate::commands::SizingQuery;
use crate::config::{ConfigArgs, ExperimentConfig};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "facedct", version, about = "DCT-feature face identification and verification experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract features from the training images and store a gallery
    Enroll {
        #[command(flatten)]
        config: ConfigArgs,
        /// Gallery directory [default: <outputDir>/gallery]
        #[arg(long)]
        gallery: Option<PathBuf>,
    },
    /// Score the test images against a gallery and write results
    Evaluate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Gallery directory [default: <outputDir>/gallery]
        #[arg(long)]
        gallery: Option<PathBuf>,
        /// Also render det.svg for each metric
        #[arg(long)]
        svg: bool,
    },
    /// Rank gallery subjects for a single probe image
    Identify {
        /// Gallery directory (one channel, or an enroll output holding exactly one)
        #[arg(long)]
        gallery: PathBuf,
        /// Probe image (PGM or PPM)
        #[arg(long)]
        image: PathBuf,
        #[arg(long, default_value_t = facedct::pipeline::DEFAULT_WINDOW)]
        window: usize,
        #[arg(long, default_value = "MAD")]
        metric: Metric,
        /// Number of ranked subjects to print
        #[arg(long, default_value_t = 5)]
        top: usize,
    },
    /// DET curve, EER and minimum detection cost from a scores.csv tensor
    DetExport {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, default_value = "MAD")]
        metric: Metric,
        /// Output DET csv
        #[arg(long)]
        out: PathBuf,
        /// Optional SVG plot
        #[arg(long)]
        svg: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        p_true: f64,
        #[arg(long, default_value_t = 1.0)]
        c_miss: f64,
        #[arg(long, default_value_t = 1.0)]
        c_fa: f64,
    },
    /// Evaluate single-channel and fused signals side by side
    FuseEval {
        #[command(flatten)]
        config: ConfigArgs,
        /// Signal spec; repeat for several [default: config "fusion" list]
        #[arg(long = "spec")]
        specs: Vec<String>,
    },
    /// Test-set size needed for a target error rate, or the reverse
    Sigsize {
        /// Target error rate
        #[arg(long, conflicts_with = "trials", required_unless_present = "trials")]
        p: Option<f64>,
        /// Available number of trials
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
        #[arg(long, default_value_t = DEFAULT_BETA)]
        beta: f64,
        /// EXACT or SIMPLIFIED
        #[arg(long, default_value = "SIMPLIFIED")]
        rule: SizingRule,
        /// Trials are known to be independent; suppress the caveat
        #[arg(long)]
        iid: bool,
    },
    /// Generate a seeded synthetic face-like dataset
    SynthData {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 40)]
        subjects: usize,
        #[arg(long, default_value_t = 10)]
        samples: usize,
        #[arg(long, default_value_t = 0.1)]
        sigma: f64,
        /// gray, rgb, or the planes that carry identity (e.g. R, GB)
        #[arg(long, default_value = "gray")]
        placement: SignalPlacement,
        #[arg(long, default_value_t = 92)]
        width: usize,
        #[arg(long, default_value_t = 112)]
        height: usize,
    },
}

fn gallery_dir(cfg: &ExperimentConfig, flag: Option<PathBuf>) -> PathBuf {
    flag.unwrap_or_else(|| cfg.output_dir.join("gallery"))
}

fn run(command: Command) -> Result<(), CliError> {
    let output = match command {
        Command::Enroll { config, gallery } => {
            let cfg = ExperimentConfig::from_args(&config)?;
            commands::enroll(&cfg, &gallery_dir(&cfg, gallery))?
        }
        Command::Evaluate { config, gallery, svg } => {
            let cfg = ExperimentConfig::from_args(&config)?;
            commands::evaluate(&cfg, &gallery_dir(&cfg, gallery), svg)?
        }
        Command::Identify {
            gallery,
            image,
            window,
            metric,
            top,
        } => commands::identify(&gallery, &image, window, metric, top)?,
        Command::DetExport {
            scores,
            metric,
            out,
            svg,
            p_true,
            c_miss,
            c_fa,
        } => {
            let params = DcfParams::new(c_miss, c_fa, p_true)?;
            commands::det_export(&scores, metric, &out, svg.as_deref(), &params)?
        }
        Command::FuseEval { config, specs } => {
            let cfg = ExperimentConfig::from_args(&config)?;
            commands::fuse_eval(&cfg, &specs)?
        }
        Command::Sigsize {
            p,
            trials,
            alpha,
            beta,
            rule,
            iid,
        } => {
            let query = match (p, trials) {
                (Some(p), _) => SizingQuery::ErrorRate(p),
                (None, Some(n)) => SizingQuery::Trials(n),
                (None, None) => return Err(CliError::Validation("give --p or --trials".into())),
            };
            let report = commands::sigsize(query, alpha, beta, rule)?;
            if !iid {
                eprintln!("{}", commands::IID_CAVEAT);
            }
            report
        }
        Command::SynthData {
            out,
            seed,
            subjects,
            samples,
            sigma,
            placement,
            width,
            height,
        } => {
            let spec = SynthSpec {
                subjects,
                samples,
                sigma,
                placement,
                seed,
                width,
                height,
            };
            commands::synth_data(&spec, &out)?
        }
    };
    println!("{output}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
