use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use facedct::fusion::{evaluate_specs, write_results_table};
use facedct::gallery::{apply_split, GALLERY_JSON};
use facedct::matching::{build_score_tensor, rank_subjects};
use facedct::pipeline::{enroll_all, extract_all, image_features, Evaluation};
use facedct::plot::det_svg;
use facedct::significance::{
    min_resolvable_error_rate, required_n, simplified_n, SignificanceParams, SizingRule,
};
use facedct::synth::{write_dataset, SynthSpec};
use facedct::verification::{
    det_curve, eer_from_curve, min_dcf_from_curve, split_intra_inter, write_det_csv, DcfParams, MinDcf,
};
use facedct::{dataset, Gallery, Manifest, Metric, ScoreTensor, SourceChannel};
use serde::Serialize;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn load_images(cfg: &ExperimentConfig) -> Result<facedct::SubjectSamples<facedct::RasterImage>, CliError> {
    Ok(Manifest::load(&cfg.manifest)?.load_images()?)
}

fn channel_dir(gallery_dir: &Path, channel: SourceChannel) -> PathBuf {
    gallery_dir.join(channel.as_str())
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Provenance<'a> {
    tool: &'a str,
    version: &'a str,
    command: &'a str,
    config_sha256: String,
    config: &'a ExperimentConfig,
}

fn provenance(cfg: &ExperimentConfig, command: &str) -> String {
    let record = Provenance {
        tool: TOOL_NAME,
        version: TOOL_VERSION,
        command,
        config_sha256: cfg.digest(),
        config: cfg,
    };
    serde_json::to_string_pretty(&record).expect("provenance serializes") + "\n"
}

/// Enrolls the training images of every channel the signal needs into
/// `<gallery>/<CHANNEL>/`, plus `<gallery>/provenance.json`.
pub fn enroll(cfg: &ExperimentConfig, gallery_dir: &Path) -> Result<String, CliError> {
    let images = load_images(cfg)?;
    let pipeline = cfg.pipeline();
    let extractor = pipeline.extractor()?;
    let (train, _) = apply_split(&images, &pipeline.split)?;
    let mut lines = Vec::new();
    for channel in cfg.signal_spec()?.channels() {
        let gallery = enroll_all(&extract_all(&train, channel, &extractor)?)?;
        gallery.save(&channel_dir(gallery_dir, channel))?;
        lines.push(format!(
            "{channel}: {} subjects, {} templates",
            gallery.subject_count(),
            gallery.template_count()
        ));
    }
    write_file(&gallery_dir.join("provenance.json"), provenance(cfg, "enroll"))?;
    Ok(lines.join("\n"))
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct PriorCost {
    source: &'static str,
    p_true: f64,
    value: f64,
    /// `null` when the optimum is one of the infinite sentinels.
    threshold: Option<f64>,
}

impl PriorCost {
    fn new(source: &'static str, p_true: f64, m: MinDcf) -> Self {
        Self {
            source,
            p_true,
            value: m.value,
            threshold: m.threshold.is_finite().then_some(m.threshold),
        }
    }
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct ResultRow {
    metric: Metric,
    signal: String,
    identification_rate: f64,
    identification_successes: usize,
    identification_errors: usize,
    eer: f64,
    min_dcf: Vec<PriorCost>,
    genuine_trials: usize,
    impostor_trials: usize,
}

/// Writes per-metric artifacts under `dir` and returns the result row.
fn report_tensor(
    tensor: &ScoreTensor,
    signal: &str,
    params: &DcfParams,
    dir: &Path,
    svg: bool,
) -> Result<ResultRow, CliError> {
    let trials = split_intra_inter(tensor)?;
    let curve = det_curve(&trials);
    let eer = eer_from_curve(&curve);
    let configured = min_dcf_from_curve(&curve, params);
    let empirical_params = DcfParams::new(params.c_miss, params.c_fa, trials.target_fraction())?;
    let empirical = min_dcf_from_curve(&curve, &empirical_params);
    let id = facedct::identification_rate(tensor);

    let mut scores = Vec::new();
    tensor.write_csv(&mut scores)?;
    write_file(&dir.join("scores.csv"), scores)?;
    let mut det = Vec::new();
    write_det_csv(&mut det, &curve)?;
    write_file(&dir.join("det.csv"), det)?;
    if svg {
        let title = format!("{signal} {}", tensor.metric());
        write_file(&dir.join("det.svg"), det_svg(&curve, eer, &title))?;
    }

    Ok(ResultRow {
        metric: tensor.metric(),
        signal: signal.to_string(),
        identification_rate: id.rate,
        identification_successes: id.successes,
        identification_errors: id.errors,
        eer,
        min_dcf: vec![
            PriorCost::new("configured", params.p_true, configured),
            PriorCost::new("empirical", empirical_params.p_true, empirical),
        ],
        genuine_trials: trials.genuine().len(),
        impostor_trials: trials.impostor().len(),
    })
}

fn summary_line(row: &ResultRow) -> String {
    format!(
        "{:<4} {:<12} rate {:.4}  eer {:.4}  minDcf {:.4} (p={}) / {:.4} (p={:.4})",
        row.metric.to_string(),
        row.signal,
        row.identification_rate,
        row.eer,
        row.min_dcf[0].value,
        row.min_dcf[0].p_true,
        row.min_dcf[1].value,
        row.min_dcf[1].p_true
    )
}

/// Scores the test images against a stored gallery, one row per metric.
pub fn evaluate(cfg: &ExperimentConfig, gallery_dir: &Path, svg: bool) -> Result<String, CliError> {
    let spec = cfg.signal_spec()?;
    let params = cfg.dcf_params()?;
    let images = load_images(cfg)?;
    let pipeline = cfg.pipeline();
    let extractor = pipeline.extractor()?;
    let (_, test) = apply_split(&images, &pipeline.split)?;

    let mut inputs = Vec::new();
    for channel in spec.channels() {
        let dir = channel_dir(gallery_dir, channel);
        let gallery = Gallery::load(&dir)?;
        if gallery.feature_dim() != Some(cfg.dim) {
            return Err(CliError::Data(format!(
                "gallery {} holds {:?}-dimensional templates, config asks for {}",
                dir.display(),
                gallery.feature_dim(),
                cfg.dim
            )));
        }
        inputs.push((channel, gallery, extract_all(&test, channel, &extractor)?));
    }

    let mut rows = Vec::new();
    for &metric in &cfg.metrics {
        let mut tensors = BTreeMap::new();
        for (channel, gallery, probes) in &inputs {
            tensors.insert(*channel, build_score_tensor(probes, gallery, metric)?);
        }
        let fused = spec.fuse(&tensors)?;
        let dir = cfg.output_dir.join(metric.to_string());
        rows.push(report_tensor(&fused, &spec.to_string(), &params, &dir, svg)?);
    }
    let results = json!({
        "tool": TOOL_NAME,
        "version": TOOL_VERSION,
        "configSha256": cfg.digest(),
        "results": rows,
    });
    write_file(
        &cfg.output_dir.join("results.json"),
        serde_json::to_string_pretty(&results)? + "\n",
    )?;
    Ok(rows.iter().map(summary_line).collect::<Vec<_>>().join("\n"))
}

/// Ranks all enrolled subjects for one probe image.
pub fn identify(
    gallery_dir: &Path,
    image: &Path,
    window: usize,
    metric: Metric,
    top: usize,
) -> Result<String, CliError> {
    let dir = if gallery_dir.join(GALLERY_JSON).is_file() {
        gallery_dir.to_path_buf()
    } else {
        let candidates: Vec<PathBuf> = SourceChannel::ALL
            .iter()
            .map(|&c| channel_dir(gallery_dir, c))
            .filter(|d| d.join(GALLERY_JSON).is_file())
            .collect();
        match candidates.as_slice() {
            [one] => one.clone(),
            [] => return Err(CliError::Data(format!("no gallery found in {}", gallery_dir.display()))),
            _ => {
                return Err(CliError::Validation(format!(
                    "{} holds several channel galleries; point --gallery at one of them",
                    gallery_dir.display()
                )))
            }
        }
    };
    let gallery = Gallery::load(&dir)?;
    let (Some(dim), Some(channel)) = (gallery.feature_dim(), gallery.channel()) else {
        return Err(CliError::Data(format!("gallery {} is empty", dir.display())));
    };
    let extractor = facedct::FeatureExtractor::new(window, dim)?;
    let probe = image_features(&dataset::load_image(image)?, channel, &extractor)?;
    let ranked = rank_subjects(&probe, &gallery, metric)?;
    let ranking: Vec<_> = ranked
        .iter()
        .take(top.max(1))
        .map(|(subject, score)| json!({ "subject": subject, "score": score }))
        .collect();
    let out = json!({
        "image": image.display().to_string(),
        "channel": channel.as_str(),
        "metric": metric,
        "best": ranked.first().map(|(s, _)| s.clone()),
        "ranking": ranking,
    });
    Ok(serde_json::to_string_pretty(&out)?)
}

/// DET curve, EER and minimum cost from a stored score tensor.
pub fn det_export(
    scores: &Path,
    metric: Metric,
    out: &Path,
    svg: Option<&Path>,
    params: &DcfParams,
) -> Result<String, CliError> {
    let file = fs::File::open(scores).map_err(|e| CliError::io(scores, e))?;
    let tensor = ScoreTensor::read_csv(file, metric)?;
    let curve = det_curve(&split_intra_inter(&tensor)?);
    let mut det = Vec::new();
    write_det_csv(&mut det, &curve)?;
    write_file(out, det)?;
    let eer = eer_from_curve(&curve);
    if let Some(path) = svg {
        let title = scores.file_stem().and_then(|s| s.to_str()).unwrap_or("DET");
        write_file(path, det_svg(&curve, eer, title))?;
    }
    let best = min_dcf_from_curve(&curve, params);
    Ok(format!(
        "{} points, eer {:.6}, minDcf {:.6} (p={})",
        curve.len(),
        eer,
        best.value,
        params.p_true
    ))
}

/// Evaluates each signal spec for each metric and writes
/// `<out>/fusion_<METRIC>.csv`.
pub fn fuse_eval(cfg: &ExperimentConfig, specs: &[String]) -> Result<String, CliError> {
    let specs = if specs.is_empty() {
        cfg.fusion_specs()?
    } else {
        specs.iter().map(|s| Ok(s.parse()?)).collect::<Result<Vec<_>, CliError>>()?
    };
    if specs.is_empty() {
        return Err(CliError::Validation("no fusion specs given (use --spec or the config \"fusion\" list)".into()));
    }
    let params = cfg.dcf_params()?;
    let images = load_images(cfg)?;
    let mut lines = Vec::new();
    for &metric in &cfg.metrics {
        let results = evaluate_specs(&images, &cfg.pipeline(), metric, &specs, &params)?;
        let rows: Vec<(String, Evaluation)> = results.iter().map(|(s, _, e)| (s.to_string(), *e)).collect();
        let mut table = Vec::new();
        write_results_table(&mut table, &rows)?;
        write_file(&cfg.output_dir.join(format!("fusion_{metric}.csv")), &table)?;
        for (label, e) in &rows {
            lines.push(format!(
                "{metric:<4} {label:<24} rate {:.4}  eer {:.4}  minDcf {:.4}",
                e.identification.rate, e.eer, e.min_dcf.value
            ));
        }
    }
    Ok(lines.join("\n"))
}

pub enum SizingQuery {
    ErrorRate(f64),
    Trials(u64),
}

pub const IID_CAVEAT: &str =
    "note: assumes independent trials; correlated samples (several probes per person) need more";

/// One human-readable line followed by one JSON line.
pub fn sigsize(query: SizingQuery, alpha: f64, beta: f64, rule: SizingRule) -> Result<String, CliError> {
    let (line, value) = match query {
        SizingQuery::ErrorRate(p) => {
            let params = SignificanceParams::new(alpha, beta, p)?;
            let exact = required_n(&params);
            let simplified = if p < 1.0 { Some(simplified_n(p)?) } else { None };
            let chosen = match rule {
                SizingRule::Exact => Some(exact),
                SizingRule::Simplified => simplified,
            };
            let line = format!(
                "p={p} alpha={alpha} beta={beta}: N={} ({rule}); exact {exact}, simplified {}",
                chosen.map_or("n/a".to_string(), |n| n.to_string()),
                simplified.map_or("n/a".to_string(), |n| n.to_string())
            );
            let value = json!({
                "p": p, "alpha": alpha, "beta": beta, "rule": rule,
                "requiredN": chosen, "exactN": exact, "simplifiedN": simplified,
            });
            (line, value)
        }
        SizingQuery::Trials(n) => {
            let rate = min_resolvable_error_rate(n, rule, alpha, beta)?;
            let line = format!("N={n}: smallest resolvable error rate {rate:.6e} ({:.4}%, {rule})", rate * 100.0);
            let value = json!({ "trials": n, "alpha": alpha, "beta": beta, "rule": rule, "minErrorRate": rate });
            (line, value)
        }
    };
    Ok(format!("{line}\n{}", serde_json::to_string(&value)?))
}

pub fn synth_data(spec: &SynthSpec, out: &Path) -> Result<String, CliError> {
    let manifest = write_dataset(spec, out)?;
    write_file(&out.join("synth.json"), serde_json::to_string_pretty(spec)? + "\n")?;
    Ok(format!(
        "{} subjects x {} samples ({}) -> {}",
        spec.subjects,
        spec.samples,
        spec.placement,
        manifest.display()
    ))
}
