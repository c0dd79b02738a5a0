use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn facedct(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_facedct"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "status {:?}\nstdout: {}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn synth(dir: &Path, name: &str, sigma: &str, placement: &str) -> PathBuf {
    ok(&facedct(
        &[
            "synth-data", "--out", name, "--seed", "5", "--sigma", sigma, "--placement", placement, "--width", "32",
            "--height", "40",
        ],
        dir,
    ));
    dir.join(name)
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    fs::write(dir.join(name), body).unwrap();
    name.to_string()
}

fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn synth_data_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let a = synth(tmp.path(), "a", "0.3", "R");
    let b = synth(tmp.path(), "b", "0.3", "R");
    let (ta, tb) = (tree(&a), tree(&b));
    assert_eq!(ta.len(), 40 * 10 + 2);
    assert_eq!(ta, tb);
    assert!(a.join("s01/1.ppm").is_file());
}

#[test]
fn enroll_evaluate_round() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir, "data", "0", "gray");
    let cfg = write_config(
        dir,
        "cfg.json",
        r#"{"manifest": "data/manifest.json", "window": 32, "metrics": ["MSE", "MAD"], "outputDir": "out"}"#,
    );

    let report = ok(&facedct(&["enroll", "-c", &cfg], dir));
    assert!(report.contains("200 templates"), "{report}");
    let gallery: Value = serde_json::from_slice(&fs::read(dir.join("out/gallery/GRAY/gallery.json")).unwrap()).unwrap();
    assert_eq!(gallery["subjects"].as_array().unwrap().len(), 40);
    let first = tree(&dir.join("out/gallery"));
    ok(&facedct(&["enroll", "-c", &cfg], dir));
    assert_eq!(tree(&dir.join("out/gallery")), first);
    let provenance: Value =
        serde_json::from_slice(&fs::read(dir.join("out/gallery/provenance.json")).unwrap()).unwrap();
    assert_eq!(provenance["configSha256"].as_str().unwrap().len(), 64);
    assert_eq!(provenance["version"], env!("CARGO_PKG_VERSION"));

    ok(&facedct(&["evaluate", "-c", &cfg, "--svg"], dir));
    let results_bytes = fs::read(dir.join("out/results.json")).unwrap();
    let results: Value = serde_json::from_slice(&results_bytes).unwrap();
    let rows = results["results"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["metric"], "MSE");
    assert_eq!(rows[1]["metric"], "MAD");
    for row in rows {
        assert_eq!(row["identificationRate"], 1.0);
        assert_eq!(row["genuineTrials"], 200);
        assert_eq!(row["impostorTrials"], 7800);
        let costs = row["minDcf"].as_array().unwrap();
        assert_eq!(costs.len(), 2);
        assert_eq!(costs[0]["pTrue"], 0.5);
        assert_eq!(costs[1]["pTrue"], 0.025);
        assert!(costs.iter().all(|c| c["value"] == 0.0));
    }
    for metric in ["MSE", "MAD"] {
        for file in ["scores.csv", "det.csv", "det.svg"] {
            assert!(dir.join("out").join(metric).join(file).is_file(), "{metric}/{file}");
        }
    }
    ok(&facedct(&["evaluate", "-c", &cfg, "--svg"], dir));
    assert_eq!(fs::read(dir.join("out/results.json")).unwrap(), results_bytes);

    let exported = ok(&facedct(
        &["det-export", "--scores", "out/MAD/scores.csv", "--metric", "MAD", "--out", "det.csv"],
        dir,
    ));
    assert!(exported.contains("eer 0.000000"), "{exported}");
    assert_eq!(fs::read(dir.join("det.csv")).unwrap(), fs::read(dir.join("out/MAD/det.csv")).unwrap());

    let ranked = ok(&facedct(
        &["identify", "--gallery", "out/gallery", "--image", "data/s13/9.pgm", "--window", "32", "--top", "3"],
        dir,
    ));
    let ranked: Value = serde_json::from_str(&ranked).unwrap();
    assert_eq!(ranked["best"], "s13");
    assert_eq!(ranked["ranking"].as_array().unwrap().len(), 3);

    // gallery built with 100 coefficients, probes asked for 50
    let out = facedct(&["evaluate", "-c", &cfg, "--dim", "50"], dir);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fuse_eval_table() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir, "data", "0.2", "R");
    let cfg = write_config(
        dir,
        "cfg.json",
        r#"{"manifest": "data/manifest.json", "window": 32, "metrics": ["MAD"],
            "fusion": ["R", "G", "Y", "sum:R,G,B", "w:0.3R+0.59G+0.11B"], "outputDir": "out"}"#,
    );
    let report = ok(&facedct(&["fuse-eval", "-c", &cfg], dir));
    assert_eq!(report.lines().count(), 5, "{report}");
    let table = fs::read_to_string(dir.join("out/fusion_MAD.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "input,identification_rate,min_dcf");
    assert_eq!(lines.len(), 6);
    let rate = |label: &str| -> f64 {
        let line = lines.iter().find(|l| l.starts_with(&format!("{label},"))).unwrap();
        line.split(',').nth(1).unwrap().parse().unwrap()
    };
    // identity lives only in the red plane
    assert!(rate("R") > rate("G"));

    let single = ok(&facedct(&["fuse-eval", "-c", &cfg, "--spec", "G"], dir));
    assert_eq!(single.lines().count(), 1);
}

#[test]
fn sigsize_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let out = facedct(&["sigsize", "--p", "0.01", "--rule", "EXACT"], tmp.path());
    let stdout = ok(&out);
    let mut lines = stdout.lines();
    assert!(lines.next().unwrap().contains("N=7490"));
    let json: Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert_eq!(json["requiredN"], 7490);
    assert_eq!(json["simplifiedN"], 10000);
    assert!(String::from_utf8_lossy(&out.stderr).contains("independent"));

    let out = facedct(&["sigsize", "--trials", "8000", "--iid"], tmp.path());
    let stdout = ok(&out);
    let json: Value = serde_json::from_str(stdout.lines().nth(1).unwrap()).unwrap();
    assert_eq!(json["minErrorRate"], 0.0125);
    assert!(out.stderr.is_empty());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let code = |args: &[&str]| facedct(args, dir).status.code();

    assert_eq!(code(&["sigsize"]), Some(1));
    assert_eq!(code(&["sigsize", "--p", "0"]), Some(1));
    assert_eq!(code(&["no-such-command"]), Some(1));
    assert_eq!(code(&["--help"]), Some(0));
    assert_eq!(code(&["synth-data", "--out", "x", "--seed", "1", "--sigma", "-1"]), Some(1));

    fs::write(dir.join("empty.json"), "{}").unwrap();
    assert_eq!(code(&["enroll", "--manifest", "empty.json"]), Some(2));
    assert_eq!(code(&["enroll", "--manifest", "missing.json"]), Some(1));

    let bad = write_config(dir, "bad.json", r#"{"manifest": "empty.json", "colour": true}"#);
    assert_eq!(code(&["enroll", "-c", &bad]), Some(1));

    fs::write(dir.join("m.json"), r#"{"s1": ["nope.pgm"]}"#).unwrap();
    let out = facedct(&["enroll", "--manifest", "m.json"], dir);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.pgm"));

    assert_eq!(code(&["det-export", "--scores", "missing.csv", "--out", "d.csv"]), Some(2));
}
