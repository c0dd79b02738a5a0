//! Enrollment store and the train/test split.
//!
//! Each training image yields one template ("model"); a subject owns the
//! ordered list of its templates. Subjects iterate in lexicographic id order.
//!
//! On disk a gallery is a directory holding `gallery.json` (ids, template
//! counts, dimension, channel, and a SHA-256 of the vector file) next to
//! `vectors.csv` (feature rows in subject then enrollment order).

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::features::{read_vectors_csv, write_vectors_csv, FeatureVector, SourceChannel};

pub const GALLERY_FORMAT: &str = "facedct-gallery";
pub const GALLERY_VERSION: u32 = 1;
pub const GALLERY_JSON: &str = "gallery.json";
pub const VECTORS_CSV: &str = "vectors.csv";

#[derive(Debug, Error)]
pub enum GalleryError {
    #[error("template dimension {found} does not match gallery dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("template channel {found} does not match gallery channel {expected}")]
    ChannelMismatch {
        expected: SourceChannel,
        found: SourceChannel,
    },
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("subject {subject:?} has {have} samples, split needs {need}")]
    InsufficientSamples {
        subject: String,
        have: usize,
        need: usize,
    },
    #[error("gallery has no enrolled templates")]
    Empty,
    #[error("unsupported gallery format {format:?} version {version}")]
    VersionMismatch { format: String, version: u32 },
    #[error("corrupted gallery: {0}")]
    Corrupted(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gallery {
    subjects: BTreeMap<String, Vec<FeatureVector>>,
    feature_dim: Option<usize>,
    channel: Option<SourceChannel>,
}

impl Gallery {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends `vec` to `subject`'s templates. The first enrollment fixes
    /// the gallery's dimension and channel.
    pub fn enroll(&mut self, subject: &str, mut vec: FeatureVector) -> Result<(), GalleryError> {
        if let Some(expected) = self.feature_dim {
            if vec.dim() != expected {
                return Err(GalleryError::DimensionMismatch {
                    expected,
                    found: vec.dim(),
                });
            }
        }
        if let Some(expected) = self.channel {
            if vec.channel() != expected {
                return Err(GalleryError::ChannelMismatch {
                    expected,
                    found: vec.channel(),
                });
            }
        }
        self.feature_dim = Some(vec.dim());
        self.channel = Some(vec.channel());
        vec.set_subject(subject);
        self.subjects.entry(subject.to_string()).or_default().push(vec);
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    pub fn subject_count(&self) -> usize {
        self.subjects.len()
    }

    pub fn template_count(&self) -> usize {
        self.subjects.values().map(Vec::len).sum()
    }

    pub fn feature_dim(&self) -> Option<usize> {
        self.feature_dim
    }

    pub fn channel(&self) -> Option<SourceChannel> {
        self.channel
    }

    pub fn subjects(&self) -> impl Iterator<Item = (&str, &[FeatureVector])> {
        self.subjects.iter().map(|(id, t)| (id.as_str(), t.as_slice()))
    }

    pub fn subject_ids(&self) -> impl Iterator<Item = &str> {
        self.subjects.keys().map(String::as_str)
    }

    pub fn templates(&self, subject: &str) -> Option<&[FeatureVector]> {
        self.subjects.get(subject).map(Vec::as_slice)
    }

    // -- persistence ------------------------------------------------------

    /// Serializes to the `(gallery.json, vectors.csv)` pair.
    pub fn to_files(&self) -> Result<(String, Vec<u8>), GalleryError> {
        let (Some(feature_dim), Some(channel)) = (self.feature_dim, self.channel) else {
            return Err(GalleryError::Empty);
        };
        let mut csv = Vec::new();
        let rows: Vec<FeatureVector> = self.subjects.values().flatten().cloned().collect();
        write_vectors_csv(&mut csv, &rows)
            .map_err(|e| GalleryError::Corrupted(format!("writing vectors: {e}")))?;
        let header = GalleryHeader {
            format: GALLERY_FORMAT.to_string(),
            version: GALLERY_VERSION,
            feature_dim,
            channel: channel.to_string(),
            subjects: self
                .subjects
                .iter()
                .map(|(id, t)| SubjectEntry {
                    id: id.clone(),
                    templates: t.len(),
                })
                .collect(),
            vectors_sha256: hex::encode(Sha256::digest(&csv)),
        };
        let json = serde_json::to_string_pretty(&header).expect("header serializes");
        Ok((json, csv))
    }

    pub fn from_files(json: &[u8], csv: &[u8]) -> Result<Self, GalleryError> {
        let corrupted = |m: String| GalleryError::Corrupted(m);
        let value: serde_json::Value =
            serde_json::from_slice(json).map_err(|e| corrupted(format!("{GALLERY_JSON}: {e}")))?;
        let format = value.get("format").and_then(|v| v.as_str()).unwrap_or("");
        let version = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if format != GALLERY_FORMAT || version != GALLERY_VERSION {
            return Err(GalleryError::VersionMismatch {
                format: format.to_string(),
                version,
            });
        }
        let header: GalleryHeader =
            serde_json::from_value(value).map_err(|e| corrupted(format!("{GALLERY_JSON}: {e}")))?;
        if hex::encode(Sha256::digest(csv)) != header.vectors_sha256 {
            return Err(corrupted(format!("{VECTORS_CSV} checksum mismatch")));
        }
        let channel: SourceChannel = header
            .channel
            .parse()
            .map_err(|e: crate::features::FeatureError| corrupted(e.to_string()))?;
        let rows = read_vectors_csv(csv).map_err(|e| corrupted(e.to_string()))?;
        let expected: usize = header.subjects.iter().map(|s| s.templates).sum();
        if rows.len() != expected {
            return Err(corrupted(format!(
                "{} vector rows, header lists {expected}",
                rows.len()
            )));
        }

        let mut gallery = Gallery::new();
        let mut rows = rows.into_iter();
        for entry in &header.subjects {
            for _ in 0..entry.templates {
                let v = rows.next().expect("row count checked");
                if v.subject() != Some(entry.id.as_str()) {
                    return Err(corrupted(format!(
                        "row labelled {:?} where {:?} expected",
                        v.subject(),
                        entry.id
                    )));
                }
                if v.dim() != header.feature_dim || v.channel() != channel {
                    return Err(corrupted(format!("row for {:?} disagrees with header", entry.id)));
                }
                gallery.enroll(&entry.id, v)?;
            }
        }
        if gallery.is_empty() {
            return Err(GalleryError::Empty);
        }
        Ok(gallery)
    }

    pub fn save(&self, dir: &Path) -> Result<(), GalleryError> {
        let (json, csv) = self.to_files()?;
        let io = |path: &Path| {
            let path = path.display().to_string();
            move |source| GalleryError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        let json_path = dir.join(GALLERY_JSON);
        let csv_path = dir.join(VECTORS_CSV);
        fs::write(&csv_path, csv).map_err(io(&csv_path))?;
        fs::write(&json_path, json).map_err(io(&json_path))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, GalleryError> {
        let read = |name: &str| {
            let path = dir.join(name);
            fs::read(&path).map_err(|source| GalleryError::Io {
                path: path.display().to_string(),
                source,
            })
        };
        Self::from_files(&read(GALLERY_JSON)?, &read(VECTORS_CSV)?)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct GalleryHeader {
    format: String,
    version: u32,
    feature_dim: usize,
    channel: String,
    subjects: Vec<SubjectEntry>,
    vectors_sha256: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct SubjectEntry {
    id: String,
    templates: usize,
}

/// Disjoint, non-empty sets of 1-based sample indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSplit", into = "RawSplit")]
pub struct SplitSpec {
    train: BTreeSet<usize>,
    test: BTreeSet<usize>,
}

#[derive(Serialize, Deserialize)]
struct RawSplit {
    train: Vec<usize>,
    test: Vec<usize>,
}

impl TryFrom<RawSplit> for SplitSpec {
    type Error = GalleryError;

    fn try_from(raw: RawSplit) -> Result<Self, Self::Error> {
        SplitSpec::new(raw.train, raw.test)
    }
}

impl From<SplitSpec> for RawSplit {
    fn from(s: SplitSpec) -> Self {
        RawSplit {
            train: s.train.into_iter().collect(),
            test: s.test.into_iter().collect(),
        }
    }
}

impl SplitSpec {
    pub fn new(
        train: impl IntoIterator<Item = usize>,
        test: impl IntoIterator<Item = usize>,
    ) -> Result<Self, GalleryError> {
        let train: BTreeSet<usize> = train.into_iter().collect();
        let test: BTreeSet<usize> = test.into_iter().collect();
        if train.is_empty() || test.is_empty() {
            return Err(GalleryError::InvalidSplit("train and test sets must be non-empty".into()));
        }
        if train.contains(&0) || test.contains(&0) {
            return Err(GalleryError::InvalidSplit("sample indices are 1-based".into()));
        }
        if let Some(i) = train.intersection(&test).next() {
            return Err(GalleryError::InvalidSplit(format!(
                "index {i} is in both train and test"
            )));
        }
        Ok(Self { train, test })
    }

    /// Samples 1-5 train, 6-10 test.
    pub fn orl() -> Self {
        Self::new(1..=5, 6..=10).expect("static split is valid")
    }

    pub fn train(&self) -> &BTreeSet<usize> {
        &self.train
    }

    pub fn test(&self) -> &BTreeSet<usize> {
        &self.test
    }

    pub fn max_index(&self) -> usize {
        let last = |s: &BTreeSet<usize>| s.iter().next_back().copied().unwrap_or(0);
        last(&self.train).max(last(&self.test))
    }
}

pub type SubjectSamples<T> = BTreeMap<String, Vec<T>>;

/// Partitions every subject's ordered samples into `(train, test)` by index.
pub fn apply_split<T: Clone>(
    samples: &SubjectSamples<T>,
    split: &SplitSpec,
) -> Result<(SubjectSamples<T>, SubjectSamples<T>), GalleryError> {
    let need = split.max_index();
    let pick = |items: &[T], indices: &BTreeSet<usize>| -> Vec<T> {
        indices.iter().map(|&i| items[i - 1].clone()).collect()
    };
    let mut train = BTreeMap::new();
    let mut test = BTreeMap::new();
    for (id, items) in samples {
        if items.len() < need {
            return Err(GalleryError::InsufficientSamples {
                subject: id.clone(),
                have: items.len(),
                need,
            });
        }
        train.insert(id.clone(), pick(items, &split.train));
        test.insert(id.clone(), pick(items, &split.test));
    }
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vector(dim: usize, seed: f64) -> FeatureVector {
        FeatureVector::new((0..dim).map(|i| seed * 1.1 + i as f64 / 7.0).collect(), SourceChannel::Gray).unwrap()
    }

    fn orl_shaped() -> Gallery {
        let mut g = Gallery::new();
        for s in 0..40 {
            for t in 0..5 {
                g.enroll(&format!("s{s:02}"), vector(100, (s * 5 + t) as f64)).unwrap();
            }
        }
        g
    }

    #[test]
    fn single_enrollment() {
        let mut g = Gallery::new();
        g.enroll("alice", vector(4, 0.0)).unwrap();
        assert_eq!(g.subject_count(), 1);
        assert_eq!(g.template_count(), 1);
        assert_eq!(g.templates("alice").unwrap()[0].subject(), Some("alice"));
    }

    #[test]
    fn orl_protocol_gives_200_templates() {
        let g = orl_shaped();
        assert_eq!(g.subject_count(), 40);
        assert_eq!(g.template_count(), 200);
    }

    #[test]
    fn enrollment_preserves_order() {
        let mut g = Gallery::new();
        for k in 0..4 {
            g.enroll("x", vector(3, k as f64)).unwrap();
        }
        let firsts: Vec<f64> = g.templates("x").unwrap().iter().map(|v| v.coeffs()[0]).collect();
        assert_eq!(firsts, vec![0.0, 1.1, 2.2, 3.3000000000000003]);
    }

    #[test]
    fn enrollment_contract_violations() {
        let mut g = Gallery::new();
        g.enroll("a", vector(100, 0.0)).unwrap();
        assert!(matches!(
            g.enroll("a", vector(50, 0.0)),
            Err(GalleryError::DimensionMismatch { expected: 100, found: 50 })
        ));
        let red = FeatureVector::new(vec![0.0; 100], SourceChannel::R).unwrap();
        assert!(matches!(g.enroll("b", red), Err(GalleryError::ChannelMismatch { .. })));
        assert_eq!(g.template_count(), 1);
    }

    #[test]
    fn orl_split() {
        let samples: SubjectSamples<usize> =
            (0..40).map(|s| (format!("s{s}"), (1..=10).collect())).collect();
        let (train, test) = apply_split(&samples, &SplitSpec::orl()).unwrap();
        assert!(train.values().all(|v| v == &vec![1, 2, 3, 4, 5]));
        assert!(test.values().all(|v| v == &vec![6, 7, 8, 9, 10]));
        assert_eq!(test.values().map(Vec::len).sum::<usize>(), 200);
    }

    #[test]
    fn split_with_too_few_samples_names_subject() {
        let samples: SubjectSamples<u8> = [("lonely".to_string(), vec![1u8])].into();
        let split = SplitSpec::new([1], [2]).unwrap();
        match apply_split(&samples, &split) {
            Err(GalleryError::InsufficientSamples { subject, have: 1, need: 2 }) => {
                assert_eq!(subject, "lonely")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_splits() {
        assert!(SplitSpec::new([1, 2], [2, 3]).is_err());
        assert!(SplitSpec::new(Vec::<usize>::new(), [1]).is_err());
        assert!(SplitSpec::new([0], [1]).is_err());
        let json = r#"{"train":[1,2],"test":[2]}"#;
        assert!(serde_json::from_str::<SplitSpec>(json).is_err());
        let ok: SplitSpec = serde_json::from_str(r#"{"train":[1,2,3,4,5],"test":[6,7,8,9,10]}"#).unwrap();
        assert_eq!(ok, SplitSpec::orl());
    }

    #[test]
    fn persistence_round_trip() {
        let g = orl_shaped();
        let (json, csv) = g.to_files().unwrap();
        let back = Gallery::from_files(json.as_bytes(), &csv).unwrap();
        assert_eq!(back, g);

        let dir = tempfile::tempdir().unwrap();
        g.save(dir.path()).unwrap();
        assert_eq!(Gallery::load(dir.path()).unwrap(), g);
    }

    #[test]
    fn empty_gallery_cannot_be_saved() {
        assert!(matches!(Gallery::new().to_files(), Err(GalleryError::Empty)));
    }

    #[test]
    fn truncated_or_tampered_payloads_are_corruption() {
        let (json, csv) = orl_shaped().to_files().unwrap();
        let truncated = &csv[..csv.len() - 5];
        assert!(matches!(
            Gallery::from_files(json.as_bytes(), truncated),
            Err(GalleryError::Corrupted(_))
        ));
        assert!(matches!(
            Gallery::from_files(&json.as_bytes()[..json.len() / 2], &csv),
            Err(GalleryError::Corrupted(_))
        ));
    }

    #[test]
    fn version_mismatch_is_distinct() {
        let (json, csv) = orl_shaped().to_files().unwrap();
        let bumped = json.replace("\"version\": 1", "\"version\": 7");
        assert!(matches!(
            Gallery::from_files(bumped.as_bytes(), &csv),
            Err(GalleryError::VersionMismatch { version: 7, .. })
        ));
    }
}
