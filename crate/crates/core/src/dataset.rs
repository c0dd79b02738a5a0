//! Dataset manifests: a JSON object mapping each subject id to the ordered
//! list of its image files. List order defines the 1-based sample indices
//! used by [`SplitSpec`](crate::gallery::SplitSpec).
//!
//! ```json
//! { "s1": ["s1/1.pgm", "s1/2.pgm"], "s2": ["s2/1.pgm", "s2/2.pgm"] }
//! ```
//!
//! Relative paths are resolved against the manifest's directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::image::{read_pnm, PnmError, RasterImage};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid manifest: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: PnmError,
    },
    #[error("manifest lists no subjects")]
    Empty,
    #[error("subject {0:?} has no images")]
    EmptySubject(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    subjects: BTreeMap<String, Vec<PathBuf>>,
}

impl Manifest {
    pub fn new(subjects: BTreeMap<String, Vec<PathBuf>>) -> Result<Self, DatasetError> {
        if subjects.is_empty() {
            return Err(DatasetError::Empty);
        }
        if let Some((id, _)) = subjects.iter().find(|(_, paths)| paths.is_empty()) {
            return Err(DatasetError::EmptySubject(id.clone()));
        }
        Ok(Self { subjects })
    }

    pub fn from_json(text: &str, base: &Path) -> Result<Self, serde_json::Error> {
        let raw: BTreeMap<String, Vec<PathBuf>> = serde_json::from_str(text)?;
        let subjects = raw
            .into_iter()
            .map(|(id, paths)| {
                let paths = paths
                    .into_iter()
                    .map(|p| if p.is_absolute() { p } else { base.join(p) })
                    .collect();
                (id, paths)
            })
            .collect();
        Ok(Self { subjects })
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let manifest = Self::from_json(&text, base).map_err(|source| DatasetError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        Self::new(manifest.subjects)
    }

    /// Builds a manifest from a `root/<subject>/<image>.pgm|ppm` layout
    /// (the AT&T/ORL distribution). Images are ordered by the numeric value
    /// of their file stem when it has one, so `10.pgm` sorts after `9.pgm`.
    pub fn from_directory_tree(root: &Path) -> Result<Self, DatasetError> {
        let io_err = |path: &Path| {
            let path = path.to_path_buf();
            move |source| DatasetError::Io { path, source }
        };
        let mut subjects = BTreeMap::new();
        for entry in fs::read_dir(root).map_err(io_err(root))? {
            let entry = entry.map_err(io_err(root))?;
            let dir = entry.path();
            if !dir.is_dir() {
                continue;
            }
            let mut images: Vec<PathBuf> = fs::read_dir(&dir)
                .map_err(io_err(&dir))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    matches!(
                        p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
                        Some("pgm" | "ppm" | "pnm")
                    )
                })
                .collect();
            if images.is_empty() {
                continue;
            }
            images.sort_by_key(|p| {
                let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("").to_string();
                (stem.parse::<u64>().unwrap_or(u64::MAX), stem)
            });
            let id = entry.file_name().to_string_lossy().into_owned();
            subjects.insert(id, images);
        }
        Self::new(subjects)
    }

    pub fn subjects(&self) -> &BTreeMap<String, Vec<PathBuf>> {
        &self.subjects
    }

    /// Manifest JSON with paths written relative to `base` where possible.
    pub fn to_json(&self, base: &Path) -> String {
        let rel: BTreeMap<&String, Vec<String>> = self
            .subjects
            .iter()
            .map(|(id, paths)| {
                let paths = paths
                    .iter()
                    .map(|p| {
                        p.strip_prefix(base)
                            .unwrap_or(p)
                            .to_string_lossy()
                            .replace('\\', "/")
                    })
                    .collect();
                (id, paths)
            })
            .collect();
        serde_json::to_string_pretty(&rel).expect("string map serializes")
    }

    pub fn load_images(&self) -> Result<BTreeMap<String, Vec<RasterImage>>, DatasetError> {
        self.subjects
            .iter()
            .map(|(id, paths)| {
                let images = paths.iter().map(|p| load_image(p)).collect::<Result<_, _>>()?;
                Ok((id.clone(), images))
            })
            .collect()
    }
}

pub fn load_image(path: &Path) -> Result<RasterImage, DatasetError> {
    let bytes = fs::read(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_pnm(&bytes).map_err(|source| DatasetError::Image {
        path: path.to_path_buf(),
        source,
    })
}
