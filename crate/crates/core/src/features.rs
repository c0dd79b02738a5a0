//! Orthonormal 2-D DCT-II and zigzag low-frequency coefficient selection.
//!
//! A face is represented by the first `dim` coefficients of the full
//! zigzag-ordered spectrum of its canonical (square) analysis window, DC
//! term included. No mean removal or scaling is applied to the result.

use std::f64::consts::PI;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use thiserror::Error;

use crate::image::GrayPlane;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FeatureError {
    #[error("feature dimension {dim} outside 1..={max}")]
    DimOutOfRange { dim: usize, max: usize },
    #[error("feature extraction needs a square plane, got {width}x{height}")]
    NotSquare { width: usize, height: usize },
    #[error("plane is {width}x{height}, extractor expects a {window}x{window} window")]
    WindowMismatch {
        width: usize,
        height: usize,
        window: usize,
    },
    #[error("spectrum/plan size mismatch")]
    SizeMismatch,
    #[error("feature vector is empty or has non-finite coefficients")]
    InvalidCoefficients,
    #[error("unknown source channel {0:?}")]
    UnknownChannel(String),
    #[error("feature CSV row {row}: {message}")]
    Csv { row: usize, message: String },
}

/// Which image signal a feature vector was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SourceChannel {
    Gray,
    R,
    G,
    B,
    Y,
}

impl SourceChannel {
    pub const ALL: [SourceChannel; 5] = [
        SourceChannel::Gray,
        SourceChannel::R,
        SourceChannel::G,
        SourceChannel::B,
        SourceChannel::Y,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SourceChannel::Gray => "GRAY",
            SourceChannel::R => "R",
            SourceChannel::G => "G",
            SourceChannel::B => "B",
            SourceChannel::Y => "Y",
        }
    }
}

impl fmt::Display for SourceChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SourceChannel {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "GRAY" | "GREY" => Ok(SourceChannel::Gray),
            "R" => Ok(SourceChannel::R),
            "G" => Ok(SourceChannel::G),
            "B" => Ok(SourceChannel::B),
            "Y" => Ok(SourceChannel::Y),
            _ => Err(FeatureError::UnknownChannel(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    coeffs: Vec<f64>,
    channel: SourceChannel,
    subject: Option<String>,
}

impl FeatureVector {
    pub fn new(coeffs: Vec<f64>, channel: SourceChannel) -> Result<Self, FeatureError> {
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(FeatureError::InvalidCoefficients);
        }
        Ok(Self {
            coeffs,
            channel,
            subject: None,
        })
    }

    pub fn with_subject(mut self, subject: impl Into<String>) -> Self {
        self.subject = Some(subject.into());
        self
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn channel(&self) -> SourceChannel {
        self.channel
    }

    pub fn subject(&self) -> Option<&str> {
        self.subject.as_deref()
    }

    pub(crate) fn set_subject(&mut self, subject: &str) {
        self.subject = Some(subject.to_string());
    }
}

/// Row-major `width x height` DCT coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct DctSpectrum {
    pub width: usize,
    pub height: usize,
    pub coeffs: Vec<f64>,
}

impl DctSpectrum {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.coeffs[row * self.width + col]
    }
}

/// `basis[k * n + i] = s(k) cos(pi (2i + 1) k / 2n)`.
fn cosine_basis(n: usize) -> Vec<f64> {
    let mut basis = Vec::with_capacity(n * n);
    let dc = (1.0 / n as f64).sqrt();
    let ac = (2.0 / n as f64).sqrt();
    for k in 0..n {
        let scale = if k == 0 { dc } else { ac };
        for i in 0..n {
            basis.push(scale * (PI * (2 * i + 1) as f64 * k as f64 / (2 * n) as f64).cos());
        }
    }
    basis
}

/// Precomputed cosine tables for one plane size. Immutable once built and
/// shareable across threads.
#[derive(Debug, Clone)]
pub struct DctPlan {
    width: usize,
    height: usize,
    row_basis: Vec<f64>,
    col_basis: Vec<f64>,
}

impl DctPlan {
    pub fn new(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "DCT plan needs a non-empty plane");
        Self {
            width,
            height,
            row_basis: cosine_basis(width),
            col_basis: cosine_basis(height),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Separable transform. `inverse` applies the transposed basis.
    fn apply(&self, input: &[f64], inverse: bool) -> Vec<f64> {
        let (w, h) = (self.width, self.height);
        let basis = |table: &[f64], n: usize, k: usize, i: usize| {
            if inverse {
                table[i * n + k]
            } else {
                table[k * n + i]
            }
        };

        // along rows
        let mut tmp = vec![0.0; w * h];
        for r in 0..h {
            let row = &input[r * w..(r + 1) * w];
            for k in 0..w {
                tmp[r * w + k] = row
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| basis(&self.row_basis, w, k, i) * x)
                    .sum();
            }
        }

        // along columns
        let mut out = vec![0.0; w * h];
        for k in 0..h {
            for i in 0..h {
                let b = basis(&self.col_basis, h, k, i);
                let src = &tmp[i * w..(i + 1) * w];
                let dst = &mut out[k * w..(k + 1) * w];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += b * s;
                }
            }
        }
        out
    }

    pub fn forward(&self, plane: &GrayPlane) -> Result<DctSpectrum, FeatureError> {
        if plane.width() != self.width || plane.height() != self.height {
            return Err(FeatureError::SizeMismatch);
        }
        Ok(DctSpectrum {
            width: self.width,
            height: self.height,
            coeffs: self.apply(plane.values(), false),
        })
    }

    pub fn inverse(&self, spec: &DctSpectrum) -> Result<GrayPlane, FeatureError> {
        if spec.width != self.width
            || spec.height != self.height
            || spec.coeffs.len() != self.width * self.height
        {
            return Err(FeatureError::SizeMismatch);
        }
        GrayPlane::new(self.width, self.height, self.apply(&spec.coeffs, true))
            .map_err(|_| FeatureError::InvalidCoefficients)
    }
}

/// Orthonormal 2-D DCT-II.
pub fn dct2(plane: &GrayPlane) -> DctSpectrum {
    DctPlan::new(plane.width(), plane.height())
        .forward(plane)
        .expect("plan built for this plane")
}

/// Inverse of [`dct2`].
pub fn idct2(spec: &DctSpectrum) -> Result<GrayPlane, FeatureError> {
    if spec.width == 0 || spec.height == 0 {
        return Err(FeatureError::SizeMismatch);
    }
    DctPlan::new(spec.width, spec.height).inverse(spec)
}

/// JPEG zigzag traversal of an `n x n` grid as `(row, col)` pairs.
pub fn zigzag_order(n: usize) -> Vec<(usize, usize)> {
    let mut order = Vec::with_capacity(n * n);
    if n == 0 {
        return order;
    }
    for diag in 0..(2 * n - 1) {
        let lo = diag.saturating_sub(n - 1);
        let hi = diag.min(n - 1);
        if diag % 2 == 1 {
            // odd anti-diagonals run top-right to bottom-left
            order.extend((lo..=hi).map(|r| (r, diag - r)));
        } else {
            order.extend((lo..=hi).rev().map(|r| (r, diag - r)));
        }
    }
    order
}

/// Reusable extractor for one canonical window size and feature dimension.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    window: usize,
    dim: usize,
    plan: DctPlan,
    order: Vec<(usize, usize)>,
}

impl FeatureExtractor {
    pub fn new(window: usize, dim: usize) -> Result<Self, FeatureError> {
        let max = window * window;
        if window == 0 || dim == 0 || dim > max {
            return Err(FeatureError::DimOutOfRange { dim, max });
        }
        let mut order = zigzag_order(window);
        order.truncate(dim);
        Ok(Self {
            window,
            dim,
            plan: DctPlan::new(window, window),
            order,
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extract(
        &self,
        plane: &GrayPlane,
        channel: SourceChannel,
    ) -> Result<FeatureVector, FeatureError> {
        if plane.width() != self.window || plane.height() != self.window {
            return Err(FeatureError::WindowMismatch {
                width: plane.width(),
                height: plane.height(),
                window: self.window,
            });
        }
        let spectrum = self.plan.forward(plane)?;
        let coeffs = self.order.iter().map(|&(r, c)| spectrum.get(r, c)).collect();
        FeatureVector::new(coeffs, channel)
    }
}

/// First `dim` zigzag-ordered DCT coefficients of a square plane.
pub fn extract_features(plane: &GrayPlane, dim: usize) -> Result<FeatureVector, FeatureError> {
    if plane.width() != plane.height() {
        return Err(FeatureError::NotSquare {
            width: plane.width(),
            height: plane.height(),
        });
    }
    FeatureExtractor::new(plane.width(), dim)?.extract(plane, SourceChannel::Gray)
}

// ---------------------------------------------------------------------------
// CSV rows: subject, channel, dim, coeff_1 .. coeff_dim

/// 17 significant digits; parses back to the identical `f64`.
pub(crate) fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_vectors_csv<W: Write>(out: W, vectors: &[FeatureVector]) -> csv::Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .flexible(true)
        .has_headers(false)
        .from_writer(out);
    for v in vectors {
        let mut record = Vec::with_capacity(v.dim() + 3);
        record.push(v.subject().unwrap_or("").to_string());
        record.push(v.channel().to_string());
        record.push(v.dim().to_string());
        record.extend(v.coeffs().iter().map(|&c| format_f64(c)));
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_vectors_csv<R: Read>(input: R) -> Result<Vec<FeatureVector>, FeatureError> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .has_headers(false)
        .from_reader(input);
    let mut vectors = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let bad = |message: String| FeatureError::Csv { row: row + 1, message };
        let record = record.map_err(|e| bad(e.to_string()))?;
        if record.len() < 4 {
            return Err(bad(format!("{} fields, need at least 4", record.len())));
        }
        let channel: SourceChannel = record[1].parse()?;
        let dim: usize = record[2]
            .parse()
            .map_err(|_| bad(format!("invalid dim {:?}", &record[2])))?;
        if record.len() != dim + 3 {
            return Err(bad(format!(
                "dim {dim} but {} coefficients",
                record.len() - 3
            )));
        }
        let coeffs = record
            .iter()
            .skip(3)
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| bad(format!("invalid coefficient {f:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut v = FeatureVector::new(coeffs, channel).map_err(|e| bad(e.to_string()))?;
        if !record[0].is_empty() {
            v.set_subject(&record[0]);
        }
        vectors.push(v);
    }
    Ok(vectors)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct quadruple-sum evaluation of the orthonormal DCT-II definition.
    fn brute_dct(values: &[f64], w: usize, h: usize) -> Vec<f64> {
        let s = |k: usize, n: usize| {
            if k == 0 {
                (1.0 / n as f64).sqrt()
            } else {
                (2.0 / n as f64).sqrt()
            }
        };
        let mut out = vec![0.0; w * h];
        for u in 0..h {
            for v in 0..w {
                let mut acc = 0.0;
                for y in 0..h {
                    for x in 0..w {
                        acc += values[y * w + x]
                            * (PI * (2 * y + 1) as f64 * u as f64 / (2 * h) as f64).cos()
                            * (PI * (2 * x + 1) as f64 * v as f64 / (2 * w) as f64).cos();
                    }
                }
                out[u * w + v] = s(u, h) * s(v, w) * acc;
            }
        }
        out
    }

    fn pseudo_random_plane(w: usize, h: usize, seed: u64) -> GrayPlane {
        let mut state = seed;
        let values = (0..w * h)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64
            })
            .collect();
        GrayPlane::new(w, h, values).unwrap()
    }

    #[test]
    fn constant_plane_is_dc_only() {
        let plane = GrayPlane::constant(8, 8, 0.25).unwrap();
        let spec = dct2(&plane);
        assert!((spec.get(0, 0) - 0.25 * 8.0).abs() < 1e-12);
        assert!(spec.coeffs.iter().skip(1).all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn two_by_two_impulse() {
        let plane = GrayPlane::new(2, 2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let spec = dct2(&plane);
        for c in &spec.coeffs {
            assert!((c - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn matches_brute_force_definition() {
        for &(w, h) in &[(5, 3), (4, 4), (7, 6)] {
            let plane = pseudo_random_plane(w, h, (w * 31 + h) as u64);
            let fast = dct2(&plane);
            let slow = brute_dct(plane.values(), w, h);
            for (a, b) in fast.coeffs.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn inverse_examples() {
        let zero = DctSpectrum {
            width: 4,
            height: 4,
            coeffs: vec![0.0; 16],
        };
        assert!(idct2(&zero).unwrap().values().iter().all(|&v| v == 0.0));

        let mut dc = zero.clone();
        dc.coeffs[0] = 2.0;
        let plane = idct2(&dc).unwrap();
        assert!(plane.values().iter().all(|&v| (v - 0.5).abs() < 1e-12));

        let random = pseudo_random_plane(8, 8, 99);
        let spec = DctSpectrum {
            width: 8,
            height: 8,
            coeffs: random.values().iter().map(|v| v * 4.0 - 2.0).collect(),
        };
        let back = dct2(&idct2(&spec).unwrap());
        for (a, b) in back.coeffs.iter().zip(&spec.coeffs) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn zigzag_small_grids() {
        assert_eq!(zigzag_order(1), vec![(0, 0)]);
        assert_eq!(zigzag_order(2), vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
        assert_eq!(
            zigzag_order(3),
            vec![(0, 0), (0, 1), (1, 0), (2, 0), (1, 1), (0, 2), (1, 2), (2, 1), (2, 2)]
        );
    }

    #[test]
    fn zigzag_matches_jpeg_table() {
        // Standard JPEG natural-order index for each zigzag position.
        const JPEG: [usize; 64] = [
            0, 1, 8, 16, 9, 2, 3, 10, 17, 24, 32, 25, 18, 11, 4, 5, 12, 19, 26, 33, 40, 48, 41,
            34, 27, 20, 13, 6, 7, 14, 21, 28, 35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30,
            37, 44, 51, 58, 59, 52, 45, 38, 31, 39, 46, 53, 60, 61, 54, 47, 55, 62, 63,
        ];
        let natural: Vec<usize> = zigzag_order(8).iter().map(|&(r, c)| r * 8 + c).collect();
        assert_eq!(natural, JPEG);
    }

    #[test]
    fn constant_plane_features() {
        let plane = GrayPlane::constant(16, 16, 0.6).unwrap();
        let fv = extract_features(&plane, 100).unwrap();
        assert_eq!(fv.dim(), 100);
        assert!(fv.coeffs()[0].abs() > 1.0);
        assert!(fv.coeffs()[1..].iter().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn full_dimension_preserves_energy() {
        let plane = pseudo_random_plane(8, 8, 7);
        let fv = extract_features(&plane, 64).unwrap();
        let energy: f64 = plane.values().iter().map(|v| v * v).sum();
        let coeff_energy: f64 = fv.coeffs().iter().map(|c| c * c).sum();
        assert!((energy - coeff_energy).abs() < 1e-9 * energy);
    }

    #[test]
    fn pure_cosine_mode_lands_on_zigzag_slot_of_0_3() {
        let n = 8;
        let values = (0..n * n)
            .map(|idx| {
                let col = idx % n;
                (PI * (2 * col + 1) as f64 * 3.0 / (2 * n) as f64).cos()
            })
            .collect();
        let plane = GrayPlane::new(n, n, values).unwrap();
        let fv = extract_features(&plane, n * n).unwrap();
        let slot = zigzag_order(n).iter().position(|&p| p == (0, 3)).unwrap();
        assert_eq!(slot, 6);
        let (argmax, peak) = fv
            .coeffs()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap();
        assert_eq!(argmax, slot);
        for (i, c) in fv.coeffs().iter().enumerate() {
            if i != slot {
                assert!(c.abs() < 1e-12 * peak.abs());
            }
        }
    }

    #[test]
    fn dimension_bounds() {
        let plane = GrayPlane::constant(4, 4, 0.0).unwrap();
        assert_eq!(
            extract_features(&plane, 17),
            Err(FeatureError::DimOutOfRange { dim: 17, max: 16 })
        );
        assert!(extract_features(&plane, 0).is_err());
        let wide = GrayPlane::constant(4, 3, 0.0).unwrap();
        assert!(matches!(extract_features(&wide, 4), Err(FeatureError::NotSquare { .. })));
    }

    #[test]
    fn extractor_rejects_other_window() {
        let ex = FeatureExtractor::new(8, 10).unwrap();
        let plane = GrayPlane::constant(4, 4, 0.0).unwrap();
        assert!(matches!(
            ex.extract(&plane, SourceChannel::Gray),
            Err(FeatureError::WindowMismatch { .. })
        ));
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let vectors = vec![
            FeatureVector::new(vec![0.1, -2.5e-300, 1.0 / 3.0], SourceChannel::R)
                .unwrap()
                .with_subject("s,1"),
            FeatureVector::new(vec![f64::MAX, -0.0], SourceChannel::Y).unwrap(),
        ];
        let mut buf = Vec::new();
        write_vectors_csv(&mut buf, &vectors).unwrap();
        let back = read_vectors_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in vectors.iter().zip(&back) {
            assert_eq!(a.subject(), b.subject());
            assert_eq!(a.channel(), b.channel());
            let bits = |v: &FeatureVector| v.coeffs().iter().map(|c| c.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(a), bits(b));
        }
    }

    #[test]
    fn csv_rejects_wrong_coefficient_count() {
        let err = read_vectors_csv("s1,GRAY,3,1.0,2.0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, FeatureError::Csv { row: 1, .. }));
    }
}
