//! Binary PNM (P5/P6) decoding and encoding, color-plane handling and the
//! normalized floating-point plane used by the feature extractor.
//!
//! Only the binary variants are accepted. Samples wider than 8 bits
//! (`maxval > 255`) are stored as two big-endian bytes.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PnmError {
    #[error("not a PNM file (magic {0:?})")]
    NotPnm(String),
    #[error("unsupported PNM variant {0} (only binary P5/P6 are accepted)")]
    UnsupportedMagic(String),
    #[error("malformed PNM header: {0}")]
    MalformedHeader(&'static str),
    #[error("zero image dimension ({width}x{height})")]
    ZeroDimension { width: usize, height: usize },
    #[error("maxval {0} outside 1..=65535")]
    MaxvalOutOfRange(u64),
    #[error("truncated PNM body: expected {expected} bytes, found {found}")]
    TruncatedBody { expected: usize, found: usize },
    #[error("sample {value} at index {index} exceeds maxval {maxval}")]
    SampleOutOfRange { index: usize, value: u16, maxval: u16 },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ImageError {
    #[error(transparent)]
    Pnm(#[from] PnmError),
    #[error("expected a {expected}-channel image, got {found} channels")]
    ChannelCount { expected: usize, found: usize },
    #[error("invalid image geometry: {0}")]
    Geometry(String),
}

/// One of the three color planes of an RGB image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColorChannel {
    Red,
    Green,
    Blue,
}

impl ColorChannel {
    pub fn index(self) -> usize {
        match self {
            ColorChannel::Red => 0,
            ColorChannel::Green => 1,
            ColorChannel::Blue => 2,
        }
    }
}

impl fmt::Display for ColorChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColorChannel::Red => "R",
            ColorChannel::Green => "G",
            ColorChannel::Blue => "B",
        })
    }
}

/// Integer raster, row-major, channels interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: usize,
    maxval: u16,
    samples: Vec<u16>,
}

impl RasterImage {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        maxval: u16,
        samples: Vec<u16>,
    ) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(PnmError::ZeroDimension { width, height }.into());
        }
        if channels != 1 && channels != 3 {
            return Err(ImageError::Geometry(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        if maxval == 0 {
            return Err(PnmError::MaxvalOutOfRange(0).into());
        }
        let expected = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(channels))
            .ok_or_else(|| ImageError::Geometry("image too large".into()))?;
        if samples.len() != expected {
            return Err(ImageError::Geometry(format!(
                "{} samples for a {width}x{height}x{channels} image",
                samples.len()
            )));
        }
        if let Some((index, &value)) = samples.iter().enumerate().find(|(_, &s)| s > maxval) {
            return Err(PnmError::SampleOutOfRange {
                index,
                value,
                maxval,
            }
            .into());
        }
        Ok(Self {
            width,
            height,
            channels,
            maxval,
            samples,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn maxval(&self) -> u16 {
        self.maxval
    }

    pub fn samples(&self) -> &[u16] {
        &self.samples
    }

    fn require_channels(&self, expected: usize) -> Result<(), ImageError> {
        if self.channels == expected {
            Ok(())
        } else {
            Err(ImageError::ChannelCount {
                expected,
                found: self.channels,
            })
        }
    }
}

/// Real-valued plane, row-major. Planes produced by [`normalize`] and
/// [`resize_bilinear`] hold values in `[0, 1]`; transform outputs need not.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayPlane {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl GrayPlane {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::Geometry(format!(
                "zero plane dimension ({width}x{height})"
            )));
        }
        if values.len() != width * height {
            return Err(ImageError::Geometry(format!(
                "{} values for a {width}x{height} plane",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ImageError::Geometry("non-finite plane value".into()));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self, ImageError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

// ---------------------------------------------------------------------------
// PNM codec

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    /// Skips whitespace and `#` comments. Returns whether anything was skipped.
    fn skip_separators(&mut self) -> bool {
        let start = self.pos;
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
        self.pos > start
    }

    fn number(&mut self, what: &'static str) -> Result<u64, PnmError> {
        if !self.skip_separators() {
            return Err(PnmError::MalformedHeader(what));
        }
        let start = self.pos;
        let mut value: u64 = 0;
        while let Some(&b) = self.bytes.get(self.pos) {
            if !b.is_ascii_digit() {
                break;
            }
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add(u64::from(b - b'0')))
                .ok_or(PnmError::MalformedHeader(what))?;
            self.pos += 1;
        }
        if self.pos == start {
            return Err(PnmError::MalformedHeader(what));
        }
        Ok(value)
    }
}

/// Parses a binary PGM (P5) or PPM (P6) image.
pub fn read_pnm(bytes: &[u8]) -> Result<RasterImage, PnmError> {
    if bytes.len() < 2 {
        return Err(PnmError::MalformedHeader("missing magic number"));
    }
    let magic = &bytes[..2];
    let channels = match magic {
        b"P5" => 1,
        b"P6" => 3,
        b"P1" | b"P2" | b"P3" | b"P4" | b"P7" => {
            return Err(PnmError::UnsupportedMagic(
                String::from_utf8_lossy(magic).into_owned(),
            ))
        }
        _ => return Err(PnmError::NotPnm(String::from_utf8_lossy(magic).into_owned())),
    };

    let mut cursor = HeaderCursor { bytes, pos: 2 };
    let width = cursor.number("missing or invalid width")?;
    let height = cursor.number("missing or invalid height")?;
    let maxval = cursor.number("missing or invalid maxval")?;

    if width == 0 || height == 0 {
        return Err(PnmError::ZeroDimension {
            width: width as usize,
            height: height as usize,
        });
    }
    if maxval == 0 || maxval > 65535 {
        return Err(PnmError::MaxvalOutOfRange(maxval));
    }
    match bytes.get(cursor.pos) {
        Some(b) if b.is_ascii_whitespace() => cursor.pos += 1,
        _ => return Err(PnmError::MalformedHeader("maxval not followed by whitespace")),
    }

    let bytes_per_sample = if maxval > 255 { 2 } else { 1 };
    let count = (width as usize)
        .checked_mul(height as usize)
        .and_then(|n| n.checked_mul(channels))
        .ok_or(PnmError::MalformedHeader("image dimensions overflow"))?;
    let expected = count * bytes_per_sample;
    let body = &bytes[cursor.pos..];
    if body.len() < expected {
        return Err(PnmError::TruncatedBody {
            expected,
            found: body.len(),
        });
    }

    let maxval = maxval as u16;
    let samples: Vec<u16> = if bytes_per_sample == 1 {
        body[..expected].iter().map(|&b| u16::from(b)).collect()
    } else {
        body[..expected]
            .chunks_exact(2)
            .map(|pair| u16::from_be_bytes([pair[0], pair[1]]))
            .collect()
    };
    if let Some((index, &value)) = samples.iter().enumerate().find(|(_, &s)| s > maxval) {
        return Err(PnmError::SampleOutOfRange {
            index,
            value,
            maxval,
        });
    }

    Ok(RasterImage {
        width: width as usize,
        height: height as usize,
        channels,
        maxval,
        samples,
    })
}

/// Serializes an image as binary P5 (gray) or P6 (RGB).
pub fn write_pnm(img: &RasterImage) -> Vec<u8> {
    let magic = if img.channels == 1 { "P5" } else { "P6" };
    let header = format!("{magic}\n{} {}\n{}\n", img.width, img.height, img.maxval);
    let wide = img.maxval > 255;
    let mut out = Vec::with_capacity(header.len() + img.samples.len() * if wide { 2 } else { 1 });
    out.extend_from_slice(header.as_bytes());
    if wide {
        for s in &img.samples {
            out.extend_from_slice(&s.to_be_bytes());
        }
    } else {
        out.extend(img.samples.iter().map(|&s| s as u8));
    }
    out
}

// ---------------------------------------------------------------------------
// Channel handling

/// Luminance `Y = 0.3 R + 0.59 G + 0.11 B`, rounded half-up.
///
/// Evaluated in integer hundredths so the rounding is exact.
pub fn to_luminance(img: &RasterImage) -> Result<RasterImage, ImageError> {
    img.require_channels(3)?;
    let maxval = u32::from(img.maxval);
    let samples = img
        .samples
        .chunks_exact(3)
        .map(|px| {
            let weighted =
                30 * u32::from(px[0]) + 59 * u32::from(px[1]) + 11 * u32::from(px[2]);
            ((weighted + 50) / 100).min(maxval) as u16
        })
        .collect();
    Ok(RasterImage {
        width: img.width,
        height: img.height,
        channels: 1,
        maxval: img.maxval,
        samples,
    })
}

pub fn select_channel(img: &RasterImage, channel: ColorChannel) -> Result<RasterImage, ImageError> {
    img.require_channels(3)?;
    let samples = img
        .samples
        .iter()
        .skip(channel.index())
        .step_by(3)
        .copied()
        .collect();
    Ok(RasterImage {
        width: img.width,
        height: img.height,
        channels: 1,
        maxval: img.maxval,
        samples,
    })
}

/// Maps a gray raster to `[0, 1]` by dividing by `maxval`.
pub fn normalize(img: &RasterImage) -> Result<GrayPlane, ImageError> {
    img.require_channels(1)?;
    let scale = f64::from(img.maxval);
    Ok(GrayPlane {
        width: img.width,
        height: img.height,
        values: img.samples.iter().map(|&s| f64::from(s) / scale).collect(),
    })
}

/// Source coordinate and blend weight for each destination index, using
/// pixel-center alignment: `src = (dst + 0.5) * in/out - 0.5`, clamped.
fn bilinear_taps(input: usize, output: usize) -> Vec<(usize, usize, f64)> {
    let scale = input as f64 / output as f64;
    let last = (input - 1) as f64;
    (0..output)
        .map(|dst| {
            let src = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, last);
            let lo = src.floor() as usize;
            let hi = (lo + 1).min(input - 1);
            (lo, hi, src - lo as f64)
        })
        .collect()
}

pub fn resize_bilinear(
    plane: &GrayPlane,
    out_width: usize,
    out_height: usize,
) -> Result<GrayPlane, ImageError> {
    if out_width == 0 || out_height == 0 {
        return Err(ImageError::Geometry(format!(
            "resize target {out_width}x{out_height} has a zero dimension"
        )));
    }
    let cols = bilinear_taps(plane.width, out_width);
    let rows = bilinear_taps(plane.height, out_height);
    let mut values = Vec::with_capacity(out_width * out_height);
    for &(r0, r1, fy) in &rows {
        for &(c0, c1, fx) in &cols {
            let top = (1.0 - fx) * plane.get(r0, c0) + fx * plane.get(r0, c1);
            let bottom = (1.0 - fx) * plane.get(r1, c0) + fx * plane.get(r1, c1);
            values.push((1.0 - fy) * top + fy * bottom);
        }
    }
    Ok(GrayPlane {
        width: out_width,
        height: out_height,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rgb(width: usize, height: usize, samples: Vec<u16>) -> RasterImage {
        RasterImage::new(width, height, 3, 255, samples).unwrap()
    }

    #[test]
    fn reads_p5() {
        let mut bytes = b"P5\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 255, 17, 34]);
        let img = read_pnm(&bytes).unwrap();
        assert_eq!(img, RasterImage::new(2, 2, 1, 255, vec![0, 255, 17, 34]).unwrap());
    }

    #[test]
    fn reads_p6() {
        let mut bytes = b"P6\n1 1\n255\n".to_vec();
        bytes.extend_from_slice(&[255, 255, 255]);
        let img = read_pnm(&bytes).unwrap();
        assert_eq!(img, rgb(1, 1, vec![255, 255, 255]));
    }

    #[test]
    fn skips_comments_in_header() {
        let mut bytes = b"P5\n# created by hand\n2 # width done\n1\n#max\n255\n".to_vec();
        bytes.extend_from_slice(&[9, 10]);
        let img = read_pnm(&bytes).unwrap();
        assert_eq!(img.samples(), &[9, 10]);
    }

    #[test]
    fn body_may_start_with_whitespace_byte_value() {
        // 0x0a is a valid sample right after the single separator byte.
        let mut bytes = b"P5 1 1 255\n".to_vec();
        bytes.push(b'\n');
        assert_eq!(read_pnm(&bytes).unwrap().samples(), &[10]);
    }

    #[test]
    fn reads_sixteen_bit_big_endian() {
        let mut bytes = b"P5\n2 1\n65535\n".to_vec();
        bytes.extend_from_slice(&[0x80, 0x00, 0x01, 0x02]);
        let img = read_pnm(&bytes).unwrap();
        assert_eq!(img.samples(), &[0x8000, 0x0102]);
        assert_eq!(img.maxval(), 65535);
    }

    #[test]
    fn rejects_zero_dimension() {
        assert_eq!(
            read_pnm(b"P5\n0 0\n255\n"),
            Err(PnmError::ZeroDimension { width: 0, height: 0 })
        );
    }

    #[test]
    fn distinct_errors() {
        assert!(matches!(read_pnm(b"P2\n1 1\n255\n0"), Err(PnmError::UnsupportedMagic(_))));
        assert!(matches!(read_pnm(b"P7\nWIDTH 1\n"), Err(PnmError::UnsupportedMagic(_))));
        assert!(matches!(read_pnm(b"GIF89a"), Err(PnmError::NotPnm(_))));
        assert!(matches!(read_pnm(b"P5\n2 x\n255\n"), Err(PnmError::MalformedHeader(_))));
        assert!(matches!(read_pnm(b"P5\n1 1\n70000\n\0\0"), Err(PnmError::MaxvalOutOfRange(70000))));
        assert!(matches!(read_pnm(b"P5\n1 1\n0\n\0"), Err(PnmError::MaxvalOutOfRange(0))));
        assert_eq!(
            read_pnm(b"P6\n2 1\n255\n\x01\x02\x03"),
            Err(PnmError::TruncatedBody { expected: 6, found: 3 })
        );
        assert!(matches!(read_pnm(b"P5\n1 1\n10\n\x0b"), Err(PnmError::SampleOutOfRange { .. })));
    }

    #[test]
    fn luminance_examples() {
        let img = rgb(3, 1, vec![255, 255, 255, 100, 0, 0, 10, 10, 10]);
        assert_eq!(to_luminance(&img).unwrap().samples(), &[255, 30, 10]);
    }

    #[test]
    fn luminance_rounds_half_up() {
        // 0.3 * 5 = 1.5 -> 2
        let img = rgb(1, 1, vec![5, 0, 0]);
        assert_eq!(to_luminance(&img).unwrap().samples(), &[2]);
    }

    #[test]
    fn luminance_rejects_gray() {
        let gray = RasterImage::new(1, 1, 1, 255, vec![3]).unwrap();
        assert_eq!(
            to_luminance(&gray),
            Err(ImageError::ChannelCount { expected: 3, found: 1 })
        );
    }

    #[test]
    fn channel_selection() {
        assert_eq!(select_channel(&rgb(1, 1, vec![7, 8, 9]), ColorChannel::Green).unwrap().samples(), &[8]);
        assert_eq!(select_channel(&rgb(1, 1, vec![0, 0, 0]), ColorChannel::Red).unwrap().samples(), &[0]);
        assert_eq!(
            select_channel(&rgb(2, 1, vec![1, 2, 3, 4, 5, 6]), ColorChannel::Blue).unwrap().samples(),
            &[3, 6]
        );
        let gray = RasterImage::new(1, 1, 1, 255, vec![3]).unwrap();
        assert!(select_channel(&gray, ColorChannel::Red).is_err());
    }

    #[test]
    fn normalize_examples() {
        let img = RasterImage::new(2, 1, 1, 255, vec![255, 0]).unwrap();
        assert_eq!(normalize(&img).unwrap().values(), &[1.0, 0.0]);
        let wide = RasterImage::new(1, 1, 1, 65535, vec![32768]).unwrap();
        let v = normalize(&wide).unwrap().values()[0];
        assert!((v - 0.500_007_629_510_948_3).abs() < 1e-15);
        assert!(normalize(&rgb(1, 1, vec![1, 2, 3])).is_err());
    }

    #[test]
    fn resize_constant_plane() {
        let plane = GrayPlane::constant(5, 3, 0.375).unwrap();
        let out = resize_bilinear(&plane, 11, 7).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.375));
    }

    #[test]
    fn resize_two_by_two_upsample() {
        let plane = GrayPlane::new(2, 2, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        let out = resize_bilinear(&plane, 4, 4).unwrap();
        // dst -> src: 0 -> -0.25 (clamped 0), 1 -> 0.25, 2 -> 0.75, 3 -> 1.25 (clamped 1)
        let row = [0.0, 0.25, 0.75, 1.0];
        for r in 0..4 {
            for (c, expect) in row.iter().enumerate() {
                assert!((out.get(r, c) - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn resize_identity() {
        let values: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37).sin().abs()).collect();
        let plane = GrayPlane::new(4, 3, values).unwrap();
        let out = resize_bilinear(&plane, 4, 3).unwrap();
        for (a, b) in plane.values().iter().zip(out.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn resize_rejects_zero_target() {
        let plane = GrayPlane::constant(2, 2, 0.0).unwrap();
        assert!(resize_bilinear(&plane, 0, 2).is_err());
    }
}
