//! Point cloud files and scan merging.
//!
//! Supported on read and write: PLY (`ascii 1.0`, `binary_little_endian 1.0`)
//! and PCD 0.7 (`DATA ascii`, `DATA binary`). Besides `x y z` the readers
//! understand an optional `intensity` and an optional integer
//! `classification` column holding [`Label`] codes; other scalar
//! properties are skipped with a warning.
//!
//! Binary output stores coordinates as 64-bit floats and reproduces them
//! exactly. ASCII output keeps 6 significant digits.

mod merge;
mod pcd;
mod ply;

use std::fs;
use std::path::Path;

pub use merge::{merge_scans, parse_pose_list, Pose};

use crate::{Error, Label, LabelMask, PointCloud, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    PlyAscii,
    PlyBinaryLe,
    PcdAscii,
    PcdBinary,
}

impl CloudFormat {
    /// Binary flavour matching the file extension (`.ply` or `.pcd`).
    pub fn from_path(path: &Path) -> Option<CloudFormat> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "ply" => Some(CloudFormat::PlyBinaryLe),
            "pcd" => Some(CloudFormat::PcdBinary),
            _ => None,
        }
    }

    pub fn is_binary(self) -> bool {
        matches!(self, CloudFormat::PlyBinaryLe | CloudFormat::PcdBinary)
    }
}

/// Everything read from a cloud file.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedCloud {
    pub cloud: PointCloud,
    pub labels: Option<LabelMask>,
    pub format: CloudFormat,
}

/// Parses an in-memory PLY or PCD document; the format is sniffed from the
/// first bytes.
pub fn parse_cloud(bytes: &[u8]) -> Result<LoadedCloud> {
    if bytes.starts_with(b"ply") {
        ply::read(bytes)
    } else {
        pcd::read(bytes)
    }
}

/// Reads a cloud together with its classification column, if present.
pub fn read_cloud(path: impl AsRef<Path>) -> Result<LoadedCloud> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_cloud(&bytes)
}

/// Reads only the points of a cloud file.
pub fn load_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    read_cloud(path).map(|l| l.cloud)
}

/// Serialises a cloud (and optional labels) to bytes.
pub fn encode_cloud(
    cloud: &PointCloud,
    labels: Option<&LabelMask>,
    format: CloudFormat,
) -> Result<Vec<u8>> {
    if let Some(l) = labels {
        l.expect_len(cloud.len())?;
    }
    Ok(match format {
        CloudFormat::PlyAscii | CloudFormat::PlyBinaryLe => ply::write(cloud, labels, format),
        CloudFormat::PcdAscii | CloudFormat::PcdBinary => pcd::write(cloud, labels, format),
    })
}

pub fn save_cloud(
    cloud: &PointCloud,
    labels: Option<&LabelMask>,
    path: impl AsRef<Path>,
    format: CloudFormat,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_cloud(cloud, labels, format)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) const LABEL_LEGEND: &str =
    "classification codes: 0=unlabeled 1=ground 2=non_ground 7=outlier";

pub(crate) fn label_from_value(v: f64) -> Result<Label> {
    if v.fract() == 0.0 && (0.0..=255.0).contains(&v) {
        if let Some(l) = Label::from_code(v as u8) {
            return Ok(l);
        }
    }
    Err(Error::MalformedBody(format!(
        "unknown classification code {v}"
    )))
}

/// `%g`-style rendering with 6 significant digits.
pub fn format_sig6(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_string()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Numeric property types shared by PLY and PCD.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    pub(crate) fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    pub(crate) fn is_float(self) -> bool {
        matches!(self, Scalar::F32 | Scalar::F64)
    }

    /// Reads one little-endian value; `bytes` must hold at least `size()`.
    pub(crate) fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().expect("8 bytes")),
        }
    }
}

/// Splits off the header: everything up to and including the line that
/// satisfies `is_last`. Returns the header lines and the body offset.
pub(crate) fn split_header(
    bytes: &[u8],
    is_last: impl Fn(&str) -> bool,
) -> Result<(Vec<&str>, usize)> {
    let mut lines = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .map_or(bytes.len(), |e| pos + e);
        let line = std::str::from_utf8(&bytes[pos..end])
            .map_err(|_| Error::MalformedHeader("header is not valid UTF-8".into()))?
            .trim_end_matches('\r');
        pos = (end + 1).min(bytes.len());
        let last = is_last(line.trim());
        lines.push(line);
        if last {
            return Ok((lines, pos));
        }
    }
    Err(Error::MalformedHeader("header is not terminated".into()))
}
