//! `.cplx` volume files and 8-bit PGM magnitude images.
//!
//! A `.cplx` volume is a pair of files sharing a stem: `<stem>.json` holds the
//! header and `<stem>.bin` holds interleaved little-endian `f32` (re, im) pairs
//! in row-major order. Samples are quantized to single precision on write.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{validate_dims, ComplexVolume, Space};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CplxHeader {
    pub dims: Vec<usize>,
    pub dtype: String,
    pub order: String,
    pub endian: String,
    pub space: Space,
}

impl CplxHeader {
    fn for_volume(v: &ComplexVolume) -> Self {
        Self {
            dims: v.dims().to_vec(),
            dtype: "complex64".into(),
            order: "row-major".into(),
            endian: "little".into(),
            space: v.space(),
        }
    }
}

/// Returns the `(header, data)` paths for a volume path such as `out/k.cplx` or `out/k`.
pub fn cplx_paths(path: &Path) -> (PathBuf, PathBuf) {
    let stem = if path.extension().is_some_and(|e| e == "cplx") {
        path.with_extension("")
    } else {
        path.to_path_buf()
    };
    let mut json = stem.clone().into_os_string();
    json.push(".json");
    let mut bin = stem.into_os_string();
    bin.push(".bin");
    (json.into(), bin.into())
}

pub fn write_volume(v: &ComplexVolume, path: impl AsRef<Path>) -> Result<()> {
    let (json_path, bin_path) = cplx_paths(path.as_ref());
    let header = serde_json::to_string_pretty(&CplxHeader::for_volume(v))?;
    fs::write(&json_path, header + "\n").map_err(|e| Error::io(&json_path, e))?;
    let mut bytes = Vec::with_capacity(v.len() * 8);
    for z in v.samples() {
        bytes.extend_from_slice(&(z.re as f32).to_le_bytes());
        bytes.extend_from_slice(&(z.im as f32).to_le_bytes());
    }
    fs::write(&bin_path, bytes).map_err(|e| Error::io(&bin_path, e))
}

pub fn read_volume(path: impl AsRef<Path>) -> Result<ComplexVolume> {
    let (json_path, bin_path) = cplx_paths(path.as_ref());
    let text = fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let header: CplxHeader =
        serde_json::from_str(&text).map_err(|e| Error::MalformedHeader {
            path: json_path.clone(),
            reason: e.to_string(),
        })?;
    let malformed = |reason: String| Error::MalformedHeader {
        path: json_path.clone(),
        reason,
    };
    if header.dtype != "complex64" {
        return Err(malformed(format!("unsupported dtype {:?}", header.dtype)));
    }
    if header.order != "row-major" {
        return Err(malformed(format!("unsupported order {:?}", header.order)));
    }
    if header.endian != "little" {
        return Err(malformed(format!("unsupported endian {:?}", header.endian)));
    }
    validate_dims(&header.dims).map_err(|e| malformed(e.to_string()))?;

    let bytes = fs::read(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
    let count: usize = header.dims.iter().product();
    if bytes.len() != count * 8 {
        return Err(Error::LengthMismatch {
            path: bin_path,
            expected: count * 8,
            found: bytes.len(),
        });
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            Complex64::new(re as f64, im as f64)
        })
        .collect();
    ComplexVolume::new(&header.dims, data, header.space)
}

/// Encodes the magnitude of a 2D volume as a binary PGM (`P5`, maxval 255).
/// Rows follow axis 0, columns axis 1.
pub fn encode_magnitude_pgm(v: &ComplexVolume) -> Result<Vec<u8>> {
    if v.ndim() != 2 {
        return Err(Error::Dimension(format!(
            "PGM output needs a 2D volume, got {} axes",
            v.ndim()
        )));
    }
    let (rows, cols) = (v.dims()[0], v.dims()[1]);
    let max = v.max_abs();
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    out.extend(v.samples().iter().map(|z| {
        if max > 0.0 {
            (255.0 * z.norm() / max + 0.5).floor().min(255.0) as u8
        } else {
            0
        }
    }));
    Ok(out)
}

pub fn write_magnitude_pgm(v: &ComplexVolume, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_magnitude_pgm(v)?;
    fs::write(path.as_ref(), bytes).map_err(|e| Error::io(path.as_ref(), e))
}
