//! Relative reconstruction error and run reports.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::SamplingSpec;
use crate::volume::{ComplexVolume, RealMap};

/// `||S_orig| - |S_part||^2 / ||S_orig||^2` over magnitude images.
pub fn recon_error(original: &ComplexVolume, partial: &ComplexVolume) -> Result<f64> {
    original.check_same_shape(partial.dims())?;
    magnitude_error(&original.magnitude(), &partial.magnitude())
}

/// Same metric for real maps; absolute values are compared.
pub fn magnitude_error(original: &RealMap, partial: &RealMap) -> Result<f64> {
    if original.shape() != partial.shape() {
        return Err(Error::ShapeMismatch {
            expected: original.shape().to_vec(),
            found: partial.shape().to_vec(),
        });
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (&o, &p) in original.iter().zip(partial.iter()) {
        let d = o.abs() - p.abs();
        num += d * d;
        den += o * o;
    }
    if den == 0.0 {
        return Err(Error::UndefinedMetric);
    }
    Ok(num / den)
}

/// Mean magnitude over the samples where `region` is true.
pub fn region_mean(image: &RealMap, region: &ndarray::ArrayD<bool>) -> Result<f64> {
    if image.shape() != region.shape() {
        return Err(Error::ShapeMismatch {
            expected: image.shape().to_vec(),
            found: region.shape().to_vec(),
        });
    }
    let (sum, count) = image
        .iter()
        .zip(region.iter())
        .filter(|(_, &r)| r)
        .fold((0.0, 0usize), |(s, c), (&v, _)| (s + v.abs(), c + 1));
    if count == 0 {
        return Err(Error::InvalidSpec("region is empty".into()));
    }
    Ok(sum / count as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionStat {
    pub region: String,
    pub mean_magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconReport {
    pub method: String,
    pub spec: SamplingSpec,
    /// Relative magnitude-image error against the full k-space reconstruction.
    pub error: f64,
    pub region_stats: Vec<RegionStat>,
    pub runtime_ms: f64,
    /// Every parameter the run used.
    pub config: serde_json::Value,
    /// Method-specific diagnostics (iterations, calibration residuals, warnings).
    #[serde(default)]
    pub details: serde_json::Value,
}
