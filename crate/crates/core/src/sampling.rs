//! Partial k-space construction: per-axis truncation, interleaved
//! undersampling, and the ramp and box profiles used for phase correction.

use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{centered_coord, validate_dims, ComplexVolume, Space};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcquiredSide {
    /// Keeps `k in [-half_width, N/2 - 1]`.
    Positive,
    /// Keeps `k in [-N/2, half_width]`.
    Negative,
    /// Axis is not truncated.
    Full,
}

/// How the ramp weight behaves beyond `|k| > half_width`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RampMode {
    /// Weight 2 over the acquired asymmetric region, 0 over the unacquired one.
    #[default]
    StandardExtension,
    /// Weight 0 everywhere outside the ramp.
    RampOnly,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxisSampling {
    pub half_width: usize,
    pub acquired_side: AcquiredSide,
    #[serde(default = "one")]
    pub undersample_factor: usize,
    #[serde(default)]
    pub acs_half_width: usize,
}

impl AxisSampling {
    pub fn full() -> Self {
        Self {
            half_width: 0,
            acquired_side: AcquiredSide::Full,
            undersample_factor: 1,
            acs_half_width: 0,
        }
    }

    pub fn truncated(half_width: usize, acquired_side: AcquiredSide) -> Self {
        Self {
            half_width,
            acquired_side,
            undersample_factor: 1,
            acs_half_width: 0,
        }
    }

    pub fn with_undersampling(mut self, factor: usize, acs_half_width: usize) -> Self {
        self.undersample_factor = factor;
        self.acs_half_width = acs_half_width;
        self
    }

    pub fn is_truncated(&self) -> bool {
        self.acquired_side != AcquiredSide::Full
    }

    fn validate(&self, axis: usize, n: usize) -> Result<()> {
        if self.is_truncated() && self.half_width + 1 > n / 2 {
            return Err(Error::InvalidSpec(format!(
                "axis {axis}: half_width {} exceeds N/2 - 1 = {}",
                self.half_width,
                n / 2 - 1
            )));
        }
        if self.undersample_factor == 0 {
            return Err(Error::InvalidSpec(format!(
                "axis {axis}: undersample_factor must be at least 1"
            )));
        }
        if self.undersample_factor > 1 {
            if self.acs_half_width + 1 > n / 2 {
                return Err(Error::InvalidSpec(format!(
                    "axis {axis}: acs_half_width {} exceeds N/2 - 1",
                    self.acs_half_width
                )));
            }
            if self.is_truncated() && self.acs_half_width > self.half_width {
                return Err(Error::InvalidSpec(format!(
                    "axis {axis}: acs_half_width {} exceeds half_width {}",
                    self.acs_half_width, self.half_width
                )));
            }
        }
        Ok(())
    }

    /// Truncation band along this axis, ignoring undersampling.
    pub fn band_profile(&self, n: usize) -> Vec<bool> {
        let half = (n / 2) as isize;
        let h = self.half_width as isize;
        (0..n)
            .map(|i| {
                let k = centered_coord(i, n);
                match self.acquired_side {
                    AcquiredSide::Full => true,
                    AcquiredSide::Positive => k >= -h && k <= half - 1,
                    AcquiredSide::Negative => k >= -half && k <= h,
                }
            })
            .collect()
    }

    /// Acquired lines along this axis: the band thinned to every R-th line
    /// counted outward from `k = 0`, plus the ACS block.
    pub fn acquired_profile(&self, n: usize) -> Vec<bool> {
        let r = self.undersample_factor as isize;
        let acs = self.acs_half_width as isize;
        self.band_profile(n)
            .into_iter()
            .enumerate()
            .map(|(i, in_band)| {
                let k = centered_coord(i, n);
                in_band && (r <= 1 || k.rem_euclid(r) == 0 || k.abs() <= acs)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingSpec {
    pub axes: Vec<AxisSampling>,
}

impl SamplingSpec {
    pub fn new(axes: Vec<AxisSampling>) -> Self {
        Self { axes }
    }

    pub fn fully_sampled(ndim: usize) -> Self {
        Self {
            axes: vec![AxisSampling::full(); ndim],
        }
    }

    pub fn validate(&self, dims: &[usize]) -> Result<()> {
        validate_dims(dims)?;
        if self.axes.len() != dims.len() {
            return Err(Error::InvalidSpec(format!(
                "sampling spec has {} axes but the volume has {}",
                self.axes.len(),
                dims.len()
            )));
        }
        for (axis, (spec, &n)) in self.axes.iter().zip(dims).enumerate() {
            spec.validate(axis, n)?;
        }
        Ok(())
    }

    pub fn truncated_axes(&self) -> Vec<usize> {
        (0..self.axes.len())
            .filter(|&a| self.axes[a].is_truncated())
            .collect()
    }

    /// Same truncation with every axis fully sampled inside its band.
    pub fn without_undersampling(&self) -> Self {
        Self {
            axes: self
                .axes
                .iter()
                .map(|a| AxisSampling {
                    undersample_factor: 1,
                    acs_half_width: 0,
                    ..*a
                })
                .collect(),
        }
    }

    /// Fraction of k-space inside the truncation band, `prod((N/2 + h) / N)`.
    pub fn band_fraction(&self, dims: &[usize]) -> f64 {
        self.axes
            .iter()
            .zip(dims)
            .map(|(a, &n)| {
                if a.is_truncated() {
                    (n / 2 + a.half_width) as f64 / n as f64
                } else {
                    1.0
                }
            })
            .product()
    }
}

/// Binary acquisition mask with the per-axis profiles it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    spec: SamplingSpec,
    profiles: Vec<Vec<bool>>,
    bands: Vec<Vec<bool>>,
    data: ArrayD<bool>,
}

impl Mask {
    pub fn spec(&self) -> &SamplingSpec {
        &self.spec
    }

    pub fn dims(&self) -> &[usize] {
        self.data.shape()
    }

    pub fn data(&self) -> &ArrayD<bool> {
        &self.data
    }

    pub fn profile(&self, axis: usize) -> &[bool] {
        &self.profiles[axis]
    }

    pub fn band(&self, axis: usize) -> &[bool] {
        &self.bands[axis]
    }

    pub fn is_acquired(&self, index: &[usize]) -> bool {
        self.data[IxDyn(index)]
    }

    /// True where the sample lies inside the truncation band on every axis.
    pub fn in_band(&self, index: &[usize]) -> bool {
        index.iter().enumerate().all(|(a, &i)| self.bands[a][i])
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&m| m).count()
    }

    pub fn kept_fraction(&self) -> f64 {
        self.count() as f64 / self.data.len() as f64
    }
}

pub fn acquisition_mask(dims: &[usize], spec: &SamplingSpec) -> Result<Mask> {
    spec.validate(dims)?;
    let profiles: Vec<Vec<bool>> = spec
        .axes
        .iter()
        .zip(dims)
        .map(|(a, &n)| a.acquired_profile(n))
        .collect();
    let bands: Vec<Vec<bool>> = spec
        .axes
        .iter()
        .zip(dims)
        .map(|(a, &n)| a.band_profile(n))
        .collect();
    let data = ArrayD::from_shape_fn(IxDyn(dims), |idx| {
        (0..dims.len()).all(|a| profiles[a][idx[a]])
    });
    Ok(Mask {
        spec: spec.clone(),
        profiles,
        bands,
        data,
    })
}

/// Zeroes every sample outside the mask; acquired samples are copied untouched.
pub fn apply_mask(k: &ComplexVolume, mask: &Mask) -> Result<ComplexVolume> {
    k.require_space(Space::Kspace)?;
    k.check_same_shape(mask.dims())?;
    let zero = Complex64::new(0.0, 0.0);
    let mut out = k.array().clone();
    ndarray::Zip::from(&mut out)
        .and(&mask.data)
        .for_each(|z, &keep| {
            if !keep {
                *z = zero;
            }
        });
    ComplexVolume::from_array(out, Space::Kspace)
}

fn check_half_width(n: usize, half_width: usize) -> Result<()> {
    if n % 2 != 0 || half_width == 0 || half_width + 1 > n / 2 {
        return Err(Error::InvalidSpec(format!(
            "half_width {half_width} must lie in [1, N/2 - 1] for N = {n}"
        )));
    }
    Ok(())
}

/// Homodyne ramp over an axis of length `n`. A `Full` axis gets unit weight.
pub fn ramp_weight(
    n: usize,
    half_width: usize,
    side: AcquiredSide,
    mode: RampMode,
) -> Result<Vec<f64>> {
    if side == AcquiredSide::Full {
        return Ok(vec![1.0; n]);
    }
    check_half_width(n, half_width)?;
    let h = half_width as f64;
    let beyond = match mode {
        RampMode::StandardExtension => 2.0,
        RampMode::RampOnly => 0.0,
    };
    Ok((0..n)
        .map(|i| {
            // Orient so that `k > 0` always points into the acquired side.
            let k = centered_coord(i, n) as f64;
            let k = if side == AcquiredSide::Negative { -k } else { k };
            if k < -h {
                0.0
            } else if k > h {
                beyond
            } else {
                k / h + 1.0
            }
        })
        .collect())
}

/// Symmetric box: 1 on `[-half_width, half_width]`, else 0.
pub fn sym_window(n: usize, half_width: usize) -> Result<Vec<f64>> {
    check_half_width(n, half_width)?;
    let h = half_width as isize;
    Ok((0..n)
        .map(|i| {
            if centered_coord(i, n).abs() <= h {
                1.0
            } else {
                0.0
            }
        })
        .collect())
}

/// Per-axis half-widths whose band fraction is closest to `fraction`.
///
/// Each truncated axis starts from `h = N * fraction^(1/d) - N/2`; all floor and
/// ceiling combinations are scored and the closest product wins. Half-widths
/// are clamped to `[1, N/2 - 1]`, so fractions below `prod((N/2 + 1)/N)` clamp.
pub fn half_widths_for_fraction(dims: &[usize], axes: &[usize], fraction: f64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidSpec(format!(
            "fraction {fraction} must lie in (0, 1]"
        )));
    }
    if axes.is_empty() {
        return Err(Error::InvalidSpec("no truncated axes to map a fraction onto".into()));
    }
    let d = axes.len() as f64;
    let per_axis = fraction.powf(1.0 / d);
    let candidates: Vec<[usize; 2]> = axes
        .iter()
        .map(|&a| {
            let n = dims[a];
            let ideal = per_axis * n as f64 - (n / 2) as f64;
            let clamp = |x: f64| x.max(1.0).min((n / 2 - 1) as f64) as usize;
            [clamp(ideal.floor()), clamp(ideal.ceil())]
        })
        .collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for bits in 0..(1usize << axes.len()) {
        let hs: Vec<usize> = (0..axes.len())
            .map(|j| candidates[j][(bits >> j) & 1])
            .collect();
        let achieved: f64 = axes
            .iter()
            .zip(&hs)
            .map(|(&a, &h)| (dims[a] / 2 + h) as f64 / dims[a] as f64)
            .product();
        let err = (achieved - fraction).abs();
        if best.as_ref().is_none_or(|(e, _)| err < *e) {
            best = Some((err, hs));
        }
    }
    Ok(best.map(|(_, hs)| hs).unwrap_or_default())
}
