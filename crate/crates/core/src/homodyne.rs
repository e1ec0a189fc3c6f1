//! Homodyne partial-Fourier reconstruction.
//!
//! The conventional form ramp-weights the partial k-space along one axis,
//! compensates the result with the phase of a symmetric low-pass estimate and
//! keeps the real part. The extended form repeats this independently along
//! every truncated axis: in 2D the real parts of the per-axis branches are
//! averaged; in 3D the weighted images are summed, the symmetric k-spaces are
//! summed, and a single phase estimate compensates the sum.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::ifft_centered;
use crate::sampling::{ramp_weight, sym_window, RampMode, SamplingSpec};
use crate::volume::{ComplexVolume, Space};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalPart {
    #[default]
    Real,
    Magnitude,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomodyneConfig {
    pub spec: SamplingSpec,
    #[serde(default)]
    pub ramp_mode: RampMode,
    #[serde(default)]
    pub final_part: FinalPart,
    /// Divide the 3D weighted-image sum by the number of summed branches.
    #[serde(default)]
    pub normalize_sum: bool,
}

impl HomodyneConfig {
    pub fn new(spec: SamplingSpec) -> Self {
        Self {
            spec,
            ramp_mode: RampMode::default(),
            final_part: FinalPart::default(),
            normalize_sum: false,
        }
    }

    pub fn normalized(mut self) -> Self {
        self.normalize_sum = true;
        self
    }
}

/// `conj(s) / |s|`, with 1 where `s == 0`.
pub(crate) fn phase_conjugate(s: Complex64) -> Complex64 {
    let m = s.norm();
    if m > 0.0 {
        s.conj() / m
    } else {
        Complex64::new(1.0, 0.0)
    }
}

fn project(z: Complex64, part: FinalPart) -> f64 {
    match part {
        FinalPart::Real => z.re,
        FinalPart::Magnitude => z.norm(),
    }
}

fn check_input(kpk: &ComplexVolume, cfg: &HomodyneConfig) -> Result<()> {
    kpk.require_space(Space::Kspace)?;
    cfg.spec.validate(kpk.dims())
}

/// Ramp-weighted image and symmetric-window image along one truncated axis.
fn axis_branch(
    kpk: &ComplexVolume,
    cfg: &HomodyneConfig,
    axis: usize,
) -> Result<(ComplexVolume, ComplexVolume)> {
    let a = cfg.spec.axes[axis];
    let n = kpk.dims()[axis];
    let weighted = kpk.scale_along_axis(axis, &ramp_weight(n, a.half_width, a.acquired_side, cfg.ramp_mode)?)?;
    let sym = kpk.scale_along_axis(axis, &sym_window(n, a.half_width)?)?;
    Ok((ifft_centered(&weighted)?, ifft_centered(&sym)?))
}

fn compensate(weighted: &ComplexVolume, sym: &ComplexVolume) -> Result<ComplexVolume> {
    weighted.zip_map(sym, |w, s| w * phase_conjugate(s))
}

fn real_volume(values: impl Iterator<Item = f64>, dims: &[usize]) -> Result<ComplexVolume> {
    ComplexVolume::new(
        dims,
        values.map(|x| Complex64::new(x, 0.0)).collect(),
        Space::Image,
    )
}

/// Plain inverse transform of the zero-filled k-space.
pub fn zero_fill_recon(kpk: &ComplexVolume) -> Result<ComplexVolume> {
    ifft_centered(kpk)
}

/// Conventional homodyne along `axis`; other axes are left as acquired. An
/// untruncated `axis` gives the magnitude of the plain reconstruction.
pub fn homodyne_1d(kpk: &ComplexVolume, axis: usize, cfg: &HomodyneConfig) -> Result<ComplexVolume> {
    check_input(kpk, cfg)?;
    if axis >= kpk.ndim() {
        return Err(Error::Dimension(format!(
            "axis {axis} out of range for a {}-axis volume",
            kpk.ndim()
        )));
    }
    if !cfg.spec.axes[axis].is_truncated() {
        return untruncated(kpk, cfg);
    }
    let (weighted, sym) = axis_branch(kpk, cfg, axis)?;
    let comp = compensate(&weighted, &sym)?;
    real_volume(
        comp.samples().iter().map(|&z| project(z, cfg.final_part)),
        kpk.dims(),
    )
}

/// Extended homodyne for a 2D partial k-space: the mean of the per-axis
/// compensated real images (axis 0 branch first).
pub fn homodyne_2d_extended(kpk: &ComplexVolume, cfg: &HomodyneConfig) -> Result<ComplexVolume> {
    if kpk.ndim() != 2 {
        return Err(Error::Dimension(format!(
            "2D extended homodyne needs a 2D k-space, got {} axes",
            kpk.ndim()
        )));
    }
    check_input(kpk, cfg)?;
    let axes = cfg.spec.truncated_axes();
    if axes.is_empty() {
        return untruncated(kpk, cfg);
    }
    let mut acc = vec![0.0; kpk.len()];
    for &axis in &axes {
        let (weighted, sym) = axis_branch(kpk, cfg, axis)?;
        let comp = compensate(&weighted, &sym)?;
        for (a, &z) in acc.iter_mut().zip(comp.samples()) {
            *a += project(z, cfg.final_part);
        }
    }
    let scale = 1.0 / axes.len() as f64;
    real_volume(acc.into_iter().map(|x| x * scale), kpk.dims())
}

/// Compensated 3D volume before the final projection.
#[derive(Debug, Clone)]
pub struct Compensated3d {
    /// `p* . s_wpk`
    pub compensated: ComplexVolume,
    /// Sum of the inverse-transformed symmetric k-spaces.
    pub sym: ComplexVolume,
}

/// Extended homodyne for a 3D partial k-space, before taking the real part.
pub fn homodyne_3d_compensated(kpk: &ComplexVolume, cfg: &HomodyneConfig) -> Result<Compensated3d> {
    if kpk.ndim() != 3 {
        return Err(Error::Dimension(format!(
            "3D extended homodyne needs a 3D k-space, got {} axes",
            kpk.ndim()
        )));
    }
    check_input(kpk, cfg)?;
    let axes = cfg.spec.truncated_axes();
    if axes.is_empty() {
        let s = ifft_centered(kpk)?;
        let compensated = compensate(&s, &s)?;
        return Ok(Compensated3d { compensated, sym: s });
    }
    let mut weighted_sum: Option<ComplexVolume> = None;
    let mut sym_k: Option<ComplexVolume> = None;
    for &axis in &axes {
        let a = cfg.spec.axes[axis];
        let n = kpk.dims()[axis];
        let weighted = kpk.scale_along_axis(axis, &ramp_weight(n, a.half_width, a.acquired_side, cfg.ramp_mode)?)?;
        let image = ifft_centered(&weighted)?;
        weighted_sum = Some(match weighted_sum {
            None => image,
            Some(acc) => acc.add(&image)?,
        });
        let sym = kpk.scale_along_axis(axis, &sym_window(n, a.half_width)?)?;
        sym_k = Some(match sym_k {
            None => sym,
            Some(acc) => acc.add(&sym)?,
        });
    }
    let mut weighted_sum = weighted_sum.expect("at least one truncated axis");
    if cfg.normalize_sum {
        weighted_sum = weighted_sum.scale(1.0 / axes.len() as f64);
    }
    let sym = ifft_centered(&sym_k.expect("at least one truncated axis"))?;
    let compensated = compensate(&weighted_sum, &sym)?;
    Ok(Compensated3d { compensated, sym })
}

pub fn homodyne_3d_extended(kpk: &ComplexVolume, cfg: &HomodyneConfig) -> Result<ComplexVolume> {
    let c = homodyne_3d_compensated(kpk, cfg)?;
    real_volume(
        c.compensated.samples().iter().map(|&z| project(z, cfg.final_part)),
        kpk.dims(),
    )
}

fn untruncated(kpk: &ComplexVolume, cfg: &HomodyneConfig) -> Result<ComplexVolume> {
    let s = ifft_centered(kpk)?;
    let comp = compensate(&s, &s)?;
    real_volume(
        comp.samples().iter().map(|&z| project(z, cfg.final_part)),
        kpk.dims(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{AcquiredSide, AxisSampling};

    #[test]
    fn zero_kspace_gives_zero_image() {
        let k = ComplexVolume::zeros(&[16, 16], Space::Kspace).unwrap();
        let spec = SamplingSpec::new(vec![
            AxisSampling::truncated(3, AcquiredSide::Positive),
            AxisSampling::truncated(3, AcquiredSide::Negative),
        ]);
        let cfg = HomodyneConfig::new(spec);
        for img in [
            homodyne_1d(&k, 0, &cfg).unwrap(),
            homodyne_2d_extended(&k, &cfg).unwrap(),
        ] {
            assert!(img.samples().iter().all(|z| *z == Complex64::new(0.0, 0.0)));
        }
        let k3 = ComplexVolume::zeros(&[8, 8, 8], Space::Kspace).unwrap();
        let cfg3 = HomodyneConfig::new(SamplingSpec::new(vec![
            AxisSampling::truncated(2, AcquiredSide::Positive);
            3
        ]));
        let img = homodyne_3d_extended(&k3, &cfg3).unwrap();
        assert!(img.samples().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn rank_and_axis_errors() {
        let k = ComplexVolume::zeros(&[8, 8], Space::Kspace).unwrap();
        let cfg = HomodyneConfig::new(SamplingSpec::new(vec![
            AxisSampling::truncated(2, AcquiredSide::Positive),
            AxisSampling::full(),
        ]));
        assert!(matches!(homodyne_1d(&k, 2, &cfg), Err(Error::Dimension(_))));
        assert!(homodyne_1d(&k, 1, &cfg).is_ok());
        assert!(matches!(homodyne_3d_extended(&k, &cfg), Err(Error::Dimension(_))));
        let short = HomodyneConfig::new(SamplingSpec::fully_sampled(1));
        assert!(homodyne_2d_extended(&k, &short).is_err());
        let img = ComplexVolume::zeros(&[8, 8], Space::Image).unwrap();
        assert!(matches!(homodyne_1d(&img, 0, &cfg), Err(Error::SpaceMismatch { .. })));
    }

    #[test]
    fn phase_conjugate_of_zero_is_one() {
        assert_eq!(phase_conjugate(Complex64::new(0.0, 0.0)), Complex64::new(1.0, 0.0));
        let z = phase_conjugate(Complex64::new(0.0, 2.0));
        assert!((z - Complex64::new(0.0, -1.0)).norm() < 1e-16);
    }
}
