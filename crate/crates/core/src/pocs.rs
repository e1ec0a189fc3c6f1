//! Projection onto convex sets for partial k-space.
//!
//! Alternates a phase constraint (magnitude of the current estimate with the
//! phase of a centered low-pass reconstruction) with data consistency
//! (acquired k-space samples restored).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{fft_centered, ifft_centered};
use crate::sampling::{acquisition_mask, sym_window, Mask, SamplingSpec};
use crate::volume::{ComplexVolume, Space};

fn default_iters() -> usize {
    20
}

fn default_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PocsConfig {
    #[serde(default = "default_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    pub spec: SamplingSpec,
}

impl PocsConfig {
    pub fn new(spec: SamplingSpec) -> Self {
        Self {
            max_iters: default_iters(),
            tol: default_tol(),
            spec,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidSpec("max_iters must be at least 1".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidSpec("tol must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PocsOutcome {
    pub image: ComplexVolume,
    pub iterations: usize,
    /// Relative change `||s_t - s_{t-1}|| / ||s_{t-1}||` per iteration.
    pub changes: Vec<f64>,
}

/// Unit phasors of the low-pass reference: product of per-axis symmetric windows.
fn reference_phase(kpk: &ComplexVolume, spec: &SamplingSpec) -> Result<ComplexVolume> {
    let mut low = kpk.clone();
    for axis in spec.truncated_axes() {
        let n = kpk.dims()[axis];
        low = low.scale_along_axis(axis, &sym_window(n, spec.axes[axis].half_width)?)?;
    }
    let low = ifft_centered(&low)?;
    Ok(low.map(|z| {
        let m = z.norm();
        if m > 0.0 {
            z / m
        } else {
            Complex64::new(1.0, 0.0)
        }
    }))
}

pub fn pocs_recon(kpk: &ComplexVolume, cfg: &PocsConfig) -> Result<PocsOutcome> {
    pocs_recon_observed(kpk, cfg, |_, _| {})
}

/// Runs POCS and hands the k-space after every data-consistency step to `observe`.
pub fn pocs_recon_observed(
    kpk: &ComplexVolume,
    cfg: &PocsConfig,
    mut observe: impl FnMut(usize, &ComplexVolume),
) -> Result<PocsOutcome> {
    cfg.validate()?;
    kpk.require_space(Space::Kspace)?;
    let mask = acquisition_mask(kpk.dims(), &cfg.spec)?;
    let mut s = ifft_centered(kpk)?;
    if kpk.energy() == 0.0 {
        return Ok(PocsOutcome {
            image: s,
            iterations: 0,
            changes: Vec::new(),
        });
    }
    let phase = reference_phase(kpk, &cfg.spec)?;
    let mut changes = Vec::with_capacity(cfg.max_iters);
    for iter in 1..=cfg.max_iters {
        let constrained = s.zip_map(&phase, |z, p| p * z.norm())?;
        let mut k = fft_centered(&constrained)?;
        restore_acquired(&mut k, kpk, &mask);
        observe(iter, &k);
        let next = ifft_centered(&k)?;
        let prev_norm = s.l2_norm();
        let diff = next.zip_map(&s, |a, b| a - b)?.l2_norm();
        let change = if prev_norm > 0.0 { diff / prev_norm } else { f64::INFINITY };
        changes.push(change);
        s = next;
        if change < cfg.tol {
            break;
        }
    }
    Ok(PocsOutcome {
        image: s,
        iterations: changes.len(),
        changes,
    })
}

fn restore_acquired(k: &mut ComplexVolume, kpk: &ComplexVolume, mask: &Mask) {
    ndarray::Zip::from(k.array_mut())
        .and(kpk.array())
        .and(mask.data())
        .for_each(|z, &acq, &m| {
            if m {
                *z = acq;
            }
        });
}
