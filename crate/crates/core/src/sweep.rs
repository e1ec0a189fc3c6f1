//! Fraction and boost-factor sweeps with deterministic CSV output.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fft::{fft_centered, ifft_centered};
use crate::metrics::{magnitude_error, region_mean};
use crate::pcmra::{pcmra_pipeline, PcmraConfig, PcmraMethod};
use crate::phantoms::{disc_support, phantom_image, FlowPhantomSpec, PhantomSpec};
use crate::recon::{reconstruct, Method, ReconConfig};
use crate::sampling::{
    acquisition_mask, apply_mask, half_widths_for_fraction, AxisSampling, SamplingSpec,
};

/// One `(fraction, method)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FractionRow {
    pub fraction: f64,
    pub method: String,
    pub error: f64,
    pub half_widths: Vec<usize>,
    pub kept_fraction: f64,
    pub runtime_ms: f64,
}

/// One `(gamma, method)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaRow {
    pub gamma: f64,
    pub method: String,
    pub mean_intensity: f64,
    pub error: f64,
    pub runtime_ms: f64,
}

/// Sampling for a requested fraction: the truncated axes and acquired sides of
/// `template` with half-widths matched to `fraction`; full sampling at 1.
pub fn spec_for_fraction(dims: &[usize], template: &SamplingSpec, fraction: f64) -> Result<SamplingSpec> {
    template.validate(dims)?;
    if fraction >= 1.0 {
        if fraction > 1.0 {
            return Err(Error::InvalidSpec(format!("fraction {fraction} exceeds 1")));
        }
        return Ok(SamplingSpec::fully_sampled(dims.len()));
    }
    let axes = template.truncated_axes();
    let hs = half_widths_for_fraction(dims, &axes, fraction)?;
    let mut out = template.without_undersampling();
    for (&a, h) in axes.iter().zip(hs) {
        out.axes[a] = AxisSampling::truncated(h, template.axes[a].acquired_side);
    }
    Ok(out)
}

fn half_widths(spec: &SamplingSpec) -> Vec<usize> {
    spec.axes
        .iter()
        .map(|a| if a.is_truncated() { a.half_width } else { 0 })
        .collect()
}

fn sort_key(a: f64, m: &str, b: f64, n: &str) -> std::cmp::Ordering {
    a.total_cmp(&b).then_with(|| m.cmp(n))
}

fn check_grid(values: &[f64], what: &str) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidSpec(format!("empty {what} grid")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidSpec(format!("non-finite value in {what} grid")));
    }
    Ok(())
}

fn check_methods<T>(methods: &[T]) -> Result<()> {
    if methods.is_empty() {
        return Err(Error::InvalidSpec("no methods given".into()));
    }
    Ok(())
}

/// Error of each method against the full-k-space image at each fraction.
/// `template.sampling` selects the truncated axes and their acquired sides.
pub fn sweep_fraction(
    phantom: &PhantomSpec,
    template: &ReconConfig,
    methods: &[Method],
    fractions: &[f64],
) -> Result<Vec<FractionRow>> {
    check_grid(fractions, "fraction")?;
    check_methods(methods)?;
    let image = phantom_image(phantom)?;
    let k = fft_centered(&image)?;
    let reference = ifft_centered(&k)?.magnitude();
    let cells: Vec<Vec<FractionRow>> = fractions
        .par_iter()
        .map(|&fraction| {
            let spec = spec_for_fraction(&phantom.grid, &template.sampling, fraction)?;
            let mask = acquisition_mask(&phantom.grid, &spec)?;
            let kpk = apply_mask(&k, &mask)?;
            let cfg = ReconConfig {
                sampling: spec.clone(),
                ..template.clone()
            };
            methods
                .iter()
                .map(|&m| {
                    let start = Instant::now();
                    let r = reconstruct(&kpk, m, &cfg)?;
                    Ok(FractionRow {
                        fraction,
                        method: m.name().into(),
                        error: magnitude_error(&reference, &r.image.magnitude())?,
                        half_widths: half_widths(&spec),
                        kept_fraction: mask.kept_fraction(),
                        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut rows: Vec<FractionRow> = cells.into_iter().flatten().collect();
    rows.sort_by(|a, b| sort_key(a.fraction, &a.method, b.fraction, &b.method));
    Ok(rows)
}

/// PC-MRA variant: MIP error against the full-k-space MIP at each fraction.
pub fn sweep_fraction_pcmra(
    flow: &FlowPhantomSpec,
    template: &PcmraConfig,
    methods: &[PcmraMethod],
    fractions: &[f64],
) -> Result<Vec<FractionRow>> {
    check_grid(fractions, "fraction")?;
    check_methods(methods)?;
    let cells: Vec<Vec<FractionRow>> = fractions
        .par_iter()
        .map(|&fraction| {
            let spec = spec_for_fraction(&flow.grid, &template.sampling, fraction)?;
            let mut cfg = template.clone();
            cfg.sampling = spec.clone();
            cfg.recon.sampling = spec.clone();
            let kept = acquisition_mask(&flow.grid, &spec)?.kept_fraction();
            methods
                .iter()
                .map(|&m| {
                    let out = pcmra_pipeline(flow, &cfg, m)?;
                    Ok(FractionRow {
                        fraction,
                        method: m.name().into(),
                        error: out.report.error,
                        half_widths: half_widths(&spec),
                        kept_fraction: kept,
                        runtime_ms: out.report.runtime_ms,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut rows: Vec<FractionRow> = cells.into_iter().flatten().collect();
    rows.sort_by(|a, b| sort_key(a.fraction, &a.method, b.fraction, &b.method));
    Ok(rows)
}

/// Mean reconstructed magnitude over the disc support for each boost factor.
pub fn intensity_vs_gamma(
    phantom: &PhantomSpec,
    template: &ReconConfig,
    methods: &[Method],
    gammas: &[f64],
    fraction: f64,
) -> Result<Vec<GammaRow>> {
    check_grid(gammas, "gamma")?;
    check_methods(methods)?;
    let spec = spec_for_fraction(&phantom.grid, &template.sampling, fraction)?;
    let mask = acquisition_mask(&phantom.grid, &spec)?;
    let support = disc_support(phantom);
    let cfg = ReconConfig {
        sampling: spec,
        ..template.clone()
    };
    let cells: Vec<Vec<GammaRow>> = gammas
        .par_iter()
        .map(|&gamma| {
            let p = phantom.clone().with_gamma(gamma);
            let k = fft_centered(&phantom_image(&p)?)?;
            let reference = ifft_centered(&k)?.magnitude();
            let kpk = apply_mask(&k, &mask)?;
            methods
                .iter()
                .map(|&m| {
                    let start = Instant::now();
                    let image = reconstruct(&kpk, m, &cfg)?.image.magnitude();
                    Ok(GammaRow {
                        gamma,
                        method: m.name().into(),
                        mean_intensity: region_mean(&image, &support)?,
                        error: magnitude_error(&reference, &image)?,
                        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut rows: Vec<GammaRow> = cells.into_iter().flatten().collect();
    rows.sort_by(|a, b| sort_key(a.gamma, &a.method, b.gamma, &b.method));
    Ok(rows)
}

/// Max minus min of `mean_intensity` over the rows of one method.
pub fn intensity_spread(rows: &[GammaRow], method: &str) -> Option<f64> {
    let values: Vec<f64> = rows
        .iter()
        .filter(|r| r.method == method)
        .map(|r| r.mean_intensity)
        .collect();
    if values.is_empty() {
        return None;
    }
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    Some(max - min)
}

fn join_widths(hs: &[usize]) -> String {
    hs.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(";")
}

/// Wall-clock timings differ between runs, so they are only written on request.
pub fn fraction_csv(rows: &[FractionRow], with_timing: bool) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["fraction", "method", "error", "half_widths", "kept_fraction"];
    if with_timing {
        header.push("runtime_ms");
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.fraction.to_string(),
            r.method.clone(),
            r.error.to_string(),
            join_widths(&r.half_widths),
            r.kept_fraction.to_string(),
        ];
        if with_timing {
            rec.push(r.runtime_ms.to_string());
        }
        w.write_record(&rec)?;
    }
    w.into_inner()
        .map_err(|e| Error::Csv(csv::Error::from(e.into_error())))
}

pub fn gamma_csv(rows: &[GammaRow], with_timing: bool) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["gamma", "method", "mean_intensity", "error"];
    if with_timing {
        header.push("runtime_ms");
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.gamma.to_string(),
            r.method.clone(),
            r.mean_intensity.to_string(),
            r.error.to_string(),
        ];
        if with_timing {
            rec.push(r.runtime_ms.to_string());
        }
        w.write_record(&rec)?;
    }
    w.into_inner()
        .map_err(|e| Error::Csv(csv::Error::from(e.into_error())))
}

pub fn write_bytes(bytes: &[u8], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
