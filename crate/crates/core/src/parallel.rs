//! Multichannel pathway: coil simulation, GRAPPA calibration and filling
//! along the phase-encode axis (axis 0), per-channel phase correction and
//! root-sum-of-squares combination.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use ndarray::{Array2, Ix2};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{fft_centered, ifft_centered};
use crate::metrics::{magnitude_error, region_mean, ReconReport, RegionStat};
use crate::phantoms::CoilSet;
use crate::recon::{reconstruct, Method, ReconConfig};
use crate::sampling::{acquisition_mask, apply_mask, Mask, SamplingSpec};
use crate::volume::{centered_coord, ComplexVolume, RealMap, Space};

fn default_readout() -> usize {
    5
}

fn default_neighbors() -> usize {
    4
}

fn default_regularization() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrappaConfig {
    pub r: usize,
    #[serde(default = "default_readout")]
    pub kernel_readout: usize,
    /// Sampled phase-encode lines used as sources, half below and half above the target.
    #[serde(default = "default_neighbors")]
    pub kernel_pe_neighbors: usize,
    pub acs_half_width: usize,
    /// Tikhonov weight relative to the mean diagonal of the normal matrix.
    #[serde(default = "default_regularization")]
    pub regularization: f64,
}

impl GrappaConfig {
    /// Default kernel geometry with `R` and the ACS width taken from axis 0 of `spec`.
    pub fn for_sampling(spec: &SamplingSpec) -> Self {
        let pe = spec.axes.first().copied().unwrap_or(crate::sampling::AxisSampling::full());
        Self {
            r: pe.undersample_factor,
            kernel_readout: default_readout(),
            kernel_pe_neighbors: default_neighbors(),
            acs_half_width: pe.acs_half_width,
            regularization: default_regularization(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.r == 0 {
            return Err(Error::InvalidSpec("GRAPPA r must be at least 1".into()));
        }
        if self.kernel_readout == 0 || self.kernel_readout % 2 == 0 {
            return Err(Error::InvalidSpec("kernel_readout must be odd and positive".into()));
        }
        if self.kernel_pe_neighbors == 0 || self.kernel_pe_neighbors % 2 != 0 {
            return Err(Error::InvalidSpec(
                "kernel_pe_neighbors must be even and positive".into(),
            ));
        }
        if !(self.regularization >= 0.0) {
            return Err(Error::InvalidSpec("regularization must be non-negative".into()));
        }
        Ok(())
    }

    fn n_sources(&self, n_coils: usize) -> usize {
        self.kernel_readout * self.kernel_pe_neighbors * n_coils
    }

    /// Row offsets of the source lines relative to a target at offset `delta`
    /// above its nearest sampled line.
    fn pe_offsets(&self, delta: usize) -> Vec<isize> {
        let r = self.r as isize;
        let half = (self.kernel_pe_neighbors / 2) as isize;
        (-(half - 1)..=half).map(|j| r * j - delta as isize).collect()
    }

    fn readout_offsets(&self) -> Vec<isize> {
        let half = (self.kernel_readout / 2) as isize;
        (-half..=half).collect()
    }
}

/// Calibrated GRAPPA weights: one `(sources x coils)` matrix per missing-line offset.
#[derive(Debug, Clone)]
pub struct GrappaWeights {
    pub config: GrappaConfig,
    pub n_coils: usize,
    pub dims: Vec<usize>,
    pub kernels: Vec<DMatrix<Complex64>>,
    /// Relative least-squares residual over all calibration equations.
    pub acs_residual: f64,
    pub equations_per_offset: Vec<usize>,
}

/// `K_c = fft(image * map_c)` for every coil.
pub fn simulate_channels(image: &ComplexVolume, coils: &CoilSet) -> Result<Vec<ComplexVolume>> {
    coils.validate()?;
    image.require_space(Space::Image)?;
    image.check_same_shape(coils.dims())?;
    coils
        .maps
        .par_iter()
        .map(|map| fft_centered(&image.zip_map(map, |s, c| s * c)?))
        .collect()
}

/// Pointwise `sqrt(sum_c |s_c|^2)`, summed in channel order.
pub fn sos_combine(images: &[ComplexVolume]) -> Result<RealMap> {
    let first = images
        .first()
        .ok_or_else(|| Error::InvalidSpec("no channel images to combine".into()))?;
    let mut acc = RealMap::zeros(first.array().raw_dim());
    for img in images {
        first.check_same_shape(img.dims())?;
        ndarray::Zip::from(&mut acc)
            .and(img.array())
            .for_each(|a, z| *a += z.norm_sqr());
    }
    Ok(acc.mapv(f64::sqrt))
}

fn as_2d(v: &ComplexVolume) -> Result<ndarray::ArrayView2<'_, Complex64>> {
    v.array()
        .view()
        .into_dimensionality::<Ix2>()
        .map_err(|_| Error::Dimension(format!("GRAPPA needs 2D k-spaces, got {:?}", v.dims())))
}

fn check_channels(channels: &[ComplexVolume], mask: &Mask) -> Result<()> {
    let first = channels
        .first()
        .ok_or_else(|| Error::InvalidSpec("no channels given".into()))?;
    for c in channels {
        c.require_space(Space::Kspace)?;
        first.check_same_shape(c.dims())?;
    }
    as_2d(first)?;
    first.check_same_shape(mask.dims())
}

/// Gathers source samples for a target at `(row, col)`; `None` if any source is
/// out of bounds or not acquired and `strict` is set, zero-filled otherwise.
#[allow(clippy::too_many_arguments)]
fn gather_sources(
    data: &[ndarray::ArrayView2<'_, Complex64>],
    acquired: &Array2<bool>,
    row: usize,
    col: usize,
    pe: &[isize],
    ro: &[isize],
    strict: bool,
    out: &mut Vec<Complex64>,
) -> bool {
    let (ny, nx) = acquired.dim();
    out.clear();
    for &dy in pe {
        let y = row as isize + dy;
        for &dx in ro {
            let x = col as isize + dx;
            let inside = y >= 0 && y < ny as isize && x >= 0 && x < nx as isize;
            let ok = inside && acquired[[y as usize, x as usize]];
            if !ok && strict {
                return false;
            }
            for ch in data {
                out.push(if ok {
                    ch[[y as usize, x as usize]]
                } else {
                    Complex64::new(0.0, 0.0)
                });
            }
        }
    }
    true
}

fn mask_2d(mask: &Mask) -> Result<Array2<bool>> {
    mask.data()
        .clone()
        .into_dimensionality::<Ix2>()
        .map_err(|_| Error::Dimension("GRAPPA needs a 2D mask".into()))
}

fn check_mask_matches(cfg: &GrappaConfig, mask: &Mask) -> Result<()> {
    let pe = mask.spec().axes[0];
    if pe.undersample_factor != cfg.r {
        return Err(Error::InvalidSpec(format!(
            "GRAPPA weights use R = {} but the mask undersamples by {}",
            cfg.r, pe.undersample_factor
        )));
    }
    Ok(())
}

/// Fits GRAPPA weights on fully acquired neighborhoods (the ACS block).
pub fn grappa_calibrate(
    channels: &[ComplexVolume],
    mask: &Mask,
    cfg: &GrappaConfig,
) -> Result<GrappaWeights> {
    cfg.validate()?;
    check_channels(channels, mask)?;
    check_mask_matches(cfg, mask)?;
    let n_coils = channels.len();
    let dims = channels[0].dims().to_vec();
    let mut weights = GrappaWeights {
        config: cfg.clone(),
        n_coils,
        dims: dims.clone(),
        kernels: Vec::new(),
        acs_residual: 0.0,
        equations_per_offset: Vec::new(),
    };
    if cfg.r == 1 {
        return Ok(weights);
    }
    let views = channels.iter().map(as_2d).collect::<Result<Vec<_>>>()?;
    let acquired = mask_2d(mask)?;
    let (ny, nx) = acquired.dim();
    let n_src = cfg.n_sources(n_coils);
    let ro = cfg.readout_offsets();
    let mut res_num = 0.0;
    let mut res_den = 0.0;
    let mut src = Vec::with_capacity(n_src);
    for delta in 1..cfg.r {
        let pe = cfg.pe_offsets(delta);
        let mut a_rows: Vec<Complex64> = Vec::new();
        let mut b_rows: Vec<Complex64> = Vec::new();
        let mut neq = 0;
        for row in 0..ny {
            let k = centered_coord(row, ny);
            if k.rem_euclid(cfg.r as isize) as usize != delta || k.unsigned_abs() > cfg.acs_half_width {
                continue;
            }
            for col in 0..nx {
                if !acquired[[row, col]] {
                    continue;
                }
                if !gather_sources(&views, &acquired, row, col, &pe, &ro, true, &mut src) {
                    continue;
                }
                a_rows.extend_from_slice(&src);
                b_rows.extend(views.iter().map(|ch| ch[[row, col]]));
                neq += 1;
            }
        }
        if neq < 10 * n_src {
            return Err(Error::Calibration(format!(
                "offset {delta}: {neq} calibration equations for {n_src} unknowns; need at least {}",
                10 * n_src
            )));
        }
        let a = DMatrix::from_row_slice(neq, n_src, &a_rows);
        let b = DMatrix::from_row_slice(neq, n_coils, &b_rows);
        let ah = a.adjoint();
        let mut normal = &ah * &a;
        let mean_diag = (0..n_src).map(|i| normal[(i, i)].re).sum::<f64>() / n_src as f64;
        let lambda = cfg.regularization * mean_diag;
        for i in 0..n_src {
            normal[(i, i)] += Complex64::new(lambda, 0.0);
        }
        let rhs = &ah * &b;
        let chol = normal.cholesky().ok_or_else(|| {
            Error::Calibration(format!("offset {delta}: normal matrix is not positive definite"))
        })?;
        let w = chol.solve(&rhs);
        let resid = &a * &w - &b;
        res_num += resid.norm_squared();
        res_den += b.norm_squared();
        weights.kernels.push(w);
        weights.equations_per_offset.push(neq);
    }
    weights.acs_residual = if res_den > 0.0 { (res_num / res_den).sqrt() } else { 0.0 };
    Ok(weights)
}

/// Synthesizes the unacquired samples inside the truncation band. Acquired
/// samples are copied untouched and samples outside the band stay zero.
pub fn grappa_fill(
    channels: &[ComplexVolume],
    weights: &GrappaWeights,
    mask: &Mask,
) -> Result<Vec<ComplexVolume>> {
    check_channels(channels, mask)?;
    if channels.len() != weights.n_coils || channels[0].dims() != weights.dims.as_slice() {
        return Err(Error::InvalidSpec(format!(
            "weights were calibrated for {} coils on {:?}, got {} coils on {:?}",
            weights.n_coils,
            weights.dims,
            channels.len(),
            channels[0].dims()
        )));
    }
    check_mask_matches(&weights.config, mask)?;
    let mut out: Vec<ComplexVolume> = channels.to_vec();
    let cfg = &weights.config;
    if cfg.r == 1 || weights.kernels.is_empty() {
        return Ok(out);
    }
    let views = channels.iter().map(as_2d).collect::<Result<Vec<_>>>()?;
    let acquired = mask_2d(mask)?;
    let (ny, nx) = acquired.dim();
    let ro = cfg.readout_offsets();
    let mut src = Vec::with_capacity(cfg.n_sources(weights.n_coils));
    let mut filled: Vec<Array2<Complex64>> = views.iter().map(|v| v.to_owned()).collect();
    for row in 0..ny {
        if !mask.band(0)[row] {
            continue;
        }
        let delta = centered_coord(row, ny).rem_euclid(cfg.r as isize) as usize;
        if delta == 0 {
            continue;
        }
        let pe = cfg.pe_offsets(delta);
        let kernel = &weights.kernels[delta - 1];
        for col in 0..nx {
            if acquired[[row, col]] || !mask.band(1)[col] {
                continue;
            }
            gather_sources(&views, &acquired, row, col, &pe, &ro, false, &mut src);
            for (c, ch) in filled.iter_mut().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (s, w) in src.iter().zip(kernel.column(c).iter()) {
                    acc += s * w;
                }
                ch[[row, col]] = acc;
            }
        }
    }
    for (dst, data) in out.iter_mut().zip(filled) {
        *dst = ComplexVolume::from_array(data.into_dyn(), Space::Kspace)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParallelMethod {
    /// Undersampled, truncated channels reconstructed without GRAPPA.
    Zerofill,
    Grappa,
    GrappaPocs,
    GrappaHomodyne,
    GrappaExtended,
}

impl ParallelMethod {
    pub const ALL: [ParallelMethod; 5] = [
        ParallelMethod::Zerofill,
        ParallelMethod::Grappa,
        ParallelMethod::GrappaPocs,
        ParallelMethod::GrappaHomodyne,
        ParallelMethod::GrappaExtended,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParallelMethod::Zerofill => "zerofill",
            ParallelMethod::Grappa => "grappa",
            ParallelMethod::GrappaPocs => "grappa-pocs",
            ParallelMethod::GrappaHomodyne => "grappa-homodyne",
            ParallelMethod::GrappaExtended => "grappa-extended",
        }
    }

    fn channel_method(self) -> Method {
        match self {
            ParallelMethod::Zerofill | ParallelMethod::Grappa => Method::Zerofill,
            ParallelMethod::GrappaPocs => Method::Pocs,
            ParallelMethod::GrappaHomodyne => Method::Homodyne1d,
            ParallelMethod::GrappaExtended => Method::Homodyne2d,
        }
    }
}

impl fmt::Display for ParallelMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ParallelMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ParallelMethod::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::InvalidSpec(format!("unknown parallel method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelConfig {
    /// Truncation on both axes plus interleaving (and ACS) on axis 0.
    pub sampling: SamplingSpec,
    pub grappa: GrappaConfig,
    /// Per-channel reconstruction settings; its sampling is replaced by the
    /// truncation-only version of `sampling`.
    pub recon: ReconConfig,
}

impl ParallelConfig {
    pub fn new(sampling: SamplingSpec) -> Self {
        Self {
            grappa: GrappaConfig::for_sampling(&sampling),
            recon: ReconConfig::new(sampling.without_undersampling()),
            sampling,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParallelOutcome {
    pub combined: RealMap,
    pub reference: RealMap,
    pub channel_images: Vec<ComplexVolume>,
    pub report: ReconReport,
}

/// Simulate, undersample and truncate, GRAPPA-fill, reconstruct each channel
/// and combine. The reference is the combination of the full k-space channels.
pub fn parallel_pipeline(
    image: &ComplexVolume,
    coils: &CoilSet,
    cfg: &ParallelConfig,
    method: ParallelMethod,
    support: Option<&ndarray::ArrayD<bool>>,
) -> Result<ParallelOutcome> {
    let start = Instant::now();
    let full = simulate_channels(image, coils)?;
    let reference = sos_combine(&full.iter().map(ifft_centered).collect::<Result<Vec<_>>>()?)?;

    let mask = acquisition_mask(image.dims(), &cfg.sampling)?;
    let acquired = full
        .iter()
        .map(|k| apply_mask(k, &mask))
        .collect::<Result<Vec<_>>>()?;

    let mut details = serde_json::Map::new();
    let channels = if method == ParallelMethod::Zerofill {
        acquired
    } else {
        let weights = grappa_calibrate(&acquired, &mask, &cfg.grappa)?;
        details.insert("acs_residual".into(), weights.acs_residual.into());
        details.insert(
            "equations_per_offset".into(),
            serde_json::to_value(&weights.equations_per_offset)?,
        );
        grappa_fill(&acquired, &weights, &mask)?
    };

    let mut recon_cfg = cfg.recon.clone();
    recon_cfg.sampling = cfg.sampling.without_undersampling();
    let channel_method = method.channel_method();
    let channel_images = channels
        .par_iter()
        .map(|k| reconstruct(k, channel_method, &recon_cfg).map(|r| r.image))
        .collect::<Result<Vec<_>>>()?;
    let combined = sos_combine(&channel_images)?;
    let error = magnitude_error(&reference, &combined)?;

    let mut region_stats = Vec::new();
    if let Some(region) = support {
        region_stats.push(RegionStat {
            region: "support".into(),
            mean_magnitude: region_mean(&combined, region)?,
        });
    }
    details.insert("kept_fraction".into(), mask.kept_fraction().into());
    details.insert(
        "band_fraction".into(),
        cfg.sampling.band_fraction(image.dims()).into(),
    );
    details.insert("n_coils".into(), coils.n_coils().into());
    let report = ReconReport {
        method: method.name().into(),
        spec: cfg.sampling.clone(),
        error,
        region_stats,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
        config: serde_json::to_value(cfg)?,
        details: serde_json::Value::Object(details),
    };
    Ok(ParallelOutcome {
        combined,
        reference,
        channel_images,
        report,
    })
}
