//! Phase-contrast angiography: balanced four-point flow encoding and decoding,
//! per-partition partial-Fourier reconstruction, speed and maximum-intensity
//! projection.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use ndarray::{ArrayD, Axis, Zip};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::fft_centered;
use crate::homodyne::{homodyne_3d_compensated, phase_conjugate, zero_fill_recon, HomodyneConfig};
use crate::metrics::{magnitude_error, region_mean, ReconReport, RegionStat};
use crate::phantoms::{flow_phantom, FlowPhantom, FlowPhantomSpec};
use crate::pocs::pocs_recon;
use crate::recon::ReconConfig;
use crate::sampling::{acquisition_mask, apply_mask, AcquiredSide, AxisSampling, SamplingSpec};
use crate::volume::{ComplexVolume, RealMap, Space};

pub type EncodeMatrix = [[f64; 3]; 4];

pub const BALANCED_FOUR_POINT: EncodeMatrix = [
    [-1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [1.0, -1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

/// Checks the balanced four-point structure: ±1 entries, zero column sums and
/// rows differing pairwise in exactly two positions.
pub fn validate_encode_matrix(e: &EncodeMatrix) -> Result<()> {
    if e.iter().flatten().any(|&x| x != 1.0 && x != -1.0) {
        return Err(Error::InvalidSpec("encode matrix entries must be +1 or -1".into()));
    }
    for a in 0..3 {
        if e.iter().map(|row| row[a]).sum::<f64>() != 0.0 {
            return Err(Error::InvalidSpec(format!("encode matrix column {a} does not sum to 0")));
        }
    }
    for p in 0..4 {
        for q in p + 1..4 {
            let diff = (0..3).filter(|&a| e[p][a] != e[q][a]).count();
            if diff != 2 {
                return Err(Error::InvalidSpec(format!(
                    "encode matrix rows {p} and {q} differ in {diff} positions, expected 2"
                )));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct FlowDataset {
    pub partitions: Vec<ComplexVolume>,
    /// cm/s
    pub venc: f64,
    pub encode_matrix: EncodeMatrix,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowImages {
    pub velocity: [RealMap; 3],
    pub magnitude: RealMap,
}

/// Partition `p` carries phase `(pi / venc) * sum_a E[p, a] * v_a`.
pub fn encode_four_point(
    magnitude: &RealMap,
    velocity: &[RealMap; 3],
    venc: f64,
    encode_matrix: &EncodeMatrix,
) -> Result<FlowDataset> {
    validate_encode_matrix(encode_matrix)?;
    if !(venc > 0.0 && venc.is_finite()) {
        return Err(Error::InvalidSpec("venc must be positive".into()));
    }
    for v in velocity {
        if v.shape() != magnitude.shape() {
            return Err(Error::ShapeMismatch {
                expected: magnitude.shape().to_vec(),
                found: v.shape().to_vec(),
            });
        }
    }
    let scale = std::f64::consts::PI / venc;
    let mut warnings = Vec::new();
    let mut partitions = Vec::with_capacity(4);
    for (p, row) in encode_matrix.iter().enumerate() {
        let mut wrapped = 0usize;
        let mut data = ArrayD::<Complex64>::zeros(magnitude.raw_dim());
        Zip::from(&mut data)
            .and(magnitude)
            .and(&velocity[0])
            .and(&velocity[1])
            .and(&velocity[2])
            .for_each(|d, &m, &vx, &vy, &vz| {
                let phase = scale * (row[0] * vx + row[1] * vy + row[2] * vz);
                if phase <= -std::f64::consts::PI || phase > std::f64::consts::PI {
                    wrapped += 1;
                }
                *d = Complex64::from_polar(m, phase);
            });
        if wrapped > 0 {
            warnings.push(format!("partition {p}: phase wraps at {wrapped} voxels"));
        }
        partitions.push(ComplexVolume::from_array(data, Space::Image)?);
    }
    Ok(FlowDataset {
        partitions,
        venc,
        encode_matrix: *encode_matrix,
        warnings,
    })
}

/// Pairs each partition with `+1` on `axis` with one that has `-1` there.
fn axis_pairs(e: &EncodeMatrix, axis: usize) -> [(usize, usize); 2] {
    let plus: Vec<usize> = (0..4).filter(|&p| e[p][axis] > 0.0).collect();
    let minus: Vec<usize> = (0..4).filter(|&p| e[p][axis] < 0.0).collect();
    [(plus[0], minus[0]), (plus[1], minus[1])]
}

/// Least-squares velocity estimate from the four partition phases.
///
/// The pseudo-inverse of the sign matrix gives
/// `v_a = venc / (4 pi) * sum_p E[p, a] phi_p`; the sum is formed from two
/// pairwise phase differences so the common phase cancels.
pub fn decode_four_point(ds: &FlowDataset) -> Result<FlowImages> {
    validate_encode_matrix(&ds.encode_matrix)?;
    if ds.partitions.len() != 4 {
        return Err(Error::InvalidSpec(format!(
            "expected 4 partitions, got {}",
            ds.partitions.len()
        )));
    }
    let first = &ds.partitions[0];
    for p in &ds.partitions {
        p.require_space(Space::Image)?;
        first.check_same_shape(p.dims())?;
    }
    let s: Vec<&ArrayD<Complex64>> = ds.partitions.iter().map(|p| p.array()).collect();
    let mut magnitude = RealMap::zeros(first.array().raw_dim());
    for a in &s {
        Zip::from(&mut magnitude).and(*a).for_each(|m, z| *m += z.norm());
    }
    magnitude.mapv_inplace(|m| m / 4.0);
    let scale = ds.venc / (4.0 * std::f64::consts::PI);
    let velocity = [0, 1, 2].map(|axis| {
        let [(p1, q1), (p2, q2)] = axis_pairs(&ds.encode_matrix, axis);
        let mut v = RealMap::zeros(first.array().raw_dim());
        Zip::from(&mut v)
            .and(s[p1])
            .and(s[q1])
            .and(s[p2])
            .and(s[q2])
            .and(&magnitude)
            .for_each(|v, &a, &b, &c, &d, &m| {
                *v = if m > 0.0 {
                    scale * ((a * b.conj()).arg() + (c * d.conj()).arg())
                } else {
                    0.0
                };
            });
        v
    });
    Ok(FlowImages { velocity, magnitude })
}

/// Euclidean speed; voxels whose magnitude is below `threshold * max(magnitude)` are zeroed.
pub fn speed_image(velocity: &[RealMap; 3], magnitude: Option<&RealMap>, threshold: f64) -> Result<RealMap> {
    let shape = velocity[0].shape();
    for v in velocity.iter().skip(1) {
        if v.shape() != shape {
            return Err(Error::ShapeMismatch {
                expected: shape.to_vec(),
                found: v.shape().to_vec(),
            });
        }
    }
    let mut speed = RealMap::zeros(velocity[0].raw_dim());
    Zip::from(&mut speed)
        .and(&velocity[0])
        .and(&velocity[1])
        .and(&velocity[2])
        .for_each(|s, &x, &y, &z| *s = (x * x + y * y + z * z).sqrt());
    if let Some(m) = magnitude {
        if m.shape() != shape {
            return Err(Error::ShapeMismatch {
                expected: shape.to_vec(),
                found: m.shape().to_vec(),
            });
        }
        let cut = threshold * m.iter().cloned().fold(0.0, f64::max);
        Zip::from(&mut speed).and(m).for_each(|s, &m| {
            if m < cut {
                *s = 0.0;
            }
        });
    }
    Ok(speed)
}

/// Maximum along `axis`.
pub fn mip(volume: &RealMap, axis: usize) -> Result<RealMap> {
    if axis >= volume.ndim() {
        return Err(Error::Dimension(format!(
            "projection axis {axis} out of range for {} axes",
            volume.ndim()
        )));
    }
    if volume.len_of(Axis(axis)) == 0 {
        return Err(Error::Dimension("cannot project an empty axis".into()));
    }
    Ok(volume.fold_axis(Axis(axis), f64::NEG_INFINITY, |&acc, &x| acc.max(x)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PcmraMethod {
    Zerofill,
    Pocs,
    Homodyne3d,
}

impl PcmraMethod {
    pub const ALL: [PcmraMethod; 3] = [PcmraMethod::Zerofill, PcmraMethod::Pocs, PcmraMethod::Homodyne3d];

    pub fn name(self) -> &'static str {
        match self {
            PcmraMethod::Zerofill => "zerofill",
            PcmraMethod::Pocs => "pocs",
            PcmraMethod::Homodyne3d => "homodyne3d",
        }
    }
}

impl fmt::Display for PcmraMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PcmraMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PcmraMethod::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::InvalidSpec(format!("unknown PC-MRA method {s:?}")))
    }
}

/// Where the homodyne path takes the flow phase from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowPhase {
    /// Decode the phase-compensated complex volume `p* . s_w`. The
    /// compensation removes the smooth flow phase along with the incidental phase.
    Compensated,
    /// Homodyne real image with the low-resolution phase put back.
    Restored,
    /// Decode the zero-filled partitions; homodyne supplies only the magnitude.
    #[default]
    ZeroFilled,
}

/// Quantity projected by the MIP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedWeighting {
    /// Euclidean speed in cm/s.
    Plain,
    /// Speed multiplied by the decoded magnitude.
    #[default]
    ProtonDensity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcmraConfig {
    pub sampling: SamplingSpec,
    pub recon: ReconConfig,
    #[serde(default)]
    pub flow_phase: FlowPhase,
    #[serde(default)]
    pub speed_weighting: SpeedWeighting,
    #[serde(default = "default_mip_axis")]
    pub mip_axis: usize,
    #[serde(default = "default_threshold")]
    pub speed_threshold: f64,
}

fn default_mip_axis() -> usize {
    2
}

fn default_threshold() -> f64 {
    0.05
}

impl PcmraConfig {
    pub fn new(sampling: SamplingSpec) -> Self {
        let mut recon = ReconConfig::new(sampling.clone());
        recon.normalize_sum = true;
        Self {
            recon,
            sampling,
            flow_phase: FlowPhase::default(),
            speed_weighting: SpeedWeighting::default(),
            mip_axis: default_mip_axis(),
            speed_threshold: default_threshold(),
        }
    }

    /// Truncation to `N/8` on every axis, alternating acquired sides.
    pub fn eighth_truncation(grid: &[usize]) -> Self {
        let sides = [AcquiredSide::Positive, AcquiredSide::Negative, AcquiredSide::Positive];
        let axes = grid
            .iter()
            .zip(sides.iter().cycle())
            .map(|(&n, &side)| AxisSampling::truncated(n / 8, side))
            .collect();
        Self::new(SamplingSpec::new(axes))
    }
}

#[derive(Debug, Clone)]
pub struct PcmraOutcome {
    pub mip: RealMap,
    pub reference_mip: RealMap,
    pub speed: RealMap,
    pub flow: FlowImages,
    pub phantom: FlowPhantom,
    pub warnings: Vec<String>,
    pub report: ReconReport,
}

fn reconstruct_partition(
    kpk: &ComplexVolume,
    method: PcmraMethod,
    cfg: &PcmraConfig,
) -> Result<ComplexVolume> {
    match method {
        PcmraMethod::Zerofill => zero_fill_recon(kpk),
        PcmraMethod::Pocs => Ok(pocs_recon(kpk, &cfg.recon.pocs())?.image),
        PcmraMethod::Homodyne3d => {
            let hcfg: HomodyneConfig = cfg.recon.homodyne();
            let c = homodyne_3d_compensated(kpk, &hcfg)?;
            match cfg.flow_phase {
                FlowPhase::Compensated => Ok(c.compensated),
                FlowPhase::Restored => c
                    .compensated
                    .zip_map(&c.sym, |w, s| Complex64::new(w.re, 0.0) * phase_conjugate(s).conj()),
                FlowPhase::ZeroFilled => {
                    let zf = zero_fill_recon(kpk)?;
                    zf.zip_map(&c.compensated, |z, w| {
                        let m = z.norm();
                        if m > 0.0 {
                            z / m * w.re
                        } else {
                            Complex64::new(0.0, 0.0)
                        }
                    })
                }
            }
        }
    }
}

/// Masked speed in cm/s and the MIP of the configured weighting.
fn speed_mip(flow: &FlowImages, cfg: &PcmraConfig) -> Result<(RealMap, RealMap)> {
    let speed = speed_image(&flow.velocity, Some(&flow.magnitude), cfg.speed_threshold)?;
    let projected = match cfg.speed_weighting {
        SpeedWeighting::Plain => mip(&speed, cfg.mip_axis)?,
        SpeedWeighting::ProtonDensity => mip(&(&speed * &flow.magnitude), cfg.mip_axis)?,
    };
    Ok((speed, projected))
}

/// Encode, truncate each partition, reconstruct each partition, decode, and
/// project the speed. The reference is the same chain on full k-spaces.
pub fn pcmra_pipeline(
    flow_spec: &FlowPhantomSpec,
    cfg: &PcmraConfig,
    method: PcmraMethod,
) -> Result<PcmraOutcome> {
    let start = Instant::now();
    let phantom = flow_phantom(flow_spec)?;
    cfg.sampling.validate(&flow_spec.grid)?;
    let ds = encode_four_point(&phantom.magnitude, &phantom.velocity, flow_spec.venc, &BALANCED_FOUR_POINT)?;

    let reference_flow = decode_four_point(&ds)?;
    let (_, reference_mip) = speed_mip(&reference_flow, cfg)?;

    let mask = acquisition_mask(&flow_spec.grid, &cfg.sampling)?;
    let mut recon_cfg = cfg.clone();
    recon_cfg.recon.sampling = cfg.sampling.clone();
    let partitions = ds
        .partitions
        .par_iter()
        .map(|p| {
            let kpk = apply_mask(&fft_centered(p)?, &mask)?;
            reconstruct_partition(&kpk, method, &recon_cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let recon_ds = FlowDataset {
        partitions,
        ..ds.clone()
    };
    let flow = decode_four_point(&recon_ds)?;
    let (speed, projected) = speed_mip(&flow, cfg)?;
    let error = magnitude_error(&reference_mip, &projected)?;

    let background = phantom.vessel.mapv(|v| !v);
    let region_stats = vec![
        RegionStat {
            region: "vessel_speed".into(),
            mean_magnitude: region_mean(&speed, &phantom.vessel)?,
        },
        RegionStat {
            region: "background_speed".into(),
            mean_magnitude: region_mean(&speed, &background)?,
        },
    ];
    let details = serde_json::json!({
        "kept_fraction": mask.kept_fraction(),
        "venc": flow_spec.venc,
        "encode_matrix": BALANCED_FOUR_POINT,
        "warnings": ds.warnings,
        "phantom": flow_spec,
    });
    let report = ReconReport {
        method: method.name().into(),
        spec: cfg.sampling.clone(),
        error,
        region_stats,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
        config: serde_json::to_value(cfg)?,
        details,
    };
    Ok(PcmraOutcome {
        mip: projected,
        reference_mip,
        speed,
        flow,
        phantom,
        warnings: ds.warnings,
        report,
    })
}

/// Image-space view of a real map, used for writing flow volumes.
pub fn real_map_volume(map: &RealMap) -> Result<ComplexVolume> {
    ComplexVolume::from_real(map, Space::Image)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::IxDyn;

    fn field(v: f64) -> RealMap {
        RealMap::from_elem(IxDyn(&[4, 4, 2]), v)
    }

    #[test]
    fn default_matrix_is_balanced() {
        validate_encode_matrix(&BALANCED_FOUR_POINT).unwrap();
        let mut bad = BALANCED_FOUR_POINT;
        bad[0][0] = 1.0;
        assert!(validate_encode_matrix(&bad).is_err());
    }

    #[test]
    fn zero_velocity_partitions_equal_magnitude() {
        let m = field(2.0);
        let ds = encode_four_point(&m, &[field(0.0), field(0.0), field(0.0)], 10.0, &BALANCED_FOUR_POINT).unwrap();
        for p in &ds.partitions {
            assert!(p.samples().iter().all(|z| *z == Complex64::new(2.0, 0.0)));
        }
        let flow = decode_four_point(&ds).unwrap();
        assert!(flow.velocity.iter().all(|v| v.iter().all(|&x| x == 0.0)));
        assert!(ds.warnings.is_empty());
    }

    #[test]
    fn half_venc_gives_quarter_turn_phases() {
        let ds = encode_four_point(&field(1.0), &[field(5.0), field(0.0), field(0.0)], 10.0, &BALANCED_FOUR_POINT).unwrap();
        for (p, row) in BALANCED_FOUR_POINT.iter().enumerate() {
            let phase = ds.partitions[p].samples()[0].arg();
            assert!((phase - row[0] * std::f64::consts::FRAC_PI_2).abs() < 1e-14);
        }
    }

    #[test]
    fn wrap_is_a_warning() {
        let ds = encode_four_point(&field(1.0), &[field(6.0), field(6.0), field(0.0)], 10.0, &BALANCED_FOUR_POINT).unwrap();
        assert!(!ds.warnings.is_empty());
    }

    #[test]
    fn venc_scaling_doubles_velocity() {
        let mut ds = encode_four_point(&field(1.0), &[field(1.0), field(-0.5), field(0.25)], 10.0, &BALANCED_FOUR_POINT).unwrap();
        let v1 = decode_four_point(&ds).unwrap();
        ds.venc = 20.0;
        let v2 = decode_four_point(&ds).unwrap();
        for a in 0..3 {
            assert!(v1.velocity[a].iter().zip(&v2.velocity[a]).all(|(x, y)| (2.0 * x - y).abs() < 1e-12));
        }
    }

    #[test]
    fn zero_magnitude_decodes_to_zero() {
        let ds = encode_four_point(&field(0.0), &[field(1.0), field(1.0), field(1.0)], 10.0, &BALANCED_FOUR_POINT).unwrap();
        let flow = decode_four_point(&ds).unwrap();
        assert!(flow.velocity.iter().all(|v| v.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn speed_and_threshold() {
        let s = speed_image(&[field(3.0), field(4.0), field(0.0)], None, 0.05).unwrap();
        assert!(s.iter().all(|&x| x == 5.0));
        let mut m = field(1.0);
        m[[0, 0, 0]] = 0.01;
        let s = speed_image(&[field(3.0), field(4.0), field(0.0)], Some(&m), 0.05).unwrap();
        assert_eq!(s[[0, 0, 0]], 0.0);
        assert_eq!(s[[1, 0, 0]], 5.0);
    }

    #[test]
    fn mip_picks_maximum() {
        let mut v = field(1.0);
        v[[2, 3, 1]] = 7.0;
        let p = mip(&v, 2).unwrap();
        assert_eq!(p.shape(), &[4, 4]);
        assert_eq!(p[[2, 3]], 7.0);
        assert_eq!(p.iter().filter(|&&x| x == 1.0).count(), 15);
        assert!(mip(&v, 3).is_err());
    }

    #[test]
    fn method_names_parse() {
        for m in PcmraMethod::ALL {
            assert_eq!(m.name().parse::<PcmraMethod>().unwrap(), m);
        }
        assert!("homodyne2d".parse::<PcmraMethod>().is_err());
    }
}
