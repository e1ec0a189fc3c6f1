//! Numerical phantoms: a uniform disc (or sphere) carrying a quadratic
//! low-frequency phase, a concentric-ring high-frequency phase, and their
//! blend; smooth coil sensitivities; and a straight-vessel flow phantom.

use std::f64::consts::PI;

use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{centered_coord, validate_dims, ComplexVolume, RealMap, Space};

fn default_rings() -> usize {
    8
}

fn default_level() -> f64 {
    1.0
}

/// `+pi/2, -pi/2, +pi/2, ...` starting with the innermost ring.
pub fn alternating_ring_phases(n_rings: usize) -> Vec<f64> {
    (0..n_rings)
        .map(|j| if j % 2 == 0 { PI / 2.0 } else { -PI / 2.0 })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub grid: Vec<usize>,
    pub r0: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default = "default_rings")]
    pub n_rings: usize,
    /// Empty means the alternating default.
    #[serde(default)]
    pub ring_phases: Vec<f64>,
    #[serde(default = "default_level")]
    pub magnitude_level: f64,
    /// Standard deviation of additive complex Gaussian noise; 0 disables it.
    #[serde(default)]
    pub noise_std: f64,
    #[serde(default)]
    pub seed: u64,
}

impl PhantomSpec {
    /// 256 x 256 disc of radius 80 pixels.
    pub fn default_2d() -> Self {
        Self {
            grid: vec![256, 256],
            r0: 80.0,
            gamma: 0.0,
            n_rings: 8,
            ring_phases: alternating_ring_phases(8),
            magnitude_level: 1.0,
            noise_std: 0.0,
            seed: 0,
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn ring_levels(&self) -> Vec<f64> {
        if self.ring_phases.is_empty() {
            alternating_ring_phases(self.n_rings)
        } else {
            self.ring_phases.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_dims(&self.grid)?;
        let min = *self.grid.iter().min().unwrap_or(&0) as f64;
        if !(self.r0 > 0.0 && self.r0 < min / 2.0) {
            return Err(Error::InvalidSpec(format!(
                "r0 = {} must lie in (0, {})",
                self.r0,
                min / 2.0
            )));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidSpec(format!(
                "gamma = {} must lie in [0, 1]",
                self.gamma
            )));
        }
        if self.n_rings < 2 {
            return Err(Error::InvalidSpec("n_rings must be at least 2".into()));
        }
        let levels = self.ring_levels();
        if levels.len() != self.n_rings {
            return Err(Error::InvalidSpec(format!(
                "ring_phases has {} entries but n_rings = {}",
                levels.len(),
                self.n_rings
            )));
        }
        if levels.iter().any(|&p| !(p > -PI && p <= PI)) {
            return Err(Error::InvalidSpec("ring phases must lie in (-pi, pi]".into()));
        }
        if !(self.magnitude_level > 0.0) || !(self.noise_std >= 0.0) {
            return Err(Error::InvalidSpec(
                "magnitude_level must be positive and noise_std non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Euclidean distance of every grid point from the grid center `(N/2, ...)`.
pub fn radius_map(grid: &[usize]) -> RealMap {
    ArrayD::from_shape_fn(IxDyn(grid), |idx| {
        (0..grid.len())
            .map(|a| {
                let d = centered_coord(idx[a], grid[a]) as f64;
                d * d
            })
            .sum::<f64>()
            .sqrt()
    })
}

pub fn disc_support(spec: &PhantomSpec) -> ArrayD<bool> {
    radius_map(&spec.grid).mapv(|r| r <= spec.r0)
}

pub fn disc_magnitude(spec: &PhantomSpec) -> Result<ComplexVolume> {
    spec.validate()?;
    let level = spec.magnitude_level;
    let map = radius_map(&spec.grid).mapv(|r| if r <= spec.r0 { level } else { 0.0 });
    ComplexVolume::from_real(&map, Space::Image)
}

/// Quadratic phase `pi (2 r^2 / r0^2 - 1)` inside the disc, 0 outside; `-pi` at the center.
pub fn low_phase(spec: &PhantomSpec) -> Result<RealMap> {
    spec.validate()?;
    let r0 = spec.r0;
    Ok(radius_map(&spec.grid).mapv(|r| {
        if r > r0 {
            0.0
        } else if r == 0.0 {
            -PI
        } else {
            PI * (2.0 * r * r / (r0 * r0) - 1.0)
        }
    }))
}

/// Piecewise-constant phase over `n_rings` equal-width annuli of the disc.
pub fn high_phase(spec: &PhantomSpec) -> Result<RealMap> {
    spec.validate()?;
    let levels = spec.ring_levels();
    let width = spec.r0 / spec.n_rings as f64;
    let last = spec.n_rings - 1;
    Ok(radius_map(&spec.grid).mapv(|r| {
        if r > spec.r0 {
            0.0
        } else {
            levels[((r / width).floor() as usize).min(last)]
        }
    }))
}

/// `(1 - gamma) * low + gamma * high`, pointwise.
pub fn blend_phase(low: &RealMap, high: &RealMap, gamma: f64) -> Result<RealMap> {
    if low.shape() != high.shape() {
        return Err(Error::ShapeMismatch {
            expected: low.shape().to_vec(),
            found: high.shape().to_vec(),
        });
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidSpec(format!("gamma = {gamma} must lie in [0, 1]")));
    }
    let mut out = low.clone();
    ndarray::Zip::from(&mut out)
        .and(high)
        .for_each(|l, &h| *l = (1.0 - gamma) * *l + gamma * h);
    Ok(out)
}

pub fn compose_complex(magnitude: &RealMap, phase: &RealMap) -> Result<ComplexVolume> {
    if magnitude.shape() != phase.shape() {
        return Err(Error::ShapeMismatch {
            expected: magnitude.shape().to_vec(),
            found: phase.shape().to_vec(),
        });
    }
    let mut out = ArrayD::<Complex64>::zeros(magnitude.raw_dim());
    ndarray::Zip::from(&mut out)
        .and(magnitude)
        .and(phase)
        .for_each(|z, &m, &p| *z = Complex64::from_polar(m, p));
    ComplexVolume::from_array(out, Space::Image)
}

/// Disc magnitude carrying the gamma-blended phase, plus optional noise.
pub fn phantom_image(spec: &PhantomSpec) -> Result<ComplexVolume> {
    let magnitude = disc_magnitude(spec)?.real_part();
    let phase = blend_phase(&low_phase(spec)?, &high_phase(spec)?, spec.gamma)?;
    let image = compose_complex(&magnitude, &phase)?;
    if spec.noise_std > 0.0 {
        let normal = Normal::new(0.0, spec.noise_std)
            .map_err(|e| Error::InvalidSpec(e.to_string()))?;
        let mut rng = rand::rngs::StdRng::seed_from_u64(spec.seed);
        return Ok(image.map(|z| {
            z + Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng))
        }));
    }
    Ok(image)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoilSet {
    pub maps: Vec<ComplexVolume>,
}

impl CoilSet {
    pub fn n_coils(&self) -> usize {
        self.maps.len()
    }

    pub fn dims(&self) -> &[usize] {
        self.maps[0].dims()
    }

    /// `sqrt(sum_c |map_c|^2)` at every grid point.
    pub fn sos(&self) -> RealMap {
        let mut acc = RealMap::zeros(self.maps[0].array().raw_dim());
        for m in &self.maps {
            ndarray::Zip::from(&mut acc)
                .and(m.array())
                .for_each(|a, z| *a += z.norm_sqr());
        }
        acc.mapv(f64::sqrt)
    }

    pub fn validate(&self) -> Result<()> {
        let first = self
            .maps
            .first()
            .ok_or_else(|| Error::InvalidSpec("coil set is empty".into()))?;
        for m in &self.maps {
            first.check_same_shape(m.dims())?;
        }
        Ok(())
    }
}

/// Gaussian coils spaced evenly on a ring in the plane of axes 0 and 1.
///
/// Coil `c` sits at angle `2 pi c / n` on a circle of radius `0.55 * min/2`
/// around the grid center (axis 0 is `sin`, axis 1 is `cos`). Magnitude is a
/// Gaussian of the distance to the coil with `sigma = 0.5 * min`; the phase
/// ramps linearly toward the coil, reaching `+-pi/4` at the field-of-view edge.
pub fn coil_maps(grid: &[usize], n_coils: usize) -> Result<CoilSet> {
    validate_dims(grid)?;
    if grid.len() < 2 {
        return Err(Error::Dimension("coil maps need at least 2 axes".into()));
    }
    if n_coils < 2 {
        return Err(Error::InvalidSpec(format!("n_coils = {n_coils}; need at least 2")));
    }
    let min = *grid.iter().min().expect("non-empty grid") as f64;
    let ring = 0.55 * min / 2.0;
    let sigma = 0.5 * min;
    let half_fov = min / 2.0;
    let mut maps: Vec<ArrayD<Complex64>> = (0..n_coils)
        .map(|c| {
            let theta = 2.0 * PI * c as f64 / n_coils as f64;
            let (u0, u1) = (theta.sin(), theta.cos());
            let center = [ring * u0, ring * u1];
            ArrayD::from_shape_fn(IxDyn(grid), |idx| {
                let mut d2 = 0.0;
                let mut along = 0.0;
                for a in 0..grid.len() {
                    let x = centered_coord(idx[a], grid[a]) as f64;
                    let cx = if a < 2 { center[a] } else { 0.0 };
                    d2 += (x - cx) * (x - cx);
                    if a == 0 {
                        along += x * u0;
                    } else if a == 1 {
                        along += x * u1;
                    }
                }
                let mag = (-d2 / (2.0 * sigma * sigma)).exp();
                Complex64::from_polar(mag, PI / 4.0 * along / half_fov)
            })
        })
        .collect();

    let radius = radius_map(grid);
    let mut min_sos = f64::INFINITY;
    for (idx, &r) in radius.indexed_iter() {
        if r <= half_fov {
            let s: f64 = maps.iter().map(|m| m[&idx].norm_sqr()).sum();
            min_sos = min_sos.min(s);
        }
    }
    if min_sos < 0.1 {
        let scale = (0.1 / min_sos).sqrt();
        for m in &mut maps {
            m.mapv_inplace(|z| z * scale);
        }
    }
    let maps = maps
        .into_iter()
        .map(|m| ComplexVolume::from_array(m, Space::Image))
        .collect::<Result<Vec<_>>>()?;
    Ok(CoilSet { maps })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowPhantomSpec {
    pub grid: Vec<usize>,
    pub vessel_axis: usize,
    pub vessel_radius: f64,
    /// cm/s
    pub peak_velocity: f64,
    /// cm/s
    pub venc: f64,
    pub background_magnitude: f64,
    pub vessel_magnitude: f64,
}

impl FlowPhantomSpec {
    /// 64 x 128 x 32 grid with a vessel along axis 1 and a 10 cm/s venc.
    pub fn default_3d() -> Self {
        Self {
            grid: vec![64, 128, 32],
            vessel_axis: 1,
            vessel_radius: 6.0,
            peak_velocity: 4.0,
            venc: 10.0,
            background_magnitude: 0.3,
            vessel_magnitude: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_dims(&self.grid)?;
        if self.grid.len() != 3 {
            return Err(Error::Dimension("flow phantom grid must have 3 axes".into()));
        }
        if self.vessel_axis >= 3 {
            return Err(Error::InvalidSpec("vessel_axis must be 0, 1 or 2".into()));
        }
        let cross_min = (0..3)
            .filter(|&a| a != self.vessel_axis)
            .map(|a| self.grid[a])
            .min()
            .unwrap_or(0) as f64;
        if !(self.vessel_radius > 0.0 && self.vessel_radius < cross_min / 2.0) {
            return Err(Error::InvalidSpec("vessel_radius must fit inside the grid".into()));
        }
        if !(self.venc > 0.0) || !(self.peak_velocity.abs() < self.venc) {
            return Err(Error::InvalidSpec(
                "need venc > 0 and |peak_velocity| < venc".into(),
            ));
        }
        if !(self.background_magnitude > 0.0 && self.vessel_magnitude > 0.0) {
            return Err(Error::InvalidSpec("magnitudes must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowPhantom {
    pub magnitude: RealMap,
    /// One velocity component per array axis, in cm/s.
    pub velocity: [RealMap; 3],
    pub vessel: ArrayD<bool>,
}

/// Straight cylindrical vessel through the grid center with parabolic flow.
pub fn flow_phantom(spec: &FlowPhantomSpec) -> Result<FlowPhantom> {
    spec.validate()?;
    let grid = &spec.grid;
    let axis = spec.vessel_axis;
    let r2 = ArrayD::from_shape_fn(IxDyn(grid), |idx| {
        (0..3)
            .filter(|&a| a != axis)
            .map(|a| {
                let d = centered_coord(idx[a], grid[a]) as f64;
                d * d
            })
            .sum::<f64>()
    });
    let rv2 = spec.vessel_radius * spec.vessel_radius;
    let vessel = r2.mapv(|r2| r2 < rv2);
    let magnitude = vessel.mapv(|v| {
        if v {
            spec.vessel_magnitude
        } else {
            spec.background_magnitude
        }
    });
    let axial = r2.mapv(|r2| {
        if r2 < rv2 {
            spec.peak_velocity * (1.0 - r2 / rv2)
        } else {
            0.0
        }
    });
    let zeros = RealMap::zeros(IxDyn(grid));
    let mut velocity = [zeros.clone(), zeros.clone(), zeros];
    velocity[axis] = axial;
    Ok(FlowPhantom {
        magnitude,
        velocity,
        vessel,
    })
}
