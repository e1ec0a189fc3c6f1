//! Centered, unitary discrete Fourier transforms over every axis of a volume.
//!
//! The centered convention is realized by rotating each lane by `N/2` before
//! and after the plain transform (for even `N` the forward and inverse shifts
//! coincide). Each axis is scaled by `1/sqrt(N)` in both directions.

use ndarray::Axis;
use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::volume::{ComplexVolume, Space};

pub fn fft_centered(v: &ComplexVolume) -> Result<ComplexVolume> {
    v.require_space(Space::Image)?;
    transform(v, FftDirection::Forward, Space::Kspace)
}

pub fn ifft_centered(v: &ComplexVolume) -> Result<ComplexVolume> {
    v.require_space(Space::Kspace)?;
    transform(v, FftDirection::Inverse, Space::Image)
}

fn transform(v: &ComplexVolume, direction: FftDirection, out_space: Space) -> Result<ComplexVolume> {
    let mut out = v.clone().with_space(out_space);
    let mut planner = FftPlanner::<f64>::new();
    for axis in 0..v.ndim() {
        let n = v.dims()[axis];
        if n % 2 != 0 {
            return Err(Error::Dimension(format!("axis {axis} has odd length {n}")));
        }
        let half = n / 2;
        let scale = 1.0 / (n as f64).sqrt();
        let plan = planner.plan_fft(n, direction);
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        for mut lane in out.array_mut().lanes_mut(Axis(axis)) {
            for (i, z) in lane.iter().enumerate() {
                buf[(i + half) % n] = *z;
            }
            plan.process_with_scratch(&mut buf, &mut scratch);
            for (i, z) in lane.iter_mut().enumerate() {
                *z = buf[(i + half) % n] * scale;
            }
        }
    }
    Ok(out)
}
