#![allow(dead_code)]

use ndarray::{Array2, ArrayD, Dimension, IxDyn};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};

use pfrecon::fft::{fft_centered, ifft_centered};
use pfrecon::volume::centered_coord;
use pfrecon::{ComplexVolume, Space};

/// Multicoil k-space whose off-grid lines are an exact linear function of
/// the neighbouring sampled lines: two sampled lines below and two above the
/// target, `taps` readout neighbours, every coil as a source.
pub fn kernel_predictable(
    dims: [usize; 2],
    n_coils: usize,
    r: usize,
    taps: usize,
    seed: u64,
) -> Vec<ComplexVolume> {
    let [ny, nx] = dims;
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let mut uniform = move || Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let mut data: Vec<Array2<Complex64>> = (0..n_coils).map(|_| Array2::zeros((ny, nx))).collect();
    for y in 0..ny {
        if centered_coord(y, ny).rem_euclid(r as isize) == 0 {
            for ch in data.iter_mut() {
                for x in 0..nx {
                    ch[[y, x]] = uniform();
                }
            }
        }
    }
    let half = (taps / 2) as isize;
    let n_src = 4 * taps * n_coils;
    // weights[delta - 1][target coil][source index]
    let weights: Vec<Vec<Vec<Complex64>>> = (1..r)
        .map(|_| {
            (0..n_coils)
                .map(|_| (0..n_src).map(|_| uniform() * (1.0 / n_src as f64)).collect())
                .collect()
        })
        .collect();
    let sampled = data.clone();
    for y in 0..ny {
        let delta = centered_coord(y, ny).rem_euclid(r as isize) as usize;
        if delta == 0 {
            continue;
        }
        for x in 0..nx {
            let mut sources = Vec::with_capacity(n_src);
            for j in -1isize..=2 {
                let sy = y as isize - delta as isize + j * r as isize;
                for t in -half..=half {
                    let sx = x as isize + t;
                    for ch in &sampled {
                        let inside = sy >= 0 && sy < ny as isize && sx >= 0 && sx < nx as isize;
                        sources.push(if inside { ch[[sy as usize, sx as usize]] } else { Complex64::new(0.0, 0.0) });
                    }
                }
            }
            for (c, ch) in data.iter_mut().enumerate() {
                ch[[y, x]] = sources.iter().zip(&weights[delta - 1][c]).map(|(s, w)| s * w).sum();
            }
        }
    }
    data.into_iter()
        .map(|a| ComplexVolume::from_array(a.into_dyn(), Space::Kspace).unwrap())
        .collect()
}

/// Image whose k-space has the unpaired `-N/2` planes removed, so its
/// spectrum is exactly mirror complete.
pub fn nyquist_free(image: &ComplexVolume) -> ComplexVolume {
    let k = fft_centered(image).unwrap();
    let dims = k.dims().to_vec();
    let data = ArrayD::from_shape_fn(IxDyn(&dims), |idx| {
        if idx.slice().iter().any(|&i| i == 0) {
            Complex64::new(0.0, 0.0)
        } else {
            k.array()[&idx]
        }
    });
    let filtered = ifft_centered(&ComplexVolume::from_array(data, Space::Kspace).unwrap()).unwrap();
    // The spectrum is Hermitian, so the image is real up to rounding.
    filtered.map(|z| Complex64::new(z.re, 0.0))
}

pub fn max_rel(a: &ComplexVolume, b: &ComplexVolume) -> f64 {
    let scale = a.max_abs();
    a.samples()
        .iter()
        .zip(b.samples())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
        / scale
}
