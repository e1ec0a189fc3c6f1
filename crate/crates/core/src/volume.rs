//! N-dimensional complex volumes with a centered-DC index convention.
//!
//! Axis `a` of length `N` maps array index `i` to the signed coordinate
//! `k = i - N/2`, so DC (or the image center) sits at index `N/2`. All axis
//! lengths are even so that this index exists exactly.

use ndarray::{ArrayD, Axis, IxDyn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Image,
    Kspace,
}

impl Space {
    pub fn name(self) -> &'static str {
        match self {
            Space::Image => "image",
            Space::Kspace => "kspace",
        }
    }
}

/// Real-valued map on the same grid as a volume (phase maps, magnitudes, masks).
pub type RealMap = ArrayD<f64>;

/// Signed centered coordinate of index `i` on an axis of length `n`.
#[inline]
pub fn centered_coord(i: usize, n: usize) -> isize {
    i as isize - (n / 2) as isize
}

pub(crate) fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.is_empty() || dims.len() > 3 {
        return Err(Error::Dimension(format!(
            "expected 1 to 3 axes, got {}",
            dims.len()
        )));
    }
    for (axis, &n) in dims.iter().enumerate() {
        if n == 0 || n % 2 != 0 {
            return Err(Error::Dimension(format!(
                "axis {axis} has length {n}; lengths must be positive and even"
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVolume {
    data: ArrayD<Complex64>,
    space: Space,
}

impl ComplexVolume {
    /// Builds a volume from row-major samples, enforcing every invariant.
    pub fn new(dims: &[usize], data: Vec<Complex64>, space: Space) -> Result<Self> {
        validate_dims(dims)?;
        let expected: usize = dims.iter().product();
        if data.len() != expected {
            return Err(Error::Dimension(format!(
                "data length {} does not match product of dims {expected}",
                data.len()
            )));
        }
        if let Some(index) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let data = ArrayD::from_shape_vec(IxDyn(dims), data)
            .map_err(|e| Error::Dimension(e.to_string()))?;
        Ok(Self { data, space })
    }

    pub fn from_array(data: ArrayD<Complex64>, space: Space) -> Result<Self> {
        let dims = data.shape().to_vec();
        let samples = data.iter().copied().collect();
        Self::new(&dims, samples, space)
    }

    pub fn from_real(map: &RealMap, space: Space) -> Result<Self> {
        Self::from_array(map.mapv(|x| Complex64::new(x, 0.0)), space)
    }

    pub fn zeros(dims: &[usize], space: Space) -> Result<Self> {
        validate_dims(dims)?;
        Ok(Self {
            data: ArrayD::zeros(IxDyn(dims)),
            space,
        })
    }

    /// Internal constructor for results of operations on already valid volumes.
    pub(crate) fn from_parts(data: ArrayD<Complex64>, space: Space) -> Self {
        debug_assert!(validate_dims(data.shape()).is_ok());
        let data = if data.is_standard_layout() {
            data
        } else {
            data.as_standard_layout().into_owned()
        };
        Self { data, space }
    }

    pub fn dims(&self) -> &[usize] {
        self.data.shape()
    }

    pub fn ndim(&self) -> usize {
        self.data.ndim()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn with_space(mut self, space: Space) -> Self {
        self.space = space;
        self
    }

    pub fn array(&self) -> &ArrayD<Complex64> {
        &self.data
    }

    pub(crate) fn array_mut(&mut self) -> &mut ArrayD<Complex64> {
        &mut self.data
    }

    pub fn into_array(self) -> ArrayD<Complex64> {
        self.data
    }

    /// Row-major view of the samples.
    pub fn samples(&self) -> &[Complex64] {
        self.data
            .as_slice()
            .expect("volumes are kept in standard layout")
    }

    pub fn get(&self, index: &[usize]) -> Complex64 {
        self.data[IxDyn(index)]
    }

    pub fn map(&self, f: impl FnMut(Complex64) -> Complex64) -> Self {
        Self::from_parts(self.data.mapv(f), self.space)
    }

    pub fn zip_map(
        &self,
        other: &ComplexVolume,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<Self> {
        self.check_same_shape(other.dims())?;
        let mut out = self.data.clone();
        ndarray::Zip::from(&mut out)
            .and(&other.data)
            .for_each(|a, &b| *a = f(*a, b));
        Ok(Self::from_parts(out, self.space))
    }

    pub fn add(&self, other: &ComplexVolume) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.map(|z| z * factor)
    }

    pub fn check_same_shape(&self, dims: &[usize]) -> Result<()> {
        if self.dims() != dims {
            return Err(Error::ShapeMismatch {
                expected: self.dims().to_vec(),
                found: dims.to_vec(),
            });
        }
        Ok(())
    }

    pub fn require_space(&self, expected: Space) -> Result<()> {
        if self.space != expected {
            return Err(Error::SpaceMismatch {
                expected: expected.name(),
                found: self.space.name(),
            });
        }
        Ok(())
    }

    pub fn magnitude(&self) -> RealMap {
        self.data.mapv(|z| z.norm())
    }

    pub fn real_part(&self) -> RealMap {
        self.data.mapv(|z| z.re)
    }

    /// Sum of squared magnitudes, accumulated in row-major order.
    pub fn energy(&self) -> f64 {
        self.samples().iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.energy().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.samples().iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Multiplies every sample by `profile[i]`, where `i` is its index along `axis`.
    pub fn scale_along_axis(&self, axis: usize, profile: &[f64]) -> Result<Self> {
        if axis >= self.ndim() {
            return Err(Error::Dimension(format!(
                "axis {axis} out of range for a {}-axis volume",
                self.ndim()
            )));
        }
        let n = self.dims()[axis];
        if profile.len() != n {
            return Err(Error::ShapeMismatch {
                expected: vec![n],
                found: vec![profile.len()],
            });
        }
        let mut out = self.data.clone();
        for (i, mut slab) in out.axis_iter_mut(Axis(axis)).enumerate() {
            let w = profile[i];
            slab.mapv_inplace(|z| z * w);
        }
        Ok(Self::from_parts(out, self.space))
    }

    /// Extracts the 2D slice at `index` along `axis` of a 3D volume.
    pub fn slice_axis(&self, axis: usize, index: usize) -> Result<Self> {
        if self.ndim() != 3 || axis >= 3 || index >= self.dims()[axis] {
            return Err(Error::Dimension(format!(
                "cannot take slice {index} along axis {axis} of a {:?} volume",
                self.dims()
            )));
        }
        let slab = self.data.index_axis(Axis(axis), index).to_owned();
        Ok(Self::from_parts(slab, self.space))
    }
}
