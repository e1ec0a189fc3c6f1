//! Partial-Fourier MRI reconstruction toolkit.
//!
//! Extended (per-axis) homodyne phase correction for 2D and 3D truncated
//! k-spaces alongside zero-fill, conventional homodyne and POCS baselines;
//! numerical phantoms with controllable incidental phase; a multichannel
//! GRAPPA pathway; a balanced four-point phase-contrast flow pipeline; and
//! error metrics with sweep drivers.

pub mod error;
pub mod fft;
pub mod homodyne;
pub mod io;
pub mod metrics;
pub mod parallel;
pub mod pcmra;
pub mod phantoms;
pub mod pocs;
pub mod recon;
pub mod sampling;
pub mod sweep;
pub mod volume;

pub use error::{Error, Result};
pub use volume::{ComplexVolume, RealMap, Space};
