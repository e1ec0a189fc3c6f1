//! Single-volume reconstruction methods behind one dispatch point.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homodyne::{
    homodyne_1d, homodyne_2d_extended, homodyne_3d_extended, zero_fill_recon, FinalPart,
    HomodyneConfig,
};
use crate::pocs::{pocs_recon, PocsConfig};
use crate::sampling::{RampMode, SamplingSpec};
use crate::volume::ComplexVolume;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Zerofill,
    Pocs,
    Homodyne1d,
    Homodyne2d,
    Homodyne3d,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Zerofill,
        Method::Pocs,
        Method::Homodyne1d,
        Method::Homodyne2d,
        Method::Homodyne3d,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Zerofill => "zerofill",
            Method::Pocs => "pocs",
            Method::Homodyne1d => "homodyne1d",
            Method::Homodyne2d => "homodyne2d",
            Method::Homodyne3d => "homodyne3d",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::InvalidSpec(format!("unknown method {s:?}")))
    }
}

fn default_iters() -> usize {
    20
}

fn default_tol() -> f64 {
    1e-6
}

/// Parameters shared by every method; unused fields are ignored by a method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconConfig {
    pub sampling: SamplingSpec,
    #[serde(default)]
    pub ramp_mode: RampMode,
    #[serde(default)]
    pub final_part: FinalPart,
    #[serde(default)]
    pub normalize_sum: bool,
    /// Axis used by the conventional 1D homodyne.
    #[serde(default)]
    pub homodyne1d_axis: usize,
    #[serde(default = "default_iters")]
    pub pocs_max_iters: usize,
    #[serde(default = "default_tol")]
    pub pocs_tol: f64,
}

impl ReconConfig {
    pub fn new(sampling: SamplingSpec) -> Self {
        Self {
            sampling,
            ramp_mode: RampMode::default(),
            final_part: FinalPart::default(),
            normalize_sum: false,
            homodyne1d_axis: 0,
            pocs_max_iters: default_iters(),
            pocs_tol: default_tol(),
        }
    }

    pub fn homodyne(&self) -> HomodyneConfig {
        HomodyneConfig {
            spec: self.sampling.clone(),
            ramp_mode: self.ramp_mode,
            final_part: self.final_part,
            normalize_sum: self.normalize_sum,
        }
    }

    pub fn pocs(&self) -> PocsConfig {
        PocsConfig {
            max_iters: self.pocs_max_iters,
            tol: self.pocs_tol,
            spec: self.sampling.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub image: ComplexVolume,
    pub details: serde_json::Value,
}

pub fn reconstruct(kpk: &ComplexVolume, method: Method, cfg: &ReconConfig) -> Result<Reconstruction> {
    let (image, details) = match method {
        Method::Zerofill => (zero_fill_recon(kpk)?, serde_json::Value::Null),
        Method::Pocs => {
            let out = pocs_recon(kpk, &cfg.pocs())?;
            let details = serde_json::json!({
                "iterations": out.iterations,
                "max_iters": cfg.pocs_max_iters,
                "tol": cfg.pocs_tol,
                "final_change": out.changes.last(),
            });
            (out.image, details)
        }
        Method::Homodyne1d => (
            homodyne_1d(kpk, cfg.homodyne1d_axis, &cfg.homodyne())?,
            serde_json::json!({ "axis": cfg.homodyne1d_axis }),
        ),
        Method::Homodyne2d => (homodyne_2d_extended(kpk, &cfg.homodyne())?, serde_json::Value::Null),
        Method::Homodyne3d => (homodyne_3d_extended(kpk, &cfg.homodyne())?, serde_json::Value::Null),
    };
    Ok(Reconstruction { image, details })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("grappa".parse::<Method>().is_err());
    }

    #[test]
    fn config_defaults_from_json() {
        let cfg: ReconConfig = serde_json::from_str(
            r#"{"sampling":{"axes":[{"half_width":4,"acquired_side":"positive"}]}}"#,
        )
        .unwrap();
        assert_eq!(cfg.pocs_max_iters, 20);
        assert_eq!(cfg.pocs_tol, 1e-6);
        assert_eq!(cfg.ramp_mode, RampMode::StandardExtension);
        assert_eq!(cfg.sampling.axes[0].undersample_factor, 1);
    }
}
