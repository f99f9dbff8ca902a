//! JSON run configuration. Field names carry their units; everything is
//! converted to SI when the design config is resolved.

use std::path::Path;

use serde::{Deserialize, Serialize};
use voronoi_fresnel::recon::Boundary;
use voronoi_fresnel::{DesignConfig, ReconParams, Spectrum};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub sensor_px: [usize; 2],
    pub pixel_pitch_um: f64,
    #[serde(default = "one")]
    pub upsample: usize,
    pub z_mm: f64,
    pub lambda0_nm: f64,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default = "sixteen")]
    pub phase_levels: usize,
    #[serde(default = "depth_default")]
    pub total_depth_nm: f64,
    #[serde(default = "cutoff_default")]
    pub cutoff_angle_deg: f64,
    #[serde(default = "object_default")]
    pub object_distance_mm: f64,
    /// Border band for marginal-cell exclusion; `None` derives it from the
    /// cut-off angle.
    #[serde(default)]
    pub exclusion_margin_um: Option<f64>,
    /// CSV `wavelength_nm,r,g,b`; relative paths resolve against the config
    /// file. Gaussian default curves when absent.
    #[serde(default)]
    pub response_csv: Option<String>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub recon: ReconConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    #[serde(default = "min_nm")]
    pub min_nm: f64,
    #[serde(default = "max_nm")]
    pub max_nm: f64,
    #[serde(default = "thirteen")]
    pub samples: usize,
    /// Explicit `[wavelength_nm, weight]` pairs; overrides the range.
    #[serde(default)]
    pub custom_nm: Option<Vec<[f64; 2]>>,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            min_nm: min_nm(),
            max_nm: max_nm(),
            samples: thirteen(),
            custom_nm: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    #[serde(default = "hundred")]
    pub maxiter: usize,
    /// Defaults to a hundredth of the fabrication pitch.
    #[serde(default)]
    pub tol_um: Option<f64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            maxiter: hundred(),
            tol_um: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub k_values: Vec<usize>,
    #[serde(default = "three")]
    pub restarts: usize,
    #[serde(default = "two")]
    pub degree: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            k_values: Vec::new(),
            restarts: three(),
            degree: two(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconConfig {
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default)]
    pub rho2: Option<f64>,
    #[serde(default = "hundred")]
    pub iters: usize,
    #[serde(default = "taper_default")]
    pub boundary_taper_px: usize,
    #[serde(default)]
    pub boundary: Boundary,
}

impl Default for ReconConfig {
    fn default() -> Self {
        Self {
            mu: None,
            rho: None,
            rho2: None,
            iters: hundred(),
            boundary_taper_px: taper_default(),
            boundary: Boundary::default(),
        }
    }
}

impl ReconConfig {
    pub fn params(&self) -> ReconParams {
        ReconParams {
            mu: self.mu,
            rho: self.rho,
            rho2: self.rho2,
            iters: self.iters,
            boundary_taper: self.boundary_taper_px,
            boundary: self.boundary,
        }
    }
}

fn one() -> usize {
    1
}
fn two() -> usize {
    2
}
fn three() -> usize {
    3
}
fn thirteen() -> usize {
    13
}
fn sixteen() -> usize {
    16
}
fn hundred() -> usize {
    100
}
fn taper_default() -> usize {
    16
}
fn min_nm() -> f64 {
    400.0
}
fn max_nm() -> f64 {
    700.0
}
fn depth_default() -> f64 {
    1200.0
}
fn cutoff_default() -> f64 {
    20.0
}
fn object_default() -> f64 {
    300.0
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::missing(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::config(format!("config field `{path}`: {}", e.inner()))
        })?;
        cfg.design()?;
        Ok(cfg)
    }

    pub fn spectrum(&self) -> Result<Spectrum, CliError> {
        let s = &self.spectrum;
        let r = match &s.custom_nm {
            Some(pairs) => {
                Spectrum::from_samples(pairs.iter().map(|p| (p[0] * 1e-9, p[1])).collect())
            }
            None => Spectrum::uniform(s.min_nm * 1e-9, s.max_nm * 1e-9, s.samples),
        };
        r.map_err(|e| CliError::config(format!("config field `spectrum`: {e}")))
    }

    /// The SI design record.
    pub fn design(&self) -> Result<DesignConfig, CliError> {
        let cfg = DesignConfig {
            sensor_px: (self.sensor_px[0], self.sensor_px[1]),
            pixel_pitch: self.pixel_pitch_um * 1e-6,
            upsample: self.upsample,
            z: self.z_mm * 1e-3,
            lambda0: self.lambda0_nm * 1e-9,
            spectrum: self.spectrum()?,
            phase_levels: self.phase_levels,
            total_depth: self.total_depth_nm * 1e-9,
            cutoff_angle_deg: self.cutoff_angle_deg,
            object_distance: self.object_distance_mm * 1e-3,
        };
        cfg.validate()
            .map_err(|e| CliError::config(format!("config: {e}")))?;
        if let Some(m) = self.exclusion_margin_um {
            if !(m >= 0.0) {
                return Err(CliError::config(
                    "config field `exclusion_margin_um`: must be nonnegative",
                ));
            }
        }
        if let Some(t) = self.optimizer.tol_um {
            if !(t > 0.0) {
                return Err(CliError::config(
                    "config field `optimizer.tol_um`: must be positive",
                ));
            }
        }
        Ok(cfg)
    }
}
