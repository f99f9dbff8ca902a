use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::RasterGrid;
use crate::scalar::Real;

/// Wavelength samples with weights normalized to sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum<T> {
    samples: Vec<(T, T)>,
}

impl<T: Real> Spectrum<T> {
    /// `n` uniform samples on `[min, max]` with trapezoid weights.
    pub fn uniform(min: T, max: T, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid(
                "spectrum.samples",
                "need at least one sample",
            ));
        }
        if !(min > T::zero()) || max < min {
            return Err(Error::invalid(
                "spectrum",
                format!("invalid wavelength range [{min}, {max}]"),
            ));
        }
        if n == 1 {
            let mid = (min + max) * T::lit(0.5);
            return Self::from_samples(vec![(mid, T::one())]);
        }
        let step = (max - min) / T::from_usize_lossy(n - 1);
        let samples = (0..n)
            .map(|i| {
                let w = if i == 0 || i == n - 1 {
                    T::lit(0.5)
                } else {
                    T::one()
                };
                (min + step * T::from_usize_lossy(i), w)
            })
            .collect();
        Self::from_samples(samples)
    }

    pub fn single(wavelength: T) -> Self {
        Self {
            samples: vec![(wavelength, T::one())],
        }
    }

    /// Arbitrary samples; weights are renormalized.
    pub fn from_samples(samples: Vec<(T, T)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("spectrum", "no samples"));
        }
        for &(l, w) in &samples {
            if !(l > T::zero()) || !(w > T::zero()) || !l.is_finite() || !w.is_finite() {
                return Err(Error::invalid(
                    "spectrum",
                    format!("sample ({l}, {w}) needs positive wavelength and weight"),
                ));
            }
        }
        let total: T = samples.iter().map(|s| s.1).sum();
        Ok(Self {
            samples: samples.into_iter().map(|(l, w)| (l, w / total)).collect(),
        })
    }

    pub fn samples(&self) -> &[(T, T)] {
        &self.samples
    }

    pub fn wavelengths(&self) -> Vec<T> {
        self.samples.iter().map(|s| s.0).collect()
    }

    pub fn weights(&self) -> Vec<T> {
        self.samples.iter().map(|s| s.1).collect()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn min(&self) -> T {
        self.samples.iter().map(|s| s.0).fold(T::infinity(), T::min)
    }

    pub fn max(&self) -> T {
        self.samples
            .iter()
            .map(|s| s.0)
            .fold(T::neg_infinity(), T::max)
    }
}

/// Shared optical design parameters. All lengths in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignConfig<T> {
    pub sensor_px: (usize, usize),
    pub pixel_pitch: T,
    /// Optical (fabrication) pixels per sensor pixel along each axis.
    pub upsample: usize,
    /// Mask-to-sensor distance.
    pub z: T,
    pub lambda0: T,
    pub spectrum: Spectrum<T>,
    pub phase_levels: usize,
    pub total_depth: T,
    /// Sensor chief-ray cut-off angle in degrees.
    pub cutoff_angle_deg: T,
    pub object_distance: T,
}

impl<T: Real> DesignConfig<T> {
    /// A config with a 13-sample 400-700 nm spectrum, 16 phase levels and a
    /// 1200 nm etch depth.
    pub fn new(sensor_px: (usize, usize), pixel_pitch: T, z: T, lambda0: T) -> Result<Self> {
        let cfg = Self {
            sensor_px,
            pixel_pitch,
            upsample: 1,
            z,
            lambda0,
            spectrum: Spectrum::uniform(T::lit(400e-9), T::lit(700e-9), 13)?,
            phase_levels: 16,
            total_depth: T::lit(1200e-9),
            cutoff_angle_deg: T::lit(20.0),
            object_distance: T::lit(0.3),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_spectrum(mut self, spectrum: Spectrum<T>) -> Result<Self> {
        self.spectrum = spectrum;
        self.validate()?;
        Ok(self)
    }

    pub fn with_upsample(mut self, upsample: usize) -> Result<Self> {
        self.upsample = upsample;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let (w, h) = self.sensor_px;
        if w == 0 || h == 0 {
            return Err(Error::invalid("sensor_px", "dimensions must be positive"));
        }
        if self.upsample == 0 {
            return Err(Error::invalid("upsample", "must be at least 1"));
        }
        if !(self.pixel_pitch > T::zero()) {
            return Err(Error::invalid("pixel_pitch", "must be positive"));
        }
        if !(self.z > T::zero()) {
            return Err(Error::invalid("z", "must be positive"));
        }
        if !(self.lambda0 > T::zero()) {
            return Err(Error::invalid("lambda0", "must be positive"));
        }
        if self.spectrum.is_empty() {
            return Err(Error::invalid("spectrum", "no samples"));
        }
        let slack = self.lambda0 * T::lit(1e-9);
        if self.lambda0 < self.spectrum.min() - slack || self.lambda0 > self.spectrum.max() + slack
        {
            return Err(Error::invalid(
                "lambda0",
                format!(
                    "{} lies outside the spectrum [{}, {}]",
                    self.lambda0,
                    self.spectrum.min(),
                    self.spectrum.max()
                ),
            ));
        }
        if self.phase_levels < 2 {
            return Err(Error::invalid("phase_levels", "need at least 2 levels"));
        }
        if !(self.total_depth > T::zero()) {
            return Err(Error::invalid("total_depth", "must be positive"));
        }
        let a = self.cutoff_angle_deg;
        if !(a >= T::zero() && a < T::lit(90.0)) {
            return Err(Error::invalid("cutoff_angle_deg", "must lie in [0, 90)"));
        }
        if !(self.object_distance > T::zero()) {
            return Err(Error::invalid("object_distance", "must be positive"));
        }
        Ok(())
    }

    pub fn fab_pitch(&self) -> T {
        self.pixel_pitch / T::from_usize_lossy(self.upsample)
    }

    /// Fabrication-resolution grid on which phase and labels live.
    pub fn optical_grid(&self) -> RasterGrid<T> {
        RasterGrid::new(
            self.sensor_px.0 * self.upsample,
            self.sensor_px.1 * self.upsample,
            self.fab_pitch(),
        )
    }

    pub fn sensor_grid(&self) -> RasterGrid<T> {
        RasterGrid::new(self.sensor_px.0, self.sensor_px.1, self.pixel_pitch)
    }

    /// Physical area of the design rectangle.
    pub fn design_area(&self) -> T {
        self.sensor_grid().area()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_weights_sum_to_one() {
        let s = Spectrum::<f64>::uniform(400e-9, 700e-9, 13).unwrap();
        let w = s.weights();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((w[0] * 2.0 - w[1]).abs() < 1e-15);
        assert!((s.wavelengths()[6] - 550e-9).abs() < 1e-18);
    }

    #[test]
    fn lambda0_outside_spectrum_rejected() {
        let err = DesignConfig::new((10, 10), 3.45e-6, 2e-3, 800e-9).unwrap_err();
        assert!(matches!(
            err,
            Error::InvalidParameter {
                field: "lambda0",
                ..
            }
        ));
    }

    #[test]
    fn grids_follow_upsampling() {
        let c = DesignConfig::<f64>::new((24, 16), 4e-6, 2e-3, 550e-9)
            .unwrap()
            .with_upsample(2)
            .unwrap();
        let g = c.optical_grid();
        assert_eq!(g.dims(), (48, 32));
        assert!((g.pitch - 2e-6).abs() < 1e-20);
        assert!((c.design_area() - 24.0 * 16.0 * 16e-12).abs() < 1e-24);
    }
}
