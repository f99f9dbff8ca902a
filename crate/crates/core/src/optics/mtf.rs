use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::optics::{DesignConfig, PsfStack};
use crate::raster::Raster;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MtfReport<T> {
    /// `(wavelength, MTF)` pairs in FFT order, DC at `(0, 0)`.
    pub spectral_mtf: Vec<(T, Raster<T>)>,
    pub mtfv: T,
}

/// `|FT(psf)|` normalized to exactly 1 at zero frequency.
pub fn mtf<T: Real>(psf: &Raster<T>) -> Raster<T> {
    let (w, h) = psf.dims();
    let mut fft = Fft2::new(w, h);
    let spec = fft.forward_real(psf.as_slice());
    let dc = spec[0].norm();
    let mut data: Vec<T> = spec.iter().map(|c| c.norm() / dc).collect();
    data[0] = T::one();
    Raster::from_vec(w, h, data).expect("dimensions preserved")
}

/// Sum of all MTF bins of one slice.
fn mtf_sum<T: Real>(psf: &Raster<T>) -> T {
    mtf(psf).sum()
}

/// Frequency-bin cell `Δf_X Δf_Y` divided by the design area, the factor
/// that turns a plain sum of MTF bins into MTF volume per area.
pub fn volume_factor<T: Real>(config: &DesignConfig<T>) -> T {
    let grid = config.sensor_grid();
    let dfx = grid.width().recip();
    let dfy = grid.height().recip();
    dfx * dfy / grid.area()
}

fn check<T: Real>(stack: &PsfStack<T>, config: &DesignConfig<T>) -> Result<()> {
    if stack.spectral.is_empty() {
        return Err(Error::invalid("psf", "no spectral slices"));
    }
    if stack.weights.len() != stack.spectral.len() {
        return Err(Error::invalid(
            "psf",
            "weights do not match spectral slices",
        ));
    }
    for (_, s) in &stack.spectral {
        if s.dims() != config.sensor_px {
            return Err(Error::DimensionMismatch {
                expected: config.sensor_px,
                found: s.dims(),
            });
        }
    }
    Ok(())
}

/// Spectral MTFs and the MTF volume
/// `Δf_X Δf_Y Σ_λ w_λ Σ_f MTF(f, λ) / |Ω|`.
pub fn mtfv<T: Real>(stack: &PsfStack<T>, config: &DesignConfig<T>) -> Result<MtfReport<T>> {
    check(stack, config)?;
    let spectral_mtf: Vec<(T, Raster<T>)> = stack
        .spectral
        .par_iter()
        .map(|(l, p)| (*l, mtf(p)))
        .collect();
    let total: T = spectral_mtf
        .iter()
        .zip(&stack.weights)
        .map(|((_, m), &w)| w * m.sum())
        .sum();
    Ok(MtfReport {
        spectral_mtf,
        mtfv: total * volume_factor(config),
    })
}

/// MTF volume of spectral slices without retaining the MTF rasters.
pub fn mtfv_value<T: Real>(
    slices: &[(T, Raster<T>)],
    weights: &[T],
    config: &DesignConfig<T>,
) -> Result<T> {
    if slices.len() != weights.len() || slices.is_empty() {
        return Err(Error::invalid(
            "psf",
            "weights do not match spectral slices",
        ));
    }
    for (_, s) in slices {
        s.check_dims(config.sensor_px)?;
    }
    let sums: Vec<T> = slices.par_iter().map(|(_, p)| mtf_sum(p)).collect();
    let total: T = sums.iter().zip(weights).map(|(&s, &w)| s * w).sum();
    Ok(total * volume_factor(config))
}
