use serde::Serialize;

use crate::error::{Error, Result};
use crate::fft::{Fft2, C};
use crate::optics::PhaseProfile;
use crate::raster::Raster;
use crate::scalar::Real;

/// Raised when the transfer-function propagator undersamples its chirp.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplingWarning {
    /// `λz / (N Δ²)` along the worse axis; values above 1 alias.
    pub ratio: f64,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct Propagation<T> {
    /// Complex field on the sensor window (same grid as the phase).
    pub field: Raster<C<T>>,
    /// Energy entering the mask.
    pub input_energy: T,
    /// Energy on the whole padded grid after propagation.
    pub padded_energy: T,
    pub warning: Option<SamplingWarning>,
}

impl<T: Real> Propagation<T> {
    pub fn intensity(&self) -> Raster<T> {
        self.field.map(|c| c.norm_sqr())
    }
}

/// Fresnel propagation over `phase.z` by the transfer-function method on a
/// grid zero-padded to twice each dimension.
///
/// The mask is treated as a wrapped diffractive element: at wavelength
/// `lambda` its phase delay is `phase * lambda0 / lambda`.
pub fn propagate_fresnel<T: Real>(phase: &PhaseProfile<T>, lambda: T) -> Result<Propagation<T>> {
    if !(lambda > T::zero()) {
        return Err(Error::invalid("wavelength", "must be positive"));
    }
    let (w, h) = phase.grid.dims();
    if let Some(t) = &phase.transmission {
        t.check_dims((w, h))?;
    }
    let (pw, ph) = (2 * w, 2 * h);
    let dx = phase.pitch;
    let scale = phase.lambda0 / lambda;

    let mut buf = vec![C::new(T::zero(), T::zero()); pw * ph];
    let mut input_energy = T::zero();
    for y in 0..h {
        for x in 0..w {
            let a = phase.transmission.as_ref().map_or(T::one(), |t| t[(x, y)]);
            buf[y * pw + x] = C::from_polar(a, phase.grid[(x, y)] * scale);
            input_energy = input_energy + a * a;
        }
    }

    let mut fft = Fft2::new(pw, ph);
    fft.forward(&mut buf);
    let lz = lambda * phase.z;
    let fx = frequencies(pw, dx);
    let fy = frequencies(ph, dx);
    for (iy, &vy) in fy.iter().enumerate() {
        for (ix, &vx) in fx.iter().enumerate() {
            let arg = -T::PI() * lz * (vx * vx + vy * vy);
            buf[iy * pw + ix] = buf[iy * pw + ix] * C::from_polar(T::one(), arg);
        }
    }
    fft.inverse(&mut buf);

    let padded_energy: T = buf.iter().map(|c| c.norm_sqr()).sum();
    let field = Raster::from_fn(w, h, |x, y| buf[y * pw + x]);

    let ratio = (lz / (T::from_usize_lossy(pw.min(ph)) * dx * dx)).as_f64();
    let warning = (ratio > 1.0).then(|| SamplingWarning {
        ratio,
        message: format!(
            "transfer function undersampled: lambda*z/(N*dx^2) = {ratio:.3} > 1 on a {pw}x{ph} grid"
        ),
    });
    Ok(Propagation {
        field,
        input_energy,
        padded_energy,
        warning,
    })
}

/// FFT-ordered spatial frequencies for `n` samples at pitch `dx`.
pub(crate) fn frequencies<T: Real>(n: usize, dx: T) -> Vec<T> {
    let step = (T::from_usize_lossy(n) * dx).recip();
    (0..n)
        .map(|i| {
            let k = if i < n.div_ceil(2) {
                i as f64
            } else {
                i as f64 - n as f64
            };
            T::lit(k) * step
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(w: usize, h: usize, dx: f64, z: f64) -> PhaseProfile<f64> {
        PhaseProfile {
            grid: Raster::zeros(w, h),
            pitch: dx,
            lambda0: 550e-9,
            z,
            excluded: vec![],
            transmission: None,
        }
    }

    #[test]
    fn plane_wave_interior_is_unit() {
        let p = flat(128, 128, 5e-6, 1e-5);
        let out = propagate_fresnel(&p, 550e-9).unwrap();
        for y in 32..96 {
            for x in 32..96 {
                assert!((out.field[(x, y)].norm() - 1.0).abs() < 1e-2);
            }
        }
        assert!(out.warning.is_none());
    }

    #[test]
    fn energy_is_conserved_on_padded_grid() {
        let mut p = flat(64, 48, 2e-6, 1e-3);
        p.grid = Raster::from_fn(64, 48, |x, y| ((x * 7 + y * 3) % 11) as f64 * 0.5);
        let out = propagate_fresnel(&p, 500e-9).unwrap();
        let rel = (out.padded_energy - out.input_energy).abs() / out.input_energy;
        assert!(rel < 1e-3, "{rel}");
    }

    #[test]
    fn undersampling_is_reported() {
        let p = flat(16, 16, 1e-6, 1e-2);
        let out = propagate_fresnel(&p, 550e-9).unwrap();
        let w = out.warning.expect("warning");
        assert!(w.ratio > 1.0);
    }

    #[test]
    fn frequency_layout() {
        let f = frequencies::<f64>(4, 0.25);
        assert_eq!(f, vec![0.0, 1.0, -2.0, -1.0]);
        let f = frequencies::<f64>(5, 1.0);
        assert_eq!(f, vec![0.0, 0.2, 0.4, -0.4, -0.2]);
    }
}
