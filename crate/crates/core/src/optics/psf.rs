//! Spectral and panchromatic PSFs by per-cell diffraction.
//!
//! Each Fresnel cell focuses onto the sensor as the Fourier transform of its
//! aperture, centered below its site and scaled by `λz`. Intensities of the
//! cells are summed without cross terms. The transform is evaluated directly
//! on the optical grid inside one unaliased window per cell,
//! `|x - ξ_i| < λz / (2Δ)`, which is the full field of view of a mask
//! sampled at pitch `Δ`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::C;
use crate::geometry::{RasterGrid, Tessellation};
use crate::imaging::ColorResponse;
use crate::optics::DesignConfig;
use crate::raster::Raster;
use crate::scalar::Real;

/// Per-wavelength PSFs on the sensor grid plus their spectral integrals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsfStack<T> {
    /// `(wavelength, unit-sum PSF)` pairs.
    pub spectral: Vec<(T, Raster<T>)>,
    /// Spectrum weights matching `spectral`.
    pub weights: Vec<T>,
    pub panchromatic: Raster<T>,
    /// Red, green and blue channel PSFs.
    pub per_channel: [Raster<T>; 3],
}

impl<T: Real> PsfStack<T> {
    /// Integrates spectral slices into panchromatic and channel PSFs.
    pub fn from_slices(
        spectral: Vec<(T, Raster<T>)>,
        weights: Vec<T>,
        response: &ColorResponse<T>,
    ) -> Result<Self> {
        let Some(first) = spectral.first() else {
            return Err(Error::invalid("spectral", "no PSF slices"));
        };
        if weights.len() != spectral.len() || response.len() != spectral.len() {
            return Err(Error::DimensionMismatch {
                expected: (spectral.len(), 1),
                found: (weights.len().min(response.len()), 1),
            });
        }
        let dims = first.1.dims();
        let mut pan = Raster::zeros(dims.0, dims.1);
        let mut chans = [pan.clone(), pan.clone(), pan.clone()];
        for (i, (_, slice)) in spectral.iter().enumerate() {
            pan.add_scaled(slice, weights[i])?;
            for (c, chan) in chans.iter_mut().enumerate() {
                chan.add_scaled(slice, weights[i] * response.value(c, i))?;
            }
        }
        Ok(Self {
            spectral,
            weights,
            panchromatic: pan,
            per_channel: chans,
        })
    }

    /// A wavelength-independent stack holding one PSF everywhere.
    pub fn achromatic(wavelength: T, psf: Raster<T>) -> Self {
        Self {
            spectral: vec![(wavelength, psf.clone())],
            weights: vec![T::one()],
            panchromatic: psf.clone(),
            per_channel: [psf.clone(), psf.clone(), psf],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.panchromatic.dims()
    }

    pub fn wavelengths(&self) -> Vec<T> {
        self.spectral.iter().map(|s| s.0).collect()
    }
}

/// Unnormalized per-cell intensity on the optical grid. Excluded cells pass
/// light straight through and contribute their geometric shadow.
pub fn spectral_psf_optical<T: Real>(
    tess: &Tessellation<T>,
    config: &DesignConfig<T>,
    lambda: T,
    excluded: &[usize],
) -> Result<Raster<T>> {
    let grid = config.optical_grid();
    if tess.labels().dims() != grid.dims() {
        return Err(Error::GridMismatch {
            expected: grid.dims(),
            found: tess.labels().dims(),
        });
    }
    if !(lambda > T::zero()) {
        return Err(Error::invalid("wavelength", "must be positive"));
    }
    let mut out = Raster::zeros(grid.nx, grid.ny);
    let mut cell = CellWorkspace::default();
    for (i, site) in tess.sites().iter().enumerate() {
        let fp = tess.footprint(i);
        if excluded.contains(&i) {
            for &(iy, xs, xe) in &fp.runs {
                for ix in xs..xe {
                    out[(ix, iy)] = out[(ix, iy)] + T::one();
                }
            }
            continue;
        }
        cell.accumulate(&mut out, &grid, fp, site.x, site.y, lambda * config.z);
    }
    Ok(out)
}

#[derive(Default)]
struct CellWorkspace<T> {
    prefix: Vec<C<T>>,
    // row sums split into real and imaginary planes so stage 2 vectorizes
    rows_re: Vec<T>,
    rows_im: Vec<T>,
    acc_re: Vec<T>,
    acc_im: Vec<T>,
    ey: Vec<C<T>>,
}

impl<T: Real> CellWorkspace<T> {
    fn accumulate(
        &mut self,
        out: &mut Raster<T>,
        grid: &RasterGrid<T>,
        fp: &crate::geometry::Footprint,
        a: T,
        b: T,
        lz: T,
    ) {
        let Some((x0, x1, y0, _)) = fp.bbox() else {
            return;
        };
        let d = grid.pitch;
        let half = lz / (T::lit(2.0) * d);
        let (wx0, wx1) = window(a, half, d, grid.nx);
        let (wy0, wy1) = window(b, half, d, grid.ny);
        let (wx, wy) = (wx1 - wx0, wy1 - wy0);
        if wx == 0 || wy == 0 {
            return;
        }
        let two_pi = T::TAU();
        let zero = C::new(T::zero(), T::zero());

        // Stage 1: prefix sums along x of exp(-2πi (ξ_p - a)(x - a) / λz),
        // one column per window position.
        let bw = x1 - x0;
        self.prefix.clear();
        self.prefix.resize((bw + 1) * wx, zero);
        for j in 0..wx {
            let u = (grid.center_x(wx0 + j) - a) / lz;
            let mut e = C::from_polar(T::one(), -two_pi * (grid.center_x(x0) - a) * u);
            let step = C::from_polar(T::one(), -two_pi * d * u);
            let mut s = zero;
            for k in 0..bw {
                s = s + e;
                self.prefix[(k + 1) * wx + j] = s;
                e = e * step;
            }
        }

        // Row sums R_q(x) over the runs of each cell row.
        let nrows = fp.runs.last().map_or(0, |r| r.0 + 1 - y0);
        self.rows_re.clear();
        self.rows_re.resize(nrows * wx, T::zero());
        self.rows_im.clear();
        self.rows_im.resize(nrows * wx, T::zero());
        for &(iy, xs, xe) in &fp.runs {
            let span = (iy - y0) * wx..(iy - y0 + 1) * wx;
            let rr = &mut self.rows_re[span.clone()];
            let ri = &mut self.rows_im[span];
            let hi = &self.prefix[(xe - x0) * wx..(xe - x0 + 1) * wx];
            let lo = &self.prefix[(xs - x0) * wx..(xs - x0 + 1) * wx];
            for j in 0..wx {
                let v = hi[j] - lo[j];
                rr[j] = rr[j] + v.re;
                ri[j] = ri[j] + v.im;
            }
        }

        // Pixel aperture factor and intensity scale (Δ² / λz)².
        let fx: Vec<T> = (0..wx)
            .map(|j| sinc(d * (grid.center_x(wx0 + j) - a) / lz).powi(2))
            .collect();
        let scale = (d * d / lz).powi(2);

        // Stage 2: P(x, y) = Σ_q exp(-2πi (η_q - b)(y - b) / λz) R_q(x).
        self.acc_re.resize(wx, T::zero());
        self.acc_im.resize(wx, T::zero());
        self.ey.resize(nrows, zero);
        for yj in 0..wy {
            let y = grid.center_y(wy0 + yj);
            let v = (y - b) / lz;
            let mut e = C::from_polar(T::one(), -two_pi * (grid.center_y(y0) - b) * v);
            let step = C::from_polar(T::one(), -two_pi * d * v);
            for q in 0..nrows {
                self.ey[q] = e;
                e = e * step;
            }
            self.acc_re.iter_mut().for_each(|c| *c = T::zero());
            self.acc_im.iter_mut().for_each(|c| *c = T::zero());
            for q in 0..nrows {
                let (cr, ci) = (self.ey[q].re, self.ey[q].im);
                let rr = &self.rows_re[q * wx..(q + 1) * wx];
                let ri = &self.rows_im[q * wx..(q + 1) * wx];
                let (ar, ai) = (&mut self.acc_re[..wx], &mut self.acc_im[..wx]);
                for j in 0..wx {
                    ar[j] = ar[j] + cr * rr[j] - ci * ri[j];
                    ai[j] = ai[j] + cr * ri[j] + ci * rr[j];
                }
            }
            let fy = sinc(d * v).powi(2) * scale;
            for j in 0..wx {
                let px = &mut out[(wx0 + j, wy0 + yj)];
                let m = self.acc_re[j] * self.acc_re[j] + self.acc_im[j] * self.acc_im[j];
                *px = *px + m * fx[j] * fy;
            }
        }
    }
}

/// Pixel index range whose centers satisfy `|c - center| < half`.
fn window<T: Real>(center: T, half: T, pitch: T, n: usize) -> (usize, usize) {
    // centers at (i + 0.5) * pitch
    let lo = ((center - half) / pitch - T::lit(0.5)).floor() + T::one();
    let hi = ((center + half) / pitch - T::lit(0.5)).ceil();
    let clamp = |v: T| {
        v.max(T::zero())
            .min(T::from_usize_lossy(n))
            .to_usize()
            .unwrap_or(0)
    };
    let (lo, hi) = (clamp(lo), clamp(hi));
    (lo, hi.max(lo))
}

/// Normalized sinc, `sin(πx) / (πx)`.
#[inline]
pub fn sinc<T: Real>(x: T) -> T {
    if x.abs() < T::lit(1e-12) {
        T::one()
    } else {
        let px = T::PI() * x;
        px.sin() / px
    }
}

/// Unit-sum PSF on the sensor grid at one wavelength.
pub fn spectral_psf_fast<T: Real>(
    tess: &Tessellation<T>,
    config: &DesignConfig<T>,
    lambda: T,
    excluded: &[usize],
) -> Result<Raster<T>> {
    let optical = spectral_psf_optical(tess, config, lambda, excluded)?;
    let mut psf = optical.bin(config.upsample)?;
    psf.normalize_unit_sum();
    Ok(psf)
}

/// Spectral slices for every sample of `config.spectrum`, in order.
pub fn spectral_slices<T: Real>(
    tess: &Tessellation<T>,
    config: &DesignConfig<T>,
    excluded: &[usize],
) -> Result<Vec<(T, Raster<T>)>> {
    config
        .spectrum
        .wavelengths()
        .into_par_iter()
        .map(|l| spectral_psf_fast(tess, config, l, excluded).map(|p| (l, p)))
        .collect()
}

/// Spectral PSFs over the configured spectrum with their panchromatic and
/// per-channel integrals.
pub fn panchromatic_psf<T: Real>(
    tess: &Tessellation<T>,
    config: &DesignConfig<T>,
    excluded: &[usize],
    response: &ColorResponse<T>,
) -> Result<PsfStack<T>> {
    let slices = spectral_slices(tess, config, excluded)?;
    PsfStack::from_slices(slices, config.spectrum.weights(), response)
}
