//! Forward image formation: PSF convolution, color integration and noise.

mod response;

pub use response::{ColorResponse, CHANNEL_NAMES};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{Fft2, C};
use crate::optics::PsfStack;
use crate::raster::Raster;
use crate::scalar::Real;

/// Multi-plane linear-intensity image. Spectral images carry one wavelength
/// per plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterImage<T> {
    pub planes: Vec<Raster<T>>,
    pub channel_names: Vec<String>,
    #[serde(default)]
    pub wavelengths: Option<Vec<T>>,
}

impl<T: Real> RasterImage<T> {
    pub fn new(planes: Vec<Raster<T>>, channel_names: Vec<String>) -> Result<Self> {
        let img = Self {
            planes,
            channel_names,
            wavelengths: None,
        };
        img.check()?;
        Ok(img)
    }

    pub fn rgb(r: Raster<T>, g: Raster<T>, b: Raster<T>) -> Result<Self> {
        Self::new(
            vec![r, g, b],
            CHANNEL_NAMES.iter().map(|s| s.to_string()).collect(),
        )
    }

    pub fn mono(plane: Raster<T>) -> Self {
        Self {
            planes: vec![plane],
            channel_names: vec!["y".into()],
            wavelengths: None,
        }
    }

    pub fn spectral(planes: Vec<Raster<T>>, wavelengths: Vec<T>) -> Result<Self> {
        if planes.len() != wavelengths.len() {
            return Err(Error::DimensionMismatch {
                expected: (wavelengths.len(), 1),
                found: (planes.len(), 1),
            });
        }
        let names = wavelengths
            .iter()
            .map(|l| format!("{:.1}nm", l.as_f64() * 1e9))
            .collect();
        let img = Self {
            planes,
            channel_names: names,
            wavelengths: Some(wavelengths),
        };
        img.check()?;
        Ok(img)
    }

    fn check(&self) -> Result<()> {
        let Some(first) = self.planes.first() else {
            return Err(Error::invalid("image", "no planes"));
        };
        if self.channel_names.len() != self.planes.len() {
            return Err(Error::invalid("image", "one name per plane required"));
        }
        for p in &self.planes {
            first.check_dims(p.dims())?;
        }
        Ok(())
    }

    pub fn dims(&self) -> (usize, usize) {
        self.planes[0].dims()
    }

    pub fn channels(&self) -> usize {
        self.planes.len()
    }

    pub fn is_spectral(&self) -> bool {
        self.wavelengths.is_some()
    }

    pub fn max(&self) -> T {
        self.planes
            .iter()
            .map(Raster::max)
            .fold(T::neg_infinity(), T::max)
    }

    /// Root mean square over every pixel of every plane.
    pub fn rms(&self) -> T {
        let n = self.planes.len() * self.planes[0].as_slice().len();
        let ss: T = self
            .planes
            .iter()
            .flat_map(|p| p.as_slice().iter().map(|&v| v * v))
            .sum();
        (ss / T::from_usize_lossy(n)).sqrt()
    }
}

/// Linear convolution with a fixed kernel whose origin is the raster center
/// `(w / 2, h / 2)`. Inputs are zero-padded to `2w x 2h` so the circular
/// product has no wrap-around.
pub struct Convolver<T: Real> {
    w: usize,
    h: usize,
    fft: Fft2<T>,
    kernel: Vec<C<T>>,
}

impl<T: Real> Convolver<T> {
    pub fn new(psf: &Raster<T>) -> Self {
        let (w, h) = psf.dims();
        let mut fft = Fft2::new(2 * w, 2 * h);
        let kernel = padded_spectrum(&mut fft, psf, 2 * w);
        Self { w, h, fft, kernel }
    }

    pub fn apply(&mut self, img: &Raster<T>) -> Result<Raster<T>> {
        img.check_dims((self.w, self.h))?;
        let pw = 2 * self.w;
        let mut buf = padded(img, pw, 2 * self.h);
        self.fft.forward(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.kernel) {
            *b = *b * k;
        }
        self.fft.inverse(&mut buf);
        let (cx, cy) = (self.w / 2, self.h / 2);
        Ok(Raster::from_fn(self.w, self.h, |x, y| {
            buf[(y + cy) * pw + x + cx].re
        }))
    }
}

fn padded<T: Real>(img: &Raster<T>, pw: usize, ph: usize) -> Vec<C<T>> {
    let mut buf = vec![C::new(T::zero(), T::zero()); pw * ph];
    for y in 0..img.height() {
        for (x, &v) in img.row(y).iter().enumerate() {
            buf[y * pw + x] = C::new(v, T::zero());
        }
    }
    buf
}

fn padded_spectrum<T: Real>(fft: &mut Fft2<T>, img: &Raster<T>, pw: usize) -> Vec<C<T>> {
    let ph = fft.dims().1;
    let mut buf = padded(img, pw, ph);
    fft.forward(&mut buf);
    buf
}

/// Convolves `scene` with the PSF stack and adds Gaussian noise.
///
/// Spectral scenes (with wavelengths) take the full path: one convolution
/// per wavelength, then channel integration with `response`. Three-channel
/// scenes use the per-channel PSFs, and a single plane uses the
/// panchromatic PSF. Negative values are clamped to zero.
pub fn simulate_capture<T: Real>(
    scene: &RasterImage<T>,
    psf: &PsfStack<T>,
    response: &ColorResponse<T>,
    noise_sigma: T,
    seed: u64,
) -> Result<RasterImage<T>> {
    let clean = convolve_scene(scene, psf, response)?;
    let mut out = add_noise(&clean, noise_sigma, seed)?;
    for p in &mut out.planes {
        p.as_mut_slice()
            .iter_mut()
            .for_each(|v| *v = v.max(T::zero()));
    }
    Ok(out)
}

/// Noise-free capture without clamping.
pub fn convolve_scene<T: Real>(
    scene: &RasterImage<T>,
    psf: &PsfStack<T>,
    response: &ColorResponse<T>,
) -> Result<RasterImage<T>> {
    let dims = scene.dims();
    if psf.dims() != dims {
        return Err(Error::DimensionMismatch {
            expected: psf.dims(),
            found: dims,
        });
    }
    if let Some(wl) = &scene.wavelengths {
        let n = psf.spectral.len();
        if wl.len() != n || response.len() != n {
            return Err(Error::DimensionMismatch {
                expected: (n, 1),
                found: (wl.len(), 1),
            });
        }
        for (i, (&a, (b, _))) in wl.iter().zip(&psf.spectral).enumerate() {
            if (a - *b).abs() > *b * T::lit(1e-6) {
                return Err(Error::invalid(
                    "scene",
                    format!("plane {i} is at {a} m but the PSF sample is at {b} m"),
                ));
            }
        }
        let mut chans: Vec<Raster<T>> = (0..3).map(|_| Raster::zeros(dims.0, dims.1)).collect();
        for (i, (_, h)) in psf.spectral.iter().enumerate() {
            let g = Convolver::new(h).apply(&scene.planes[i])?;
            for (c, chan) in chans.iter_mut().enumerate() {
                chan.add_scaled(&g, psf.weights[i] * response.value(c, i))?;
            }
        }
        let [r, g, b]: [Raster<T>; 3] = chans.try_into().expect("three channels");
        return RasterImage::rgb(r, g, b);
    }
    let kernels: Vec<&Raster<T>> = match scene.channels() {
        1 => vec![&psf.panchromatic],
        3 => psf.per_channel.iter().collect(),
        n => {
            return Err(Error::invalid(
                "scene",
                format!("expected 1 or 3 channels without wavelengths, found {n}"),
            ))
        }
    };
    let planes = scene
        .planes
        .iter()
        .zip(kernels)
        .map(|(p, h)| Convolver::new(h).apply(p))
        .collect::<Result<Vec<_>>>()?;
    RasterImage::new(planes, scene.channel_names.clone())
}

/// Adds zero-mean Gaussian noise. Each plane draws from its own ChaCha
/// stream so results do not depend on evaluation order.
pub fn add_noise<T: Real>(img: &RasterImage<T>, sigma: T, seed: u64) -> Result<RasterImage<T>> {
    if !(sigma >= T::zero()) || !sigma.is_finite() {
        return Err(Error::invalid(
            "noise_sigma",
            "must be finite and nonnegative",
        ));
    }
    let mut out = img.clone();
    if sigma == T::zero() {
        return Ok(out);
    }
    let normal = Normal::new(0.0, sigma.as_f64())
        .map_err(|e| Error::invalid("noise_sigma", e.to_string()))?;
    for (c, plane) in out.planes.iter_mut().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        for v in plane.as_mut_slice() {
            *v = *v + T::lit(normal.sample(&mut rng));
        }
    }
    Ok(out)
}

/// Noise standard deviation giving `snr_db = 20 log10(rms / σ)`.
pub fn sigma_for_snr_db<T: Real>(clean: &RasterImage<T>, snr_db: T) -> T {
    clean.rms() * T::lit(10f64.powf(-snr_db.as_f64() / 20.0))
}

/// Color ground truth `f_c = Σ_λ w_λ q_c(λ) f_λ` of a spectral scene.
pub fn ground_truth<T: Real>(
    scene: &RasterImage<T>,
    response: &ColorResponse<T>,
) -> Result<RasterImage<T>> {
    let n = scene.channels();
    if !scene.is_spectral() || n != response.len() {
        return Err(Error::DimensionMismatch {
            expected: (response.len(), 1),
            found: (n, 1),
        });
    }
    let (w, h) = scene.dims();
    let mut chans: Vec<Raster<T>> = (0..3).map(|_| Raster::zeros(w, h)).collect();
    for (i, plane) in scene.planes.iter().enumerate() {
        for (c, chan) in chans.iter_mut().enumerate() {
            chan.add_scaled(plane, response.weights()[i] * response.value(c, i))?;
        }
    }
    let [r, g, b]: [Raster<T>; 3] = chans.try_into().expect("three channels");
    RasterImage::rgb(r, g, b)
}

/// Peak signal-to-noise ratio in dB against `reference`, with peak 1.
pub fn psnr<T: Real>(estimate: &RasterImage<T>, reference: &RasterImage<T>) -> Result<T> {
    if estimate.channels() != reference.channels() {
        return Err(Error::DimensionMismatch {
            expected: (reference.channels(), 1),
            found: (estimate.channels(), 1),
        });
    }
    let mut se = T::zero();
    let mut n = 0usize;
    for (a, b) in estimate.planes.iter().zip(&reference.planes) {
        b.check_dims(a.dims())?;
        for (&x, &y) in a.as_slice().iter().zip(b.as_slice()) {
            se = se + (x - y) * (x - y);
        }
        n += a.as_slice().len();
    }
    let mse = se / T::from_usize_lossy(n);
    Ok(T::lit(-10.0) * mse.log10())
}
