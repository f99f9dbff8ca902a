//! Total-variation deconvolution by ADMM.
//!
//! Solves `min_x ½‖Ax − y‖² + μ‖Dx‖₁` per channel, where `A` convolves with
//! the channel PSF and `D` stacks periodic forward differences along x and
//! y (anisotropic TV). Two boundary models are available:
//!
//! * [`Boundary::Circular`] pads the capture by edge replication and treats
//!   `A` as a circular convolution on the padded grid.
//! * [`Boundary::Cropped`] estimates the scene on a doubled grid and models
//!   the capture as a crop of the circular convolution, with an extra split
//!   `v = Ax` so every update stays diagonal in Fourier or pixel space.
//!   This matches captures formed by linear convolution, where light from
//!   outside the field of view lands on the sensor.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{Fft2, C};
use crate::imaging::RasterImage;
use crate::optics::PsfStack;
use crate::raster::Raster;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Circular,
    Cropped,
}

/// ADMM settings. `None` weights resolve from the capture maximum:
/// `μ = 1e-4 max(y)`, `ρ = 10 μ`, `ρ₂ = 10 ρ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconParams<T> {
    pub mu: Option<T>,
    pub rho: Option<T>,
    /// Weight of the `v = Ax` split in cropped mode.
    pub rho2: Option<T>,
    pub iters: usize,
    /// Edge-replicate padding in pixels (circular mode).
    pub boundary_taper: usize,
    pub boundary: Boundary,
}

impl<T: Real> Default for ReconParams<T> {
    fn default() -> Self {
        Self {
            mu: None,
            rho: None,
            rho2: None,
            iters: 100,
            boundary_taper: 16,
            boundary: Boundary::Circular,
        }
    }
}

/// Weights after resolving defaults.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights<T> {
    pub mu: T,
    pub rho: T,
    pub rho2: T,
}

impl<T: Real> ReconParams<T> {
    pub fn resolve(&self, y_max: T) -> Result<Weights<T>> {
        if self.iters == 0 {
            return Err(Error::invalid("iters", "must be at least 1"));
        }
        let mu = self.mu.unwrap_or(T::lit(1e-4) * y_max);
        // keep ρ positive even for an all-zero capture
        let rho = self
            .rho
            .unwrap_or_else(|| (T::lit(10.0) * mu).max(T::lit(1e-12)));
        let rho2 = self.rho2.unwrap_or(T::lit(10.0) * rho);
        if !(mu >= T::zero()) || !mu.is_finite() {
            return Err(Error::invalid("mu", "must be finite and nonnegative"));
        }
        if !(rho > T::zero()) || !rho.is_finite() {
            return Err(Error::invalid("rho", "must be finite and positive"));
        }
        if !(rho2 > T::zero()) || !rho2.is_finite() {
            return Err(Error::invalid("rho2", "must be finite and positive"));
        }
        Ok(Weights { mu, rho, rho2 })
    }
}

/// Soft thresholding `(1 − κ/|v|)₊ v`.
#[inline]
pub fn soft_threshold<T: Real>(v: T, kappa: T) -> T {
    let a = v.abs();
    if a <= kappa {
        T::zero()
    } else {
        v - kappa * v.signum()
    }
}

pub fn soft_threshold_raster<T: Real>(v: &Raster<T>, kappa: T) -> Raster<T> {
    v.map(|x| soft_threshold(x, kappa))
}

/// Periodic forward differences `(x(p + e_x) − x(p), x(p + e_y) − x(p))`.
pub fn grad<T: Real>(x: &Raster<T>) -> [Raster<T>; 2] {
    let (w, h) = x.dims();
    let gx = Raster::from_fn(w, h, |i, j| x[((i + 1) % w, j)] - x[(i, j)]);
    let gy = Raster::from_fn(w, h, |i, j| x[(i, (j + 1) % h)] - x[(i, j)]);
    [gx, gy]
}

/// Adjoint of [`grad`].
pub fn grad_adjoint<T: Real>(g: &[Raster<T>; 2]) -> Raster<T> {
    let (w, h) = g[0].dims();
    Raster::from_fn(w, h, |i, j| {
        g[0][((i + w - 1) % w, j)] - g[0][(i, j)] + g[1][(i, (j + h - 1) % h)] - g[1][(i, j)]
    })
}

fn l1<T: Real>(g: &[Raster<T>; 2]) -> T {
    g.iter()
        .flat_map(|r| r.as_slice().iter().map(|v| v.abs()))
        .sum()
}

fn sq_norm<T: Real>(v: &[T]) -> T {
    v.iter().map(|&a| a * a).sum()
}

/// FFT-diagonal convolution and difference operators on a periodic grid.
struct Operators<T: Real> {
    w: usize,
    h: usize,
    fft: Fft2<T>,
    hf: Vec<C<T>>,
    /// `|D̂_x|² + |D̂_y|²`.
    lap: Vec<T>,
}

impl<T: Real> Operators<T> {
    fn new(kernel: &Raster<T>) -> Self {
        let (w, h) = kernel.dims();
        let mut fft = Fft2::new(w, h);
        let hf = fft.forward_real(kernel.as_slice());
        let two_pi = T::TAU();
        let mut lap = Vec::with_capacity(w * h);
        for j in 0..h {
            let cy = T::lit(2.0)
                - T::lit(2.0) * (two_pi * T::from_usize_lossy(j) / T::from_usize_lossy(h)).cos();
            for i in 0..w {
                let cx = T::lit(2.0)
                    - T::lit(2.0)
                        * (two_pi * T::from_usize_lossy(i) / T::from_usize_lossy(w)).cos();
                lap.push(cx + cy);
            }
        }
        Self { w, h, fft, hf, lap }
    }

    fn to_raster(&self, buf: &[C<T>]) -> Raster<T> {
        Raster::from_vec(self.w, self.h, buf.iter().map(|c| c.re).collect()).expect("grid size")
    }

    fn apply(&mut self, x: &Raster<T>, adjoint: bool) -> Raster<T> {
        let mut buf = self.fft.forward_real(x.as_slice());
        for (b, k) in buf.iter_mut().zip(&self.hf) {
            *b = *b * if adjoint { k.conj() } else { *k };
        }
        self.fft.inverse(&mut buf);
        self.to_raster(&buf)
    }

    /// Solves `(a|Ĥ|² + ρ|D̂|²) x̂ = r̂`, where `r̂` is the spectrum of `rhs`
    /// plus `extra`. Returns `x` and `Ax`.
    fn solve(
        &mut self,
        rhs: &Raster<T>,
        extra: Option<&[C<T>]>,
        a: T,
        rho: T,
    ) -> (Raster<T>, Raster<T>) {
        let mut buf = self.fft.forward_real(rhs.as_slice());
        if let Some(e) = extra {
            for (b, &v) in buf.iter_mut().zip(e) {
                *b = *b + v;
            }
        }
        for ((b, k), &l) in buf.iter_mut().zip(&self.hf).zip(&self.lap) {
            let den = a * k.norm_sqr() + rho * l;
            *b = if den > T::zero() {
                *b / den
            } else {
                C::new(T::zero(), T::zero())
            };
        }
        let mut ax: Vec<C<T>> = buf.iter().zip(&self.hf).map(|(b, k)| *b * k).collect();
        self.fft.inverse(&mut buf);
        self.fft.inverse(&mut ax);
        (self.to_raster(&buf), self.to_raster(&ax))
    }
}

/// Places a centered PSF (origin at `(w/2, h/2)`) on a periodic grid with
/// its origin at index 0.
pub fn periodic_kernel<T: Real>(psf: &Raster<T>, gw: usize, gh: usize) -> Raster<T> {
    let (w, h) = psf.dims();
    let (cx, cy) = (w / 2, h / 2);
    let mut k = Raster::zeros(gw, gh);
    for y in 0..h {
        for x in 0..w {
            let i = (x + gw * w - cx) % gw;
            let j = (y + gh * h - cy) % gh;
            k[(i, j)] = k[(i, j)] + psf[(x, y)];
        }
    }
    k
}

fn edge_pad<T: Real>(y: &Raster<T>, t: usize) -> Raster<T> {
    let (w, h) = y.dims();
    Raster::from_fn(w + 2 * t, h + 2 * t, |i, j| {
        let x = (i as isize - t as isize).clamp(0, w as isize - 1) as usize;
        let yy = (j as isize - t as isize).clamp(0, h as isize - 1) as usize;
        y[(x, yy)]
    })
}

/// ADMM iterate. `z` and `u` hold the x and y difference planes.
#[derive(Debug, Clone)]
pub struct AdmmState<T> {
    pub x: Raster<T>,
    pub z: [Raster<T>; 2],
    pub u: [Raster<T>; 2],
    /// `Ax` for the current `x`.
    pub ax: Raster<T>,
    pub objective_trace: Vec<T>,
}

/// Single-channel circular-boundary problem on the edge-padded grid.
pub struct CircularSolver<T: Real> {
    ops: Operators<T>,
    y: Raster<T>,
    aty: Raster<T>,
    kernel: Raster<T>,
    mu: T,
    rho: T,
    taper: usize,
    out: (usize, usize),
}

impl<T: Real> CircularSolver<T> {
    pub fn new(raw: &Raster<T>, psf: &Raster<T>, mu: T, rho: T, taper: usize) -> Result<Self> {
        psf.check_dims(raw.dims())?;
        let y = edge_pad(raw, taper);
        let kernel = periodic_kernel(psf, y.width(), y.height());
        let mut ops = Operators::new(&kernel);
        let aty = ops.apply(&y, true);
        Ok(Self {
            ops,
            y,
            aty,
            kernel,
            mu,
            rho,
            taper,
            out: raw.dims(),
        })
    }

    /// Padded observation the solver fits.
    pub fn observation(&self) -> &Raster<T> {
        &self.y
    }

    /// Convolution kernel on the padded grid, origin at index 0.
    pub fn kernel(&self) -> &Raster<T> {
        &self.kernel
    }

    pub fn rho(&self) -> T {
        self.rho
    }

    /// `x⁰ = y`, `z⁰ = Dx⁰`, `u⁰ = 0`.
    pub fn init(&mut self) -> AdmmState<T> {
        let x = self.y.clone();
        let z = grad(&x);
        let (w, h) = x.dims();
        let ax = self.ops.apply(&x, false);
        AdmmState {
            x,
            z,
            u: [Raster::zeros(w, h), Raster::zeros(w, h)],
            ax,
            objective_trace: Vec::new(),
        }
    }

    /// `x = (AᵀA + ρDᵀD)⁻¹ (Aᵀy + ρDᵀ(z − u))`.
    pub fn x_update(&mut self, s: &mut AdmmState<T>) {
        let rhs = self.rhs(s);
        let (x, ax) = self.ops.solve(&rhs, None, T::one(), self.rho);
        s.x = x;
        s.ax = ax;
    }

    /// Right-hand side of the x-update normal equations.
    pub fn rhs(&self, s: &AdmmState<T>) -> Raster<T> {
        let diff = [zip_sub(&s.z[0], &s.u[0]), zip_sub(&s.z[1], &s.u[1])];
        let mut rhs = grad_adjoint(&diff);
        rhs.scale(self.rho);
        rhs.add_scaled(&self.aty, T::one()).expect("same grid");
        rhs
    }

    /// `z = S_{μ/ρ}(Dx + u)`.
    pub fn z_update(&self, s: &mut AdmmState<T>) {
        let d = grad(&s.x);
        let kappa = self.mu / self.rho;
        for c in 0..2 {
            s.z[c] = Raster::from_fn(d[c].width(), d[c].height(), |i, j| {
                soft_threshold(d[c][(i, j)] + s.u[c][(i, j)], kappa)
            });
        }
    }

    /// `u = u + Dx − z`.
    pub fn u_update(&self, s: &mut AdmmState<T>) {
        let d = grad(&s.x);
        for c in 0..2 {
            for ((u, &dv), &zv) in s.u[c]
                .as_mut_slice()
                .iter_mut()
                .zip(d[c].as_slice())
                .zip(s.z[c].as_slice())
            {
                *u = *u + dv - zv;
            }
        }
    }

    /// `½‖Ax − y‖² + μ‖Dx‖₁` on the padded grid.
    pub fn objective(&self, s: &AdmmState<T>) -> T {
        let r: Vec<T> =
            s.ax.as_slice()
                .iter()
                .zip(self.y.as_slice())
                .map(|(&a, &b)| a - b)
                .collect();
        T::lit(0.5) * sq_norm(&r) + self.mu * l1(&grad(&s.x))
    }

    /// `½‖Ax − y‖² + μ‖z‖₁ + (ρ/2)‖Dx − z + u‖²`.
    pub fn augmented(&self, s: &AdmmState<T>) -> T {
        let r: Vec<T> =
            s.ax.as_slice()
                .iter()
                .zip(self.y.as_slice())
                .map(|(&a, &b)| a - b)
                .collect();
        let d = grad(&s.x);
        let mut pen = T::zero();
        for c in 0..2 {
            for ((&dv, &zv), &uv) in d[c]
                .as_slice()
                .iter()
                .zip(s.z[c].as_slice())
                .zip(s.u[c].as_slice())
            {
                let e = dv - zv + uv;
                pen = pen + e * e;
            }
        }
        T::lit(0.5) * sq_norm(&r) + self.mu * l1(&s.z) + T::lit(0.5) * self.rho * pen
    }

    /// One full iteration; appends the objective.
    pub fn step(&mut self, s: &mut AdmmState<T>) {
        self.x_update(s);
        self.z_update(s);
        self.u_update(s);
        let obj = self.objective(s);
        s.objective_trace.push(obj);
    }

    /// Central crop of `x`, clamped to be nonnegative.
    pub fn result(&self, s: &AdmmState<T>) -> Raster<T> {
        let t = self.taper;
        Raster::from_fn(self.out.0, self.out.1, |i, j| {
            s.x[(i + t, j + t)].max(T::zero())
        })
    }
}

fn zip_sub<T: Real>(a: &Raster<T>, b: &Raster<T>) -> Raster<T> {
    let data = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(&x, &y)| x - y)
        .collect();
    Raster::from_vec(a.width(), a.height(), data).expect("same grid")
}

/// Single-channel cropped-boundary problem on a `2w x 2h` estimate grid.
struct CroppedSolver<T: Real> {
    ops: Operators<T>,
    /// Observation embedded in the estimate grid (`Cᵀy`).
    cty: Raster<T>,
    mu: T,
    rho: T,
    rho2: T,
    out: (usize, usize),
}

struct CroppedState<T> {
    x: Raster<T>,
    ax: Raster<T>,
    v: Raster<T>,
    w: Raster<T>,
    z: [Raster<T>; 2],
    u: [Raster<T>; 2],
}

impl<T: Real> CroppedSolver<T> {
    fn new(raw: &Raster<T>, psf: &Raster<T>, wts: Weights<T>) -> Result<Self> {
        psf.check_dims(raw.dims())?;
        let (w, h) = raw.dims();
        let kernel = periodic_kernel(psf, 2 * w, 2 * h);
        let ops = Operators::new(&kernel);
        let mut cty = Raster::zeros(2 * w, 2 * h);
        for j in 0..h {
            for i in 0..w {
                cty[(i, j)] = raw[(i, j)];
            }
        }
        Ok(Self {
            ops,
            cty,
            mu: wts.mu,
            rho: wts.rho,
            rho2: wts.rho2,
            out: (w, h),
        })
    }

    fn observed(&self, i: usize, j: usize) -> bool {
        i < self.out.0 && j < self.out.1
    }

    fn init(&mut self) -> CroppedState<T> {
        let x = self.cty.clone();
        let ax = self.ops.apply(&x, false);
        let (w, h) = x.dims();
        CroppedState {
            z: grad(&x),
            u: [Raster::zeros(w, h), Raster::zeros(w, h)],
            v: ax.clone(),
            w: Raster::zeros(w, h),
            x,
            ax,
        }
    }

    fn step(&mut self, s: &mut CroppedState<T>) -> T {
        // x: (ρ₂AᵀA + ρDᵀD) x = ρ₂Aᵀ(v − w) + ρDᵀ(z − u)
        let diff = [zip_sub(&s.z[0], &s.u[0]), zip_sub(&s.z[1], &s.u[1])];
        let mut rhs = grad_adjoint(&diff);
        rhs.scale(self.rho);
        let mut vw = self.ops.fft.forward_real(zip_sub(&s.v, &s.w).as_slice());
        for (b, k) in vw.iter_mut().zip(&self.ops.hf) {
            *b = *b * k.conj() * self.rho2;
        }
        let (x, ax) = self.ops.solve(&rhs, Some(&vw), self.rho2, self.rho);
        s.x = x;
        s.ax = ax;

        // v: pixelwise (Cᵀy + ρ₂(Ax + w)) / (CᵀC + ρ₂)
        let (gw, gh) = s.x.dims();
        for j in 0..gh {
            for i in 0..gw {
                let m = if self.observed(i, j) {
                    T::one()
                } else {
                    T::zero()
                };
                let t = s.ax[(i, j)] + s.w[(i, j)];
                s.v[(i, j)] = (self.cty[(i, j)] + self.rho2 * t) / (m + self.rho2);
            }
        }
        for ((wv, &a), &v) in
            s.w.as_mut_slice()
                .iter_mut()
                .zip(s.ax.as_slice())
                .zip(s.v.as_slice())
        {
            *wv = *wv + a - v;
        }

        let d = grad(&s.x);
        let kappa = self.mu / self.rho;
        for c in 0..2 {
            for ((z, u), &dv) in s.z[c]
                .as_mut_slice()
                .iter_mut()
                .zip(s.u[c].as_mut_slice())
                .zip(d[c].as_slice())
            {
                *z = soft_threshold(dv + *u, kappa);
                *u = *u + dv - *z;
            }
        }

        let mut data = T::zero();
        for j in 0..self.out.1 {
            for i in 0..self.out.0 {
                let r = s.ax[(i, j)] - self.cty[(i, j)];
                data = data + r * r;
            }
        }
        T::lit(0.5) * data + self.mu * l1(&d)
    }

    fn result(&self, s: &CroppedState<T>) -> Raster<T> {
        Raster::from_fn(self.out.0, self.out.1, |i, j| s.x[(i, j)].max(T::zero()))
    }
}

fn deconvolve_channel<T: Real>(
    raw: &Raster<T>,
    psf: &Raster<T>,
    params: &ReconParams<T>,
    wts: Weights<T>,
    channel: usize,
) -> Result<(Raster<T>, Vec<T>)> {
    let check = |obj: T, it: usize| {
        if obj.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite {
                channel,
                iteration: it,
            })
        }
    };
    match params.boundary {
        Boundary::Circular => {
            let mut solver = CircularSolver::new(raw, psf, wts.mu, wts.rho, params.boundary_taper)?;
            let mut s = solver.init();
            for it in 0..params.iters {
                solver.step(&mut s);
                check(*s.objective_trace.last().unwrap(), it)?;
            }
            Ok((solver.result(&s), s.objective_trace))
        }
        Boundary::Cropped => {
            let mut solver = CroppedSolver::new(raw, psf, wts)?;
            let mut s = solver.init();
            let mut trace = Vec::with_capacity(params.iters);
            for it in 0..params.iters {
                let obj = solver.step(&mut s);
                check(obj, it)?;
                trace.push(obj);
            }
            Ok((solver.result(&s), trace))
        }
    }
}

/// Deconvolves every channel of `raw` with its kernel. `kernels` holds one
/// PSF per channel or a single PSF shared by all channels. The returned
/// trace sums the per-channel objectives at each iteration.
pub fn admm_tv_deconvolve_with<T: Real>(
    raw: &RasterImage<T>,
    kernels: &[Raster<T>],
    params: &ReconParams<T>,
) -> Result<(RasterImage<T>, Vec<T>)> {
    let n = raw.channels();
    if kernels.len() != 1 && kernels.len() != n {
        return Err(Error::invalid(
            "psf",
            format!("{} kernels for {n} channels", kernels.len()),
        ));
    }
    for k in kernels {
        if k.dims() != raw.dims() {
            return Err(Error::DimensionMismatch {
                expected: raw.dims(),
                found: k.dims(),
            });
        }
    }
    let wts = params.resolve(raw.max())?;
    let results: Vec<(Raster<T>, Vec<T>)> = (0..n)
        .into_par_iter()
        .map(|c| {
            let k = &kernels[if kernels.len() == 1 { 0 } else { c }];
            deconvolve_channel(&raw.planes[c], k, params, wts, c)
        })
        .collect::<Result<_>>()?;
    let mut trace = vec![T::zero(); params.iters];
    let mut planes = Vec::with_capacity(n);
    for (p, t) in results {
        for (acc, v) in trace.iter_mut().zip(t) {
            *acc = *acc + v;
        }
        planes.push(p);
    }
    let mut out = RasterImage::new(planes, raw.channel_names.clone())?;
    out.wavelengths = raw.wavelengths.clone();
    Ok((out, trace))
}

/// Deconvolves a capture with the matching PSFs of `psf`: per-channel PSFs
/// for three-channel captures, the panchromatic PSF for a single plane.
pub fn admm_tv_deconvolve<T: Real>(
    raw: &RasterImage<T>,
    psf: &PsfStack<T>,
    params: &ReconParams<T>,
) -> Result<(RasterImage<T>, Vec<T>)> {
    match raw.channels() {
        1 => admm_tv_deconvolve_with(raw, std::slice::from_ref(&psf.panchromatic), params),
        3 => admm_tv_deconvolve_with(raw, &psf.per_channel, params),
        n => Err(Error::invalid(
            "raw",
            format!("expected 1 or 3 channels, found {n}"),
        )),
    }
}
