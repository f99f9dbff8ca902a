//! Two-dimensional FFT on row-major complex buffers.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::scalar::Real;

pub type C<T> = Complex<T>;

/// Planned 2D transform for a fixed `width x height` buffer.
pub struct Fft2<T: Real> {
    width: usize,
    height: usize,
    row_fwd: Arc<dyn Fft<T>>,
    row_inv: Arc<dyn Fft<T>>,
    col_fwd: Arc<dyn Fft<T>>,
    col_inv: Arc<dyn Fft<T>>,
    scratch: Vec<C<T>>,
}

impl<T: Real> Fft2<T> {
    pub fn new(width: usize, height: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            width,
            height,
            row_fwd: planner.plan_fft(width, FftDirection::Forward),
            row_inv: planner.plan_fft(width, FftDirection::Inverse),
            col_fwd: planner.plan_fft(height, FftDirection::Forward),
            col_inv: planner.plan_fft(height, FftDirection::Inverse),
            scratch: vec![C::new(T::zero(), T::zero()); width * height],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Unnormalized forward transform, in place.
    pub fn forward(&mut self, data: &mut [C<T>]) {
        let (row, col) = (self.row_fwd.clone(), self.col_fwd.clone());
        self.run(data, row.as_ref(), col.as_ref());
    }

    /// Inverse transform scaled by `1 / (width * height)`, in place.
    pub fn inverse(&mut self, data: &mut [C<T>]) {
        let (row, col) = (self.row_inv.clone(), self.col_inv.clone());
        self.run(data, row.as_ref(), col.as_ref());
        let scale = T::from_usize_lossy(self.width * self.height).recip();
        data.iter_mut().for_each(|v| *v = *v * scale);
    }

    fn run(&mut self, data: &mut [C<T>], row: &dyn Fft<T>, col: &dyn Fft<T>) {
        let (w, h) = (self.width, self.height);
        assert_eq!(
            data.len(),
            w * h,
            "buffer does not match planned dimensions"
        );
        row.process(data);
        transpose(data, &mut self.scratch, w, h);
        col.process(&mut self.scratch);
        transpose(&self.scratch, data, h, w);
    }

    /// Forward transform of a real raster.
    pub fn forward_real(&mut self, data: &[T]) -> Vec<C<T>> {
        let mut buf: Vec<C<T>> = data.iter().map(|&v| C::new(v, T::zero())).collect();
        self.forward(&mut buf);
        buf
    }
}

/// `dst[x * h + y] = src[y * w + x]` for a `w x h` source.
fn transpose<T: Copy>(src: &[T], dst: &mut [T], w: usize, h: usize) {
    const BLOCK: usize = 16;
    for by in (0..h).step_by(BLOCK) {
        for bx in (0..w).step_by(BLOCK) {
            for y in by..(by + BLOCK).min(h) {
                for x in bx..(bx + BLOCK).min(w) {
                    dst[x * h + y] = src[y * w + x];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_identity() {
        let (w, h) = (6, 5);
        let orig: Vec<C<f64>> = (0..w * h)
            .map(|i| C::new(i as f64 * 0.3 - 1.0, (i % 7) as f64))
            .collect();
        let mut buf = orig.clone();
        let mut fft = Fft2::new(w, h);
        fft.forward(&mut buf);
        fft.inverse(&mut buf);
        for (a, b) in buf.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn matches_direct_dft() {
        let (w, h) = (4, 3);
        let data: Vec<f64> = (0..w * h).map(|i| ((i * 37) % 11) as f64).collect();
        let mut fft = Fft2::new(w, h);
        let spec = fft.forward_real(&data);
        for v in 0..h {
            for u in 0..w {
                let mut acc = C::new(0.0, 0.0);
                for y in 0..h {
                    for x in 0..w {
                        let ph = -2.0
                            * std::f64::consts::PI
                            * ((u * x) as f64 / w as f64 + (v * y) as f64 / h as f64);
                        acc += C::from_polar(data[y * w + x], ph);
                    }
                }
                assert!((acc - spec[v * w + u]).norm() < 1e-9);
            }
        }
    }
}
