use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::Spectrum;
use crate::scalar::Real;

pub const CHANNEL_NAMES: [&str; 3] = ["r", "g", "b"];

/// Sensor color response `q_c(λ)` sampled on a spectrum grid.
///
/// Each channel is scaled so that `Σ_λ w_λ q_c(λ) = 1` with the spectrum's
/// own quadrature weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorResponse<T> {
    wavelengths: Vec<T>,
    weights: Vec<T>,
    channels: [Vec<T>; 3],
}

impl<T: Real> ColorResponse<T> {
    /// Gaussian responses centered at 610, 540 and 470 nm with σ = 35 nm.
    pub fn gaussian_default(spectrum: &Spectrum<T>) -> Self {
        let centers = [610e-9, 540e-9, 470e-9];
        let sigma = 35e-9;
        let curves = centers.map(|c| {
            spectrum
                .wavelengths()
                .iter()
                .map(|&l| {
                    let d = (l.as_f64() - c) / sigma;
                    T::lit((-0.5 * d * d).exp())
                })
                .collect::<Vec<T>>()
        });
        Self::normalized(spectrum, curves).expect("gaussian curves are positive")
    }

    /// Linearly interpolates a tabulated response `(wavelength, [r, g, b])`
    /// onto the spectrum grid. Wavelengths outside the table get zero.
    pub fn from_table(table: &[(T, [T; 3])], spectrum: &Spectrum<T>) -> Result<Self> {
        if table.len() < 2 {
            return Err(Error::invalid(
                "response",
                "need at least two tabulated wavelengths",
            ));
        }
        if table.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::invalid(
                "response",
                "wavelengths must increase strictly",
            ));
        }
        if table.iter().any(|r| r.1.iter().any(|&v| !(v >= T::zero()))) {
            return Err(Error::invalid("response", "responses must be nonnegative"));
        }
        let curves = [0, 1, 2].map(|c| {
            spectrum
                .wavelengths()
                .iter()
                .map(|&l| interpolate(table, l, c))
                .collect::<Vec<T>>()
        });
        Self::normalized(spectrum, curves)
    }

    /// Uses `curves` as given after normalization.
    pub fn normalized(spectrum: &Spectrum<T>, mut curves: [Vec<T>; 3]) -> Result<Self> {
        let weights = spectrum.weights();
        for (c, curve) in curves.iter_mut().enumerate() {
            if curve.len() != weights.len() {
                return Err(Error::DimensionMismatch {
                    expected: (weights.len(), 1),
                    found: (curve.len(), 1),
                });
            }
            let total: T = curve.iter().zip(&weights).map(|(&q, &w)| q * w).sum();
            if !(total > T::zero()) {
                return Err(Error::invalid(
                    "response",
                    format!(
                        "channel {} has no response over the spectrum",
                        CHANNEL_NAMES[c]
                    ),
                ));
            }
            curve.iter_mut().for_each(|q| *q = *q / total);
        }
        Ok(Self {
            wavelengths: spectrum.wavelengths(),
            weights,
            channels: curves,
        })
    }

    pub fn len(&self) -> usize {
        self.wavelengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wavelengths.is_empty()
    }

    pub fn wavelengths(&self) -> &[T] {
        &self.wavelengths
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// `q_c` at spectrum sample `i`.
    #[inline]
    pub fn value(&self, channel: usize, i: usize) -> T {
        self.channels[channel][i]
    }

    pub fn channel(&self, c: usize) -> &[T] {
        &self.channels[c]
    }
}

fn interpolate<T: Real>(table: &[(T, [T; 3])], l: T, c: usize) -> T {
    let first = table[0].0;
    let last = table[table.len() - 1].0;
    if l < first || l > last {
        return T::zero();
    }
    let k = table.partition_point(|r| r.0 <= l);
    if k == 0 {
        return table[0].1[c];
    }
    if k >= table.len() {
        return table[table.len() - 1].1[c];
    }
    let (l0, v0) = (table[k - 1].0, table[k - 1].1[c]);
    let (l1, v1) = (table[k].0, table[k].1[c]);
    v0 + (v1 - v0) * (l - l0) / (l1 - l0)
}
