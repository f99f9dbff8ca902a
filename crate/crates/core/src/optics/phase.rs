use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{RasterGrid, Tessellation};
use crate::optics::DesignConfig;
use crate::raster::Raster;
use crate::scalar::Real;

/// Wrapped phase in radians at fabrication resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseProfile<T> {
    pub grid: Raster<T>,
    pub pitch: T,
    /// Wavelength the phase was designed for.
    pub lambda0: T,
    pub z: T,
    /// Sorted cell indices that carry no phase.
    pub excluded: Vec<usize>,
    /// Amplitude transmission; `None` means fully open.
    #[serde(default)]
    pub transmission: Option<Raster<T>>,
}

impl<T: Real> PhaseProfile<T> {
    pub fn raster_grid(&self) -> RasterGrid<T> {
        RasterGrid::new(self.grid.width(), self.grid.height(), self.pitch)
    }
}

/// Wraps into `[0, 2π)`.
#[inline]
pub fn wrap_phase<T: Real>(phi: T) -> T {
    let two_pi = T::TAU();
    let r = phi - (phi / two_pi).floor() * two_pi;
    // rounding can land exactly on 2π for tiny negative inputs
    if r >= two_pi {
        T::zero()
    } else {
        r
    }
}

/// Unwrapped Fresnel phase `-k r² / (2z)` of a pixel at squared distance `r2`
/// from its cell center.
#[inline]
pub fn fresnel_phase<T: Real>(r2: T, lambda: T, z: T) -> T {
    -T::PI() * r2 / (lambda * z)
}

/// Voronoi-Fresnel phase: every cell carries a wrapped Fresnel lens
/// centered at its site, focused at `config.z` for `config.lambda0`.
pub fn build_phase<T: Real>(
    tess: &Tessellation<T>,
    config: &DesignConfig<T>,
    excluded: &[usize],
) -> Result<PhaseProfile<T>> {
    let grid = config.optical_grid();
    let labels = tess.labels();
    if labels.dims() != grid.dims() {
        return Err(Error::GridMismatch {
            expected: grid.dims(),
            found: labels.dims(),
        });
    }
    let mut skip = vec![false; tess.len()];
    for &e in excluded {
        if e >= tess.len() {
            return Err(Error::invalid(
                "excluded",
                format!("cell {e} does not exist"),
            ));
        }
        skip[e] = true;
    }
    let sites = tess.sites();
    let phase = Raster::from_fn(grid.nx, grid.ny, |ix, iy| {
        let l = labels[(ix, iy)] as usize;
        if skip[l] {
            return T::zero();
        }
        let dx = grid.center_x(ix) - sites[l].x;
        let dy = grid.center_y(iy) - sites[l].y;
        wrap_phase(fresnel_phase(dx * dx + dy * dy, config.lambda0, config.z))
    });
    let mut excluded = excluded.to_vec();
    excluded.sort_unstable();
    excluded.dedup();
    Ok(PhaseProfile {
        grid: phase,
        pitch: grid.pitch,
        lambda0: config.lambda0,
        z: config.z,
        excluded,
        transmission: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{tessellate, Point};

    #[test]
    fn wrap_stays_in_range() {
        for &v in &[-1e-18, -7.0, 0.0, std::f64::consts::TAU, 100.0] {
            let w = wrap_phase(v);
            assert!((0.0..std::f64::consts::TAU).contains(&w), "{v} -> {w}");
        }
    }

    #[test]
    fn centered_cell_is_symmetric() {
        let cfg = DesignConfig::<f64>::new((33, 21), 3.45e-6, 2e-3, 550e-9).unwrap();
        let g = cfg.optical_grid();
        let c = Point::new(g.center_x(16), g.center_y(10));
        let t = tessellate(&[c], g).unwrap();
        let p = build_phase(&t, &cfg, &[]).unwrap();
        assert_eq!(p.grid[(16, 10)], 0.0);
        for d in 1..16 {
            assert!((p.grid[(16 + d, 10)] - p.grid[(16 - d, 10)]).abs() < 1e-12);
        }
    }

    #[test]
    fn excluded_cells_are_flat() {
        let cfg = DesignConfig::new((40, 20), 3.45e-6, 2e-3, 550e-9).unwrap();
        let g = cfg.optical_grid();
        let pts = [
            Point::new(g.width() * 0.25, g.height() * 0.5),
            Point::new(g.width() * 0.75, g.height() * 0.5),
        ];
        let t = tessellate(&pts, g).unwrap();
        let p = build_phase(&t, &cfg, &[1]).unwrap();
        for iy in 0..20 {
            for ix in 0..40 {
                if t.labels()[(ix, iy)] == 1 {
                    assert_eq!(p.grid[(ix, iy)], 0.0);
                }
            }
        }
        assert!(p.grid.max() > 0.0);
    }

    #[test]
    fn grid_mismatch_reported() {
        let cfg = DesignConfig::new((40, 20), 3.45e-6, 2e-3, 550e-9).unwrap();
        let g = RasterGrid::new(10, 10, cfg.pixel_pitch);
        let t = tessellate(&[Point::new(1e-5, 1e-5)], g).unwrap();
        assert!(matches!(
            build_phase(&t, &cfg, &[]),
            Err(Error::GridMismatch { .. })
        ));
    }
}
