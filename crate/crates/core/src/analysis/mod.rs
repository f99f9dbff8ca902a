//! First-order system characterization and fabrication export helpers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Tessellation};
use crate::optics::{wrap_phase, DesignConfig, PhaseProfile};
use crate::raster::Raster;
use crate::scalar::Real;

/// Half field of view in degrees, `α + atan(h_n / z_o)`.
pub fn half_fov<T: Real>(alpha_deg: T, h_n: T, z_o: T) -> T {
    alpha_deg + (h_n / z_o).atan().to_degrees()
}

fn rss_about<T: Real>(tess: &Tessellation<T>, centers: &[Point<T>]) -> T {
    let mut sum = T::zero();
    let mut count = 0usize;
    for (cell, c) in tess.cells().iter().zip(centers) {
        for v in &cell.vertices {
            sum = sum + v.dist2(c);
        }
        count += cell.vertices.len();
    }
    if count == 0 {
        return T::zero();
    }
    T::lit(2.0) * (sum / T::from_usize_lossy(count)).sqrt()
}

/// Effective aperture diameter: twice the root mean square distance of all
/// polygon vertices from their cell sites.
pub fn rss_diameter<T: Real>(tess: &Tessellation<T>) -> T {
    rss_about(tess, &tess.points())
}

/// [`rss_diameter`] measured from the raster mass centroids instead of the
/// sites.
pub fn rss_diameter_centroids<T: Real>(tess: &Tessellation<T>) -> Result<T> {
    Ok(rss_about(tess, &tess.centroids()?))
}

/// Rayleigh resolution limit `1.22 λ z_i / d̄`.
pub fn rayleigh_limit<T: Real>(lambda: T, z_i: T, d_bar: T) -> T {
    T::lit(1.22) * lambda * z_i / d_bar
}

/// Level index of a phase value for `levels` uniform steps over `[0, 2π)`.
#[inline]
pub fn phase_level<T: Real>(phi: T, levels: usize) -> usize {
    let step = T::TAU() / T::from_usize_lossy(levels);
    // the small bias keeps exact level values from rounding down
    let q = (wrap_phase(phi) / step + T::lit(1e3) * T::epsilon()).floor();
    q.to_usize().unwrap_or(0).min(levels - 1)
}

/// Snaps every pixel down to the nearest of `levels` phase steps.
pub fn quantize_phase<T: Real>(phase: &PhaseProfile<T>, levels: usize) -> Result<PhaseProfile<T>> {
    if levels < 2 {
        return Err(Error::invalid("levels", "need at least 2 levels"));
    }
    let step = T::TAU() / T::from_usize_lossy(levels);
    let mut out = phase.clone();
    out.grid = phase
        .grid
        .map(|p| T::from_usize_lossy(phase_level(p, levels)) * step);
    Ok(out)
}

/// Etch depth per pixel, `φ / 2π · total_depth`.
pub fn depth_map<T: Real>(phase: &PhaseProfile<T>, total_depth: T) -> Raster<T> {
    phase.grid.map(|p| p / T::TAU() * total_depth)
}

/// Binary mask depths `total_depth / L · 2^b` that add up to every level.
pub fn etch_mask_depths<T: Real>(levels: usize, total_depth: T) -> Result<Vec<T>> {
    if levels < 2 || !levels.is_power_of_two() {
        return Err(Error::invalid(
            "levels",
            "binary masks need a power-of-two level count",
        ));
    }
    let unit = total_depth / T::from_usize_lossy(levels);
    Ok((0..levels.trailing_zeros())
        .map(|b| unit * T::from_usize_lossy(1 << b))
        .collect())
}

/// Cells whose site lies strictly within `margin` of the rectangle border.
pub fn exclude_marginal_cells<T: Real>(tess: &Tessellation<T>, margin: T) -> Result<Vec<usize>> {
    if !(margin >= T::zero()) {
        return Err(Error::invalid("margin", "must be nonnegative"));
    }
    let g = tess.grid();
    let (w, h) = (g.width(), g.height());
    let excluded: Vec<usize> = tess
        .sites()
        .iter()
        .enumerate()
        .filter(|(_, s)| s.x < margin || s.y < margin || w - s.x < margin || h - s.y < margin)
        .map(|(i, _)| i)
        .collect();
    if excluded.len() == tess.len() {
        return Err(Error::MarginTooLarge {
            margin: margin.as_f64(),
        });
    }
    Ok(excluded)
}

/// Default border band: `z tan α` less half the sensor's longer extent,
/// clamped at zero.
pub fn default_margin<T: Real>(config: &DesignConfig<T>) -> T {
    let g = config.sensor_grid();
    let half = g.width().max(g.height()) / T::lit(2.0);
    (config.z * config.cutoff_angle_deg.to_radians().tan() - half).max(T::zero())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemReport {
    pub half_fov_deg: f64,
    /// Largest lateral offset of an active cell from the design center.
    pub h_n_m: f64,
    pub rss_diameter_m: f64,
    pub rss_diameter_centroid_m: f64,
    pub rayleigh_limit_m: f64,
    pub excluded_cells: Vec<usize>,
    pub k: usize,
    pub k_effective: usize,
    pub margin_m: f64,
}

/// Characterizes a tessellated design.
pub fn system_report<T: Real>(
    tess: &Tessellation<T>,
    config: &DesignConfig<T>,
    excluded: &[usize],
    margin: T,
) -> Result<SystemReport> {
    let g = tess.grid();
    let c = Point::new(g.width() / T::lit(2.0), g.height() / T::lit(2.0));
    let h_n = tess
        .sites()
        .iter()
        .enumerate()
        .filter(|(i, _)| !excluded.contains(i))
        .map(|(_, s)| s.point().dist(&c))
        .fold(T::zero(), T::max);
    let d = rss_diameter(tess);
    Ok(SystemReport {
        half_fov_deg: half_fov(config.cutoff_angle_deg, h_n, config.object_distance).as_f64(),
        h_n_m: h_n.as_f64(),
        rss_diameter_m: d.as_f64(),
        rss_diameter_centroid_m: rss_diameter_centroids(tess)?.as_f64(),
        rayleigh_limit_m: rayleigh_limit(config.lambda0, config.z, d).as_f64(),
        excluded_cells: excluded.to_vec(),
        k: tess.len(),
        k_effective: tess.len() - excluded.len(),
        margin_m: margin.as_f64(),
    })
}
