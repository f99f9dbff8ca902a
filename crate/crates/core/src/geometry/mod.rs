//! Bounded Voronoi tessellation on a pixel grid.
//!
//! Cells are kept in two forms: an exact convex polygon obtained by clipping
//! the design rectangle against every perpendicular bisector, and a raster
//! label map that assigns each pixel center to its nearest site. The label
//! map is what the optics consume; polygons feed vertex statistics and
//! cross-checks.

mod polygon;

pub use polygon::{area_centroid, clip_half_plane, signed_area, simplify, Point};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Raster;
use crate::scalar::Real;

/// Uniform pixel grid anchored at the origin. Pixel `(ix, iy)` has its
/// center at `((ix + 0.5) * pitch, (iy + 0.5) * pitch)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RasterGrid<T> {
    pub nx: usize,
    pub ny: usize,
    pub pitch: T,
}

impl<T: Real> RasterGrid<T> {
    pub fn new(nx: usize, ny: usize, pitch: T) -> Self {
        Self { nx, ny, pitch }
    }

    pub fn width(&self) -> T {
        T::from_usize_lossy(self.nx) * self.pitch
    }

    pub fn height(&self) -> T {
        T::from_usize_lossy(self.ny) * self.pitch
    }

    pub fn area(&self) -> T {
        self.width() * self.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    #[inline]
    pub fn center_x(&self, ix: usize) -> T {
        (T::from_usize_lossy(ix) + T::lit(0.5)) * self.pitch
    }

    #[inline]
    pub fn center_y(&self, iy: usize) -> T {
        (T::from_usize_lossy(iy) + T::lit(0.5)) * self.pitch
    }

    pub fn contains(&self, p: &Point<T>) -> bool {
        p.x >= T::zero() && p.y >= T::zero() && p.x <= self.width() && p.y <= self.height()
    }

    pub fn clamp(&self, p: Point<T>) -> Point<T> {
        Point::new(
            p.x.max(T::zero()).min(self.width()),
            p.y.max(T::zero()).min(self.height()),
        )
    }

    pub fn corners(&self) -> Vec<Point<T>> {
        let (w, h) = (self.width(), self.height());
        vec![
            Point::new(T::zero(), T::zero()),
            Point::new(w, T::zero()),
            Point::new(w, h),
            Point::new(T::zero(), h),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Site<T> {
    pub x: T,
    pub y: T,
    pub index: usize,
}

impl<T: Real> Site<T> {
    pub fn point(&self) -> Point<T> {
        Point::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoronoiCell<T> {
    pub site: Site<T>,
    /// Counter-clockwise polygon vertices in meters.
    pub vertices: Vec<Point<T>>,
    pub area: T,
}

/// Raster footprint of one cell: horizontal pixel runs `(iy, x_start, x_end)`
/// with `x_end` exclusive, plus the bounding box and pixel sums.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Footprint {
    pub runs: Vec<(usize, usize, usize)>,
    pub count: usize,
    sum_ix: u64,
    sum_iy: u64,
}

impl Footprint {
    /// Inclusive-exclusive bounding box `(x0, x1, y0, y1)`.
    pub fn bbox(&self) -> Option<(usize, usize, usize, usize)> {
        if self.runs.is_empty() {
            return None;
        }
        let x0 = self.runs.iter().map(|r| r.1).min().unwrap();
        let x1 = self.runs.iter().map(|r| r.2).max().unwrap();
        let y0 = self.runs.first().unwrap().0;
        let y1 = self.runs.last().unwrap().0 + 1;
        Some((x0, x1, y0, y1))
    }
}

#[derive(Debug, Clone)]
pub struct Tessellation<T> {
    sites: Vec<Site<T>>,
    cells: Vec<VoronoiCell<T>>,
    labels: Raster<u32>,
    footprints: Vec<Footprint>,
    grid: RasterGrid<T>,
}

/// Builds the bounded Voronoi tessellation of `points` over `grid`.
///
/// Sites keep the order of `points`; equidistant pixels go to the smaller
/// site index.
pub fn tessellate<T: Real>(points: &[Point<T>], grid: RasterGrid<T>) -> Result<Tessellation<T>> {
    if points.is_empty() {
        return Err(Error::NoSites);
    }
    if grid.nx == 0 || grid.ny == 0 || !(grid.pitch > T::zero()) {
        return Err(Error::invalid(
            "grid",
            "grid must be non-empty with positive pitch",
        ));
    }
    for (index, p) in points.iter().enumerate() {
        if !(p.x.is_finite() && p.y.is_finite()) || !grid.contains(p) {
            return Err(Error::SiteOutOfBounds {
                index,
                x: p.x.as_f64(),
                y: p.y.as_f64(),
            });
        }
    }
    let min_sep2 = grid.pitch * grid.pitch;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            if points[i].dist2(&points[j]) < min_sep2 {
                return Err(Error::DuplicateSites {
                    first: i,
                    second: j,
                });
            }
        }
    }

    let sites: Vec<Site<T>> = points
        .iter()
        .enumerate()
        .map(|(index, p)| Site {
            x: p.x,
            y: p.y,
            index,
        })
        .collect();
    let cells: Vec<VoronoiCell<T>> = (0..sites.len())
        .map(|i| build_cell(&sites, i, &grid))
        .collect();
    let labels = label_pixels(&sites, &cells, &grid);
    let footprints = footprints(&labels, sites.len());

    Ok(Tessellation {
        sites,
        cells,
        labels,
        footprints,
        grid,
    })
}

fn build_cell<T: Real>(sites: &[Site<T>], i: usize, grid: &RasterGrid<T>) -> VoronoiCell<T> {
    let si = sites[i].point();
    let tol = grid.pitch * T::lit(1e-9);
    let mut order: Vec<(T, usize)> = sites
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(j, s)| (si.dist2(&s.point()), j))
        .collect();
    order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));

    let mut poly = grid.corners();
    for (d2, j) in order {
        // A site farther than twice the cell's radius cannot cut the cell.
        let r2 = poly
            .iter()
            .map(|v| v.dist2(&si))
            .fold(T::zero(), |a, b| a.max(b));
        if d2 > T::lit(4.0) * r2 * (T::one() + T::lit(1e-9)) {
            break;
        }
        let sj = sites[j].point();
        let a = sj.x - si.x;
        let b = sj.y - si.y;
        let mx = (si.x + sj.x) * T::lit(0.5);
        let my = (si.y + sj.y) * T::lit(0.5);
        let norm = (a * a + b * b).sqrt();
        let (a, b) = (a / norm, b / norm);
        poly = clip_half_plane(&poly, a, b, a * mx + b * my, tol);
    }
    let vertices = simplify(poly, tol);
    let area = signed_area(&vertices);
    VoronoiCell {
        site: sites[i],
        vertices,
        area,
    }
}

fn label_pixels<T: Real>(
    sites: &[Site<T>],
    cells: &[VoronoiCell<T>],
    grid: &RasterGrid<T>,
) -> Raster<u32> {
    let (nx, ny) = grid.dims();
    let mut best = Raster::filled(nx, ny, T::infinity());
    let mut labels = Raster::filled(nx, ny, u32::MAX);

    // Candidate pixels per cell: its polygon bounding box padded by one pixel.
    for (i, cell) in cells.iter().enumerate() {
        let s = sites[i].point();
        let (mut x0, mut x1, mut y0, mut y1) = (
            T::infinity(),
            T::neg_infinity(),
            T::infinity(),
            T::neg_infinity(),
        );
        for v in cell.vertices.iter().chain(std::iter::once(&s)) {
            x0 = x0.min(v.x);
            x1 = x1.max(v.x);
            y0 = y0.min(v.y);
            y1 = y1.max(v.y);
        }
        let to_ix = |v: T, n: usize| -> (usize, usize) {
            let lo = (v / grid.pitch - T::lit(1.5)).floor().max(T::zero());
            (lo.to_usize().unwrap_or(0).min(n), n)
        };
        let (ix0, _) = to_ix(x0, nx);
        let (iy0, _) = to_ix(y0, ny);
        let ix1 = ((x1 / grid.pitch + T::lit(1.5))
            .ceil()
            .to_usize()
            .unwrap_or(nx))
        .min(nx);
        let iy1 = ((y1 / grid.pitch + T::lit(1.5))
            .ceil()
            .to_usize()
            .unwrap_or(ny))
        .min(ny);
        for iy in iy0..iy1 {
            let cy = grid.center_y(iy);
            let dy = cy - s.y;
            for ix in ix0..ix1 {
                let dx = grid.center_x(ix) - s.x;
                let d = dx * dx + dy * dy;
                if d < best[(ix, iy)] {
                    best[(ix, iy)] = d;
                    labels[(ix, iy)] = i as u32;
                }
            }
        }
    }

    // Pixels missed by every padded box would indicate a degenerate polygon;
    // resolve them exhaustively.
    for iy in 0..ny {
        for ix in 0..nx {
            if labels[(ix, iy)] == u32::MAX {
                labels[(ix, iy)] = nearest_site(sites, grid.center_x(ix), grid.center_y(iy)) as u32;
            }
        }
    }
    labels
}

/// Exhaustive nearest-site query with ties to the smallest index.
pub fn nearest_site<T: Real>(sites: &[Site<T>], x: T, y: T) -> usize {
    let mut best = T::infinity();
    let mut arg = 0;
    for (i, s) in sites.iter().enumerate() {
        let dx = x - s.x;
        let dy = y - s.y;
        let d = dx * dx + dy * dy;
        if d < best {
            best = d;
            arg = i;
        }
    }
    arg
}

fn footprints(labels: &Raster<u32>, k: usize) -> Vec<Footprint> {
    let mut out = vec![Footprint::default(); k];
    let (nx, ny) = labels.dims();
    for iy in 0..ny {
        let row = labels.row(iy);
        let mut x = 0;
        while x < nx {
            let l = row[x] as usize;
            let start = x;
            while x < nx && row[x] as usize == l {
                x += 1;
            }
            let fp = &mut out[l];
            fp.runs.push((iy, start, x));
            let n = (x - start) as u64;
            fp.count += x - start;
            fp.sum_ix += n * (start as u64 + x as u64 - 1) / 2;
            fp.sum_iy += n * iy as u64;
        }
    }
    out
}

impl<T: Real> Tessellation<T> {
    pub fn sites(&self) -> &[Site<T>] {
        &self.sites
    }

    pub fn points(&self) -> Vec<Point<T>> {
        self.sites.iter().map(Site::point).collect()
    }

    pub fn cells(&self) -> &[VoronoiCell<T>] {
        &self.cells
    }

    pub fn labels(&self) -> &Raster<u32> {
        &self.labels
    }

    pub fn footprint(&self, label: usize) -> &Footprint {
        &self.footprints[label]
    }

    pub fn grid(&self) -> &RasterGrid<T> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Discrete mass centroid: the mean of the pixel centers labeled `label`.
    pub fn centroid(&self, label: usize) -> Result<Point<T>> {
        let fp = self
            .footprints
            .get(label)
            .ok_or_else(|| Error::invalid("label", format!("{label} out of range")))?;
        if fp.count == 0 {
            return Err(Error::EmptyCell { label });
        }
        let n = fp.count as f64;
        // Integer sums keep the mean independent of summation order.
        let mx = fp.sum_ix as f64 / n + 0.5;
        let my = fp.sum_iy as f64 / n + 0.5;
        Ok(Point::new(
            T::lit(mx) * self.grid.pitch,
            T::lit(my) * self.grid.pitch,
        ))
    }

    pub fn centroids(&self) -> Result<Vec<Point<T>>> {
        (0..self.len()).map(|i| self.centroid(i)).collect()
    }

    pub fn total_polygon_area(&self) -> T {
        self.cells.iter().map(|c| c.area).sum()
    }
}

/// One Lloyd relaxation step: every site moves to its cell's mass centroid
/// (clamped into the rectangle). Returns the new sites and the RMS movement.
pub fn lloyd_step<T: Real>(tess: &Tessellation<T>) -> Result<(Vec<Point<T>>, T)> {
    let old = tess.points();
    let new: Vec<Point<T>> = tess
        .centroids()?
        .into_iter()
        .map(|c| tess.grid.clamp(c))
        .collect();
    let rms = rms_movement(&old, &new);
    Ok((new, rms))
}

pub fn rms_movement<T: Real>(old: &[Point<T>], new: &[Point<T>]) -> T {
    if old.is_empty() {
        return T::zero();
    }
    let s: T = old.iter().zip(new).map(|(a, b)| a.dist2(b)).sum();
    (s / T::from_usize_lossy(old.len())).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grid(n: usize) -> RasterGrid<f64> {
        RasterGrid::new(n, n, 1.0 / n as f64)
    }

    #[test]
    fn single_site_covers_rectangle() {
        let g = RasterGrid::new(40, 20, 0.5f64);
        let t = tessellate(&[Point::new(3.0, 7.0)], g).unwrap();
        let cell = &t.cells()[0];
        assert_eq!(cell.vertices.len(), 4);
        assert!((cell.area - 200.0).abs() < 1e-9);
        assert!(t.labels().as_slice().iter().all(|&l| l == 0));
    }

    #[test]
    fn two_sites_split_at_bisector() {
        let g = RasterGrid::new(64, 32, 1.0f64);
        let t = tessellate(&[Point::new(16.0, 16.0), Point::new(48.0, 16.0)], g).unwrap();
        assert!((t.cells()[0].area - t.cells()[1].area).abs() < 1e-9);
        for v in &t.cells()[0].vertices {
            assert!(v.x <= 32.0 + 1e-9);
        }
        let c0 = t.centroid(0).unwrap();
        let c1 = t.centroid(1).unwrap();
        assert!((c0.x - 16.0).abs() <= 0.5 && (c0.y - 16.0).abs() <= 0.5);
        assert!((c1.x - 48.0).abs() <= 0.5 && (c1.y - 16.0).abs() <= 0.5);
    }

    #[test]
    fn single_site_centroid_is_center() {
        let t = tessellate(&[Point::new(0.1, 0.9)], unit_grid(50)).unwrap();
        let c = t.centroid(0).unwrap();
        assert!((c.x - 0.5).abs() < 1e-12 && (c.y - 0.5).abs() < 1e-12);
    }

    #[test]
    fn corner_site_moves_to_center() {
        let t = tessellate(&[Point::new(0.0, 0.0)], unit_grid(64)).unwrap();
        let (new, rms) = lloyd_step(&t).unwrap();
        assert!((new[0].x - 0.5).abs() < 1e-12 && (new[0].y - 0.5).abs() < 1e-12);
        assert!((rms - 0.5f64.hypot(0.5)).abs() < 1e-12);
    }

    #[test]
    fn regular_grid_is_lloyd_fixed_point() {
        let g = RasterGrid::new(64, 64, 1.0);
        let pts: Vec<_> = (0..4)
            .flat_map(|j| {
                (0..4).map(move |i| Point::new(8.0 + 16.0 * i as f64, 8.0 + 16.0 * j as f64))
            })
            .collect();
        let t = tessellate(&pts, g).unwrap();
        let (_, rms) = lloyd_step(&t).unwrap();
        assert!(rms < 1e-12, "rms {rms}");
    }

    #[test]
    fn duplicate_sites_rejected() {
        let g = RasterGrid::new(10, 10, 1.0);
        let err = tessellate(&[Point::new(2.0, 2.0), Point::new(2.5, 2.0)], g).unwrap_err();
        assert!(matches!(
            err,
            Error::DuplicateSites {
                first: 0,
                second: 1
            }
        ));
    }

    #[test]
    fn out_of_bounds_rejected() {
        let g = RasterGrid::new(10, 10, 1.0);
        let err = tessellate(&[Point::new(2.0, 10.5)], g).unwrap_err();
        assert!(matches!(err, Error::SiteOutOfBounds { index: 0, .. }));
        // the border itself is inside
        assert!(tessellate(&[Point::new(10.0, 10.0)], g).is_ok());
    }

    #[test]
    fn tie_goes_to_smaller_index() {
        // pixel centers at x = 2.5 are equidistant from both sites
        let g = RasterGrid::new(5, 1, 1.0);
        let t = tessellate(&[Point::new(4.5, 0.5), Point::new(0.5, 0.5)], g).unwrap();
        assert_eq!(t.labels()[(2, 0)], 0);
        let t = tessellate(&[Point::new(0.5, 0.5), Point::new(4.5, 0.5)], g).unwrap();
        assert_eq!(t.labels()[(2, 0)], 0);
    }

    #[test]
    fn works_in_single_precision() {
        let g = RasterGrid::new(32, 32, 1.0f32);
        let t = tessellate(&[Point::new(8.0f32, 8.0), Point::new(24.0, 20.0)], g).unwrap();
        assert!((t.total_polygon_area() - 1024.0).abs() < 1e-2);
    }
}
