use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{tessellate, Point, RasterGrid};
use crate::scalar::Real;

/// Uniform random sites with rejection of any site closer than
/// `min_sep` to an earlier one.
pub fn random_layout<T: Real, R: Rng>(
    k: usize,
    grid: &RasterGrid<T>,
    min_sep: T,
    rng: &mut R,
) -> Result<Vec<Point<T>>> {
    const ATTEMPTS_PER_SITE: usize = 10_000;
    if k == 0 {
        return Err(Error::InfeasibleK { k, attempts: 0 });
    }
    let (w, h) = (grid.width().as_f64(), grid.height().as_f64());
    let sep2 = min_sep * min_sep;
    let mut pts: Vec<Point<T>> = Vec::with_capacity(k);
    let mut attempts = 0;
    while pts.len() < k {
        if attempts >= ATTEMPTS_PER_SITE * k {
            return Err(Error::InfeasibleK { k, attempts });
        }
        attempts += 1;
        let p = Point::new(
            T::lit(rng.random::<f64>() * w),
            T::lit(rng.random::<f64>() * h),
        );
        if pts.iter().all(|q| q.dist2(&p) >= sep2) {
            pts.push(p);
        }
    }
    Ok(pts)
}

/// Random layout whose tessellation gives every site at least one pixel.
pub fn random_valid_layout<T: Real, R: Rng>(
    k: usize,
    grid: &RasterGrid<T>,
    rng: &mut R,
) -> Result<Vec<Point<T>>> {
    const TRIES: usize = 20;
    if k > grid.nx * grid.ny {
        return Err(Error::InfeasibleK { k, attempts: 0 });
    }
    for _ in 0..TRIES {
        let pts = random_layout(k, grid, grid.pitch, rng)?;
        let t = tessellate(&pts, *grid)?;
        if (0..k).all(|i| t.footprint(i).count > 0) {
            return Ok(pts);
        }
    }
    Err(Error::InfeasibleK { k, attempts: TRIES })
}

/// `rows x cols` sites at the centers of equal rectangles.
pub fn rect_layout<T: Real>(rows: usize, cols: usize, grid: &RasterGrid<T>) -> Vec<Point<T>> {
    let (w, h) = (grid.width(), grid.height());
    let mut pts = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            pts.push(Point::new(
                w * (T::from_usize_lossy(c) + T::lit(0.5)) / T::from_usize_lossy(cols),
                h * (T::from_usize_lossy(r) + T::lit(0.5)) / T::from_usize_lossy(rows),
            ));
        }
    }
    pts
}

/// Factorization `rows x cols = k` whose cell aspect is closest to square.
pub fn rect_shape(k: usize, width: f64, height: f64) -> (usize, usize) {
    let mut best = (1, k);
    let mut best_err = f64::INFINITY;
    for rows in 1..=k {
        if !k.is_multiple_of(rows) {
            continue;
        }
        let cols = k / rows;
        let aspect = (width / cols as f64) / (height / rows as f64);
        let err = aspect.ln().abs();
        if err < best_err - 1e-12 {
            best_err = err;
            best = (rows, cols);
        }
    }
    best
}

/// Rectangular layout with `k` sites.
pub fn rect_layout_k<T: Real>(k: usize, grid: &RasterGrid<T>) -> Vec<Point<T>> {
    let (rows, cols) = rect_shape(k, grid.width().as_f64(), grid.height().as_f64());
    rect_layout(rows, cols, grid)
}

/// Hexagonal lattice centered in the rectangle. The spacing starts at the
/// value giving one lattice cell per `area / k` and shrinks until at least
/// `k` lattice points fall inside; the `k` points nearest the center are
/// kept.
pub fn hex_layout<T: Real>(k: usize, grid: &RasterGrid<T>) -> Vec<Point<T>> {
    if k == 0 {
        return Vec::new();
    }
    let (w, h) = (grid.width().as_f64(), grid.height().as_f64());
    let (cx, cy) = (w / 2.0, h / 2.0);
    let mut a = (2.0 * w * h / (3f64.sqrt() * k as f64)).sqrt();
    loop {
        let dy = a * 3f64.sqrt() / 2.0;
        let nr = (h / dy).ceil() as i64 + 1;
        let nc = (w / a).ceil() as i64 + 1;
        let mut pts: Vec<(f64, f64)> = Vec::new();
        for r in -nr..=nr {
            let shift = if r.rem_euclid(2) == 1 { a / 2.0 } else { 0.0 };
            for c in -nc..=nc {
                let x = cx + c as f64 * a + shift;
                let y = cy + r as f64 * dy;
                if (0.0..=w).contains(&x) && (0.0..=h).contains(&y) {
                    pts.push((x, y));
                }
            }
        }
        if pts.len() >= k {
            pts.sort_by(|p, q| {
                let dp = (p.0 - cx).powi(2) + (p.1 - cy).powi(2);
                let dq = (q.0 - cx).powi(2) + (q.1 - cy).powi(2);
                dp.total_cmp(&dq)
                    .then(p.1.total_cmp(&q.1))
                    .then(p.0.total_cmp(&q.0))
            });
            pts.truncate(k);
            return pts
                .into_iter()
                .map(|(x, y)| Point::new(T::lit(x), T::lit(y)))
                .collect();
        }
        a *= 0.98;
    }
}
