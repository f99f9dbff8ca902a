use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use voronoi_fresnel::geometry::{
    lloyd_step, signed_area, tessellate, Point, RasterGrid, Tessellation,
};
use voronoi_fresnel::optimizer::random_layout;

fn pixel_center(g: &RasterGrid<f64>, ix: usize, iy: usize) -> (f64, f64) {
    ((ix as f64 + 0.5) * g.pitch, (iy as f64 + 0.5) * g.pitch)
}

/// Exhaustive nearest-site scan, ties to the smaller index.
fn brute_labels(points: &[Point<f64>], g: &RasterGrid<f64>) -> Vec<u32> {
    let mut out = Vec::with_capacity(g.nx * g.ny);
    for iy in 0..g.ny {
        for ix in 0..g.nx {
            let (x, y) = pixel_center(g, ix, iy);
            let mut best = (f64::INFINITY, 0u32);
            for (i, p) in points.iter().enumerate() {
                let d = (x - p.x).powi(2) + (y - p.y).powi(2);
                if d < best.0 {
                    best = (d, i as u32);
                }
            }
            out.push(best.1);
        }
    }
    out
}

fn random_sites(k: usize, g: &RasterGrid<f64>, seed: u64) -> Vec<Point<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_layout(k, g, g.pitch, &mut rng).unwrap()
}

#[test]
fn sixty_four_sites_match_exhaustive_scan() {
    let g = RasterGrid::new(256, 256, 3.45e-6);
    let pts = random_sites(64, &g, 11);
    let t = tessellate(&pts, g).unwrap();
    assert_eq!(t.labels().as_slice(), brute_labels(&pts, &g).as_slice());
    let mut hist = vec![0usize; 64];
    for &l in t.labels().as_slice() {
        hist[l as usize] += 1;
    }
    assert_eq!(hist.iter().sum::<usize>(), 65536);
    assert!(hist.iter().all(|&n| n >= 1));
    for (i, &n) in hist.iter().enumerate() {
        assert_eq!(t.footprint(i).count, n);
    }
}

#[test]
fn centroids_equal_pixel_means() {
    let g = RasterGrid::new(240, 160, 3.45e-6);
    let pts = random_sites(23, &g, 5);
    let t = tessellate(&pts, g).unwrap();
    let mut sums = vec![(0.0f64, 0.0f64, 0usize); 23];
    for iy in 0..g.ny {
        for ix in 0..g.nx {
            let l = t.labels()[(ix, iy)] as usize;
            sums[l].0 += ix as f64 + 0.5;
            sums[l].1 += iy as f64 + 0.5;
            sums[l].2 += 1;
        }
    }
    for (i, &(sx, sy, n)) in sums.iter().enumerate() {
        let c = t.centroid(i).unwrap();
        let ox = sx / n as f64 * g.pitch;
        let oy = sy / n as f64 * g.pitch;
        // both sides are exact means of half-integer coordinates
        assert!((c.x - ox).abs() <= 1e-15 * ox, "cell {i}: {} vs {ox}", c.x);
        assert!((c.y - oy).abs() <= 1e-15 * oy, "cell {i}: {} vs {oy}", c.y);
    }
}

#[test]
fn lloyd_iterations_settle() {
    let g = RasterGrid::new(256, 256, 1e-6);
    let mut pts = random_sites(64, &g, 3);
    let diag = (g.width().powi(2) + g.height().powi(2)).sqrt();
    let mut last = f64::INFINITY;
    for _ in 0..100 {
        let t = tessellate(&pts, g).unwrap();
        let (next, rms) = lloyd_step(&t).unwrap();
        pts = next;
        last = rms;
    }
    assert!(last < 1e-3 * diag, "rms movement {last} after 100 steps");
}

#[test]
fn corner_site_moves_to_center() {
    let g = RasterGrid::new(100, 100, 0.01f64);
    let t = tessellate(&[Point::new(0.0, 0.0)], g).unwrap();
    let (next, rms) = lloyd_step(&t).unwrap();
    assert!((next[0].x - 0.5).abs() < 1e-12 && (next[0].y - 0.5).abs() < 1e-12);
    assert!((rms - 0.5f64.hypot(0.5)).abs() < 1e-12);
}

#[test]
fn square_grid_is_lloyd_fixed_point() {
    let g = RasterGrid::new(128, 128, 1.0);
    let pts: Vec<Point<f64>> = (0..8)
        .flat_map(|r| (0..8).map(move |c| Point::new(8.0 + 16.0 * c as f64, 8.0 + 16.0 * r as f64)))
        .collect();
    let t = tessellate(&pts, g).unwrap();
    let (_, rms) = lloyd_step(&t).unwrap();
    assert!(rms < 0.5 * g.pitch);
    assert_eq!(rms, 0.0);
}

fn check_polygons(t: &Tessellation<f64>) {
    let g = t.grid();
    let area = t.total_polygon_area();
    assert!(
        (area - g.area()).abs() <= 1e-9 * g.area(),
        "{area} vs {}",
        g.area()
    );
    for cell in t.cells() {
        assert!(cell.area > 0.0);
        assert!(signed_area(&cell.vertices) > 0.0, "counter-clockwise");
        let n = cell.vertices.len();
        for i in 0..n {
            let (a, b, c) = (
                cell.vertices[i],
                cell.vertices[(i + 1) % n],
                cell.vertices[(i + 2) % n],
            );
            let cross = (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x);
            assert!(cross >= -1e-12 * g.area(), "convex turn");
        }
    }
}

/// Distance from `p` to the boundary of a convex polygon when inside,
/// negative when outside.
fn inside_depth(poly: &[Point<f64>], p: (f64, f64)) -> f64 {
    let n = poly.len();
    let mut depth = f64::INFINITY;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let (ex, ey) = (b.x - a.x, b.y - a.y);
        let len = ex.hypot(ey);
        let d = (ex * (p.1 - a.y) - ey * (p.0 - a.x)) / len;
        depth = depth.min(d);
    }
    depth
}

fn check_labels_against_polygons(t: &Tessellation<f64>) {
    let g = t.grid();
    for iy in 0..g.ny {
        for ix in 0..g.nx {
            let p = pixel_center(g, ix, iy);
            for (i, cell) in t.cells().iter().enumerate() {
                if inside_depth(&cell.vertices, p) > g.pitch {
                    assert_eq!(t.labels()[(ix, iy)] as usize, i, "pixel ({ix}, {iy})");
                }
            }
        }
    }
}

fn arb_layout() -> impl Strategy<Value = (usize, usize, Vec<(f64, f64)>)> {
    (8usize..48, 8usize..48, 1usize..24, any::<u64>()).prop_map(|(nx, ny, k, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = (0..k)
            .map(|_| {
                (
                    rng.random::<f64>() * nx as f64,
                    rng.random::<f64>() * ny as f64,
                )
            })
            .collect();
        (nx, ny, pts)
    })
}

/// Drops points closer than one pixel to an earlier point.
fn separated(pts: &[(f64, f64)]) -> Vec<Point<f64>> {
    let mut out: Vec<Point<f64>> = Vec::new();
    for &(x, y) in pts {
        let p = Point::new(x, y);
        if out.iter().all(|q| q.dist2(&p) >= 1.0) {
            out.push(p);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn labels_are_nearest_site((nx, ny, raw) in arb_layout()) {
        let g = RasterGrid::new(nx, ny, 1.0);
        let pts = separated(&raw);
        let t = tessellate(&pts, g).unwrap();
        let expected = brute_labels(&pts, &g);
        prop_assert_eq!(t.labels().as_slice(), expected.as_slice());
        let total: usize = (0..t.len()).map(|i| t.footprint(i).count).sum();
        prop_assert_eq!(total, nx * ny);
    }

    #[test]
    fn polygons_partition_the_rectangle((nx, ny, raw) in arb_layout()) {
        let g = RasterGrid::new(nx, ny, 2.5e-6);
        let pts: Vec<Point<f64>> = separated(&raw)
            .into_iter()
            .map(|p| Point::new(p.x * g.pitch, p.y * g.pitch))
            .collect();
        let t = tessellate(&pts, g).unwrap();
        check_polygons(&t);
        check_labels_against_polygons(&t);
    }

    #[test]
    fn integer_lattice_ties_go_to_smaller_index(n in 2usize..6) {
        // sites on pixel corners make many pixels equidistant
        let g = RasterGrid::new(4 * n, 4 * n, 1.0);
        let pts: Vec<Point<f64>> = (0..n)
            .flat_map(|r| (0..n).map(move |c| Point::new(4.0 * c as f64 + 2.0, 4.0 * r as f64 + 2.0)))
            .rev()
            .collect();
        let t = tessellate(&pts, g).unwrap();
        let expected = brute_labels(&pts, &g);
        prop_assert_eq!(t.labels().as_slice(), expected.as_slice());
    }
}

#[test]
fn dense_exhaustive_partition_512() {
    let g = RasterGrid::new(512, 512, 1.0);
    let pts = random_sites(200, &g, 99);
    let t = tessellate(&pts, g).unwrap();
    assert_eq!(t.labels().as_slice(), brute_labels(&pts, &g).as_slice());
    check_polygons(&t);
}
