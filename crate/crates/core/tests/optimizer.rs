use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use voronoi_fresnel::optimizer::{
    derive_seed, eval_polynomial, evaluate_layout, extrapolate_k, fit_polynomial, fit_sweep,
    hex_layout, optimize_fixed_k, random_layout, rect_layout_k, sweep_k, SweepOptions, Termination,
};
use voronoi_fresnel::{DesignConfig, Error, OptimizeParams, RasterGrid, Spectrum};

fn small() -> DesignConfig {
    DesignConfig::new((64, 48), 3.45e-6, 1e-3, 550e-9)
        .unwrap()
        .with_spectrum(
            Spectrum::from_samples(vec![(500e-9, 1.0), (550e-9, 2.0), (600e-9, 1.0)]).unwrap(),
        )
        .unwrap()
}

#[test]
fn runs_are_deterministic() {
    let cfg = small();
    let p = OptimizeParams {
        maxiter: 15,
        ..OptimizeParams::new(9, 42)
    };
    let a = optimize_fixed_k(&p, &cfg).unwrap();
    let b = optimize_fixed_k(&p, &cfg).unwrap();
    assert_eq!(a, b);
    let c = optimize_fixed_k(&OptimizeParams { seed: 43, ..p }, &cfg).unwrap();
    assert_ne!(a.best_sites, c.best_sites);
}

#[test]
fn best_record_is_the_running_maximum() {
    let cfg = small();
    let p = OptimizeParams {
        maxiter: 25,
        ..OptimizeParams::new(7, 3)
    };
    let r = optimize_fixed_k(&p, &cfg).unwrap();
    let mut running = f64::NEG_INFINITY;
    for (i, h) in r.history.iter().enumerate() {
        assert_eq!(h.iteration, i);
        running = running.max(h.mtfv);
        assert_eq!(h.best_mtfv, running);
    }
    assert_eq!(r.best_mtfv, running);
    // the stored layout reproduces its score
    assert_eq!(evaluate_layout(&r.best_sites, &cfg).unwrap(), r.best_mtfv);
    let tol = p.resolved_tol(&cfg);
    match r.terminated_by {
        Termination::Tolerance => assert!(r.history.last().unwrap().rms_movement < tol),
        Termination::MaxIter => assert_eq!(r.iterations(), p.maxiter),
        Termination::Degenerate => assert!(r.iterations() < p.maxiter),
    }
}

#[test]
fn one_cell_settles_at_the_rectangle_center() {
    let cfg = small();
    let p = OptimizeParams::new(1, 17);
    let r = optimize_fixed_k(&p, &cfg).unwrap();
    assert_eq!(r.terminated_by, Termination::Tolerance);
    // the first step jumps to the center, the second confirms it
    assert!(r.iterations() <= 2);
    assert!(r.history.last().unwrap().rms_movement < p.resolved_tol(&cfg));
    // whatever layout scored best, its Lloyd target is the center
    let g = cfg.optical_grid();
    let t = voronoi_fresnel::geometry::tessellate(&r.best_sites, g).unwrap();
    let c = t.centroid(0).unwrap();
    assert!((c.x - g.width() / 2.0).abs() < 1e-15 && (c.y - g.height() / 2.0).abs() < 1e-15);
}

#[test]
fn impossible_counts_are_rejected() {
    let cfg = small();
    let err = optimize_fixed_k(&OptimizeParams::new(0, 1), &cfg).unwrap_err();
    assert!(matches!(err, Error::InfeasibleK { k: 0, .. }));
    // more sites than optical pixels cannot keep a pitch apart
    let err = optimize_fixed_k(&OptimizeParams::new(64 * 48 + 1, 1), &cfg).unwrap_err();
    assert!(matches!(err, Error::InfeasibleK { .. }));
}

#[test]
fn sweep_collects_every_restart() {
    let cfg = small();
    let template = OptimizeParams {
        maxiter: 5,
        ..OptimizeParams::new(0, 11)
    };
    let ks = [2, 4, 6, 8];
    let opts = SweepOptions::default();
    let s = sweep_k(&ks, &cfg, &template, &opts).unwrap();
    assert_eq!(s.runs.len(), ks.len() * opts.restarts);
    for (i, run) in s.runs.iter().enumerate() {
        assert_eq!(run.k, ks[i / opts.restarts]);
        assert_eq!(run.restart, i % opts.restarts);
        assert_eq!(run.seed, derive_seed(11, run.k, run.restart));
    }
    for (k, best) in &s.table {
        let want = s
            .runs
            .iter()
            .filter(|r| r.k == *k)
            .map(|r| r.result.best_mtfv)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(*best, want);
    }
    assert!(ks.contains(&s.best_k));
    assert_eq!(s.best_run().k, s.best_k);
    assert_eq!(s, sweep_k(&ks, &cfg, &template, &opts).unwrap());
}

#[test]
fn sweep_rejects_short_or_repeated_lists() {
    let cfg = small();
    let t = OptimizeParams::new(0, 1);
    let o = SweepOptions::default();
    assert!(sweep_k(&[5], &cfg, &t, &o).is_err());
    assert!(sweep_k(&[2, 3, 3, 4], &cfg, &t, &o).is_err());
}

#[test]
fn fit_examples() {
    let table: Vec<(usize, f64)> = [5, 10, 15, 20, 23, 25, 30, 40]
        .iter()
        .map(|&k| (k, 1.0 - 1e-3 * (k as f64 - 23.0).powi(2)))
        .collect();
    let (best, c, peaked) = fit_sweep(&table, 2).unwrap();
    assert_eq!(best, 23);
    assert!(peaked);
    assert!((-c[1] / (2.0 * c[2]) - 23.0).abs() < 1e-9);

    let flat: Vec<(usize, f64)> = [12, 7, 30, 9].iter().map(|&k| (k, 0.25)).collect();
    assert_eq!(fit_sweep(&flat, 2).unwrap().0, 7);

    // rising data peaks at the edge and is not single peaked
    let rising: Vec<(usize, f64)> = [4, 8, 12, 16].iter().map(|&k| (k, k as f64)).collect();
    let (best, _, peaked) = fit_sweep(&rising, 2).unwrap();
    assert_eq!(best, 16);
    assert!(!peaked);
}

#[test]
fn extrapolation_examples() {
    let line = extrapolate_k(&[(1.0, 10.0), (2.0, 20.0), (4.0, 40.0)]).unwrap();
    assert!((line.slope - 10.0).abs() < 1e-12);
    assert!(line.intercept.abs() < 1e-12);
    assert!((line.r_squared - 1.0).abs() < 1e-12);
    let noisy = extrapolate_k(&[(1.0, 10.0), (2.0, 24.0), (3.0, 29.0), (4.0, 41.0)]).unwrap();
    assert!(noisy.r_squared > 0.9 && noisy.r_squared < 1.0);
    assert!(extrapolate_k(&[(1.0, 1.0), (2.0, 2.0)]).is_err());
}

#[test]
fn reference_layouts_fill_the_rectangle() {
    let g = RasterGrid::new(256, 256, 3.45e-6);
    for k in [1, 7, 23, 64] {
        for pts in [hex_layout(k, &g), rect_layout_k(k, &g)] {
            assert_eq!(pts.len(), k);
            for p in &pts {
                assert!(p.x > 0.0 && p.x < g.width() && p.y > 0.0 && p.y < g.height());
            }
        }
    }
    // 64 on a square grid is the 8 x 8 lattice of cell centers
    let r = rect_layout_k(64, &g);
    let s = g.width() / 8.0;
    for p in &r {
        let fx = p.x / s - 0.5;
        let fy = p.y / s - 0.5;
        assert!((fx - fx.round()).abs() < 1e-9 && (fy - fy.round()).abs() < 1e-9);
    }
}

#[test]
fn hex_rows_are_offset_by_half_a_spacing() {
    let g = RasterGrid::new(256, 256, 1.0);
    let pts = hex_layout(64, &g);
    let mut ys: Vec<f64> = pts.iter().map(|p| p.y).collect();
    ys.sort_by(f64::total_cmp);
    ys.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    assert!(ys.len() >= 2);
    let dy = ys[1] - ys[0];
    let row = |y: f64| {
        let mut xs: Vec<f64> = pts
            .iter()
            .filter(|p| (p.y - y).abs() < 1e-9)
            .map(|p| p.x)
            .collect();
        xs.sort_by(f64::total_cmp);
        xs
    };
    let (r0, r1) = (row(ys[0]), row(ys[1]));
    let s = r0[1] - r0[0];
    assert!((dy - s * 3f64.sqrt() / 2.0).abs() < 1e-9 * s);
    let off = (r1[0] - r0[0]).rem_euclid(s);
    assert!((off - s / 2.0).abs() < 1e-9 * s);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fitted_best_k_maximizes_the_curve(
        ys in prop::collection::vec(0.0f64..1.0, 4..9),
        start in 1usize..10,
    ) {
        let table: Vec<(usize, f64)> = ys.iter().enumerate().map(|(i, &y)| (start + 3 * i, y)).collect();
        let (best, c, _) = fit_sweep(&table, 2).unwrap();
        let vb = eval_polynomial(&c, best as f64);
        for &(k, _) in &table {
            let v = eval_polynomial(&c, k as f64);
            prop_assert!(v <= vb + 1e-9 * vb.abs().max(1e-300));
        }
    }

    #[test]
    fn exact_quadratics_are_recovered(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0) {
        let xs: Vec<f64> = (0..6).map(|i| i as f64 * 1.5).collect();
        let ys: Vec<f64> = xs.iter().map(|x| a + b * x + c * x * x).collect();
        let f = fit_polynomial(&xs, &ys, 2).unwrap();
        prop_assert!((f[0] - a).abs() < 1e-9 && (f[1] - b).abs() < 1e-9 && (f[2] - c).abs() < 1e-9);
    }

    #[test]
    fn random_layouts_keep_their_distance(k in 1usize..60, seed in any::<u64>()) {
        let g = RasterGrid::new(80, 60, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = random_layout(k, &g, 2.0, &mut rng).unwrap();
        prop_assert_eq!(pts.len(), k);
        for (i, p) in pts.iter().enumerate() {
            prop_assert!(p.x >= 0.0 && p.x <= g.width() && p.y >= 0.0 && p.y <= g.height());
            for q in &pts[..i] {
                prop_assert!(p.dist(q) >= 2.0);
            }
        }
    }
}
