//! MTF-volume gated Lloyd iteration, K sweeps and scalability fits.

mod fit;
mod layouts;

pub use fit::{eval_polynomial, fit_line, fit_polynomial, LinearFit};
pub use layouts::{
    hex_layout, random_layout, random_valid_layout, rect_layout, rect_layout_k, rect_shape,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{lloyd_step, tessellate, Point, Tessellation};
use crate::optics::{mtfv_value, spectral_slices, DesignConfig};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeParams<T> {
    pub k: usize,
    pub maxiter: usize,
    /// RMS site movement below which iteration stops; defaults to a
    /// hundredth of the fabrication pitch.
    pub tol: Option<T>,
    pub seed: u64,
}

impl<T: Real> OptimizeParams<T> {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            maxiter: 100,
            tol: None,
            seed,
        }
    }

    pub fn resolved_tol(&self, config: &DesignConfig<T>) -> T {
        self.tol.unwrap_or(config.fab_pitch() / T::lit(100.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Tolerance,
    MaxIter,
    /// Lloyd produced a layout that no longer tessellates (a vanished cell
    /// or two merged sites); the best layout so far is kept.
    Degenerate,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Tolerance => "tolerance",
            Termination::MaxIter => "maxiter",
            Termination::Degenerate => "degenerate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry<T> {
    pub iteration: usize,
    pub mtfv: T,
    /// RMS movement of the Lloyd step that produced this layout; zero for
    /// the initial layout.
    pub rms_movement: T,
    pub best_mtfv: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult<T> {
    pub best_sites: Vec<Point<T>>,
    pub best_mtfv: T,
    pub history: Vec<HistoryEntry<T>>,
    pub terminated_by: Termination,
}

impl<T> OptimizeResult<T> {
    /// Lloyd iterations performed.
    pub fn iterations(&self) -> usize {
        self.history.len().saturating_sub(1)
    }
}

/// MTF volume of a tessellated layout over the configured spectrum.
pub fn evaluate_tessellation<T: Real>(
    tess: &Tessellation<T>,
    config: &DesignConfig<T>,
) -> Result<T> {
    let slices = spectral_slices(tess, config, &[])?;
    mtfv_value(&slices, &config.spectrum.weights(), config)
}

pub fn evaluate_layout<T: Real>(sites: &[Point<T>], config: &DesignConfig<T>) -> Result<T> {
    let tess = tessellate(sites, config.optical_grid())?;
    evaluate_tessellation(&tess, config)
}

/// Maximizes MTF volume for fixed `k`: random start, then Lloyd steps
/// toward a centroidal layout. The best layout is replaced only on strict
/// improvement, while Lloyd always continues from the latest centroids.
pub fn optimize_fixed_k<T: Real>(
    params: &OptimizeParams<T>,
    config: &DesignConfig<T>,
) -> Result<OptimizeResult<T>> {
    config.validate()?;
    if params.maxiter == 0 {
        return Err(Error::invalid("maxiter", "must be at least 1"));
    }
    let tol = params.resolved_tol(config);
    if !(tol > T::zero()) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    let grid = config.optical_grid();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let sites = random_valid_layout(params.k, &grid, &mut rng)?;

    let mut tess = tessellate(&sites, grid)?;
    let m0 = evaluate_tessellation(&tess, config)?;
    let mut best_sites = sites;
    let mut best = m0;
    let mut history = vec![HistoryEntry {
        iteration: 0,
        mtfv: m0,
        rms_movement: T::zero(),
        best_mtfv: m0,
    }];
    let mut terminated_by = Termination::MaxIter;
    for it in 1..=params.maxiter {
        let Ok((next, rms)) = lloyd_step(&tess) else {
            terminated_by = Termination::Degenerate;
            break;
        };
        tess = match tessellate(&next, grid) {
            Ok(t) => t,
            Err(Error::DuplicateSites { .. }) => {
                terminated_by = Termination::Degenerate;
                break;
            }
            Err(e) => return Err(e),
        };
        let m = evaluate_tessellation(&tess, config)?;
        if m > best {
            best = m;
            best_sites = next;
        }
        history.push(HistoryEntry {
            iteration: it,
            mtfv: m,
            rms_movement: rms,
            best_mtfv: best,
        });
        if rms < tol {
            terminated_by = Termination::Tolerance;
            break;
        }
    }
    Ok(OptimizeResult {
        best_sites,
        best_mtfv: best,
        history,
        terminated_by,
    })
}

/// Seed for restart `restart` of cell count `k`, derived from a base seed.
pub fn derive_seed(base: u64, k: usize, restart: usize) -> u64 {
    let mut x = base
        ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (restart as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    // splitmix64 finalizer
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun<T> {
    pub k: usize,
    pub restart: usize,
    pub seed: u64,
    pub result: OptimizeResult<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult<T> {
    pub best_k: usize,
    /// Polynomial coefficients, constant term first.
    pub fit: Vec<f64>,
    /// `(K, best mtfv over restarts)` in sweep order.
    pub table: Vec<(usize, T)>,
    /// Every run in `(K, restart)` order.
    pub runs: Vec<SweepRun<T>>,
    pub single_peaked: bool,
}

impl<T: Real> SweepResult<T> {
    /// Best run for `best_k`.
    pub fn best_run(&self) -> &SweepRun<T> {
        self.runs
            .iter()
            .filter(|r| r.k == self.best_k)
            .fold(None::<&SweepRun<T>>, |acc, r| match acc {
                Some(a) if a.result.best_mtfv >= r.result.best_mtfv => Some(a),
                _ => Some(r),
            })
            .expect("best_k was swept")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub restarts: usize,
    pub degree: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            restarts: 3,
            degree: 2,
        }
    }
}

/// Runs [`optimize_fixed_k`] for every K (with restarts) and fits a
/// polynomial to the per-K best values.
pub fn sweep_k<T: Real>(
    k_values: &[usize],
    config: &DesignConfig<T>,
    template: &OptimizeParams<T>,
    options: &SweepOptions,
) -> Result<SweepResult<T>> {
    let mut distinct = k_values.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 4 || distinct.len() != k_values.len() {
        return Err(Error::invalid(
            "k_values",
            format!("need at least 4 distinct values, got {k_values:?}"),
        ));
    }
    if options.restarts == 0 {
        return Err(Error::invalid("restarts", "must be at least 1"));
    }
    let jobs: Vec<(usize, usize)> = k_values
        .iter()
        .flat_map(|&k| (0..options.restarts).map(move |r| (k, r)))
        .collect();
    let runs: Vec<SweepRun<T>> = jobs
        .par_iter()
        .map(|&(k, restart)| {
            let seed = derive_seed(template.seed, k, restart);
            let params = OptimizeParams {
                k,
                seed,
                ..template.clone()
            };
            optimize_fixed_k(&params, config).map(|result| SweepRun {
                k,
                restart,
                seed,
                result,
            })
        })
        .collect::<Result<_>>()?;

    let table: Vec<(usize, T)> = k_values
        .iter()
        .map(|&k| {
            let best = runs
                .iter()
                .filter(|r| r.k == k)
                .map(|r| r.result.best_mtfv)
                .fold(T::neg_infinity(), T::max);
            (k, best)
        })
        .collect();
    let (best_k, fit, single_peaked) = fit_sweep(&table, options.degree)?;
    Ok(SweepResult {
        best_k,
        fit,
        table,
        runs,
        single_peaked,
    })
}

/// Fits the sweep table and returns `(best_k, coefficients, single_peaked)`.
/// `best_k` maximizes the fitted curve over the swept values; near-ties go
/// to the smaller K.
pub fn fit_sweep<T: Real>(table: &[(usize, T)], degree: usize) -> Result<(usize, Vec<f64>, bool)> {
    let xs: Vec<f64> = table.iter().map(|r| r.0 as f64).collect();
    let ys: Vec<f64> = table.iter().map(|r| r.1.as_f64()).collect();
    let fit = fit_polynomial(&xs, &ys, degree)?;
    let mut order: Vec<usize> = (0..table.len()).collect();
    order.sort_by_key(|&i| table[i].0);
    let mut best = order[0];
    let mut best_v = eval_polynomial(&fit, xs[best]);
    for &i in &order[1..] {
        let v = eval_polynomial(&fit, xs[i]);
        if v > best_v + 1e-9 * best_v.abs().max(f64::MIN_POSITIVE) {
            best = i;
            best_v = v;
        }
    }
    let (lo, hi) = (
        xs.iter().copied().fold(f64::INFINITY, f64::min),
        xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    let single_peaked = degree == 2 && fit[2] < 0.0 && {
        let vertex = -fit[1] / (2.0 * fit[2]);
        vertex > lo && vertex < hi
    };
    Ok((table[best].0, fit, single_peaked))
}

/// Least-squares line of optimal cell count against design area.
pub fn extrapolate_k(samples: &[(f64, f64)]) -> Result<LinearFit> {
    if samples.len() < 3 {
        return Err(Error::invalid("area_samples", "need at least 3 samples"));
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1).collect();
    fit_line(&xs, &ys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::Spectrum;

    fn small() -> DesignConfig<f64> {
        DesignConfig::new((48, 32), 3.45e-6, 1e-3, 550e-9)
            .unwrap()
            .with_spectrum(Spectrum::single(550e-9))
            .unwrap()
    }

    #[test]
    fn parabola_peak_recovered() {
        let table: Vec<(usize, f64)> = [5, 10, 15, 20, 23, 25, 30, 40]
            .iter()
            .map(|&k| (k, 2.0 - 0.001 * (k as f64 - 23.0).powi(2)))
            .collect();
        let (best, _, peaked) = fit_sweep(&table, 2).unwrap();
        assert_eq!(best, 23);
        assert!(peaked);
    }

    #[test]
    fn constant_sweep_picks_smallest_k() {
        let table: Vec<(usize, f64)> = [30, 5, 10, 40].iter().map(|&k| (k, 1.5)).collect();
        let (best, _, peaked) = fit_sweep(&table, 2).unwrap();
        assert_eq!(best, 5);
        assert!(!peaked);
    }

    #[test]
    fn single_site_moves_to_center() {
        let cfg = small();
        let r = optimize_fixed_k(&OptimizeParams::new(1, 5), &cfg).unwrap();
        assert_eq!(r.terminated_by, Termination::Tolerance);
        assert!(r.iterations() <= 3);
        let g = cfg.optical_grid();
        let last = tessellate(&r.best_sites, g).unwrap().centroid(0).unwrap();
        assert!((last.x - g.width() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_k_is_infeasible() {
        let err = optimize_fixed_k(&OptimizeParams::new(0, 1), &small()).unwrap_err();
        assert!(matches!(err, Error::InfeasibleK { k: 0, .. }));
    }

    #[test]
    fn sweep_needs_four_values() {
        let err = sweep_k(
            &[3, 4, 5],
            &small(),
            &OptimizeParams::new(1, 1),
            &SweepOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::InvalidParameter {
                field: "k_values",
                ..
            }
        ));
    }

    #[test]
    fn seeds_differ_per_run() {
        assert_ne!(derive_seed(1, 5, 0), derive_seed(1, 5, 1));
        assert_ne!(derive_seed(1, 5, 0), derive_seed(1, 6, 0));
        assert_eq!(derive_seed(9, 23, 2), derive_seed(9, 23, 2));
    }
}
