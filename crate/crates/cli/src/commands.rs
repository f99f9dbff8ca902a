use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Serialize;
use serde_json::json;

use voronoi_fresnel::analysis::{
    depth_map, etch_mask_depths, phase_level, quantize_phase, system_report, SystemReport,
};
use voronoi_fresnel::geometry::tessellate;
use voronoi_fresnel::imaging::{convolve_scene, sigma_for_snr_db, simulate_capture};
use voronoi_fresnel::io::{
    load_image, save_image_pfm, save_image_png, save_labels_png, save_pfm, save_preview_png,
    sites_csv, ToneMap,
};
use voronoi_fresnel::optics::{build_phase, mtf, mtfv, volume_factor};
use voronoi_fresnel::optimizer::{
    evaluate_tessellation, hex_layout, optimize_fixed_k, rect_layout_k, sweep_k, SweepOptions,
};
use voronoi_fresnel::recon::{admm_tv_deconvolve, Boundary};
use voronoi_fresnel::{OptimizeParams, OptimizeResult, Point, Raster};

use crate::bundle::{
    input_record, list_outputs, write_json, Bundle, InputRecord, Resolved, RunManifest, Staging,
    MANIFEST,
};
use crate::error::CliError;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Flags shared by every command.
#[derive(Debug, Clone, Copy)]
pub struct Global {
    pub seed: u64,
    pub quiet: bool,
}

impl Global {
    fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    /// MTF-volume optimized sites
    Optimized,
    /// Hexagonal reference lattice
    Hex,
    /// Rectangular reference lattice
    Rect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundaryArg {
    Circular,
    Cropped,
}

impl From<BoundaryArg> for Boundary {
    fn from(b: BoundaryArg) -> Self {
        match b {
            BoundaryArg::Circular => Boundary::Circular,
            BoundaryArg::Cropped => Boundary::Cropped,
        }
    }
}

/// Writes the manifest listing every file in the staging dir, then moves
/// the directory into place.
fn finish(
    stage: Staging,
    resolved: &Resolved,
    command: &str,
    seed: u64,
    inputs: Vec<InputRecord>,
    params: serde_json::Value,
) -> Result<RunManifest, CliError> {
    let manifest = manifest(stage.path(), resolved, command, seed, inputs, params)?;
    stage.commit()?;
    Ok(manifest)
}

fn manifest(
    dir: &Path,
    resolved: &Resolved,
    command: &str,
    seed: u64,
    inputs: Vec<InputRecord>,
    params: serde_json::Value,
) -> Result<RunManifest, CliError> {
    let mut outputs = list_outputs(dir)?;
    outputs.push(MANIFEST.to_string());
    outputs.sort();
    let m = RunManifest {
        command: command.to_string(),
        tool_version: TOOL_VERSION.to_string(),
        config_hash: resolved.hash(command, seed, &params, &inputs),
        seed,
        inputs,
        outputs,
        config: resolved.run.clone(),
        response_table: resolved.response_table.clone(),
        params,
    };
    write_json(&dir.join(MANIFEST), &m)?;
    Ok(m)
}

#[derive(Debug, Serialize)]
struct DesignReport {
    #[serde(flatten)]
    system: SystemReport,
    layout: Layout,
    /// MTF volume of the layout with every cell active, the optimizer's
    /// objective.
    layout_mtfv: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    terminated_by: Option<String>,
    warnings: Vec<String>,
}

/// Writes the five design artifacts (the manifest is added by the caller).
fn write_design(
    dir: &Path,
    resolved: &Resolved,
    sites: &[Point],
    layout: Layout,
    run: Option<&OptimizeResult>,
) -> Result<DesignReport, CliError> {
    let cfg = &resolved.design;
    let tess = tessellate(sites, cfg.optical_grid())?;
    let ex = resolved.exclusion(&tess)?;
    let phase = build_phase(&tess, cfg, &ex.cells)?;
    let quantized = quantize_phase(&phase, cfg.phase_levels)?;
    let layout_mtfv = match run {
        Some(r) => r.best_mtfv,
        None => evaluate_tessellation(&tess, cfg)?,
    };

    fs::write(dir.join("sites.csv"), sites_csv(sites))?;
    save_labels_png(dir.join("labels.png"), tess.labels())?;
    save_pfm(dir.join("phase.pfm"), &[&phase.grid])?;
    save_pfm(dir.join("phase_quantized.pfm"), &[&quantized.grid])?;
    let report = DesignReport {
        system: system_report(&tess, cfg, &ex.cells, ex.margin)?,
        layout,
        layout_mtfv,
        iterations: run.map(|r| r.iterations()),
        terminated_by: run.map(|r| r.terminated_by.as_str().to_string()),
        warnings: ex.warning.into_iter().collect(),
    };
    write_json(&dir.join("report.json"), &report)?;
    Ok(report)
}

fn optimize_params(
    resolved: &Resolved,
    k: usize,
    maxiter: Option<usize>,
    seed: u64,
) -> OptimizeParams {
    OptimizeParams {
        k,
        maxiter: maxiter.unwrap_or(resolved.run.optimizer.maxiter),
        tol: resolved.run.optimizer.tol_um.map(|t| t * 1e-6),
        seed,
    }
}

pub struct DesignArgs {
    pub config: PathBuf,
    pub k: usize,
    pub maxiter: Option<usize>,
    pub layout: Layout,
    pub out: PathBuf,
}

pub fn design(a: &DesignArgs, g: Global) -> Result<(), CliError> {
    let resolved = Resolved::from_config_file(&a.config)?;
    if a.k == 0 {
        return Err(CliError {
            code: 3,
            message: "infeasible `k` = 0: a design needs at least one cell".into(),
        });
    }
    let params = optimize_params(&resolved, a.k, a.maxiter, g.seed);
    let grid = resolved.design.optical_grid();
    let (sites, run) = match a.layout {
        Layout::Optimized => {
            let r = optimize_fixed_k(&params, &resolved.design)?;
            (r.best_sites.clone(), Some(r))
        }
        Layout::Hex => (hex_layout(a.k, &grid), None),
        Layout::Rect => (rect_layout_k(a.k, &grid), None),
    };
    let stage = Staging::new(&a.out)?;
    let report = write_design(stage.path(), &resolved, &sites, a.layout, run.as_ref())?;
    let inputs = vec![input_record(&a.config)?];
    let p = json!({
        "k": a.k,
        "maxiter": params.maxiter,
        "tol_m": params.resolved_tol(&resolved.design),
        "layout": a.layout,
    });
    finish(stage, &resolved, "design", g.seed, inputs, p)?;
    for w in &report.warnings {
        g.note(format!("warning: {w}"));
    }
    g.note(format!(
        "design: K = {}, mtfv = {:.6e}, wrote {}",
        a.k,
        report.layout_mtfv,
        a.out.display()
    ));
    Ok(())
}

pub struct SweepArgs {
    pub config: PathBuf,
    pub k_list: Option<Vec<usize>>,
    pub restarts: Option<usize>,
    pub maxiter: Option<usize>,
    pub out: PathBuf,
}

#[derive(Serialize)]
struct FitRecord {
    coefficients: Vec<f64>,
    degree: usize,
    best_k: usize,
    single_peaked: bool,
    table: Vec<TableRow>,
}

#[derive(Serialize)]
struct TableRow {
    k: usize,
    best_mtfv: f64,
}

pub fn sweep(a: &SweepArgs, g: Global) -> Result<(), CliError> {
    let resolved = Resolved::from_config_file(&a.config)?;
    let ks = a
        .k_list
        .clone()
        .unwrap_or_else(|| resolved.run.sweep.k_values.clone());
    if ks.len() < 4 {
        return Err(CliError::config(format!(
            "`k_list`: at least 4 values are required, got {}",
            ks.len()
        )));
    }
    let options = SweepOptions {
        restarts: a.restarts.unwrap_or(resolved.run.sweep.restarts),
        degree: resolved.run.sweep.degree,
    };
    let template = optimize_params(&resolved, 0, a.maxiter, g.seed);
    let result = sweep_k(&ks, &resolved.design, &template, &options)?;

    let stage = Staging::new(&a.out)?;
    let mut csv = String::from("K,restart,best_mtfv,iterations,terminated_by\n");
    for r in &result.runs {
        writeln!(
            csv,
            "{},{},{:e},{},{}",
            r.k,
            r.restart,
            r.result.best_mtfv,
            r.result.iterations(),
            r.result.terminated_by.as_str()
        )
        .expect("string write");
    }
    fs::write(stage.path().join("sweep.csv"), csv)?;
    let fit = FitRecord {
        coefficients: result.fit.clone(),
        degree: options.degree,
        best_k: result.best_k,
        single_peaked: result.single_peaked,
        table: result
            .table
            .iter()
            .map(|&(k, best_mtfv)| TableRow { k, best_mtfv })
            .collect(),
    };
    write_json(&stage.path().join("fit.json"), &fit)?;

    let inputs = vec![input_record(&a.config)?];
    let best = result.best_run();
    let best_dir = stage.path().join("best");
    fs::create_dir(&best_dir)?;
    let report = write_design(
        &best_dir,
        &resolved,
        &best.result.best_sites,
        Layout::Optimized,
        Some(&best.result),
    )?;
    let best_params = json!({
        "k": best.k,
        "maxiter": template.maxiter,
        "tol_m": template.resolved_tol(&resolved.design),
        "layout": Layout::Optimized,
    });
    manifest(
        &best_dir,
        &resolved,
        "design",
        best.seed,
        inputs.clone(),
        best_params,
    )?;

    let p = json!({
        "k_list": ks,
        "restarts": options.restarts,
        "degree": options.degree,
        "maxiter": template.maxiter,
        "tol_m": template.resolved_tol(&resolved.design),
    });
    finish(stage, &resolved, "sweep", g.seed, inputs, p)?;
    for w in &report.warnings {
        g.note(format!("warning: {w}"));
    }
    g.note(format!(
        "sweep: best K = {} (single peaked: {}), wrote {}",
        result.best_k,
        result.single_peaked,
        a.out.display()
    ));
    Ok(())
}

#[derive(Serialize)]
struct SliceRecord {
    wavelength_nm: f64,
    weight: f64,
    mtfv: f64,
}

#[derive(Serialize)]
struct MtfRecord {
    mtfv: f64,
    psf_source: &'static str,
    psf_dims: [usize; 2],
    spectral: Vec<SliceRecord>,
}

fn fftshift(r: &Raster<f64>) -> Raster<f64> {
    let (w, h) = r.dims();
    Raster::from_fn(w, h, |x, y| r[((x + w - w / 2) % w, (y + h - h / 2) % h)])
}

pub fn mtf_cmd(design_dir: &Path, out: &Path, g: Global) -> Result<(), CliError> {
    let bundle = Bundle::open(design_dir)?;
    let cfg = &bundle.resolved.design;
    let stack = bundle.psf()?;
    let report = mtfv(&stack, cfg)?;
    let factor = volume_factor(cfg);
    let record = MtfRecord {
        mtfv: report.mtfv,
        psf_source: if bundle.has_psf_override() {
            "override"
        } else {
            "computed"
        },
        psf_dims: [stack.dims().0, stack.dims().1],
        spectral: report
            .spectral_mtf
            .iter()
            .zip(&stack.weights)
            .map(|((l, m), &w)| SliceRecord {
                wavelength_nm: l * 1e9,
                weight: w,
                mtfv: m.sum() * factor,
            })
            .collect(),
    };

    let stage = Staging::new(out)?;
    let dir = stage.path();
    write_json(&dir.join("mtf_report.json"), &record)?;
    let pc = &stack.per_channel;
    save_pfm(dir.join("psf.pfm"), &[&pc[0], &pc[1], &pc[2]])?;
    save_pfm(dir.join("psf_panchromatic.pfm"), &[&stack.panchromatic])?;
    save_preview_png(
        dir.join("psf_preview.png"),
        &stack.panchromatic,
        ToneMap::Sqrt,
    )?;
    save_preview_png(
        dir.join("mtf_preview.png"),
        &fftshift(&mtf(&stack.panchromatic)),
        ToneMap::Log,
    )?;
    let inputs = vec![bundle.input_record()?];
    finish(
        stage,
        &bundle.resolved,
        "mtf",
        bundle.manifest.seed,
        inputs,
        json!({}),
    )?;
    g.note(format!(
        "mtf: mtfv = {:.6e}, wrote {}",
        report.mtfv,
        out.display()
    ));
    Ok(())
}

pub struct SimulateArgs {
    pub design: PathBuf,
    pub scene: PathBuf,
    pub noise_db: Option<f64>,
    pub gamma: f64,
    pub out: PathBuf,
}

pub fn simulate(a: &SimulateArgs, g: Global) -> Result<(), CliError> {
    let bundle = Bundle::open(&a.design)?;
    let scene_in = input_record(&a.scene)?;
    let scene = load_image(&a.scene, a.gamma)?;
    let stack = bundle.psf()?;
    let response = bundle.resolved.response()?;
    let sigma = match a.noise_db {
        Some(db) => sigma_for_snr_db(&convolve_scene(&scene, &stack, &response)?, db),
        None => 0.0,
    };
    let raw = simulate_capture(&scene, &stack, &response, sigma, g.seed)?;

    let stage = Staging::new(&a.out)?;
    save_image_pfm(stage.path().join("raw.pfm"), &raw)?;
    if raw.channels() == 1 || raw.channels() == 3 {
        save_image_png(stage.path().join("raw_preview.png"), &raw, 2.2)?;
    }
    let inputs = vec![bundle.input_record()?, scene_in];
    let p = json!({
        "noise_db": a.noise_db,
        "noise_sigma": sigma,
        "gamma": a.gamma,
    });
    finish(stage, &bundle.resolved, "simulate", g.seed, inputs, p)?;
    g.note(format!(
        "simulate: {} channel(s), sigma = {sigma:.3e}, wrote {}",
        raw.channels(),
        a.out.display()
    ));
    Ok(())
}

pub struct ReconstructArgs {
    pub design: PathBuf,
    pub raw: PathBuf,
    pub mu: Option<f64>,
    pub rho: Option<f64>,
    pub rho2: Option<f64>,
    pub iters: Option<usize>,
    pub boundary: Option<BoundaryArg>,
    pub taper: Option<usize>,
    pub out: PathBuf,
}

pub fn reconstruct(a: &ReconstructArgs, g: Global) -> Result<(), CliError> {
    let bundle = Bundle::open(&a.design)?;
    let raw_in = input_record(&a.raw)?;
    let raw = load_image(&a.raw, 1.0)?;
    let mut params = bundle.resolved.run.recon.params();
    params.mu = a.mu.or(params.mu);
    params.rho = a.rho.or(params.rho);
    params.rho2 = a.rho2.or(params.rho2);
    params.iters = a.iters.unwrap_or(params.iters);
    params.boundary_taper = a.taper.unwrap_or(params.boundary_taper);
    if let Some(b) = a.boundary {
        params.boundary = b.into();
    }
    let stack = bundle.psf()?;
    if stack.dims() != raw.dims() {
        return Err(CliError::mismatch(format!(
            "raw capture is {}x{} but the PSF grid is {}x{}",
            raw.dims().0,
            raw.dims().1,
            stack.dims().0,
            stack.dims().1
        )));
    }
    let (est, trace) = admm_tv_deconvolve(&raw, &stack, &params)?;

    let stage = Staging::new(&a.out)?;
    save_image_pfm(stage.path().join("recon.pfm"), &est)?;
    save_image_png(stage.path().join("recon_preview.png"), &est, 2.2)?;
    let mut csv = String::from("iteration,objective\n");
    for (i, v) in trace.iter().enumerate() {
        writeln!(csv, "{i},{v:e}").expect("string write");
    }
    fs::write(stage.path().join("trace.csv"), csv)?;
    let inputs = vec![bundle.input_record()?, raw_in];
    let p = serde_json::to_value(&params)?;
    finish(stage, &bundle.resolved, "reconstruct", g.seed, inputs, p)?;
    g.note(format!(
        "reconstruct: {} iterations, final objective {:.6e}, wrote {}",
        trace.len(),
        trace.last().copied().unwrap_or(f64::NAN),
        a.out.display()
    ));
    Ok(())
}

#[derive(Serialize)]
struct AnalysisRecord {
    system: SystemReport,
    phase_levels: usize,
    total_depth_nm: f64,
    level_step_nm: f64,
    /// Binary etch masks, shallowest first.
    mask_depths_nm: Vec<f64>,
    /// Pixel count per phase level.
    level_histogram: Vec<usize>,
    max_quantization_error_rad: f64,
    warnings: Vec<String>,
}

pub fn analyze(design_dir: &Path, out: &Path, g: Global) -> Result<(), CliError> {
    let bundle = Bundle::open(design_dir)?;
    let cfg = &bundle.resolved.design;
    let tess = bundle.tessellation()?;
    let ex = bundle.resolved.exclusion(&tess)?;
    let phase = build_phase(&tess, cfg, &ex.cells)?;
    let quantized = quantize_phase(&phase, cfg.phase_levels)?;
    let masks = if cfg.phase_levels.is_power_of_two() {
        etch_mask_depths(cfg.phase_levels, cfg.total_depth)?
    } else {
        Vec::new()
    };
    let mut warnings: Vec<String> = ex.warning.into_iter().collect();
    if masks.is_empty() {
        warnings.push(format!(
            "{} levels is not a power of two; no binary mask sequence",
            cfg.phase_levels
        ));
    }
    let mut histogram = vec![0usize; cfg.phase_levels];
    for &p in quantized.grid.as_slice() {
        histogram[phase_level(p, cfg.phase_levels)] += 1;
    }
    let max_err = phase
        .grid
        .as_slice()
        .iter()
        .zip(quantized.grid.as_slice())
        .map(|(a, b)| a - b)
        .fold(0.0, f64::max);
    let record = AnalysisRecord {
        system: system_report(&tess, cfg, &ex.cells, ex.margin)?,
        phase_levels: cfg.phase_levels,
        total_depth_nm: bundle.resolved.run.total_depth_nm,
        level_step_nm: bundle.resolved.run.total_depth_nm / cfg.phase_levels as f64,
        mask_depths_nm: masks.iter().map(|d| d * 1e9).collect(),
        level_histogram: histogram,
        max_quantization_error_rad: max_err,
        warnings,
    };

    let stage = Staging::new(out)?;
    let dir = stage.path();
    write_json(&dir.join("analysis.json"), &record)?;
    let depth = depth_map(&quantized, cfg.total_depth);
    save_pfm(dir.join("depth.pfm"), &[&depth])?;
    save_preview_png(dir.join("depth_preview.png"), &depth, ToneMap::Linear)?;
    let inputs = vec![bundle.input_record()?];
    finish(
        stage,
        &bundle.resolved,
        "analyze",
        bundle.manifest.seed,
        inputs,
        json!({}),
    )?;
    g.note(format!(
        "analyze: half FOV {:.2} deg, {} active cells, wrote {}",
        record.system.half_fov_deg,
        record.system.k_effective,
        out.display()
    ));
    Ok(())
}
