use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use voronoi_fresnel::io::{load_pfm, save_pfm};
use voronoi_fresnel::Raster;

const SMALL: &str = r#"{
  "sensor_px": [48, 40],
  "pixel_pitch_um": 3.45,
  "z_mm": 1.0,
  "lambda0_nm": 550,
  "spectrum": {"samples": 3},
  "optimizer": {"maxiter": 8}
}"#;

fn vfcam(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vfcam"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn setup(config: &str) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("cfg.json"), config).unwrap();
    dir
}

fn json(path: PathBuf) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

fn no_staging_left(dir: &Path) {
    assert!(files(dir).iter().all(|n| !n.starts_with(".vfcam-")));
}

#[test]
fn design_writes_six_files_and_reruns_byte_identically() {
    let t = setup(SMALL);
    let args = |out: &'static str| {
        [
            "design", "cfg.json", "--k", "5", "--seed", "7", "--out", out,
        ]
    };
    let a = vfcam(&args("a"), t.path());
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    let b = vfcam(&args("b"), t.path());
    assert_eq!(code(&b), 0);
    let names = files(&t.path().join("a"));
    assert_eq!(
        names,
        [
            "labels.png",
            "manifest.json",
            "phase.pfm",
            "phase_quantized.pfm",
            "report.json",
            "sites.csv"
        ]
    );
    for n in &names {
        assert_eq!(
            fs::read(t.path().join("a").join(n)).unwrap(),
            fs::read(t.path().join("b").join(n)).unwrap(),
            "{n} differs"
        );
    }
    let m = json(t.path().join("a/manifest.json"));
    assert_eq!(m["command"], "design");
    assert_eq!(m["seed"], 7);
    assert_eq!(m["outputs"].as_array().unwrap().len(), 6);
    assert_eq!(m["config"]["sensor_px"][0], 48);

    // a different seed moves the sites and the hash
    let c = vfcam(
        &[
            "design", "cfg.json", "--k", "5", "--seed", "8", "--out", "c",
        ],
        t.path(),
    );
    assert_eq!(code(&c), 0);
    assert_ne!(
        json(t.path().join("c/manifest.json"))["config_hash"],
        m["config_hash"]
    );
    assert_ne!(
        fs::read(t.path().join("c/sites.csv")).unwrap(),
        fs::read(t.path().join("a/sites.csv")).unwrap()
    );
    no_staging_left(t.path());
}

#[test]
fn rerunning_into_an_existing_directory_replaces_it() {
    let t = setup(SMALL);
    let out = t.path().join("d");
    fs::create_dir(&out).unwrap();
    fs::write(out.join("stale.txt"), "old").unwrap();
    let o = vfcam(
        &["design", "cfg.json", "--k", "3", "--quiet", "--out", "d"],
        t.path(),
    );
    assert_eq!(code(&o), 0);
    assert!(o.stderr.is_empty(), "quiet run printed {}", stderr(&o));
    assert!(!out.join("stale.txt").exists());
}

#[test]
fn zero_cells_is_infeasible() {
    let t = setup(SMALL);
    let o = vfcam(&["design", "cfg.json", "--k", "0", "--out", "d"], t.path());
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("`k`"), "{}", stderr(&o));
    assert!(!t.path().join("d").exists());
    no_staging_left(t.path());
}

#[test]
fn config_errors_name_the_field() {
    let t = setup(&SMALL.replace("\"maxiter\"", "\"max_iter\""));
    let o = vfcam(&["design", "cfg.json", "--k", "3", "--out", "d"], t.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("optimizer.max_iter"), "{}", stderr(&o));
    assert!(!t.path().join("d").exists());

    let t = setup(&SMALL.replace("\"z_mm\": 1.0", "\"z_mm\": \"far\""));
    let o = vfcam(&["design", "cfg.json", "--k", "3", "--out", "d"], t.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("z_mm"), "{}", stderr(&o));

    let t = setup(&SMALL.replace("\"spectrum\"", "\"exclusion_margin_um\": 1e6, \"spectrum\""));
    let o = vfcam(&["design", "cfg.json", "--k", "3", "--out", "d"], t.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("exclusion_margin_um"), "{}", stderr(&o));
}

#[test]
fn sweep_needs_four_values() {
    let t = setup(SMALL);
    let o = vfcam(
        &["sweep", "cfg.json", "--k-list", "5", "--out", "s"],
        t.path(),
    );
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("at least 4"), "{}", stderr(&o));
    assert!(!t.path().join("s").exists());
}

#[test]
fn sweep_rows_cover_every_restart() {
    let t = setup(SMALL);
    let o = vfcam(
        &[
            "sweep",
            "cfg.json",
            "--k-list",
            "2,3,4,6,8",
            "--restarts",
            "2",
            "--maxiter",
            "3",
            "--out",
            "s",
        ],
        t.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(t.path().join("s/sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("K,restart,best_mtfv,iterations,terminated_by")
    );
    assert_eq!(lines.count(), 5 * 2);
    let fit = json(t.path().join("s/fit.json"));
    assert_eq!(fit["coefficients"].as_array().unwrap().len(), 3);
    let best_k = fit["best_k"].as_u64().unwrap();
    let best = json(t.path().join("s/best/report.json"));
    assert_eq!(best["k"].as_u64().unwrap(), best_k);
    assert_eq!(files(&t.path().join("s/best")).len(), 6);
}

fn write_delta_bundle(t: &TempDir) -> PathBuf {
    let o = vfcam(
        &["design", "cfg.json", "--k", "3", "--out", "bundle"],
        t.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (w, h) = (48, 40);
    let mut d = Raster::zeros(w, h);
    d[(w / 2, h / 2)] = 1.0;
    save_pfm(t.path().join("bundle/psf.pfm"), &[&d]).unwrap();
    let scene: Vec<Raster<f64>> = (0..3)
        .map(|c| {
            Raster::from_fn(w, h, |x, y| {
                0.1 + 0.8 * (((x * 7 + y * 3 + c * 11) % 13) as f64 / 12.0)
            })
        })
        .collect();
    save_pfm(
        t.path().join("scene.pfm"),
        &[&scene[0], &scene[1], &scene[2]],
    )
    .unwrap();
    t.path().join("bundle")
}

#[test]
fn delta_psf_pipeline_is_the_identity() {
    let t = setup(SMALL);
    write_delta_bundle(&t);
    let o = vfcam(
        &["simulate", "bundle", "scene.pfm", "--out", "sim"],
        t.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for boundary in ["circular", "cropped"] {
        let out = format!("rec-{boundary}");
        let o = vfcam(
            &[
                "reconstruct",
                "bundle",
                "sim/raw.pfm",
                "--mu",
                "0",
                "--rho",
                "1e-2",
                "--iters",
                "30",
                "--boundary",
                boundary,
                "--out",
                &out,
            ],
            t.path(),
        );
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let scene: Vec<Raster<f64>> = load_pfm(t.path().join("scene.pfm")).unwrap();
        let rec: Vec<Raster<f64>> = load_pfm(t.path().join(&out).join("recon.pfm")).unwrap();
        assert_eq!(rec.len(), 3);
        for (a, b) in rec.iter().zip(&scene) {
            let err = a
                .as_slice()
                .iter()
                .zip(b.as_slice())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-6, "{boundary}: {err}");
        }
        let trace = fs::read_to_string(t.path().join(&out).join("trace.csv")).unwrap();
        assert!(trace.starts_with("iteration,objective\n"));
        assert_eq!(trace.lines().count(), 31);
    }
}

#[test]
fn mismatched_capture_reports_both_shapes() {
    let t = setup(SMALL);
    write_delta_bundle(&t);
    save_pfm(t.path().join("raw.pfm"), &[&Raster::<f64>::zeros(32, 24)]).unwrap();
    let o = vfcam(
        &["reconstruct", "bundle", "raw.pfm", "--out", "r"],
        t.path(),
    );
    assert_eq!(code(&o), 5);
    let e = stderr(&o);
    assert!(e.contains("32x24") && e.contains("48x40"), "{e}");
    assert!(!t.path().join("r").exists());

    let o = vfcam(&["simulate", "bundle", "raw.pfm", "--out", "s"], t.path());
    assert_eq!(code(&o), 5, "{}", stderr(&o));
}

#[test]
fn missing_artifacts_exit_4() {
    let t = setup(SMALL);
    let o = vfcam(&["mtf", "nowhere", "--out", "m"], t.path());
    assert_eq!(code(&o), 4);
    let o = vfcam(
        &["design", "absent.json", "--k", "3", "--out", "d"],
        t.path(),
    );
    assert_eq!(code(&o), 4);
    let bundle = write_delta_bundle(&t);
    fs::remove_file(bundle.join("sites.csv")).unwrap();
    fs::remove_file(bundle.join("psf.pfm")).unwrap();
    let o = vfcam(&["analyze", "bundle", "--out", "a"], t.path());
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("sites.csv"));
    let o = vfcam(
        &["simulate", "bundle", "nothing.pfm", "--out", "s"],
        t.path(),
    );
    assert_eq!(code(&o), 4);
}

#[test]
fn analyze_and_mtf_outputs() {
    let t = setup(SMALL);
    let o = vfcam(&["design", "cfg.json", "--k", "4", "--out", "d"], t.path());
    assert_eq!(code(&o), 0);
    let o = vfcam(&["analyze", "d", "--out", "a"], t.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let a = json(t.path().join("a/analysis.json"));
    assert_eq!(a["mask_depths_nm"].as_array().unwrap().len(), 4);
    assert_eq!(a["level_step_nm"], 75.0);
    let hist: u64 = a["level_histogram"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .sum();
    assert_eq!(hist, 48 * 40);

    let o = vfcam(&["mtf", "d", "--out", "m"], t.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = json(t.path().join("m/mtf_report.json"));
    let report = json(t.path().join("d/report.json"));
    // no cells excluded here, so the bundle's mtfv is the optimizer's value
    assert!(report["excluded_cells"].as_array().unwrap().is_empty());
    let (x, y) = (
        m["mtfv"].as_f64().unwrap(),
        report["layout_mtfv"].as_f64().unwrap(),
    );
    assert!((x - y).abs() <= 1e-12 * y, "{x} vs {y}");
    let psf: Vec<Raster<f64>> = load_pfm(t.path().join("m/psf.pfm")).unwrap();
    assert_eq!(psf.len(), 3);
}

/// The layout ordering on the 256 x 256 design with 64 cells.
#[test]
fn optimized_layout_beats_regular_lattices() {
    let t = setup(
        r#"{"sensor_px": [256, 256], "pixel_pitch_um": 3.45, "z_mm": 2.0, "lambda0_nm": 550}"#,
    );
    let mut values = Vec::new();
    for layout in ["optimized", "hex", "rect"] {
        let o = vfcam(
            &[
                "design", "cfg.json", "--k", "64", "--layout", layout, "--out", layout,
            ],
            t.path(),
        );
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let out = format!("mtf-{layout}");
        let o = vfcam(&["mtf", layout, "--out", &out], t.path());
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        values.push(
            json(t.path().join(out).join("mtf_report.json"))["mtfv"]
                .as_f64()
                .unwrap(),
        );
    }
    assert!(
        values[0] > values[1] && values[1] > values[2],
        "optimized, hex, rect = {values:?}"
    );
}
