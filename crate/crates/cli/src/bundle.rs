//! Output staging, run manifests and design-bundle loading.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tempfile::TempDir;

use voronoi_fresnel::analysis::{default_margin, exclude_marginal_cells};
use voronoi_fresnel::geometry::tessellate;
use voronoi_fresnel::io::{load_pfm, load_sites_csv, parse_response_csv};
use voronoi_fresnel::optics::panchromatic_psf;
use voronoi_fresnel::{ColorResponse, DesignConfig, Error, PsfStack, Raster, Tessellation};

use crate::config::RunConfig;
use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";
pub const SITES: &str = "sites.csv";
/// Optional PSF override inside a design bundle: one plane (used for every
/// channel) or three planes (R, G, B).
pub const PSF_OVERRIDE: &str = "psf.pfm";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub inputs: Vec<InputRecord>,
    pub outputs: Vec<String>,
    pub config: RunConfig,
    /// Color response rows `[wavelength_nm, r, g, b]` when the config named
    /// a response file; stored so bundles stay self-contained.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response_table: Option<Vec<[f64; 4]>>,
    pub params: serde_json::Value,
}

/// Resolved configuration shared by every command.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub run: RunConfig,
    pub design: DesignConfig,
    pub response_table: Option<Vec<[f64; 4]>>,
}

impl Resolved {
    pub fn from_config_file(path: &Path) -> Result<Self, CliError> {
        let run = RunConfig::load(path)?;
        let response_table = match &run.response_csv {
            Some(rel) => {
                let p = path.parent().unwrap_or(Path::new(".")).join(rel);
                let text = fs::read_to_string(&p).map_err(|e| {
                    CliError::missing(format!("cannot read response {}: {e}", p.display()))
                })?;
                let rows: Vec<(f64, [f64; 3])> = parse_response_csv(&text)
                    .map_err(|e| CliError::config(format!("config field `response_csv`: {e}")))?;
                Some(rows.iter().map(|(l, c)| [*l, c[0], c[1], c[2]]).collect())
            }
            None => None,
        };
        let design = run.design()?;
        let r = Self {
            run,
            design,
            response_table,
        };
        r.response()?;
        Ok(r)
    }

    /// Response curves sampled on the design spectrum.
    pub fn response(&self) -> Result<ColorResponse, CliError> {
        match &self.response_table {
            Some(rows) => {
                let table: Vec<(f64, [f64; 3])> = rows
                    .iter()
                    .map(|r| (r[0] * 1e-9, [r[1], r[2], r[3]]))
                    .collect();
                ColorResponse::from_table(&table, &self.design.spectrum)
                    .map_err(|e| CliError::config(format!("config field `response_csv`: {e}")))
            }
            None => Ok(ColorResponse::gaussian_default(&self.design.spectrum)),
        }
    }

    /// Border exclusion: an explicit margin must leave a cell active, the
    /// derived default falls back to no exclusion with a warning.
    pub fn exclusion(&self, tess: &Tessellation) -> Result<Exclusion, CliError> {
        match self.run.exclusion_margin_um {
            Some(um) => {
                let margin = um * 1e-6;
                let cells = exclude_marginal_cells(tess, margin).map_err(|e| match e {
                    Error::MarginTooLarge { .. } => {
                        CliError::config(format!("config field `exclusion_margin_um`: {e}"))
                    }
                    e => e.into(),
                })?;
                Ok(Exclusion {
                    cells,
                    margin,
                    warning: None,
                })
            }
            None => {
                let margin = default_margin(&self.design);
                match exclude_marginal_cells(tess, margin) {
                    Ok(cells) => Ok(Exclusion {
                        cells,
                        margin,
                        warning: None,
                    }),
                    Err(Error::MarginTooLarge { .. }) => Ok(Exclusion {
                        cells: Vec::new(),
                        margin: 0.0,
                        warning: Some(format!(
                            "default margin {margin:.3e} m would exclude every cell; no cells excluded"
                        )),
                    }),
                    Err(e) => Err(e.into()),
                }
            }
        }
    }

    pub fn hash(
        &self,
        command: &str,
        seed: u64,
        params: &serde_json::Value,
        inputs: &[InputRecord],
    ) -> String {
        let digests: Vec<&str> = inputs.iter().map(|i| i.sha256.as_str()).collect();
        let record = serde_json::json!({
            "command": command,
            "config": self.run,
            "response_table": self.response_table,
            "seed": seed,
            "params": params,
            "inputs": digests,
        });
        hex::encode(Sha256::digest(record.to_string().as_bytes()))
    }
}

#[derive(Debug, Clone)]
pub struct Exclusion {
    pub cells: Vec<usize>,
    pub margin: f64,
    pub warning: Option<String>,
}

/// A design bundle read back from disk.
pub struct Bundle {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub resolved: Resolved,
}

impl Bundle {
    pub fn open(dir: &Path) -> Result<Self, CliError> {
        if !dir.is_dir() {
            return Err(CliError::missing(format!(
                "design bundle {} does not exist",
                dir.display()
            )));
        }
        let mpath = require(dir, MANIFEST)?;
        let text = fs::read_to_string(&mpath)?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let manifest: RunManifest = serde_path_to_error::deserialize(de).map_err(|e| {
            CliError::config(format!(
                "{} field `{}`: {}",
                mpath.display(),
                e.path(),
                e.inner()
            ))
        })?;
        let design = manifest.config.design()?;
        let resolved = Resolved {
            run: manifest.config.clone(),
            design,
            response_table: manifest.response_table.clone(),
        };
        Ok(Self {
            dir: dir.to_owned(),
            manifest,
            resolved,
        })
    }

    pub fn tessellation(&self) -> Result<Tessellation, CliError> {
        let sites = load_sites_csv(require(&self.dir, SITES)?)?;
        Ok(tessellate(&sites, self.resolved.design.optical_grid())?)
    }

    pub fn has_psf_override(&self) -> bool {
        self.dir.join(PSF_OVERRIDE).is_file()
    }

    /// PSFs of the design, from the override file when present.
    pub fn psf(&self) -> Result<PsfStack, CliError> {
        let response = self.resolved.response()?;
        if self.has_psf_override() {
            let planes: Vec<Raster<f64>> = load_pfm(self.dir.join(PSF_OVERRIDE))?;
            return stack_from_planes(planes, self.resolved.design.lambda0);
        }
        let tess = self.tessellation()?;
        let ex = self.resolved.exclusion(&tess)?;
        Ok(panchromatic_psf(
            &tess,
            &self.resolved.design,
            &ex.cells,
            &response,
        )?)
    }

    pub fn input_record(&self) -> Result<InputRecord, CliError> {
        // the manifest pins config and sites; the override file also counts
        let mut h = Sha256::new();
        for name in [MANIFEST, SITES, PSF_OVERRIDE] {
            let p = self.dir.join(name);
            if p.is_file() {
                h.update(name.as_bytes());
                h.update(fs::read(p)?);
            }
        }
        Ok(InputRecord {
            path: self.dir.display().to_string(),
            sha256: hex::encode(h.finalize()),
        })
    }
}

fn stack_from_planes(mut planes: Vec<Raster<f64>>, lambda0: f64) -> Result<PsfStack, CliError> {
    for p in &mut planes {
        p.normalize_unit_sum();
    }
    match planes.len() {
        1 => Ok(PsfStack::achromatic(lambda0, planes.remove(0))),
        3 => {
            let (w, h) = planes[0].dims();
            let mut pan = Raster::zeros(w, h);
            for p in &planes {
                pan.add_scaled(p, 1.0 / 3.0)?;
            }
            let per_channel: [Raster<f64>; 3] = planes.try_into().expect("three planes");
            Ok(PsfStack {
                spectral: vec![(lambda0, pan.clone())],
                weights: vec![1.0],
                panchromatic: pan,
                per_channel,
            })
        }
        n => Err(CliError::config(format!(
            "{PSF_OVERRIDE}: expected 1 or 3 planes, found {n}"
        ))),
    }
}

pub fn require(dir: &Path, name: &str) -> Result<PathBuf, CliError> {
    let p = dir.join(name);
    if p.is_file() {
        Ok(p)
    } else {
        Err(CliError::missing(format!(
            "missing artifact {} in {}",
            name,
            dir.display()
        )))
    }
}

/// Digest of an input file or directory (files in sorted order).
pub fn input_record(path: &Path) -> Result<InputRecord, CliError> {
    if !path.exists() {
        return Err(CliError::missing(format!(
            "input {} does not exist",
            path.display()
        )));
    }
    let mut h = Sha256::new();
    if path.is_dir() {
        let mut names: Vec<PathBuf> = fs::read_dir(path)?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()?;
        names.sort();
        for n in names.iter().filter(|n| n.is_file()) {
            h.update(n.file_name().unwrap_or_default().as_encoded_bytes());
            h.update(fs::read(n)?);
        }
    } else {
        h.update(fs::read(path)?);
    }
    Ok(InputRecord {
        path: path.display().to_string(),
        sha256: hex::encode(h.finalize()),
    })
}

/// Output directory written in a sibling temp dir and renamed into place,
/// so a failed run never leaves a partial `--out`.
pub struct Staging {
    tmp: TempDir,
    target: PathBuf,
}

impl Staging {
    pub fn new(target: &Path) -> Result<Self, CliError> {
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_owned(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent)?;
        let tmp = tempfile::Builder::new()
            .prefix(".vfcam-")
            .tempdir_in(&parent)?;
        Ok(Self {
            tmp,
            target: target.to_owned(),
        })
    }

    pub fn path(&self) -> &Path {
        self.tmp.path()
    }

    pub fn commit(self) -> Result<(), CliError> {
        if self.target.is_dir() {
            fs::remove_dir_all(&self.target)?;
        } else if self.target.exists() {
            return Err(CliError::config(format!(
                "--out {} exists and is not a directory",
                self.target.display()
            )));
        }
        fs::rename(self.tmp.path(), &self.target)?;
        Ok(())
    }
}

/// Sorted file names under `dir`, subdirectories as `sub/name`.
pub fn list_outputs(dir: &Path) -> Result<Vec<String>, CliError> {
    let mut out = Vec::new();
    walk(dir, "", &mut out)?;
    out.sort();
    Ok(out)
}

fn walk(dir: &Path, prefix: &str, out: &mut Vec<String>) -> Result<(), CliError> {
    for e in fs::read_dir(dir)? {
        let e = e?;
        let name = format!("{prefix}{}", e.file_name().to_string_lossy());
        if e.file_type()?.is_dir() {
            walk(&e.path(), &format!("{name}/"), out)?;
        } else {
            out.push(name);
        }
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
