//! File formats: PFM float rasters, PNG previews and label maps, CSV tables
//! and spectral cube directories.

mod csv;
mod pfm;
mod png;

pub use self::csv::{
    load_sites_csv, parse_response_csv, parse_sites_csv, sites_csv, RESPONSE_HEADER, SITES_HEADER,
};
pub use self::pfm::{load_pfm, read_pfm, save_pfm, write_pfm};
pub use self::png::{
    load_image_png, load_labels_png, save_image_png, save_labels_png, save_preview_png, ToneMap,
};

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::RasterImage;
use crate::raster::Raster;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CubeManifest {
    pub wavelengths_m: Vec<f64>,
    pub planes: Vec<String>,
}

pub const CUBE_MANIFEST: &str = "cube.json";

/// Writes a spectral image as one PFM per wavelength plus `cube.json`.
pub fn save_cube<T: Real>(dir: impl AsRef<Path>, img: &RasterImage<T>) -> Result<()> {
    let dir = dir.as_ref();
    let wl = img
        .wavelengths
        .as_ref()
        .ok_or_else(|| Error::invalid("image", "cube needs wavelengths"))?;
    fs::create_dir_all(dir)?;
    let planes: Vec<String> = (0..img.channels())
        .map(|i| format!("plane_{i:03}.pfm"))
        .collect();
    for (name, p) in planes.iter().zip(&img.planes) {
        save_pfm(dir.join(name), &[p])?;
    }
    let manifest = CubeManifest {
        wavelengths_m: wl.iter().map(|l| l.as_f64()).collect(),
        planes,
    };
    fs::write(
        dir.join(CUBE_MANIFEST),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    Ok(())
}

pub fn load_cube<T: Real>(dir: impl AsRef<Path>) -> Result<RasterImage<T>> {
    let dir = dir.as_ref();
    let manifest: CubeManifest =
        serde_json::from_str(&fs::read_to_string(dir.join(CUBE_MANIFEST))?)?;
    if manifest.planes.len() != manifest.wavelengths_m.len() {
        return Err(Error::format("cube", "plane and wavelength counts differ"));
    }
    let planes = manifest
        .planes
        .iter()
        .map(|name| {
            let mut p: Vec<Raster<T>> = load_pfm(dir.join(name))?;
            if p.len() != 1 {
                return Err(Error::format(
                    "cube",
                    format!("{name} is not single-channel"),
                ));
            }
            Ok(p.remove(0))
        })
        .collect::<Result<Vec<_>>>()?;
    RasterImage::spectral(
        planes,
        manifest.wavelengths_m.iter().map(|&l| T::lit(l)).collect(),
    )
}

/// Loads a scene or capture from a PFM, PNG or cube directory.
pub fn load_image<T: Real>(path: impl AsRef<Path>, gamma: f64) -> Result<RasterImage<T>> {
    let path = path.as_ref();
    if path.is_dir() {
        return load_cube(path);
    }
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("pfm") => {
            let planes: Vec<Raster<T>> = load_pfm(path)?;
            if planes.len() == 3 {
                let [r, g, b]: [Raster<T>; 3] = planes.try_into().expect("three planes");
                RasterImage::rgb(r, g, b)
            } else {
                Ok(RasterImage::mono(
                    planes.into_iter().next().expect("one plane"),
                ))
            }
        }
        Some("png") => load_image_png(path, gamma),
        _ => Err(Error::format(
            "image",
            format!("unsupported file {}", path.display()),
        )),
    }
}

/// Saves a 1- or 3-plane image as PFM.
pub fn save_image_pfm<T: Real>(path: impl AsRef<Path>, img: &RasterImage<T>) -> Result<()> {
    let planes: Vec<&Raster<T>> = img.planes.iter().collect();
    save_pfm(path, &planes)
}
