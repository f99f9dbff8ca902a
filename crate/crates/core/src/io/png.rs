use std::path::Path;

use image::{GrayImage, ImageBuffer, Luma, Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::imaging::RasterImage;
use crate::raster::Raster;
use crate::scalar::Real;

/// Tone curve for 8-bit previews of nonnegative data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToneMap {
    Linear,
    Sqrt,
    /// `log10` over four decades below the maximum.
    Log,
}

impl ToneMap {
    pub fn suffix(&self) -> &'static str {
        match self {
            ToneMap::Linear => "linear",
            ToneMap::Sqrt => "sqrt",
            ToneMap::Log => "log",
        }
    }
}

/// Label map as 16-bit grayscale.
pub fn save_labels_png(path: impl AsRef<Path>, labels: &Raster<u32>) -> Result<()> {
    let (w, h) = labels.dims();
    let mut data = Vec::with_capacity(w * h);
    for &l in labels.as_slice() {
        data.push(u16::try_from(l).map_err(|_| Error::format("PNG", "label exceeds 16 bits"))?);
    }
    let img: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(w as u32, h as u32, data).expect("buffer size");
    img.save(path)?;
    Ok(())
}

pub fn load_labels_png(path: impl AsRef<Path>) -> Result<Raster<u32>> {
    let img = image::open(path)?.into_luma16();
    let (w, h) = img.dimensions();
    Raster::from_vec(
        w as usize,
        h as usize,
        img.into_raw().into_iter().map(u32::from).collect(),
    )
}

/// 8-bit grayscale preview scaled to the raster maximum.
pub fn save_preview_png<T: Real>(
    path: impl AsRef<Path>,
    r: &Raster<T>,
    tone: ToneMap,
) -> Result<()> {
    let max = r.max().as_f64();
    let (w, h) = r.dims();
    let img = GrayImage::from_fn(w as u32, h as u32, |x, y| {
        let v = r[(x as usize, y as usize)].as_f64().max(0.0);
        let t = if max > 0.0 {
            match tone {
                ToneMap::Linear => v / max,
                ToneMap::Sqrt => (v / max).sqrt(),
                ToneMap::Log => ((v / max).max(1e-4).log10() + 4.0) / 4.0,
            }
        } else {
            0.0
        };
        Luma([(t.clamp(0.0, 1.0) * 255.0).round() as u8])
    });
    img.save(path)?;
    Ok(())
}

/// Loads a PNG as linear intensity in `[0, 1]`, undoing `gamma` (1 keeps the
/// stored values). Gray images give one plane, color images three.
pub fn load_image_png<T: Real>(path: impl AsRef<Path>, gamma: f64) -> Result<RasterImage<T>> {
    if !(gamma > 0.0) {
        return Err(Error::invalid("gamma", "must be positive"));
    }
    let img = image::open(path)?;
    let lin = |v: f64| T::lit(v.powf(gamma));
    if img.color().has_color() {
        let rgb = img.into_rgb16();
        let (w, h) = (rgb.width() as usize, rgb.height() as usize);
        let plane = |c: usize| {
            Raster::from_fn(w, h, |x, y| {
                lin(rgb.get_pixel(x as u32, y as u32)[c] as f64 / 65535.0)
            })
        };
        RasterImage::rgb(plane(0), plane(1), plane(2))
    } else {
        let g = img.into_luma16();
        let (w, h) = (g.width() as usize, g.height() as usize);
        Ok(RasterImage::mono(Raster::from_fn(w, h, |x, y| {
            lin(g.get_pixel(x as u32, y as u32)[0] as f64 / 65535.0)
        })))
    }
}

/// Writes a 1- or 3-plane image as 8-bit PNG, clipping to `[0, 1]` and
/// applying `1 / gamma` encoding.
pub fn save_image_png<T: Real>(
    path: impl AsRef<Path>,
    img: &RasterImage<T>,
    gamma: f64,
) -> Result<()> {
    let (w, h) = img.dims();
    let enc = |v: T| ((v.as_f64().clamp(0.0, 1.0)).powf(1.0 / gamma) * 255.0).round() as u8;
    match img.channels() {
        1 => {
            let p = &img.planes[0];
            GrayImage::from_fn(w as u32, h as u32, |x, y| {
                Luma([enc(p[(x as usize, y as usize)])])
            })
            .save(path)?;
        }
        3 => {
            RgbImage::from_fn(w as u32, h as u32, |x, y| {
                let (x, y) = (x as usize, y as usize);
                Rgb([
                    enc(img.planes[0][(x, y)]),
                    enc(img.planes[1][(x, y)]),
                    enc(img.planes[2][(x, y)]),
                ])
            })
            .save(path)?;
        }
        n => return Err(Error::format("PNG", format!("cannot store {n} planes"))),
    }
    Ok(())
}
