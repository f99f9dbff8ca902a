//! Portable float map: `Pf` (grayscale) or `PF` (RGB) header, a width and
//! height line, a scale whose sign gives the byte order (negative means
//! little-endian), then rows of `f32` from bottom to top.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::Raster;
use crate::scalar::Real;

/// Writes one or three planes as little-endian PFM.
pub fn write_pfm<W: Write, T: Real>(mut out: W, planes: &[&Raster<T>]) -> Result<()> {
    let magic = match planes.len() {
        1 => "Pf",
        3 => "PF",
        n => {
            return Err(Error::format(
                "PFM",
                format!("{n} planes; only 1 or 3 supported"),
            ))
        }
    };
    let (w, h) = planes[0].dims();
    for p in planes {
        planes[0].check_dims(p.dims())?;
    }
    write!(out, "{magic}\n{w} {h}\n-1.0\n")?;
    let mut row = Vec::with_capacity(w * planes.len() * 4);
    for y in (0..h).rev() {
        row.clear();
        for x in 0..w {
            for p in planes {
                let v = p[(x, y)].to_f32().unwrap_or(f32::NAN);
                row.extend_from_slice(&v.to_le_bytes());
            }
        }
        out.write_all(&row)?;
    }
    out.flush()?;
    Ok(())
}

fn token<R: BufRead>(r: &mut R) -> Result<String> {
    let mut tok = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        if r.read(&mut byte)? == 0 {
            break;
        }
        if byte[0].is_ascii_whitespace() {
            if tok.is_empty() {
                continue;
            }
            break;
        }
        tok.push(byte[0]);
    }
    if tok.is_empty() {
        return Err(Error::format("PFM", "truncated header"));
    }
    String::from_utf8(tok).map_err(|_| Error::format("PFM", "non-ASCII header"))
}

/// Reads a PFM into one plane (`Pf`) or three planes (`PF`).
pub fn read_pfm<R: Read, T: Real>(input: R) -> Result<Vec<Raster<T>>> {
    let mut r = BufReader::new(input);
    let channels = match token(&mut r)?.as_str() {
        "Pf" => 1,
        "PF" => 3,
        m => return Err(Error::format("PFM", format!("bad magic {m:?}"))),
    };
    let parse = |s: String, what: &str| -> Result<usize> {
        s.parse()
            .map_err(|_| Error::format("PFM", format!("bad {what} {s:?}")))
    };
    let w = parse(token(&mut r)?, "width")?;
    let h = parse(token(&mut r)?, "height")?;
    let scale: f64 = token(&mut r)?
        .parse()
        .map_err(|_| Error::format("PFM", "bad scale"))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::format("PFM", "scale must be nonzero"));
    }
    let little = scale < 0.0;
    let mut bytes = vec![0u8; w * h * channels * 4];
    r.read_exact(&mut bytes)
        .map_err(|_| Error::format("PFM", "truncated pixel data"))?;
    let mut planes: Vec<Raster<T>> = (0..channels).map(|_| Raster::zeros(w, h)).collect();
    for (i, chunk) in bytes.chunks_exact(4).enumerate() {
        let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little {
            f32::from_le_bytes(b)
        } else {
            f32::from_be_bytes(b)
        };
        let c = i % channels;
        let px = i / channels;
        let (x, row) = (px % w, px / w);
        planes[c][(x, h - 1 - row)] = T::lit(v as f64);
    }
    Ok(planes)
}

pub fn save_pfm<T: Real>(path: impl AsRef<Path>, planes: &[&Raster<T>]) -> Result<()> {
    write_pfm(BufWriter::new(File::create(path)?), planes)
}

pub fn load_pfm<T: Real>(path: impl AsRef<Path>) -> Result<Vec<Raster<T>>> {
    read_pfm(File::open(path)?)
}
