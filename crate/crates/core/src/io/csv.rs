use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::scalar::Real;

pub const SITES_HEADER: &str = "index,x_m,y_m";

/// Site table with shortest round-trip float formatting.
pub fn sites_csv<T: Real>(sites: &[Point<T>]) -> String {
    let mut s = String::from(SITES_HEADER);
    s.push('\n');
    for (i, p) in sites.iter().enumerate() {
        let _ = writeln!(s, "{i},{},{}", p.x.as_f64(), p.y.as_f64());
    }
    s
}

fn rows(text: &str, header: &str, what: &'static str) -> Result<Vec<Vec<String>>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.trim() == header => {}
        Some(h) => {
            return Err(Error::format(
                what,
                format!("expected header {header:?}, found {h:?}"),
            ))
        }
        None => return Err(Error::format(what, "empty file")),
    }
    let n = header.split(',').count();
    lines
        .enumerate()
        .map(|(i, l)| {
            let cells: Vec<String> = l.split(',').map(|c| c.trim().to_string()).collect();
            if cells.len() != n {
                return Err(Error::format(
                    what,
                    format!("row {} has {} fields, expected {n}", i + 1, cells.len()),
                ));
            }
            Ok(cells)
        })
        .collect()
}

fn num(s: &str, what: &'static str) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::format(what, format!("not a number: {s:?}")))
}

pub fn parse_sites_csv<T: Real>(text: &str) -> Result<Vec<Point<T>>> {
    let rows = rows(text, SITES_HEADER, "sites CSV")?;
    let mut out = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        let idx = num(&r[0], "sites CSV")?;
        if idx != i as f64 {
            return Err(Error::format(
                "sites CSV",
                format!("row {i} carries index {idx}"),
            ));
        }
        out.push(Point::new(
            T::lit(num(&r[1], "sites CSV")?),
            T::lit(num(&r[2], "sites CSV")?),
        ));
    }
    Ok(out)
}

pub fn load_sites_csv<T: Real>(path: impl AsRef<Path>) -> Result<Vec<Point<T>>> {
    parse_sites_csv(&fs::read_to_string(path)?)
}

pub const RESPONSE_HEADER: &str = "wavelength_nm,r,g,b";

/// Tabulated color response; wavelengths converted to meters.
pub fn parse_response_csv<T: Real>(text: &str) -> Result<Vec<(T, [T; 3])>> {
    rows(text, RESPONSE_HEADER, "response CSV")?
        .iter()
        .map(|r| {
            let v = |i: usize| num(&r[i], "response CSV").map(T::lit);
            Ok((
                T::lit(num(&r[0], "response CSV")? * 1e-9),
                [v(1)?, v(2)?, v(3)?],
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sites_round_trip_exactly() {
        let pts = vec![Point::new(1.0 / 3.0, 2e-4), Point::new(0.1 + 0.2, 7.25e-5)];
        let text = sites_csv(&pts);
        assert!(text.starts_with("index,x_m,y_m\n0,"));
        let back: Vec<Point<f64>> = parse_sites_csv(&text).unwrap();
        assert_eq!(back, pts);
    }

    #[test]
    fn bad_rows_rejected() {
        assert!(parse_sites_csv::<f64>("index,x_m,y_m\n0,1\n").is_err());
        assert!(parse_sites_csv::<f64>("i,x,y\n0,1,2\n").is_err());
        assert!(parse_sites_csv::<f64>("index,x_m,y_m\n1,1,2\n").is_err());
    }

    #[test]
    fn response_in_nanometers() {
        let t: Vec<(f64, [f64; 3])> =
            parse_response_csv("wavelength_nm,r,g,b\n500,0.1,0.5,0.2\n").unwrap();
        assert!((t[0].0 - 500e-9).abs() < 1e-20);
        assert_eq!(t[0].1, [0.1, 0.5, 0.2]);
    }
}
