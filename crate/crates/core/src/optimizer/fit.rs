use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Least-squares polynomial coefficients `c[0] + c[1] x + ... + c[d] x^d`.
pub fn fit_polynomial(xs: &[f64], ys: &[f64], degree: usize) -> Result<Vec<f64>> {
    if xs.len() != ys.len() {
        return Err(Error::invalid("fit", "x and y lengths differ"));
    }
    let n = degree + 1;
    if xs.len() < n {
        return Err(Error::invalid(
            "fit",
            format!(
                "degree {degree} needs at least {n} samples, got {}",
                xs.len()
            ),
        ));
    }
    // Center and scale x for conditioning, then expand back.
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let scale = xs
        .iter()
        .map(|x| (x - mean).abs())
        .fold(0.0, f64::max)
        .max(1e-300);
    let mut ata = vec![vec![0.0; n]; n];
    let mut aty = vec![0.0; n];
    for (&x, &y) in xs.iter().zip(ys) {
        let t = (x - mean) / scale;
        let pows: Vec<f64> = (0..n).map(|k| t.powi(k as i32)).collect();
        for i in 0..n {
            aty[i] += pows[i] * y;
            for j in 0..n {
                ata[i][j] += pows[i] * pows[j];
            }
        }
    }
    let c = solve(ata, aty).ok_or_else(|| Error::invalid("fit", "singular normal equations"))?;
    // p(x) = Σ c_k ((x - m)/s)^k, expanded by the binomial theorem.
    let mut out = vec![0.0; n];
    for (k, &ck) in c.iter().enumerate() {
        let sk = ck / scale.powi(k as i32);
        for j in 0..=k {
            out[j] += sk * binomial(k, j) as f64 * (-mean).powi((k - j) as i32);
        }
    }
    Ok(out)
}

pub fn eval_polynomial(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &v| acc * x + v)
}

fn binomial(n: usize, k: usize) -> u64 {
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

/// Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

/// Least-squares line with its coefficient of determination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.is_empty() {
        return Err(Error::invalid("fit", "need matching nonempty samples"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res <= f64::EPSILON * (1.0 + my * my) {
        1.0
    } else {
        0.0
    };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_parabola() {
        let xs = [5.0, 10.0, 15.0, 20.0, 23.0, 25.0, 30.0, 40.0];
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| 3.0 - 0.01 * (x - 23.0) * (x - 23.0))
            .collect();
        let c = fit_polynomial(&xs, &ys, 2).unwrap();
        assert!((c[2] + 0.01).abs() < 1e-12);
        assert!((c[1] - 0.46).abs() < 1e-10);
        assert!((c[0] - (3.0 - 5.29)).abs() < 1e-9);
    }

    #[test]
    fn cubic_fit() {
        let xs: Vec<f64> = (0..6).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 - x + 0.5 * x * x * x).collect();
        let c = fit_polynomial(&xs, &ys, 3).unwrap();
        for (a, b) in c.iter().zip([1.0, -1.0, 0.0, 0.5]) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!((eval_polynomial(&c, 2.0) - 3.0).abs() < 1e-9);
    }

    #[test]
    fn line_through_origin() {
        let f = fit_line(&[1.0, 2.0, 4.0], &[3.0, 6.0, 12.0]).unwrap();
        assert!((f.slope - 3.0).abs() < 1e-12);
        assert!(f.intercept.abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn repeated_area_is_still_defined() {
        let f = fit_line(&[1.0, 1.0, 2.0], &[3.0, 5.0, 8.0]).unwrap();
        assert!(f.r_squared < 1.0 && f.r_squared.is_finite());
        let g = fit_line(&[1.0, 1.0, 1.0], &[3.0, 5.0, 8.0]).unwrap();
        assert_eq!(g.r_squared, 0.0);
        let h = fit_line(&[1.0, 1.0, 1.0], &[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(h.r_squared, 1.0);
    }
}
