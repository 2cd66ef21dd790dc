//! Small dense least-squares helpers shared by the fitting operations.
//!
//! Everything here works on handfuls of coefficients, so plain normal
//! equations with full pivoting are enough; no linear-algebra crate needed.

use crate::error::{Error, Result};
use serde::Serialize;

/// Result of a straight-line fit `y = slope * x + intercept`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub slope_se: f64,
    /// Residual root-mean-square.
    pub rms: f64,
}

/// Ordinary least squares for a line through `(x, y)` pairs.
pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::IllConditioned(format!(
            "line fit needs >= 3 points, got {}",
            x.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|&v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(&u, &v)| (u - mx) * (v - my)).sum();
    if sxx <= 0.0 || !sxx.is_finite() {
        return Err(Error::IllConditioned("zero spread in abscissa".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(&u, &v)| {
            let r = v - (slope * u + intercept);
            r * r
        })
        .sum();
    let dof = (x.len() - 2).max(1) as f64;
    let rms = (ss_res / dof).sqrt();
    let slope_se = rms / sxx.sqrt();
    Ok(LineFit {
        slope,
        intercept,
        slope_se,
        rms,
    })
}

/// Solve the least-squares problem `min ||A c - y||` for a small number of
/// columns via the normal equations with partial pivoting.
///
/// Returns the coefficients and the residual RMS. Errors out when the normal
/// matrix is numerically singular (condition estimate via pivot ratio).
pub fn lstsq(columns: &[Vec<f64>], y: &[f64]) -> Result<(Vec<f64>, f64)> {
    let m = y.len();
    let k = columns.len();
    if k == 0 || columns.iter().any(|c| c.len() != m) || m < k {
        return Err(Error::IllConditioned(format!(
            "lstsq shape mismatch: {} columns, {} rows",
            k, m
        )));
    }
    // Normal matrix and right-hand side.
    let mut a = vec![vec![0.0; k + 1]; k];
    for i in 0..k {
        for j in 0..k {
            a[i][j] = dot(&columns[i], &columns[j]);
        }
        a[i][k] = dot(&columns[i], y);
    }
    // Gaussian elimination with partial pivoting.
    let mut max_piv: f64 = 0.0;
    let mut min_piv = f64::INFINITY;
    for col in 0..k {
        let (pivot_row, pivot) = (col..k)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|l, r| l.1.total_cmp(&r.1))
            .unwrap();
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(Error::IllConditioned("singular normal matrix".into()));
        }
        max_piv = max_piv.max(pivot);
        min_piv = min_piv.min(pivot);
        a.swap(col, pivot_row);
        for r in col + 1..k {
            let f = a[r][col] / a[col][col];
            for c in col..=k {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    if min_piv / max_piv < 1e-13 {
        return Err(Error::IllConditioned(format!(
            "normal matrix pivot ratio {:e}",
            min_piv / max_piv
        )));
    }
    let mut coeffs = vec![0.0; k];
    for row in (0..k).rev() {
        let mut s = a[row][k];
        for c in row + 1..k {
            s -= a[row][c] * coeffs[c];
        }
        coeffs[row] = s / a[row][row];
    }
    let mut ss = 0.0;
    for r in 0..m {
        let pred: f64 = (0..k).map(|c| columns[c][r] * coeffs[c]).sum();
        let d = y[r] - pred;
        ss += d * d;
    }
    let dof = (m - k).max(1) as f64;
    Ok((coeffs, (ss / dof).sqrt()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&u, &v)| u * v).sum()
}

/// Bisection root finder for a continuous sign-changing function.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::RootNotBracketed { lo, hi });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
