//! Unitary Fourier transforms and chirp-z resampling on the grid.
//!
//! Convention: `Ff(xi) = (2pi)^{-n/2} int e^{-i x xi} f(x) dx`, discretized
//! so that Parseval holds to roundoff. With nodes symmetric about zero and
//! `dx * dxi * N = 2 pi`, the shift phases reduce to `(-1)^j` factors on
//! both sides of a plain FFT.

use super::{Field, Grid, Space};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::{Arc, Mutex, OnceLock};

fn planner() -> &'static Mutex<FftPlanner<f64>> {
    static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    PLANNER.get_or_init(|| Mutex::new(FftPlanner::new()))
}

fn plan(len: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    let mut p = planner().lock().unwrap();
    if forward {
        p.plan_fft_forward(len)
    } else {
        p.plan_fft_inverse(len)
    }
}

/// Apply `line_op` to every 1-d line of the row-major array along `axis`.
pub(crate) fn for_each_line(
    values: &mut [Complex64],
    grid: &Grid,
    axis: usize,
    mut line_op: impl FnMut(&mut [Complex64]),
) {
    let n = grid.n as usize;
    let npts = grid.npts;
    let stride = npts.pow((n - 1 - axis) as u32);
    let lines = values.len() / npts;
    let mut buf = vec![Complex64::new(0.0, 0.0); npts];
    for line in 0..lines {
        // base index of this line: expand `line` skipping `axis`
        let block = line / stride;
        let offset = line % stride;
        let base = block * stride * npts + offset;
        for (k, b) in buf.iter_mut().enumerate() {
            *b = values[base + k * stride];
        }
        line_op(&mut buf);
        for (k, b) in buf.iter().enumerate() {
            values[base + k * stride] = *b;
        }
    }
}

fn checker_phase(values: &mut [Complex64], grid: &Grid) {
    // multiply by (-1)^{sum of per-axis indices}
    for (idx, v) in values.iter_mut().enumerate() {
        let ix = grid.unravel(idx);
        let s: usize = ix[..grid.n as usize].iter().sum();
        if s % 2 == 1 {
            *v = -*v;
        }
    }
}

/// Unitary forward transform; input must be in position space.
pub fn fourier(f: &Field) -> Field {
    assert_eq!(f.space, Space::Position, "fourier expects a position field");
    let grid = f.grid;
    let mut values = f.values.clone();
    checker_phase(&mut values, &grid);
    let fft = plan(grid.npts, true);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for axis in 0..grid.n as usize {
        for_each_line(&mut values, &grid, axis, |line| {
            fft.process_with_scratch(line, &mut scratch);
        });
    }
    checker_phase(&mut values, &grid);
    let scale = ((2.0 * std::f64::consts::PI).sqrt().recip() * grid.dx()).powi(grid.n as i32);
    for v in &mut values {
        *v *= scale;
    }
    Field {
        grid,
        space: Space::Frequency,
        values,
    }
}

/// Unitary inverse transform; input must be in frequency space.
pub fn inverse_fourier(f: &Field) -> Field {
    assert_eq!(
        f.space,
        Space::Frequency,
        "inverse_fourier expects a frequency field"
    );
    let grid = f.grid;
    let mut values = f.values.clone();
    checker_phase(&mut values, &grid);
    let fft = plan(grid.npts, false);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for axis in 0..grid.n as usize {
        for_each_line(&mut values, &grid, axis, |line| {
            fft.process_with_scratch(line, &mut scratch);
        });
    }
    checker_phase(&mut values, &grid);
    let scale = ((2.0 * std::f64::consts::PI).sqrt().recip() * grid.dxi()).powi(grid.n as i32);
    for v in &mut values {
        *v *= scale;
    }
    Field {
        grid,
        space: Space::Position,
        values,
    }
}

/// Precomputed Bluestein machinery for sums
/// `S_j = sum_p g_p e^{i angle (j - N/2)(p - N/2)}`, j, p = 0..N-1.
pub struct CztPlan {
    npts: usize,
    padded: usize,
    /// chirp e^{i angle (k - N/2)^2 / 2}
    chirp: Vec<Complex64>,
    /// FFT of the kernel c_m = e^{-i angle m^2 / 2}
    kernel_hat: Vec<Complex64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl CztPlan {
    pub fn new(npts: usize, angle: f64) -> Self {
        let padded = (2 * npts).next_power_of_two();
        let m = npts as f64 / 2.0;
        let chirp: Vec<Complex64> = (0..npts)
            .map(|k| {
                let d = k as f64 - m;
                Complex64::from_polar(1.0, angle * d * d / 2.0)
            })
            .collect();
        let mut kernel = vec![Complex64::new(0.0, 0.0); padded];
        for mm in -(npts as i64 - 1)..=(npts as i64 - 1) {
            let idx = if mm >= 0 {
                mm as usize
            } else {
                (padded as i64 + mm) as usize
            };
            let d = mm as f64;
            kernel[idx] = Complex64::from_polar(1.0, -angle * d * d / 2.0);
        }
        let fwd = plan(padded, true);
        let inv = plan(padded, false);
        let mut kernel_hat = kernel;
        let mut scratch = vec![Complex64::new(0.0, 0.0); fwd.get_inplace_scratch_len()];
        fwd.process_with_scratch(&mut kernel_hat, &mut scratch);
        CztPlan {
            npts,
            padded,
            chirp,
            kernel_hat,
            fwd,
            inv,
        }
    }

    /// Evaluate the chirp sum in place on one line of length `npts`.
    pub fn run(&self, line: &mut [Complex64]) {
        assert_eq!(line.len(), self.npts);
        let mut b = vec![Complex64::new(0.0, 0.0); self.padded];
        for (p, v) in line.iter().enumerate() {
            b[p] = v * self.chirp[p];
        }
        let mut scratch = vec![
            Complex64::new(0.0, 0.0);
            self.fwd
                .get_inplace_scratch_len()
                .max(self.inv.get_inplace_scratch_len())
        ];
        self.fwd.process_with_scratch(&mut b, &mut scratch);
        for (k, v) in b.iter_mut().enumerate() {
            *v *= self.kernel_hat[k];
        }
        self.inv.process_with_scratch(&mut b, &mut scratch);
        let norm = 1.0 / self.padded as f64;
        for j in 0..self.npts {
            line[j] = b[j] * self.chirp[j] * norm;
        }
    }
}

/// Trigonometric interpolation of a position-space field at the scaled
/// nodes `s * x_j`, zero outside the box.
///
/// Values with `|s x_j| > L` are set to zero rather than wrapped; the
/// caller decides whether the discarded mass is acceptable.
pub fn resample_scaled(f: &Field, s: f64) -> Field {
    assert_eq!(f.space, Space::Position);
    assert!(s.is_finite() && s != 0.0);
    let grid = f.grid;
    let fhat = fourier(f);
    let mut values = fhat.values;
    // f(y) = (2pi)^{-n/2} dxi^n sum_p e^{i y xi_p} fhat_p, evaluated at
    // y = s x_j: exponent i s (j-M)(p-M) dx dxi = i (2 pi s / N) (j-M)(p-M)
    let angle = 2.0 * std::f64::consts::PI * s / grid.npts as f64;
    let plan = CztPlan::new(grid.npts, angle);
    for axis in 0..grid.n as usize {
        for_each_line(&mut values, &grid, axis, |line| plan.run(line));
    }
    let scale = ((2.0 * std::f64::consts::PI).sqrt().recip() * grid.dxi()).powi(grid.n as i32);
    for v in &mut values {
        *v *= scale;
    }
    // zero-mask nodes that left the box
    let limit = grid.l * (1.0 + 1e-12);
    for (idx, v) in values.iter_mut().enumerate() {
        let ix = grid.unravel(idx);
        for a in 0..grid.n as usize {
            if (s * grid.x(ix[a])).abs() > limit {
                *v = Complex64::new(0.0, 0.0);
            }
        }
    }
    Field {
        grid,
        space: Space::Position,
        values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(grid: Grid) -> Field {
        Field::from_fn(grid, |x| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            Complex64::new((-r2 / 2.0).exp(), 0.0)
        })
    }

    #[test]
    fn gaussian_is_fourier_fixed_point() {
        let g = Grid::new(1, 256, 20.0).unwrap();
        let f = gaussian(g);
        let fhat = fourier(&f);
        for i in 0..g.npts {
            let xi = g.xi(i);
            let expect = (-xi * xi / 2.0).exp();
            assert!(
                (fhat.values[i] - Complex64::new(expect, 0.0)).norm() < 1e-12,
                "xi = {xi}"
            );
        }
    }

    #[test]
    fn parseval_and_roundtrip() {
        let g = Grid::new(1, 128, 10.0).unwrap();
        let f = Field::from_fn(g, |x| {
            Complex64::new((-x[0] * x[0]).exp(), (0.7 * x[0]).sin() * (-x[0] * x[0] / 4.0).exp())
        });
        let fhat = fourier(&f);
        assert!((fhat.l2_norm() - f.l2_norm()).abs() < 1e-12 * f.l2_norm());
        let back = inverse_fourier(&fhat);
        let err: f64 = f
            .values
            .iter()
            .zip(&back.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn spike_has_flat_modulus() {
        let g = Grid::new(1, 64, 8.0).unwrap();
        let mut f = Field::zeros(g, Space::Position);
        f.values[40] = Complex64::new(1.0, 0.0);
        let fhat = fourier(&f);
        let m0 = fhat.values[0].norm();
        for v in &fhat.values {
            assert!((v.norm() - m0).abs() < 1e-12);
        }
    }

    #[test]
    fn fourier_2d_gaussian() {
        let g = Grid::new(2, 64, 10.0).unwrap();
        let f = gaussian(g);
        let fhat = fourier(&f);
        for idx in [0usize, 64 * 32 + 32, 64 * 40 + 20] {
            let ix = g.unravel(idx);
            let r2 = g.xi(ix[0]).powi(2) + g.xi(ix[1]).powi(2);
            let expect = (-r2 / 2.0).exp();
            assert!((fhat.values[idx] - Complex64::new(expect, 0.0)).norm() < 1e-10);
        }
        assert!((fhat.l2_norm() - f.l2_norm()).abs() < 1e-12 * f.l2_norm());
    }

    #[test]
    fn resample_identity() {
        let g = Grid::new(1, 128, 10.0).unwrap();
        let f = Field::from_fn(g, |x| {
            Complex64::new((-x[0] * x[0] / 2.0).exp() * (1.3 * x[0]).cos(), 0.0)
        });
        let r = resample_scaled(&f, 1.0);
        let err: f64 = f
            .values
            .iter()
            .zip(&r.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "err = {err}");
    }

    #[test]
    fn resample_half_matches_analytic() {
        let g = Grid::new(1, 256, 16.0).unwrap();
        let f = gaussian(g);
        let r = resample_scaled(&f, 0.5);
        for i in 0..g.npts {
            let x = g.x(i);
            let expect = (-(0.5 * x) * (0.5 * x) / 2.0).exp();
            assert!((r.values[i] - Complex64::new(expect, 0.0)).norm() < 1e-10, "x = {x}");
        }
    }

    #[test]
    fn resample_masks_outside_box() {
        let g = Grid::new(1, 128, 8.0).unwrap();
        let f = gaussian(g);
        let r = resample_scaled(&f, 3.0);
        // node x = 4 maps to 12 > L: masked
        let i = (4.0f64 / g.dx()) as usize + 64;
        assert_eq!(r.values[i], Complex64::new(0.0, 0.0));
        // interior node matches the dilated Gaussian
        let ix = 70; // x = 0.75, 3x = 2.25 inside
        let x = g.x(ix);
        let expect = (-(3.0 * x) * (3.0 * x) / 2.0).exp();
        assert!((r.values[ix] - Complex64::new(expect, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn czt_matches_direct_sum() {
        let npts = 32;
        let angle = 0.37;
        let mut line: Vec<Complex64> = (0..npts)
            .map(|p| Complex64::new((p as f64 * 0.3).sin(), (p as f64 * 0.11).cos()))
            .collect();
        let direct: Vec<Complex64> = (0..npts)
            .map(|j| {
                (0..npts)
                    .map(|p| {
                        let ph = angle * (j as f64 - 16.0) * (p as f64 - 16.0);
                        line[p] * Complex64::from_polar(1.0, ph)
                    })
                    .sum()
            })
            .collect();
        let plan = CztPlan::new(npts, angle);
        plan.run(&mut line);
        for j in 0..npts {
            assert!((line[j] - direct[j]).norm() < 1e-10, "j = {j}");
        }
    }
}
