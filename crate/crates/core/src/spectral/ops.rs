//! The M and D operators, the factorized linear propagator, Sobolev
//! norms, the fractional-Leibniz ratio, and dispersive-decay fitting.

use super::fft::{fourier, inverse_fourier, resample_scaled, CztPlan};
use super::{Field, Grid, Space};
use crate::error::{Error, Result};
use crate::fit;
use crate::nonlinearity::{self, NonlinearityParams};
use crate::oscillator::FundamentalPair;
use num_complex::Complex64;
use serde::Serialize;

/// Principal branch of `(i tau)^{n/2} = |tau|^{n/2} e^{i pi n sgn(tau)/4}`.
pub fn phase_i_tau_pow(tau: f64, n: u8) -> Complex64 {
    let half_n = n as f64 / 2.0;
    Complex64::from_polar(
        tau.abs().powf(half_n),
        std::f64::consts::FRAC_PI_4 * n as f64 * tau.signum(),
    )
}

/// Gauge factor M(tau): pointwise multiply by `e^{i |x|^2 / (2 tau)}`.
pub fn apply_m(f: &Field, tau: f64) -> Field {
    assert!(tau != 0.0 && tau.is_finite(), "M requires tau != 0");
    assert_eq!(f.space, Space::Position);
    let mut out = f.clone();
    for (idx, v) in out.values.iter_mut().enumerate() {
        let r2 = f.grid.x_radius_sq(idx);
        *v *= Complex64::from_polar(1.0, r2 / (2.0 * tau));
    }
    out
}

/// Dilation `(D(tau) f)(x) = (i tau)^{-n/2} f(x / tau)` by band-limited
/// resampling.
pub fn apply_d(f: &Field, tau: f64) -> Result<Field> {
    assert!(tau != 0.0 && tau.is_finite(), "D requires tau != 0");
    f.assert_space(Space::Position)?;
    // mass that the output grid cannot see: |x| > L / |tau| never gets
    // sampled when |tau| > 1
    if tau.abs() > 1.0 {
        let bound = f.grid.l / tau.abs();
        let grid = f.grid;
        let fraction = f.mass_fraction_where(|idx| {
            let ix = grid.unravel(idx);
            (0..grid.n as usize).any(|a| grid.x(ix[a]).abs() > bound)
        });
        if fraction > 1e-8 {
            return Err(Error::DomainEscape { fraction, bound });
        }
    }
    let mut out = resample_scaled(f, 1.0 / tau);
    let pref = phase_i_tau_pow(tau, f.grid.n).inv();
    for v in &mut out.values {
        *v *= pref;
    }
    Ok(out)
}

/// Inverse dilation `(D(tau)^{-1} f)(x) = (i tau)^{n/2} f(tau x)`.
///
/// Nodes with `|tau x|` outside the box evaluate to zero; the caller is
/// responsible for the discarded content (used with concentrated fields).
pub fn apply_d_inverse(f: &Field, tau: f64) -> Result<Field> {
    assert!(tau != 0.0 && tau.is_finite());
    f.assert_space(Space::Position)?;
    let mut out = resample_scaled(f, tau);
    let pref = phase_i_tau_pow(tau, f.grid.n);
    for v in &mut out.values {
        *v *= pref;
    }
    Ok(out)
}

/// Fused `D(tau) F`: evaluates `(i tau)^{-n/2} (F f)(x / tau)` directly on
/// the position grid by a chirp-z transform, avoiding any intermediate
/// grid retagging. This is the workhorse of the propagator: for large
/// dilations the sample points `x/tau` sit deep inside the frequency box.
fn dilated_fourier(f: &Field, tau: f64, dilation_pref: Complex64) -> Field {
    assert_eq!(f.space, Space::Position);
    let grid = f.grid;
    let mut values = f.values.clone();
    // (F f)(x_j / tau) = (2pi)^{-n/2} dx^n sum_k e^{-i (k-M)(j-M) dx^2/tau} f_k
    let angle = -grid.dx() * grid.dx() / tau;
    let plan = CztPlan::new(grid.npts, angle);
    for axis in 0..grid.n as usize {
        super::fft::for_each_line(&mut values, &grid, axis, |line| plan.run(line));
    }
    let scale = ((2.0 * std::f64::consts::PI).sqrt().recip() * grid.dx()).powi(grid.n as i32);
    let pref = dilation_pref * scale;
    // frequencies beyond the Nyquist box alias; zero them (relevant only
    // for |tau| < L dx / pi, far below propagator use)
    let xi_max = std::f64::consts::PI / grid.dx() * (1.0 + 1e-12);
    for (idx, v) in values.iter_mut().enumerate() {
        let ix = grid.unravel(idx);
        let escaped = (0..grid.n as usize).any(|a| (grid.x(ix[a]) / tau).abs() > xi_max);
        *v = if escaped {
            Complex64::new(0.0, 0.0)
        } else {
            *v * pref
        };
    }
    Field {
        grid,
        space: Space::Position,
        values,
    }
}

/// `(i zeta2(t))^{n/2}` as the propagator needs it: the principal branch
/// near t = 0, continued through each zero of zeta2 between 0 and t. Every
/// crossing (a focal point of the classical flow) contributes a factor
/// `exp(i pi n / 2)` here — equivalently `exp(-i pi n / 2)` on the
/// propagator — which the sign-based principal branch misses once zeta2
/// has changed sign.
fn continued_i_zeta2_pow(pair: &FundamentalPair, t: f64, z2: f64, n: u8) -> Complex64 {
    let m = pair.maslov_count(t) as f64;
    let s = if t >= 0.0 { 1.0 } else { -1.0 };
    Complex64::from_polar(
        z2.abs().powf(n as f64 / 2.0),
        s * std::f64::consts::FRAC_PI_4 * n as f64 * (1.0 + 2.0 * m),
    )
}

fn zeta_preconditions(pair: &FundamentalPair, t: f64) -> Result<(f64, f64, f64)> {
    let v = pair.eval(t);
    for (name, val) in [("zeta1", v.z1), ("zeta2", v.z2), ("zeta2'", v.dz2)] {
        if val.abs() < 1e-8 || !val.is_finite() {
            return Err(Error::SingularTime {
                t,
                which: match name {
                    "zeta1" => "zeta1",
                    "zeta2" => "zeta2",
                    _ => "zeta2'",
                },
            });
        }
    }
    Ok((v.z1, v.z2, v.dz2))
}

/// Linear propagator `U_0(t, 0) f = M(z2/z2') D(z2) F M(z2/z1) f`.
pub fn mdfm_propagate(f: &Field, pair: &FundamentalPair, t: f64) -> Result<Field> {
    f.assert_space(Space::Position)?;
    let (z1, z2, dz2) = zeta_preconditions(pair, t)?;
    let g = apply_m(f, z2 / z1);
    let pref = continued_i_zeta2_pow(pair, t, z2, f.grid.n).inv();
    let h = dilated_fourier(&g, z2, pref);
    let out = apply_m(&h, z2 / dz2);
    let n_in = f.l2_norm();
    let n_out = out.l2_norm();
    if n_in > 0.0 {
        let fraction = ((n_out / n_in).powi(2) - 1.0).abs();
        if fraction > 1e-8 {
            return Err(Error::DomainEscape {
                fraction,
                bound: f.grid.l,
            });
        }
    }
    Ok(out)
}

/// Inverse propagator `U_0(0, t) f`, used to pull a solution back to the
/// profile `v(t) = U_0(0, t) u(t)`.
///
/// Frequency nodes with `|z2 xi| > L` are zero-masked (band limitation of
/// the stored field); accurate when the frequency content is concentrated.
pub fn mdfm_inverse(f: &Field, pair: &FundamentalPair, t: f64) -> Result<Field> {
    f.assert_space(Space::Position)?;
    let (z1, z2, dz2) = zeta_preconditions(pair, t)?;
    let g = apply_m(f, -z2 / dz2);
    // w_p = (i z2)^{n/2} g(z2 xi_p): scaled resampling onto the xi-grid
    let s = z2 * f.grid.dxi() / f.grid.dx();
    let mut w = resample_scaled(&g, s);
    let pref = continued_i_zeta2_pow(pair, t, z2, f.grid.n);
    for v in &mut w.values {
        *v *= pref;
    }
    let wf = Field {
        grid: f.grid,
        space: Space::Frequency,
        values: w.values,
    };
    let out = inverse_fourier(&wf);
    Ok(apply_m(&out, -z2 / z1))
}

/// `||U_0(t,0) f||_infty` without materializing the propagated field:
/// equals `|z2|^{-n/2} sup |F(M(z2/z1) f)|`, evaluated on a 2x zero-padded
/// frequency grid to control off-node peaks. Valid at any t the
/// preconditions allow, regardless of how far the solution has spread.
pub fn mdfm_sup_norm(f: &Field, pair: &FundamentalPair, t: f64) -> Result<f64> {
    f.assert_space(Space::Position)?;
    let (z1, z2, _dz2) = zeta_preconditions(pair, t)?;
    let g = apply_m(f, z2 / z1);
    // embed into a box twice as wide at the same dx (frequency refinement)
    let big = Grid::new(g.grid.n, g.grid.npts * 2, g.grid.l * 2.0)?;
    let mut padded = Field::zeros(big, Space::Position);
    let off = g.grid.npts / 2;
    for idx in 0..g.grid.len() {
        let ix = g.grid.unravel(idx);
        let mut bidx = 0usize;
        for a in 0..g.grid.n as usize {
            bidx = bidx * big.npts + ix[a] + off;
        }
        padded.values[bidx] = g.values[idx];
    }
    let ghat = fourier(&padded);
    Ok(z2.abs().powf(-(f.grid.n as f64) / 2.0) * ghat.linf_norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SobolevSide {
    /// H^{gamma, 0}: weight on frequencies.
    FrequencyWeighted,
    /// H^{0, gamma}: weight on positions.
    PositionWeighted,
}

/// Weighted Sobolev norm of a position-space field.
pub fn sobolev_norm(f: &Field, gamma: f64, side: SobolevSide) -> f64 {
    assert!(gamma >= 0.0);
    assert_eq!(f.space, Space::Position);
    match side {
        SobolevSide::FrequencyWeighted => {
            let fhat = fourier(f);
            let w = fhat.node_weight();
            (fhat
                .values
                .iter()
                .enumerate()
                .map(|(idx, v)| (1.0 + fhat.grid.xi_radius_sq(idx)).powf(gamma) * v.norm_sqr())
                .sum::<f64>()
                * w)
                .sqrt()
        }
        SobolevSide::PositionWeighted => {
            let w = f.node_weight();
            (f.values
                .iter()
                .enumerate()
                .map(|(idx, v)| (1.0 + f.grid.x_radius_sq(idx)).powf(gamma) * v.norm_sqr())
                .sum::<f64>()
                * w)
                .sqrt()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonlinearTerm {
    L,
    S,
}

/// Empirical fractional-Leibniz ratio
/// `||F(|f|) f||_{gamma,0} / (F(||f||_infty) ||f||_{gamma,0})` with the
/// selected term's coefficient set to 1.
pub fn leibniz_ratio(
    f: &Field,
    gamma: f64,
    params: &NonlinearityParams,
    which: NonlinearTerm,
) -> f64 {
    assert_eq!(f.space, Space::Position);
    let mut p = *params;
    match which {
        NonlinearTerm::L => {
            p.mu_l = 1.0;
            p.mu_s = 0.0;
        }
        NonlinearTerm::S => {
            p.mu_l = 0.0;
            p.mu_s = 1.0;
        }
    }
    let feval = |a: f64| nonlinearity::eval_f(a, &p);
    let mut g = f.clone();
    for v in &mut g.values {
        *v *= feval(v.norm());
    }
    let num = sobolev_norm(&g, gamma, SobolevSide::FrequencyWeighted);
    let den = feval(f.linf_norm()) * sobolev_norm(f, gamma, SobolevSide::FrequencyWeighted);
    num / den
}

pub use NonlinearTerm::{L as TermL, S as TermS};

/// Fitted decay exponents of a sup-norm time series.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DispersiveFit {
    /// Slope of log sup-norm against log |zeta2|; the dispersive law
    /// predicts -n/2.
    pub slope_vs_zeta2: f64,
    /// Coefficient of log t in the joint {log t, log log t} fit; predicted
    /// -n/4.
    pub slope_vs_t: f64,
    /// Coefficient of log log t; predicted -n/2.
    pub log_exponent: f64,
}

/// Fit the decay of `(t, ||u(t)||_infty)` samples beyond r0.
pub fn dispersive_fit(series: &[(f64, f64)], pair: &FundamentalPair) -> Result<DispersiveFit> {
    let r0 = pair.r0().unwrap_or(0.0);
    let pts: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|&(t, s)| t > r0.max(1.0) * 1.5 && s > 0.0)
        .collect();
    if pts.len() < 8 {
        return Err(Error::IllConditioned(format!(
            "dispersive fit needs >= 8 usable samples, got {}",
            pts.len()
        )));
    }
    let tmin = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let tmax = pts.iter().map(|p| p.0).fold(0.0, f64::max);
    if tmax / tmin < 100.0 {
        return Err(Error::IllConditioned(format!(
            "dispersive fit needs >= 2 decades of t, got {:.2}",
            (tmax / tmin).log10()
        )));
    }
    let logsup: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let logz2: Vec<f64> = pts.iter().map(|p| pair.zeta2(p.0).abs().ln()).collect();
    let line = fit::fit_line(&logz2, &logsup)?;
    let ones = vec![1.0; pts.len()];
    let logt: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let loglogt: Vec<f64> = logt.iter().map(|l| l.ln()).collect();
    let (coef, _rms) = fit::lstsq(&[ones, logt, loglogt], &logsup)?;
    Ok(DispersiveFit {
        slope_vs_zeta2: line.slope,
        slope_vs_t: coef[1],
        log_exponent: coef[2],
    })
}
