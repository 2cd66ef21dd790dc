//! The log-modified gauge-invariant nonlinearities, admissibility of the
//! constant R inside the logarithm, and the short/long-range threshold
//! classification of nonlinearity/decay pairs.

use crate::error::{Error, Result};
use crate::fit;
use crate::quad;
use serde::{Deserialize, Serialize};

/// Parameters of `F = F_L + F_S` with
/// `F_L(a) = mu_L a^{4/n} log(R + 1/a)` and
/// `F_S(a) = mu_S a^{4/n} (log(R + 1/a))^theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonlinearityParams {
    pub mu_l: f64,
    pub mu_s: f64,
    /// Short-range log exponent, in [0, 1).
    pub theta: f64,
    /// Constant inside the logarithm; must be admissible at `delta0`.
    pub r: f64,
    pub delta0: f64,
    /// Spatial dimension, 1..=3.
    pub n: u8,
}

impl NonlinearityParams {
    /// Validating constructor; the admissibility of R is checked for all
    /// theta-tilde on a grid of [0, 1].
    pub fn new(mu_l: f64, mu_s: f64, theta: f64, r: f64, delta0: f64, n: u8) -> Result<Self> {
        let p = NonlinearityParams {
            mu_l,
            mu_s,
            theta,
            r,
            delta0,
            n,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.n) {
            return Err(Error::InvalidConfig(format!("dimension n = {}", self.n)));
        }
        if !(0.0..1.0).contains(&self.theta) {
            return Err(Error::InvalidConfig(format!(
                "theta = {} outside [0, 1)",
                self.theta
            )));
        }
        if !(self.r > 0.0) {
            return Err(Error::InvalidConfig(format!("R = {} not positive", self.r)));
        }
        if !(self.delta0 > 0.0 && self.delta0 < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "delta0 = {} outside (0, 1)",
                self.delta0
            )));
        }
        for k in 0..=20 {
            let tt = k as f64 / 20.0;
            if !is_admissible_r(self.r, self.delta0, tt) {
                return Err(Error::InvalidConfig(format!(
                    "R = {} not admissible at delta0 = {}, theta_tilde = {}",
                    self.r, self.delta0, tt
                )));
            }
        }
        Ok(())
    }
}

/// Long-range term; continuously extended by 0 at zero amplitude.
pub fn eval_fl(amplitude: f64, p: &NonlinearityParams) -> f64 {
    debug_assert!(amplitude >= 0.0 || amplitude.is_nan());
    // below ~1e-70 the power underflows against the diverging log and the
    // continuum value is indistinguishable from the a = 0 extension
    if !(amplitude > 1e-70) || p.mu_l == 0.0 {
        return 0.0;
    }
    p.mu_l * amplitude.powf(4.0 / p.n as f64) * (p.r + 1.0 / amplitude).ln()
}

/// Short-range term with log exponent theta.
pub fn eval_fs(amplitude: f64, p: &NonlinearityParams) -> f64 {
    debug_assert!(amplitude >= 0.0 || amplitude.is_nan());
    if !(amplitude > 1e-70) || p.mu_s == 0.0 {
        return 0.0;
    }
    p.mu_s * amplitude.powf(4.0 / p.n as f64) * (p.r + 1.0 / amplitude).ln().powf(p.theta)
}

pub fn eval_f(amplitude: f64, p: &NonlinearityParams) -> f64 {
    eval_fl(amplitude, p) + eval_fs(amplitude, p)
}

/// The admissibility expression whose infimum over t > 0 must be >= 0:
/// `delta0 (log(R+1/t))^tt - tt/(Rt+1) (log(R+1/t))^{tt-1}`.
fn admissibility_expr(r: f64, delta0: f64, tt: f64, t: f64) -> f64 {
    let l = (r + 1.0 / t).ln();
    if tt == 0.0 {
        return delta0;
    }
    delta0 * l.powf(tt) - tt / (r * t + 1.0) * l.powf(tt - 1.0)
}

/// Decide whether R keeps `a^{delta0} (log(R+1/a))^{theta_tilde}` monotone
/// nondecreasing, via minimization of the derivative expression over a
/// log-spaced grid refined by golden section, plus the analytic limits.
pub fn is_admissible_r(r: f64, delta0: f64, theta_tilde: f64) -> bool {
    assert!(r > 0.0 && delta0 > 0.0 && delta0 < 1.0 && (0.0..=1.0).contains(&theta_tilde));
    if theta_tilde == 0.0 {
        // expression reduces to delta0 > 0; the power of the log is absent
        return r >= 1.0;
    }
    // t -> infinity limit: delta0 (log R)^tt >= 0 forces log R >= 0, and for
    // fractional powers the log must stay nonnegative on all of t > 0.
    if r < 1.0 {
        return false;
    }
    let n = 241;
    let (lo, hi) = (1e-12f64, 1e12f64);
    let mut best = f64::INFINITY;
    let mut best_i = 0usize;
    for i in 0..n {
        let t = lo * (hi / lo).powf(i as f64 / (n - 1) as f64);
        let v = admissibility_expr(r, delta0, theta_tilde, t);
        if v < best {
            best = v;
            best_i = i;
        }
    }
    // golden-section refinement in log t around the grid minimum
    let step = (hi / lo).ln() / (n - 1) as f64;
    let la = (lo.ln() + step * (best_i.saturating_sub(1)) as f64).max(lo.ln());
    let lb = (lo.ln() + step * (best_i + 1).min(n - 1) as f64).min(hi.ln());
    let g = |x: f64| admissibility_expr(r, delta0, theta_tilde, x.exp());
    let refined = golden_min(g, la, lb, 1e-10);
    best = best.min(refined);
    // analytic limits: t -> 0+ gives +infinity (tt > 0); t -> infinity gives
    // delta0 (log R)^tt >= 0, already enforced by r >= 1
    best >= -1e-14 * (1.0 + delta0)
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = 0.618_033_988_749_894_9_f64;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    fc.min(fd)
}

/// Smallest admissible R (to relative tolerance `tol`) over the full
/// theta-tilde grid, by bisection; the resulting monotonicity of
/// `a^{delta0} (log(R+1/a))^{tt}` is spot-checked on sample grids.
pub fn min_admissible_r(delta0: f64, tol: f64) -> Result<f64> {
    assert!(delta0 > 0.0 && delta0 < 1.0 && tol > 0.0);
    let admissible = |r: f64| (0..=20).all(|k| is_admissible_r(r, delta0, k as f64 / 20.0));
    let mut lo = 1e-3;
    if admissible(lo) {
        return Ok(lo);
    }
    let mut hi = 1.0;
    while !admissible(hi) {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::NoAdmissibleR {
                delta0,
                limit: 1e300,
            });
        }
    }
    while (hi - lo) / hi > tol {
        let mid = (lo * hi).sqrt();
        if admissible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // monotonicity oracle on the returned R
    for &tt in &[0.0, 0.5, 1.0] {
        let h = |a: f64| a.powf(delta0) * (hi + 1.0 / a).ln().powf(tt);
        let mut prev = h(1e-9);
        for i in 1..1000 {
            let a = 1e-9 * (1e18f64).powf(i as f64 / 999.0);
            let v = h(a);
            if v < prev * (1.0 - 1e-9) {
                return Err(Error::IllConditioned(format!(
                    "monotonicity violated at a = {a:e} for theta_tilde = {tt}"
                )));
            }
            prev = v;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Converging,
    Diverging,
    Inconclusive,
}

/// Outcome of the threshold classification.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub verdict: Verdict,
    /// Ladder of (T, partial integral over [s0, T]).
    pub partial_integrals: Vec<(f64, f64)>,
    /// Estimated remaining tail for a converging integral; None otherwise.
    pub tail_estimate: Option<f64>,
    /// Fitted q in dI/d(log T) ~ C (log T)^{-q} e^{beta log T}.
    pub q_hat: f64,
    /// Fitted power-growth coefficient beta (positive means the integrand
    /// grows like a positive power of s).
    pub beta: f64,
}

/// Classify convergence of `int_{s0}^{infinity} F(decay(s)) ds` from its
/// partial integrals on a log-spaced ladder.
///
/// The increments are fitted as `dI/dL = C L^{-q} e^{beta L}` with
/// `L = log T`: a clearly negative beta means integrable power decay, a
/// positive one divergence; for pure log-type integrands the verdict is
/// decided by q (q > 1 converges, q <= 1 diverges, with an inconclusive
/// band around 1). Exceeding `divergence_bound` decides immediately.
pub fn classify_threshold<D, F>(
    decay: D,
    f_eval: F,
    s_range: (f64, f64),
    divergence_bound: f64,
) -> Result<ThresholdReport>
where
    D: Fn(f64) -> f64,
    F: Fn(f64) -> f64,
{
    let (s0, s_max) = s_range;
    assert!(s0 > 1.0 && s_max > s0 * 10.0);
    // integrate in x = log s
    let integrand = |x: f64| {
        let s = x.exp();
        f_eval(decay(s)) * s
    };
    let rungs = 24usize;
    let l0 = s0.ln();
    let l1 = s_max.ln();
    let mut partials = Vec::with_capacity(rungs);
    let mut acc = 0.0f64;
    let mut prev_l = l0;
    let mut exceeded = false;
    for k in 1..=rungs {
        let l = l0 + (l1 - l0) * k as f64 / rungs as f64;
        acc += quad::integrate(integrand, prev_l, l, 1e-12 * (1.0 + acc.abs()))?;
        partials.push((l.exp(), acc));
        prev_l = l;
        if acc.abs() > divergence_bound {
            exceeded = true;
            break;
        }
    }
    if exceeded {
        return Ok(ThresholdReport {
            verdict: Verdict::Diverging,
            partial_integrals: partials,
            tail_estimate: None,
            q_hat: f64::NAN,
            beta: f64::INFINITY,
        });
    }
    // fit log increments against {1, log L, L} at rung midpoints
    let mut xs_logl = Vec::new();
    let mut xs_l = Vec::new();
    let mut ones = Vec::new();
    let mut ys = Vec::new();
    for w in partials.windows(2) {
        let (t0, i0) = w[0];
        let (t1, i1) = w[1];
        let dl = t1.ln() - t0.ln();
        let inc = (i1 - i0) / dl;
        if inc <= 0.0 {
            continue;
        }
        let lm = 0.5 * (t0.ln() + t1.ln());
        ones.push(1.0);
        xs_logl.push(lm.ln());
        xs_l.push(lm);
        ys.push(inc.ln());
    }
    if ys.len() < 5 {
        // increments vanished below floor: integral has effectively converged
        let last = partials.last().unwrap().1;
        let prev = partials[partials.len().saturating_sub(2)].1;
        return Ok(ThresholdReport {
            verdict: Verdict::Converging,
            partial_integrals: partials.clone(),
            tail_estimate: Some((last - prev).abs()),
            q_hat: f64::INFINITY,
            beta: 0.0,
        });
    }
    let (coef, _rms) = fit::lstsq(&[ones, xs_logl, xs_l], &ys)?;
    let (c0, q_hat, beta) = (coef[0], -coef[1], coef[2]);
    let l_max = partials.last().unwrap().0.ln();
    let verdict = if beta > 0.005 {
        Verdict::Diverging
    } else if beta < -0.005 {
        Verdict::Converging
    } else if q_hat >= 1.25 {
        Verdict::Converging
    } else if q_hat <= 1.1 {
        Verdict::Diverging
    } else {
        Verdict::Inconclusive
    };
    let tail_estimate = match verdict {
        Verdict::Converging => {
            if beta < -0.005 {
                // tail of C L^{-q} e^{beta L}: bounded by value/( -beta )
                Some(c0.exp() * l_max.powf(-q_hat) * (beta * l_max).exp() / (-beta))
            } else if q_hat > 1.0 {
                Some(c0.exp() * l_max.powf(1.0 - q_hat) / (q_hat - 1.0))
            } else {
                None
            }
        }
        _ => None,
    };
    Ok(ThresholdReport {
        verdict,
        partial_integrals: partials,
        tail_estimate,
        q_hat,
        beta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // literal construction: formula-evaluation tests need R values the
    // admissibility constructor would reject at small delta0
    fn params(mu_l: f64, mu_s: f64, theta: f64, r: f64, n: u8) -> NonlinearityParams {
        NonlinearityParams {
            mu_l,
            mu_s,
            theta,
            r,
            delta0: 0.25,
            n,
        }
    }

    #[test]
    fn fl_at_zero_and_reference_value() {
        let p = params(1.0, 0.0, 0.5, std::f64::consts::E, 2);
        assert_eq!(eval_fl(0.0, &p), 0.0);
        assert_eq!(eval_f(0.0, &p), 0.0);
        // a = 1, mu_L = 1, R = e, n = 2: 1^2 log(e + 1)
        let v = eval_fl(1.0, &p);
        assert!((v - (std::f64::consts::E + 1.0).ln()).abs() < 1e-12);
        assert!((v - 1.31326).abs() < 1e-5);
    }

    #[test]
    fn zero_coefficients() {
        let p = params(0.0, 0.0, 0.3, 2.0, 1);
        for a in [0.0, 0.5, 3.0] {
            assert_eq!(eval_f(a, &p), 0.0);
        }
    }

    #[test]
    fn f_is_sum_of_parts() {
        let p = params(0.7, -0.3, 0.4, 3.0, 3);
        for i in 1..50 {
            let a = i as f64 * 0.1;
            assert_eq!(eval_f(a, &p), eval_fl(a, &p) + eval_fs(a, &p));
        }
    }

    #[test]
    fn monotone_in_amplitude_when_admissible() {
        // mu >= 0 and admissible R: F_L, F_S nondecreasing (10^4 points)
        let p = params(1.0, 0.5, 0.5, 4.0, 1);
        let mut prev_l = 0.0;
        let mut prev_s = 0.0;
        for i in 1..=10_000 {
            let a = 1e-8 * (1e12f64).powf(i as f64 / 10_000.0);
            let vl = eval_fl(a, &p);
            let vs = eval_fs(a, &p);
            assert!(vl >= prev_l - 1e-14, "F_L decreased at a = {a}");
            assert!(vs >= prev_s - 1e-14, "F_S decreased at a = {a}");
            prev_l = vl;
            prev_s = vs;
        }
    }

    #[test]
    fn admissibility_examples() {
        assert!(is_admissible_r(2.0, 0.5, 0.0));
        assert!(is_admissible_r(1.5, 1e-6, 0.0));
        // delta0 log R = 1 >= sup 1/(Rt+1): analytic bound
        assert!(is_admissible_r((10.0f64).exp(), 0.1, 1.0));
        assert!(!is_admissible_r(1.0, 1e-6, 1.0));
        assert!(!is_admissible_r(0.5, 0.5, 1.0));
    }

    #[test]
    fn min_admissible_r_bisection_postconditions() {
        let r = min_admissible_r(0.5, 1e-6).unwrap();
        assert!((1.0..1e10).contains(&r));
        assert!(is_admissible_r(r, 0.5, 1.0));
        assert!(!is_admissible_r(r / 2.0, 0.5, 1.0) || r / 2.0 < 1.0);
        // larger delta0 admits smaller (or equal) R
        let r_small_delta = min_admissible_r(0.1, 1e-6).unwrap();
        assert!(r <= r_small_delta * (1.0 + 1e-5));
    }

    #[test]
    fn params_reject_inadmissible_r() {
        assert!(NonlinearityParams::new(1.0, 0.0, 0.5, 0.5, 0.01, 1).is_err());
        assert!(NonlinearityParams::new(1.0, 0.0, 0.5, 10.0, 0.01, 1).is_err());
        // theta = 1 is excluded from [0, 1)
        assert!(NonlinearityParams::new(1.0, 0.0, 1.0, 1e15, 0.01, 1).is_err());
        assert!(NonlinearityParams::new(1.0, 0.0, 0.5, 1e15, 0.01, 4).is_err());
        // large enough R is accepted
        assert!(NonlinearityParams::new(1.0, 0.0, 0.5, 1e15, 0.01, 1).is_ok());
    }

    fn log_power_integrand_report(q: f64) -> ThresholdReport {
        // decay and F chosen so F(decay(s)) = 1/(s (log s)^q) with n = 2:
        // decay = s^{-1/2} (log s)^{-q/2}, F = a^2
        classify_threshold(
            |s: f64| s.powf(-0.5) * s.ln().powf(-q / 2.0),
            |a: f64| a * a,
            (10.0, 1e12),
            1e4,
        )
        .unwrap()
    }

    #[test]
    fn threshold_q_sweep() {
        assert_eq!(log_power_integrand_report(0.5).verdict, Verdict::Diverging);
        assert_eq!(log_power_integrand_report(1.0).verdict, Verdict::Diverging);
        assert_eq!(log_power_integrand_report(1.5).verdict, Verdict::Converging);
        assert_eq!(log_power_integrand_report(2.0).verdict, Verdict::Converging);
    }

    #[test]
    fn threshold_tail_matches_analytic() {
        // q = 2: tail of int 1/(s log^2 s) beyond T is exactly 1/log T
        let rep = log_power_integrand_report(2.0);
        let l_max = rep.partial_integrals.last().unwrap().0.ln();
        let tail = rep.tail_estimate.unwrap();
        assert!((tail - 1.0 / l_max).abs() < 0.05 / l_max, "tail = {tail}");
        assert!((rep.q_hat - 2.0).abs() < 0.05);
    }

    #[test]
    fn threshold_power_divergence_hits_bound() {
        // integrand ~ s^{-0.9} (log s)^{-1.8}: diverges like T^{0.1}
        let rep = classify_threshold(
            |s: f64| s.powf(-0.225) * s.ln().powf(-0.45),
            |a: f64| a.powf(4.0),
            (10.0, 1e12),
            10.0,
        )
        .unwrap();
        assert_eq!(rep.verdict, Verdict::Diverging);
    }

    #[test]
    fn threshold_short_range_theta_half() {
        // F_S with theta = 1/2 against the critical decay in n = 1:
        // integrand ~ 1/(s (log s)^{3/2})
        // F_S formula inlined with R = 1 (the asymptotic regime where
        // log(R + 1/a) ~ log(1/a) ~ (log s)/4)
        let rep = classify_threshold(
            |s: f64| s.powf(-0.25) * s.ln().powf(-0.5),
            |a: f64| {
                if a == 0.0 {
                    0.0
                } else {
                    a.powf(4.0) * (1.0 + 1.0 / a).ln().sqrt()
                }
            },
            (1e3, 1e12),
            1e4,
        )
        .unwrap();
        assert_eq!(rep.verdict, Verdict::Converging);
    }

    #[test]
    fn partials_monotone_for_nonnegative_integrand() {
        let rep = log_power_integrand_report(1.5);
        for w in rep.partial_integrals.windows(2) {
            assert!(w[1].1 >= w[0].1);
        }
    }
}
