//! Coefficient models sigma(t), fundamental solutions of
//! `zeta'' + sigma(t) zeta = 0`, asymptotic coefficient extraction, and the
//! bounded-below / coefficient checks on the pair.

mod ode;

pub use ode::{integrate, DenseSolution, State};

use crate::error::{Error, Result};
use crate::fit;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

/// Bounded smooth interior part of a canonical critical model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SmoothPart {
    Constant { value: f64 },
    /// `mean + amplitude * cos(frequency * t)`; even in t.
    Cosine {
        mean: f64,
        amplitude: f64,
        frequency: f64,
    },
}

impl SmoothPart {
    fn eval(&self, t: f64) -> f64 {
        match *self {
            SmoothPart::Constant { value } => value,
            SmoothPart::Cosine {
                mean,
                amplitude,
                frequency,
            } => mean + amplitude * (frequency * t).cos(),
        }
    }
}

/// Piecewise coefficient sigma(t) of the harmonic potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SigmaModel {
    /// sigma = 0 everywhere (free Schroedinger).
    Zero,
    /// sigma = alpha^2 everywhere (never switches to the critical tail).
    Constant { alpha_sq: f64 },
    /// sigma = smooth part for |t| <= r0, exactly 1/(4 t^2) beyond.
    CanonicalCritical { r0: f64, smooth: SmoothPart },
    /// The worked example: sigma = alpha^2 for |t| <= r0, 1/(4 t^2) beyond.
    Section4 { alpha: f64, r0: f64 },
}

impl SigmaModel {
    /// Section4 model with alpha chosen so the exterior log-growth
    /// coefficient of zeta1 vanishes (see [`solve_matching`]).
    pub fn matched_section4(r0: f64) -> Result<Self> {
        let (alpha, _c22) = solve_matching(r0)?;
        Ok(SigmaModel::Section4 { alpha, r0 })
    }

    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            SigmaModel::Zero => 0.0,
            SigmaModel::Constant { alpha_sq } => alpha_sq,
            SigmaModel::CanonicalCritical { r0, smooth } => {
                if t.abs() > r0 {
                    0.25 / (t * t)
                } else {
                    smooth.eval(t)
                }
            }
            SigmaModel::Section4 { alpha, r0 } => {
                if t.abs() > r0 {
                    0.25 / (t * t)
                } else {
                    alpha * alpha
                }
            }
        }
    }

    /// Matching radius for critical models; `None` when sigma never switches.
    pub fn r0(&self) -> Option<f64> {
        match *self {
            SigmaModel::Zero | SigmaModel::Constant { .. } => None,
            SigmaModel::CanonicalCritical { r0, .. } | SigmaModel::Section4 { r0, .. } => Some(r0),
        }
    }
}

/// Evaluate sigma(t) for a model.
pub fn eval_sigma(model: &SigmaModel, t: f64) -> f64 {
    model.eval(t)
}

/// Smallest positive root x of `x tan x = -1/2` (it lies in (pi/2, pi)),
/// returned as `alpha = x / r0` together with the exterior coefficient
/// c22 of zeta2.
///
/// This is the condition under which the matched Section4 model has no
/// `sqrt(|t|) log|t|` component in zeta1, which is what the asymptotic
/// normalization of the pair requires. c22 != 0 is asserted.
pub fn solve_matching(r0: f64) -> Result<(f64, f64)> {
    assert!(r0 > 0.0, "matching radius must be positive");
    let x = fit::bisect(
        |x: f64| x * x.tan() + 0.5,
        FRAC_PI_2 + 1e-9,
        PI - 1e-9,
        1e-14,
    )?;
    let alpha = x / r0;
    // From continuity of zeta2, zeta2' at +r0:
    //   2 c22 = 2 sqrt(r0) cos x - sin x / (alpha sqrt(r0))
    let c22 = r0.sqrt() * x.cos() - x.sin() / (2.0 * alpha * r0.sqrt());
    assert!(
        c22.abs() > 1e-10,
        "matched c22 unexpectedly zero: {c22:e} at r0 = {r0}"
    );
    Ok((alpha, c22))
}

/// Exterior coefficients of one fundamental solution on one side:
/// `zeta = a * sqrt(|t|) + b * sqrt(|t|) log|t|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExteriorCoeffs {
    /// Coefficient of sqrt(|t|) for zeta1, zeta2.
    pub c11: f64,
    pub c12: f64,
    pub c21: f64,
    pub c22: f64,
}

/// Values of the pair and its derivatives at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZetaValues {
    pub z1: f64,
    pub dz1: f64,
    pub z2: f64,
    pub dz2: f64,
}

impl ZetaValues {
    pub fn wronskian(&self) -> f64 {
        self.z1 * self.dz2 - self.dz1 * self.z2
    }

    fn from_state(s: State) -> Self {
        ZetaValues {
            z1: s[0],
            dz1: s[1],
            z2: s[2],
            dz2: s[3],
        }
    }
}

#[derive(Debug, Clone)]
enum Interior {
    Harmonic { alpha: f64 },
    Numeric { pos: DenseSolution, neg: DenseSolution },
}

#[derive(Debug, Clone)]
enum Repr {
    Zero,
    Constant {
        alpha: f64,
    },
    /// Closed/numeric interior plus matched exterior combinations of
    /// sqrt(|t|), sqrt(|t|) log|t| beyond r0.
    Critical {
        interior: Interior,
        plus: ExteriorCoeffs,
        minus: ExteriorCoeffs,
    },
    /// Fully numeric evaluation, restarted at the region boundaries.
    NumericAll {
        pos: Vec<DenseSolution>,
        neg: Vec<DenseSolution>,
    },
}

/// The fundamental pair zeta1, zeta2 with Wronskian 1, evaluable together
/// with derivatives on `[-t_max, t_max]` (closed-form representations are
/// valid for all t).
#[derive(Debug, Clone)]
pub struct FundamentalPair {
    model: SigmaModel,
    repr: Repr,
    pub t_max: f64,
    pub tol: f64,
    /// Lower bound c with |zeta2| >= c beyond r0, once measured.
    pub lower_bound_c: Option<f64>,
    /// Numerically located zeros of zeta2 (|t| values) on each side, for
    /// representations without closed-form zero counts.
    zeros_pos: Vec<f64>,
    zeros_neg: Vec<f64>,
}

const INITIAL_STATE: State = [1.0, 0.0, 0.0, 1.0];

fn rhs_for(model: SigmaModel) -> impl Fn(f64, &State) -> State {
    move |t, y| {
        let s = model.eval(t);
        [y[1], -s * y[0], y[3], -s * y[2]]
    }
}

/// Match `(value, derivative)` at `t = +-r0` to the exterior basis
/// `y1 = sqrt(|t|)`, `y2 = sqrt(|t|) log|t|`; the 2x2 system has
/// determinant +-1.
fn match_exterior(r0: f64, side: f64, z: f64, dz: f64) -> (f64, f64) {
    let s = r0.sqrt();
    let l = r0.ln();
    let y1 = s;
    let y2 = s * l;
    let dy1 = side / (2.0 * s);
    let dy2 = side * (l + 2.0) / (2.0 * s);
    let det = y1 * dy2 - y2 * dy1; // = side
    let a = (z * dy2 - dz * y2) / det;
    let b = (dz * y1 - z * dy1) / det;
    (a, b)
}

fn exterior_eval(t: f64, c: &ExteriorCoeffs) -> ZetaValues {
    let a = t.abs();
    let s = a.sqrt();
    let l = a.ln();
    let sg = t.signum();
    let y1 = s;
    let y2 = s * l;
    let dy1 = sg / (2.0 * s);
    let dy2 = sg * (l + 2.0) / (2.0 * s);
    ZetaValues {
        z1: c.c11 * y1 + c.c12 * y2,
        dz1: c.c11 * dy1 + c.c12 * dy2,
        z2: c.c21 * y1 + c.c22 * y2,
        dz2: c.c21 * dy1 + c.c22 * dy2,
    }
}

/// Zero of `zeta2 = sqrt(a) (c21 + c22 ln a)` in the exterior region, if any.
fn exterior_zeta2_zero(c: &ExteriorCoeffs, r0: f64) -> Option<f64> {
    if c.c22 == 0.0 {
        return None;
    }
    let z = (-c.c21 / c.c22).exp();
    (z.is_finite() && z > r0 * (1.0 + 1e-12)).then_some(z)
}

/// Sign-change scan of `f(side * a)` over ascending positive samples,
/// each bracket refined by bisection; returns the |t| values of the zeros.
fn scan_zeros_abs(f: impl Fn(f64) -> f64, abs_samples: &[f64]) -> Vec<f64> {
    let mut zeros = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for &a in abs_samples {
        let v = f(a);
        if let Some((pa, pv)) = prev {
            if pv == 0.0 {
                zeros.push(pa);
            } else if v != 0.0 && pv.signum() != v.signum() {
                if let Ok(z) = fit::bisect(&f, pa, a, 1e-13 * a.max(1.0)) {
                    zeros.push(z);
                }
            }
        }
        prev = Some((a, v));
    }
    zeros
}

/// Solve for the pair, using closed forms wherever the model admits them
/// and the adaptive integrator elsewhere (local error <= tol).
pub fn solve_fundamental(model: &SigmaModel, t_max: f64, tol: f64) -> Result<FundamentalPair> {
    assert!(tol > 0.0 && t_max.is_finite() && t_max > 0.0);
    let repr = match *model {
        SigmaModel::Zero => Repr::Zero,
        SigmaModel::Constant { alpha_sq } => Repr::Constant {
            alpha: alpha_sq.sqrt(),
        },
        SigmaModel::Section4 { alpha, r0 } => {
            let x = alpha * r0;
            let (z1, dz1) = ((x).cos(), -alpha * x.sin());
            let (z2, dz2) = (x.sin() / alpha, x.cos());
            let (c11, c12) = match_exterior(r0, 1.0, z1, dz1);
            let (c21, c22) = match_exterior(r0, 1.0, z2, dz2);
            let plus = ExteriorCoeffs { c11, c12, c21, c22 };
            // Even sigma: zeta1 even, zeta2 odd.
            let (c11m, c12m) = match_exterior(r0, -1.0, z1, -dz1);
            let (c21m, c22m) = match_exterior(r0, -1.0, -z2, dz2);
            let minus = ExteriorCoeffs {
                c11: c11m,
                c12: c12m,
                c21: c21m,
                c22: c22m,
            };
            Repr::Critical {
                interior: Interior::Harmonic { alpha },
                plus,
                minus,
            }
        }
        SigmaModel::CanonicalCritical { r0, .. } => {
            let rhs = rhs_for(*model);
            let pos = integrate(&rhs, 0.0, r0, INITIAL_STATE, tol)?;
            let neg = integrate(&rhs, 0.0, -r0, INITIAL_STATE, tol)?;
            let sp = pos.end_state();
            let sn = neg.end_state();
            let (c11, c12) = match_exterior(r0, 1.0, sp[0], sp[1]);
            let (c21, c22) = match_exterior(r0, 1.0, sp[2], sp[3]);
            let (c11m, c12m) = match_exterior(r0, -1.0, sn[0], sn[1]);
            let (c21m, c22m) = match_exterior(r0, -1.0, sn[2], sn[3]);
            Repr::Critical {
                interior: Interior::Numeric { pos, neg },
                plus: ExteriorCoeffs { c11, c12, c21, c22 },
                minus: ExteriorCoeffs {
                    c11: c11m,
                    c12: c12m,
                    c21: c21m,
                    c22: c22m,
                },
            }
        }
    };
    let mut pair = FundamentalPair {
        model: *model,
        repr,
        t_max,
        tol,
        lower_bound_c: None,
        zeros_pos: Vec::new(),
        zeros_neg: Vec::new(),
    };
    pair.scan_numeric_zeros();
    Ok(pair)
}

/// Force fully numeric integration (dense output, restarted exactly at the
/// region boundaries so the kink in sigma' never sits inside a step).
/// Used as the independent oracle against the closed forms.
pub fn solve_fundamental_numeric(
    model: &SigmaModel,
    t_max: f64,
    tol: f64,
) -> Result<FundamentalPair> {
    assert!(tol > 0.0 && t_max.is_finite() && t_max > 0.0);
    let rhs = rhs_for(*model);
    let breaks: Vec<f64> = match model.r0() {
        Some(r0) if r0 < t_max => vec![r0, t_max],
        _ => vec![t_max],
    };
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    let mut state = INITIAL_STATE;
    let mut t = 0.0;
    for &b in &breaks {
        let seg = integrate(&rhs, t, b, state, tol)?;
        state = seg.end_state();
        t = b;
        pos.push(seg);
    }
    state = INITIAL_STATE;
    t = 0.0;
    for &b in &breaks {
        let seg = integrate(&rhs, t, -b, state, tol)?;
        state = seg.end_state();
        t = -b;
        neg.push(seg);
    }
    let mut pair = FundamentalPair {
        model: *model,
        repr: Repr::NumericAll { pos, neg },
        t_max,
        tol,
        lower_bound_c: None,
        zeros_pos: Vec::new(),
        zeros_neg: Vec::new(),
    };
    pair.scan_numeric_zeros();
    Ok(pair)
}

impl FundamentalPair {
    pub fn model(&self) -> &SigmaModel {
        &self.model
    }

    pub fn r0(&self) -> Option<f64> {
        self.model.r0()
    }

    /// Exterior coefficients `(plus side, minus side)` for critical models.
    pub fn exterior_coeffs(&self) -> Option<(ExteriorCoeffs, ExteriorCoeffs)> {
        match &self.repr {
            Repr::Critical { plus, minus, .. } => Some((*plus, *minus)),
            _ => None,
        }
    }

    pub fn eval(&self, t: f64) -> ZetaValues {
        match &self.repr {
            Repr::Zero => ZetaValues {
                z1: 1.0,
                dz1: 0.0,
                z2: t,
                dz2: 1.0,
            },
            Repr::Constant { alpha } => {
                if *alpha == 0.0 {
                    ZetaValues {
                        z1: 1.0,
                        dz1: 0.0,
                        z2: t,
                        dz2: 1.0,
                    }
                } else {
                    ZetaValues {
                        z1: (alpha * t).cos(),
                        dz1: -alpha * (alpha * t).sin(),
                        z2: (alpha * t).sin() / alpha,
                        dz2: (alpha * t).cos(),
                    }
                }
            }
            Repr::Critical {
                interior,
                plus,
                minus,
            } => {
                let r0 = self.model.r0().unwrap();
                if t > r0 {
                    exterior_eval(t, plus)
                } else if t < -r0 {
                    exterior_eval(t, minus)
                } else {
                    match interior {
                        Interior::Harmonic { alpha } => ZetaValues {
                            z1: (alpha * t).cos(),
                            dz1: -alpha * (alpha * t).sin(),
                            z2: (alpha * t).sin() / alpha,
                            dz2: (alpha * t).cos(),
                        },
                        Interior::Numeric { pos, neg } => {
                            let sol = if t >= 0.0 { pos } else { neg };
                            ZetaValues::from_state(sol.eval(t))
                        }
                    }
                }
            }
            Repr::NumericAll { pos, neg } => {
                let segs = if t >= 0.0 { pos } else { neg };
                let ta = t.abs();
                for seg in segs {
                    if ta <= seg.t_end().abs() || std::ptr::eq(seg, segs.last().unwrap()) {
                        return ZetaValues::from_state(seg.eval(t));
                    }
                }
                unreachable!("segment list is nonempty")
            }
        }
    }

    pub fn zeta1(&self, t: f64) -> f64 {
        self.eval(t).z1
    }

    pub fn zeta2(&self, t: f64) -> f64 {
        self.eval(t).z2
    }

    pub fn dzeta1(&self, t: f64) -> f64 {
        self.eval(t).dz1
    }

    pub fn dzeta2(&self, t: f64) -> f64 {
        self.eval(t).dz2
    }

    /// Locate zeros of zeta2 for representations without closed-form
    /// counts: numeric interiors on `(0, r0]`, fully numeric pairs on
    /// `(0, t_max]` (log-spaced beyond r0).
    fn scan_numeric_zeros(&mut self) {
        let (interior_only, needs_scan) = match &self.repr {
            Repr::Critical {
                interior: Interior::Numeric { .. },
                ..
            } => (true, true),
            Repr::NumericAll { .. } => (false, true),
            _ => (false, false),
        };
        if !needs_scan {
            return;
        }
        let r0 = self.model.r0();
        let hi_uniform = match (interior_only, r0) {
            (true, Some(r)) => r,
            (false, Some(r)) => r.min(self.t_max),
            (false, None) => self.t_max,
            (true, None) => return,
        };
        let n = 4096usize;
        let mut samples: Vec<f64> = (1..=n)
            .map(|i| hi_uniform * i as f64 / n as f64)
            .collect();
        if !interior_only {
            if let Some(r) = r0 {
                if self.t_max > r {
                    samples.extend(
                        (1..=n).map(|i| r * (self.t_max / r).powf(i as f64 / n as f64)),
                    );
                }
            }
        }
        self.zeros_pos = scan_zeros_abs(|a| self.eval(a).z2, &samples);
        self.zeros_neg = scan_zeros_abs(|a| self.eval(-a).z2, &samples);
    }

    /// Number of zeros of zeta2 strictly between 0 and t (the focal-point
    /// count of the classical flow). Each crossing contributes a factor
    /// `exp(-i pi n / 2)` to the propagator phase relative to the naive
    /// principal branch, so the factorized propagator needs this count.
    pub fn maslov_count(&self, t: f64) -> usize {
        let ta = t.abs();
        if ta == 0.0 || !ta.is_finite() {
            return 0;
        }
        // zeros of sin(alpha s) in (0, upto): k pi / alpha, k >= 1
        let harmonic = |alpha: f64, upto: f64| -> usize {
            if alpha <= 0.0 || upto <= 0.0 {
                0
            } else {
                ((upto * alpha / PI) * (1.0 - 1e-12)).floor() as usize
            }
        };
        let side_zeros = |zs: &[f64], upto: f64| zs.iter().filter(|&&z| z < upto).count();
        match &self.repr {
            Repr::Zero => 0,
            Repr::Constant { alpha } => harmonic(*alpha, ta),
            Repr::Critical {
                interior,
                plus,
                minus,
            } => {
                let r0 = self.model.r0().unwrap();
                let mut m = match interior {
                    Interior::Harmonic { alpha } => harmonic(*alpha, ta.min(r0)),
                    Interior::Numeric { .. } => {
                        let zs = if t >= 0.0 { &self.zeros_pos } else { &self.zeros_neg };
                        side_zeros(zs, ta.min(r0))
                    }
                };
                if ta > r0 {
                    let c = if t >= 0.0 { plus } else { minus };
                    if let Some(z) = exterior_zeta2_zero(c, r0) {
                        if z < ta {
                            m += 1;
                        }
                    }
                }
                m
            }
            Repr::NumericAll { .. } => {
                let zs = if t >= 0.0 { &self.zeros_pos } else { &self.zeros_neg };
                side_zeros(zs, ta)
            }
        }
    }
}

/// Wronskian diagnostic; contract: equals 1 up to solver tolerance.
pub fn wronskian(pair: &FundamentalPair, t: f64) -> f64 {
    pair.eval(t).wronskian()
}

/// One-sided least-squares fit of both solutions against
/// `{sqrt(|t|), sqrt(|t|) log|t|}`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SideFit {
    /// (sqrt coeff, sqrt*log coeff) for zeta1.
    pub c1: (f64, f64),
    pub c2: (f64, f64),
    /// Fit RMS relative to the RMS of the solution values on the window.
    pub rel_residual1: f64,
    pub rel_residual2: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct AsymptoticFit {
    pub plus: SideFit,
    pub minus: SideFit,
}

/// Default fit window `[1e2 * r0, 1e4 * r0]` (log-spaced, 200 points);
/// the log basis function needs decades of range to decorrelate.
pub fn default_fit_window(r0: f64) -> (f64, f64) {
    (1e2 * r0, 1e4 * r0)
}

fn fit_side(pair: &FundamentalPair, window: (f64, f64), side: f64) -> Result<SideFit> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo * 1.5) {
        return Err(Error::IllConditioned(format!(
            "fit window [{lo}, {hi}] too narrow"
        )));
    }
    let npts = 200;
    let mut y1col = Vec::with_capacity(npts);
    let mut y2col = Vec::with_capacity(npts);
    let mut z1 = Vec::with_capacity(npts);
    let mut z2 = Vec::with_capacity(npts);
    for i in 0..npts {
        let f = i as f64 / (npts - 1) as f64;
        let t = side * lo * (hi / lo).powf(f);
        let a = t.abs();
        y1col.push(a.sqrt());
        y2col.push(a.sqrt() * a.ln());
        let v = pair.eval(t);
        z1.push(v.z1);
        z2.push(v.z2);
    }
    let rms = |v: &[f64]| (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt();
    let (c1, r1) = fit::lstsq(&[y1col.clone(), y2col.clone()], &z1)?;
    let (c2, r2) = fit::lstsq(&[y1col, y2col], &z2)?;
    Ok(SideFit {
        c1: (c1[0], c1[1]),
        c2: (c2[0], c2[1]),
        rel_residual1: r1 / rms(&z1).max(1e-300),
        rel_residual2: r2 / rms(&z2).max(1e-300),
    })
}

/// Fit the asymptotic coefficients on both sides over `fit_window`
/// (positive times; mirrored for the minus side).
pub fn asymptotic_coeffs(pair: &FundamentalPair, fit_window: (f64, f64)) -> Result<AsymptoticFit> {
    if let Some(r0) = pair.r0() {
        if fit_window.0 <= r0 {
            return Err(Error::IllConditioned(format!(
                "fit window starts at {} inside the matching radius {}",
                fit_window.0, r0
            )));
        }
    }
    Ok(AsymptoticFit {
        plus: fit_side(pair, fit_window, 1.0)?,
        minus: fit_side(pair, fit_window, -1.0)?,
    })
}

/// Outcome of the structural check on a pair: |zeta2| bounded below past
/// some radius and finite nonzero asymptotic coefficients.
///
/// The bound is an existence statement (some c > 0 and some radius work),
/// so isolated zeros of zeta2 near the region switch are tolerated: the
/// check slides the radius past the last sign change. What it must reject
/// is persistent oscillation, where sign changes continue into the
/// asymptotic regime of the probe grid.
#[derive(Debug, Clone, Serialize)]
pub struct A1Report {
    pub pass: bool,
    /// Minimum of |zeta2| over probes beyond `a1_radius`.
    pub min_abs_zeta2: f64,
    /// Last probe time at which zeta2 changes sign, if any.
    pub last_sign_change: Option<f64>,
    /// Effective radius beyond which the lower bound holds.
    pub a1_radius: f64,
    pub lower_bound_c: f64,
    pub fit: Option<AsymptoticFit>,
    pub failures: Vec<String>,
}

/// Check the pair against the structural assumption on a probe grid
/// extending beyond r0. Failures are report entries, not errors.
pub fn verify_a1(pair: &FundamentalPair, probe_grid: &[f64]) -> A1Report {
    let r0 = pair.r0().unwrap_or(1.0);
    let mut failures = Vec::new();
    let t_hi = probe_grid.iter().fold(0.0f64, |m, &t| m.max(t.abs()));
    let mut last_sign_change = None;
    let mut prev: Option<(f64, f64)> = None;
    for &t in probe_grid {
        if t.abs() <= r0 {
            continue;
        }
        let z2 = pair.zeta2(t);
        if let Some((pt, pz)) = prev {
            // only compare within one side
            if pt.signum() == t.signum() && pz.signum() != z2.signum() {
                let at = t.abs();
                if last_sign_change.map_or(true, |s: f64| at > s) {
                    last_sign_change = Some(at);
                }
            }
        }
        prev = Some((t, z2));
    }
    if let Some(s) = last_sign_change {
        if s > 0.01 * t_hi {
            failures.push(format!(
                "zeta2 still changes sign near |t| = {s:.3e}: no lower bound sets in"
            ));
        }
    }
    let a1_radius = last_sign_change.map_or(r0, |s| (1.05 * s).max(r0));
    let mut min_abs = f64::INFINITY;
    for &t in probe_grid {
        if t.abs() > a1_radius {
            min_abs = min_abs.min(pair.zeta2(t).abs());
        }
    }
    if !min_abs.is_finite() {
        failures.push("probe grid does not extend beyond the effective radius".to_string());
        min_abs = 0.0;
    }
    // Default c: measured minimum minus 10%.
    let c = pair.lower_bound_c.unwrap_or(0.9 * min_abs);
    if min_abs < c {
        failures.push(format!(
            "|zeta2| = {min_abs:e} below required lower bound {c:e}"
        ));
    }
    let t_hi = probe_grid
        .iter()
        .fold(0.0f64, |m, &t| m.max(t.abs()))
        .min(pair.t_max.max(1e4 * r0));
    let window = (1e1 * r0, t_hi.max(1e2 * r0));
    let fit = match asymptotic_coeffs(pair, window) {
        Ok(f) => {
            for (side, sf) in [("plus", &f.plus), ("minus", &f.minus)] {
                if sf.rel_residual1 > 1e-3 || sf.rel_residual2 > 1e-3 {
                    failures.push(format!(
                        "{side} side: solutions not asymptotic to the sqrt/log basis \
                         (relative residuals {:.2e}, {:.2e})",
                        sf.rel_residual1, sf.rel_residual2
                    ));
                }
                if !sf.c1.0.is_finite() || !sf.c2.1.is_finite() {
                    failures.push(format!("{side} side: non-finite fitted coefficients"));
                }
                let scale = sf.c2.0.abs().max(sf.c2.1.abs()).max(1.0);
                if sf.c2.1.abs() < 1e-10 * scale {
                    failures.push(format!("{side} side: log coefficient of zeta2 vanishes"));
                }
            }
            Some(f)
        }
        Err(e) => {
            failures.push(format!("asymptotic fit failed: {e}"));
            None
        }
    };
    A1Report {
        pass: failures.is_empty(),
        min_abs_zeta2: min_abs,
        last_sign_change,
        a1_radius,
        lower_bound_c: c,
        fit,
        failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent oracle: bisection on x tan x + 1/2 over (pi/2, pi),
    // frozen to the value it produces at 1e-12.
    const MATCH_ROOT: f64 = 2.975_086_321_688_279;

    #[test]
    fn eval_sigma_models() {
        assert_eq!(eval_sigma(&SigmaModel::Zero, 3.7), 0.0);
        let m = SigmaModel::matched_section4(10.0).unwrap();
        let a = match m {
            SigmaModel::Section4 { alpha, .. } => alpha,
            _ => unreachable!(),
        };
        assert!((eval_sigma(&m, 0.0) - a * a).abs() < 1e-15);
        let c = SigmaModel::CanonicalCritical {
            r0: 10.0,
            smooth: SmoothPart::Constant { value: 0.1 },
        };
        assert_eq!(eval_sigma(&c, 20.0), 1.0 / 1600.0);
        assert_eq!(eval_sigma(&c, -20.0), 1.0 / 1600.0);
        assert_eq!(eval_sigma(&c, 5.0), 0.1);
    }

    #[test]
    fn matching_root_and_c22() {
        let (alpha, c22) = solve_matching(1.0).unwrap();
        assert!((alpha - MATCH_ROOT).abs() < 1e-11);
        // c22 from the continuity system, evaluated at the oracle root.
        let x = MATCH_ROOT;
        let expect = x.cos() - x.sin() / (2.0 * x);
        assert!((c22 - expect).abs() < 1e-10);
        assert!(c22.abs() > 0.1);
        // scaling: the root lives in x = alpha * r0
        let (a10, _) = solve_matching(10.0).unwrap();
        assert!((a10 - MATCH_ROOT / 10.0).abs() < 1e-12);
    }

    #[test]
    fn zero_model_closed_form() {
        let p = solve_fundamental(&SigmaModel::Zero, 100.0, 1e-10).unwrap();
        let v = p.eval(5.0);
        assert_eq!(v.z1, 1.0);
        assert_eq!(v.z2, 5.0);
        assert_eq!(v.wronskian(), 1.0);
    }

    #[test]
    fn constant_model_closed_form() {
        let a = 0.35f64;
        let p = solve_fundamental(&SigmaModel::Constant { alpha_sq: a * a }, 50.0, 1e-10).unwrap();
        let v = p.eval(7.0);
        assert!((v.z1 - (a * 7.0).cos()).abs() < 1e-15);
        assert!((v.z2 - (a * 7.0).sin() / a).abs() < 1e-15);
        assert!((v.wronskian() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn section4_continuity_at_r0() {
        let model = SigmaModel::matched_section4(10.0).unwrap();
        let p = solve_fundamental(&model, 1e4, 1e-10).unwrap();
        for side in [1.0f64, -1.0] {
            let inside = p.eval(side * (10.0 - 1e-9));
            let outside = p.eval(side * (10.0 + 1e-9));
            assert!((inside.z1 - outside.z1).abs() < 1e-7);
            assert!((inside.dz1 - outside.dz1).abs() < 1e-7);
            assert!((inside.z2 - outside.z2).abs() < 1e-7);
            assert!((inside.dz2 - outside.dz2).abs() < 1e-7);
        }
    }

    #[test]
    fn section4_numeric_matches_closed_form() {
        let tol = 1e-11;
        let model = SigmaModel::matched_section4(10.0).unwrap();
        let closed = solve_fundamental(&model, 100.0, tol).unwrap();
        let numeric = solve_fundamental_numeric(&model, 100.0, tol).unwrap();
        for &t in &[-50.0, -12.0, -3.0, 4.0, 15.0, 50.0] {
            let a = closed.eval(t);
            let b = numeric.eval(t);
            // Local tolerance amplified by the growing mode: allow a few
            // decades of accumulation relative to the solution size.
            let scale = a.z1.abs().max(a.z2.abs()).max(1.0);
            assert!((a.z1 - b.z1).abs() <= 1e-6 * scale, "z1 at {t}");
            assert!((a.z2 - b.z2).abs() <= 1e-6 * scale, "z2 at {t}");
        }
    }

    #[test]
    fn wronskian_of_numeric_pair() {
        let model = SigmaModel::matched_section4(10.0).unwrap();
        let p = solve_fundamental_numeric(&model, 100.0, 1e-10).unwrap();
        for &t in &[-100.0, -31.0, 0.0, 2.0, 47.0, 100.0] {
            assert!((wronskian(&p, t) - 1.0).abs() < 1e-8, "t = {t}");
        }
    }

    #[test]
    fn even_sigma_symmetry() {
        let model = SigmaModel::matched_section4(10.0).unwrap();
        let p = solve_fundamental(&model, 1e3, 1e-10).unwrap();
        for &t in &[3.0, 11.0, 200.0] {
            let a = p.eval(t);
            let b = p.eval(-t);
            assert!((a.z1 - b.z1).abs() < 1e-9);
            assert!((a.z2 + b.z2).abs() < 1e-9);
        }
    }

    #[test]
    fn matched_model_kills_zeta1_log_coefficient() {
        let model = SigmaModel::matched_section4(10.0).unwrap();
        let p = solve_fundamental(&model, 1e6, 1e-10).unwrap();
        let fitres = asymptotic_coeffs(&p, default_fit_window(10.0)).unwrap();
        assert!(fitres.plus.c1.1.abs() < 1e-8, "c12+ = {}", fitres.plus.c1.1);
        assert!(fitres.minus.c1.1.abs() < 1e-8);
        // c22 recovered from the fit matches the coefficient solve
        let (_, c22) = solve_matching(10.0).unwrap();
        assert!((fitres.plus.c2.1 - c22).abs() < 1e-8);
        assert!((fitres.minus.c2.1 + c22).abs() < 1e-8, "zeta2 odd");
    }

    #[test]
    fn fit_recovers_exact_basis_member() {
        // pair whose zeta2 is exactly sqrt(t) log t beyond r0
        let model = SigmaModel::matched_section4(1.0).unwrap();
        let p = solve_fundamental(&model, 1e6, 1e-10).unwrap();
        let (plus, _) = p.exterior_coeffs().unwrap();
        let f = asymptotic_coeffs(&p, default_fit_window(1.0)).unwrap();
        assert!((f.plus.c2.0 - plus.c21).abs() < 1e-8);
        assert!((f.plus.c2.1 - plus.c22).abs() < 1e-8);
        assert!(f.plus.rel_residual2 < 1e-10);
    }

    #[test]
    fn narrow_window_is_ill_conditioned() {
        let model = SigmaModel::matched_section4(1.0).unwrap();
        let p = solve_fundamental(&model, 1e6, 1e-10).unwrap();
        assert!(asymptotic_coeffs(&p, (100.0, 100.1)).is_err());
    }

    fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
            .collect()
    }

    #[test]
    fn verify_a1_passes_matched_model() {
        let model = SigmaModel::matched_section4(10.0).unwrap();
        let p = solve_fundamental(&model, 1e6, 1e-10).unwrap();
        let grid = log_grid(10.5, 1e6, 400);
        let rep = verify_a1(&p, &grid);
        assert!(rep.pass, "failures: {:?}", rep.failures);
        assert!(rep.lower_bound_c > 0.0);
    }

    #[test]
    fn verify_a1_fails_zero_model() {
        let p = solve_fundamental(&SigmaModel::Zero, 1e6, 1e-10).unwrap();
        let grid = log_grid(10.5, 1e6, 400);
        let rep = verify_a1(&p, &grid);
        assert!(!rep.pass);
    }

    #[test]
    fn verify_a1_fails_constant_model() {
        // sigma constant forever: zeta2 = sin(alpha t)/alpha has zeros beyond r0
        let p = solve_fundamental(&SigmaModel::Constant { alpha_sq: 0.09 }, 1e6, 1e-10).unwrap();
        let grid = log_grid(10.5, 1e5, 2000);
        let rep = verify_a1(&p, &grid);
        assert!(!rep.pass);
        assert!(rep.last_sign_change.is_some());
    }

    #[test]
    fn maslov_count_models() {
        // matched model, r0 = 1: single zeta2 zero at t* = exp(-c21/c22)
        let model = SigmaModel::matched_section4(1.0).unwrap();
        let p = solve_fundamental(&model, 100.0, 1e-10).unwrap();
        let (plus, _) = p.exterior_coeffs().unwrap();
        let t_star = (-plus.c21 / plus.c22).exp();
        assert!(t_star > 1.0 && t_star < 1.2, "t* = {t_star}");
        assert!(p.zeta2(t_star).abs() < 1e-12);
        assert_eq!(p.maslov_count(0.5), 0);
        assert_eq!(p.maslov_count(t_star * 0.999), 0);
        assert_eq!(p.maslov_count(t_star * 1.001), 1);
        assert_eq!(p.maslov_count(50.0), 1);
        assert_eq!(p.maslov_count(-50.0), 1, "zeta2 odd: mirrored zero");
        // numeric solve of the same model agrees
        let q = solve_fundamental_numeric(&model, 100.0, 1e-11).unwrap();
        assert_eq!(q.maslov_count(0.5), 0);
        assert_eq!(q.maslov_count(2.0), 1);
        assert_eq!(q.maslov_count(-2.0), 1);
        assert_eq!(q.maslov_count(50.0), 1);
        // constant model: zeros of sin(alpha t)/alpha at k pi / alpha
        let c = solve_fundamental(&SigmaModel::Constant { alpha_sq: 1.0 }, 50.0, 1e-10).unwrap();
        assert_eq!(c.maslov_count(3.0), 0);
        assert_eq!(c.maslov_count(3.5), 1);
        assert_eq!(c.maslov_count(6.5), 2);
        assert_eq!(c.maslov_count(-6.5), 2);
        // free model: zeta2 = t never vanishes away from 0
        let z = solve_fundamental(&SigmaModel::Zero, 50.0, 1e-10).unwrap();
        assert_eq!(z.maslov_count(40.0), 0);
    }

    #[test]
    fn canonical_critical_numeric_interior() {
        let model = SigmaModel::CanonicalCritical {
            r0: 5.0,
            smooth: SmoothPart::Cosine {
                mean: 0.3,
                amplitude: 0.1,
                frequency: 0.7,
            },
        };
        let p = solve_fundamental(&model, 1e4, 1e-11).unwrap();
        for &t in &[-300.0, -4.0, 0.0, 2.5, 4.999, 5.001, 80.0, 9000.0] {
            assert!((wronskian(&p, t) - 1.0).abs() < 1e-7, "t = {t}");
        }
        // even smooth part: zeta1 even, zeta2 odd
        let a = p.eval(123.0);
        let b = p.eval(-123.0);
        assert!((a.z1 - b.z1).abs() < 1e-7);
        assert!((a.z2 + b.z2).abs() < 1e-7);
    }
}
