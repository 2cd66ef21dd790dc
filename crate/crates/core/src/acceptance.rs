//! The acceptance suite: ten end-to-end checks combining exact property
//! verification with trend/rate fits at desk scale. Each criterion returns
//! one pass/fail line with the measured numbers; failures carry the
//! analysis in the detail string instead of being silently relaxed.

use crate::config::InitialSpec;
use crate::error::Result;
use crate::evolution::{evolve, step, SolverConfig, Trajectory};
use crate::fit;
use crate::nonlinearity::{classify_threshold, NonlinearityParams, Verdict};
use crate::oscillator::{
    asymptotic_coeffs, default_fit_window, solve_fundamental, solve_fundamental_numeric,
    FundamentalPair, SigmaModel,
};
use crate::run::band_limited_corpus;
use crate::scattering::{self, PhaseMuConvention};
use crate::spectral::{
    dispersive_fit, leibniz_ratio, mdfm_propagate, mdfm_sup_norm, Field, Grid, NonlinearTerm,
};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::OnceLock;

/// One acceptance criterion's outcome.
#[derive(Debug, Clone, Serialize)]
pub struct Criterion {
    pub id: usize,
    pub name: &'static str,
    pub pass: bool,
    pub details: String,
}

impl Criterion {
    pub fn summary_line(&self) -> String {
        format!(
            "criterion {:2} {:<22} {} — {}",
            self.id,
            self.name,
            if self.pass { "PASS" } else { "FAIL" },
            self.details
        )
    }
}

/// Run every criterion in order.
pub fn all() -> Vec<Criterion> {
    (1..=10).map(criterion).collect()
}

/// Run one criterion by number (1..=10).
pub fn criterion(id: usize) -> Criterion {
    let (name, result): (&'static str, Result<(bool, String)>) = match id {
        1 => ("wronskian-matching", c1_wronskian_matching()),
        2 => ("mdfm-free-exactness", c2_mdfm_exactness()),
        3 => ("dispersive-law", c3_dispersive_law()),
        4 => ("conservation-order", c4_conservation_order()),
        5 => ("linear-consistency", c5_linear_consistency()),
        6 => ("threshold-classifier", c6_threshold_classifier()),
        7 => ("critical-decay", c7_critical_decay()),
        8 => ("modified-scattering", c8_modified_scattering()),
        9 => ("gronwall-growth", c9_gronwall_growth()),
        10 => ("leibniz-stability", c10_leibniz_stability()),
        _ => panic!("criterion id {id} out of range 1..=10"),
    };
    match result {
        Ok((pass, details)) => Criterion {
            id,
            name,
            pass,
            details,
        },
        Err(e) => Criterion {
            id,
            name,
            pass: false,
            details: format!("errored: {e}"),
        },
    }
}

// ---------------------------------------------------------------------------
// shared helpers

fn gaussian(grid: Grid, amp: f64, width: f64) -> Field {
    Field::from_fn(grid, |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        Complex64::new(amp * (-r2 / (2.0 * width * width)).exp(), 0.0)
    })
}

fn l2_diff(a: &Field, b: &Field) -> f64 {
    let mut err2 = 0.0;
    for (x, y) in a.values.iter().zip(&b.values) {
        err2 += (x - y).norm_sqr();
    }
    (err2 * a.node_weight()).sqrt()
}

fn params_1d(mu_l: f64, mu_s: f64, theta: f64) -> NonlinearityParams {
    NonlinearityParams {
        mu_l,
        mu_s,
        theta,
        r: 60.0,
        delta0: 0.25,
        n: 1,
    }
}

// ---------------------------------------------------------------------------
// 1. Wronskian and matching

fn c1_wronskian_matching() -> Result<(bool, String)> {
    let r0 = 10.0;
    let model = SigmaModel::matched_section4(r0)?;
    let pair = solve_fundamental(&model, 1.1e5, 1e-10)?;
    let mut probes: Vec<f64> = Vec::new();
    for i in 1..=200 {
        let t = r0 * i as f64 / 200.0;
        probes.push(t);
        probes.push(-t);
    }
    for i in 0..400 {
        let t = r0 * 1.0001 * (1e3 / (r0 * 1.0001)).powf(i as f64 / 399.0);
        probes.push(t);
        probes.push(-t);
    }
    let max_dev = |p: &FundamentalPair| {
        probes
            .iter()
            .map(|&t| (p.eval(t).wronskian() - 1.0).abs())
            .fold(0.0f64, f64::max)
    };
    let dev_closed = max_dev(&pair);
    let pair_num = solve_fundamental_numeric(&model, 1.001e3, 1e-12)?;
    let dev_numeric = max_dev(&pair_num);
    // continuity of values and derivatives across the region switch
    let delta = 1e-12 * r0;
    let mut match_dev = 0.0f64;
    for s in [1.0f64, -1.0] {
        let inner = pair.eval(s * (r0 - delta));
        let outer = pair.eval(s * (r0 + delta));
        for (a, b) in [
            (inner.z1, outer.z1),
            (inner.z2, outer.z2),
            (inner.dz1, outer.dz1),
            (inner.dz2, outer.dz2),
        ] {
            match_dev = match_dev.max((a - b).abs());
        }
    }
    let fit = asymptotic_coeffs(&pair, default_fit_window(r0))?;
    let log_coeff = fit.plus.c1.1.abs().max(fit.minus.c1.1.abs());
    let pass = dev_closed <= 1e-8 && dev_numeric <= 1e-8 && match_dev <= 1e-10 && log_coeff <= 1e-8;
    Ok((
        pass,
        format!(
            "wronskian dev {dev_closed:.2e} closed / {dev_numeric:.2e} numeric (limit 1e-8), \
             matching jump {match_dev:.2e} (limit 1e-10), \
             zeta1 log coefficient {log_coeff:.2e} (limit 1e-8)"
        ),
    ))
}

// ---------------------------------------------------------------------------
// 2. MDFM exactness on the free equation

fn c2_mdfm_exactness() -> Result<(bool, String)> {
    let grid = Grid::new(1, 4096, 40.0)?;
    let u0 = Field::from_fn(grid, |x| {
        Complex64::new(PI.powf(-0.25) * (-x[0] * x[0] / 2.0).exp(), 0.0)
    });
    let pair = solve_fundamental(&SigmaModel::Zero, 10.0, 1e-10)?;
    let mut worst = 0.0f64;
    for &t in &[0.5, 1.0, 2.0, 4.0] {
        let u = mdfm_propagate(&u0, &pair, t)?;
        let z = Complex64::new(1.0, t);
        let exact = Field::from_fn(grid, |x| {
            PI.powf(-0.25) * z.sqrt().inv() * (Complex64::new(-x[0] * x[0] / 2.0, 0.0) / z).exp()
        });
        worst = worst.max(l2_diff(&u, &exact));
    }
    Ok((
        worst <= 1e-6,
        format!("max L2 error vs the exact free Gaussian {worst:.2e} (limit 1e-6)"),
    ))
}

// ---------------------------------------------------------------------------
// 3. Dispersive decay law under the matched critical model

fn c3_dispersive_law() -> Result<(bool, String)> {
    let model = SigmaModel::matched_section4(1.0)?;
    let pair = solve_fundamental(&model, 1.1e5, 1e-10)?;
    let grid = Grid::new(1, 4096, 100.0)?;
    let u0 = gaussian(grid, 1.0, 1.0);
    let mut series = Vec::new();
    for i in 0..60 {
        let t = 1e2 * (1e3f64).powf(i as f64 / 59.0);
        series.push((t, mdfm_sup_norm(&u0, &pair, t)?));
    }
    let f = dispersive_fit(&series, &pair)?;
    let ok_z2 = (f.slope_vs_zeta2 + 0.5).abs() <= 0.025;
    let ok_t = (f.slope_vs_t + 0.25).abs() <= 0.05;
    let ok_log = (f.log_exponent + 0.5).abs() <= 0.1;
    Ok((
        ok_z2 && ok_t && ok_log,
        format!(
            "slope vs log|zeta2| {:.4} (want -0.5 +- 0.025), t-exponent {:.4} \
             (want -0.25 +- 0.05), log-exponent {:.3} (want -0.5 +- 0.1)",
            f.slope_vs_zeta2, f.slope_vs_t, f.log_exponent
        ),
    ))
}

// ---------------------------------------------------------------------------
// 4. Conservation and splitting order

fn c4_conservation_order() -> Result<(bool, String)> {
    // mass conservation over a nonlinear critical run
    let grid = Grid::new(1, 4096, 200.0)?;
    let u0 = gaussian(grid, 0.5, 1.0);
    let model = SigmaModel::matched_section4(1.0)?;
    let config = SolverConfig {
        dt0: 0.01,
        t_max: 30.0,
        snapshots: SolverConfig::log_snapshots(0.5, 30.0, 10),
        epsilon_prime: None,
        gamma: 2.0,
    };
    let traj = evolve(&u0, &config, &model, &params_1d(0.5, 0.0, 0.0))?;
    let l2_0 = u0.l2_norm();
    let drift = traj
        .diagnostics
        .iter()
        .map(|d| (d.l2 - l2_0).abs() / l2_0)
        .fold(0.0, f64::max);
    // Richardson self-convergence order
    let g2 = Grid::new(1, 1024, 30.0)?;
    let v0 = gaussian(g2, 0.9, 1.0);
    let m2 = SigmaModel::Section4 { alpha: 1.0, r0: 5.0 };
    let p2 = params_1d(1.0, 0.0, 0.0);
    let run = |dt: f64| {
        let mut u = v0.clone();
        let steps = (1.0 / dt).round() as usize;
        for k in 0..steps {
            u = step(&u, k as f64 * dt, dt, &m2, &p2);
        }
        u
    };
    let a = run(0.02);
    let b = run(0.01);
    let c = run(0.005);
    let order = (l2_diff(&a, &b) / l2_diff(&b, &c)).log2();
    let pass = drift <= 1e-9 && (order - 2.0).abs() <= 0.2;
    Ok((
        pass,
        format!(
            "L2 relative drift {drift:.2e} (limit 1e-9), Richardson order {order:.3} \
             (want 2.0 +- 0.2)"
        ),
    ))
}

// ---------------------------------------------------------------------------
// 5. Full solver vs the linear propagator at mu = 0

fn c5_linear_consistency() -> Result<(bool, String)> {
    let model = SigmaModel::matched_section4(1.0)?;
    let pair = solve_fundamental(&model, 100.0, 1e-10)?;
    let grid = Grid::new(1, 4096, 150.0)?;
    let u0 = gaussian(grid, 1.0, 1.0);
    let config = SolverConfig {
        dt0: 0.005,
        t_max: 12.0,
        snapshots: vec![2.0, 5.0, 12.0],
        epsilon_prime: None,
        gamma: 2.0,
    };
    let traj = evolve(&u0, &config, &model, &params_1d(0.0, 0.0, 0.0))?;
    let mut worst = 0.0f64;
    for (t, u) in &traj.snapshots {
        let oracle = mdfm_propagate(&u0, &pair, *t)?;
        worst = worst.max(l2_diff(u, &oracle));
    }
    Ok((
        worst <= 1e-4,
        format!("max L2 gap solver vs propagator {worst:.2e} (limit 1e-4) at t in {{2, 5, 12}}"),
    ))
}

// ---------------------------------------------------------------------------
// 6. Threshold classifier vs analytic antiderivatives

/// One classifier case with its analytic comparison.
#[derive(Debug, Clone, Serialize)]
pub struct CaseOutcome {
    pub name: String,
    pub expected: Verdict,
    pub verdict: Verdict,
    pub q_hat: f64,
    pub beta: f64,
    pub agrees: bool,
    pub detail: String,
}

/// The four canonical decay/nonlinearity cases of the threshold criterion,
/// each checked against its analytic antiderivative (or growth law / exact
/// brackets where no elementary antiderivative exists).
pub fn classifier_cases(
    n: f64,
    s0: f64,
    s_max: f64,
    bound: f64,
) -> Result<Vec<CaseOutcome>> {
    let mut out = Vec::new();
    let range = (s0, s_max);
    let critical_decay = move |s: f64| s.powf(-n / 4.0) * s.ln().powf(-n / 2.0);

    // (a) critical power, log-power 2: integrand exactly 1/(s log^2 s)
    {
        let rep = classify_threshold(critical_decay, |a| a.powf(4.0 / n), range, bound)?;
        let (t_last, i_last) = *rep.partial_integrals.last().unwrap();
        let analytic = 1.0 / s0.ln() - 1.0 / t_last.ln();
        let rel = (i_last - analytic).abs() / analytic;
        let agrees = rep.verdict == Verdict::Converging && rel <= 1e-6;
        out.push(CaseOutcome {
            name: "log-power-2".into(),
            expected: Verdict::Converging,
            verdict: rep.verdict,
            q_hat: rep.q_hat,
            beta: rep.beta,
            agrees,
            detail: format!("partial vs analytic rel err {rel:.1e}"),
        });
    }

    // (b) log-power 1: integrand exactly 1/(s log s)
    {
        let decay = move |s: f64| s.powf(-n / 4.0) * s.ln().powf(-n / 4.0);
        let rep = classify_threshold(decay, |a| a.powf(4.0 / n), range, bound)?;
        let (t_last, i_last) = *rep.partial_integrals.last().unwrap();
        let analytic = t_last.ln().ln() - s0.ln().ln();
        let rel = (i_last - analytic).abs() / analytic;
        let agrees = rep.verdict == Verdict::Diverging && rel <= 1e-6;
        out.push(CaseOutcome {
            name: "log-power-1".into(),
            expected: Verdict::Diverging,
            verdict: rep.verdict,
            q_hat: rep.q_hat,
            beta: rep.beta,
            agrees,
            detail: format!("partial vs analytic rel err {rel:.1e}"),
        });
    }

    // (c) subcritical power theta3 = 4/n - 0.4:
    // integrand s^{-(1 - 0.1 n)} (log s)^{...}, grows like exp(0.1 n log s)
    {
        let theta3 = 4.0 / n - 0.4;
        let rep = classify_threshold(critical_decay, move |a| a.powf(theta3), range, bound)?;
        let beta_want = 0.1 * n;
        let (t_last, i_last) = *rep.partial_integrals.last().unwrap();
        // analytic lower bound: (log T)^{-1.8 n/2...} floor times the pure
        // power integral
        let p = 1.0 - 0.1 * n;
        let lower = t_last.ln().powf(-(n / 2.0) * theta3)
            * (t_last.powf(1.0 - p) - s0.powf(1.0 - p))
            / (1.0 - p);
        let agrees = rep.verdict == Verdict::Diverging
            && (rep.beta - beta_want).abs() <= 0.02
            && i_last >= lower;
        out.push(CaseOutcome {
            name: "theta3-subcritical".into(),
            expected: Verdict::Diverging,
            verdict: rep.verdict,
            q_hat: rep.q_hat,
            beta: rep.beta,
            agrees,
            detail: format!(
                "fitted growth {:.3} (analytic {beta_want:.3}), partial {i_last:.3} >= lower bound {lower:.3}",
                rep.beta
            ),
        });
    }

    // (d) short-range term with log exponent 1/2:
    // integrand (1/(s log^2 s)) (log(1/a))^{1/2}, bracketed by exact
    // q = 3/2 log-power integrals since (n/4) log s <= log(1/a) <= n log s
    {
        let rep = classify_threshold(
            critical_decay,
            move |a: f64| a.powf(4.0 / n) * (1.0 / a).ln().powf(0.5),
            range,
            bound,
        )?;
        let (t_last, i_last) = *rep.partial_integrals.last().unwrap();
        let q15 = 2.0 * (s0.ln().powf(-0.5) - t_last.ln().powf(-0.5));
        let lower = (n / 4.0).sqrt() * q15;
        let upper = n.sqrt() * q15;
        let agrees = rep.verdict == Verdict::Converging && i_last >= lower && i_last <= upper;
        out.push(CaseOutcome {
            name: "fs-theta-half".into(),
            expected: Verdict::Converging,
            verdict: rep.verdict,
            q_hat: rep.q_hat,
            beta: rep.beta,
            agrees,
            detail: format!("partial {i_last:.4} within analytic bracket [{lower:.4}, {upper:.4}]"),
        });
    }
    Ok(out)
}

fn c6_threshold_classifier() -> Result<(bool, String)> {
    let cases = classifier_cases(1.0, 3.0, 1e12, 1e6)?;
    let pass = cases.iter().all(|c| c.agrees);
    let detail = cases
        .iter()
        .map(|c| {
            format!(
                "{}: {:?} (want {:?}; {})",
                c.name, c.verdict, c.expected, c.detail
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    Ok((pass, detail))
}

// ---------------------------------------------------------------------------
// 7 and 8 share one small-data critical run to t = 1e4

struct SmallDataRun {
    traj: Trajectory,
    pair: FundamentalPair,
    params: NonlinearityParams,
}

static SMALL_DATA_RUN: OnceLock<std::result::Result<SmallDataRun, String>> = OnceLock::new();

fn small_data_run() -> std::result::Result<&'static SmallDataRun, String> {
    SMALL_DATA_RUN
        .get_or_init(|| {
            let build = || -> Result<SmallDataRun> {
                let model = SigmaModel::matched_section4(1.0)?;
                let pair = solve_fundamental(&model, 1.06e4, 1e-10)?;
                // momentum width under the interior oscillator is
                // max(1/w, alpha w); w = 1/sqrt(alpha) minimizes it, which is
                // what lets N = 2^16 cover both the frequency support and the
                // dilated position spread at t = 1e4
                let grid = Grid::new(1, 65536, 8192.0)?;
                let u0 = InitialSpec::NormalizedGaussian {
                    epsilon_prime: 1e-3,
                    width: 0.58,
                }
                .build(grid, 2.0)?;
                let params = params_1d(1.0, 0.0, 0.0);
                let config = SolverConfig {
                    dt0: 0.01,
                    t_max: 1e4,
                    snapshots: SolverConfig::log_snapshots(2.0, 1e4, 25),
                    epsilon_prime: Some(1e-3),
                    gamma: 2.0,
                };
                let traj = evolve(&u0, &config, &model, &params)?;
                Ok(SmallDataRun { traj, pair, params })
            };
            build().map_err(|e| e.to_string())
        })
        .as_ref()
        .map_err(|e| e.clone())
}

fn c7_critical_decay() -> Result<(bool, String)> {
    let run = small_data_run().map_err(crate::error::Error::InvalidConfig)?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for d in &run.traj.diagnostics {
        let s = d.linf * (1.0 + run.pair.zeta2(d.t).abs()).sqrt();
        lo = lo.min(s);
        hi = hi.max(s);
        xs.push(d.t.ln());
        ys.push(s.ln());
    }
    let line = fit::fit_line(&xs, &ys)?;
    let ratio = hi / lo;
    let slope_ok = line.slope <= 2.0 * line.slope_se;
    let pass = slope_ok && ratio <= 3.0;
    Ok((
        pass,
        format!(
            "normalized sup ||u||_inf (1+|zeta2|)^{{1/2}}: trend slope {:.4} +- {:.4} \
             (want <= 0 within CI), max/min ratio {ratio:.2} (limit 3)",
            line.slope, line.slope_se
        ),
    ))
}

fn c8_modified_scattering() -> Result<(bool, String)> {
    let run = small_data_run().map_err(crate::error::Error::InvalidConfig)?;
    let mut record = scattering::build_record(
        &run.traj,
        &run.pair,
        &run.params,
        PhaseMuConvention::SingleMu,
    )?;
    record.finalize()?;
    let alpha = record.alpha.as_ref().unwrap();
    let corrected = scattering::extract_w(&record, true)?;
    let ablated = scattering::extract_w(&record, false)?;
    // "final" residual: the last ladder point before the endpoint, where
    // the residual vanishes for both variants by construction
    let k = record.times.len() - 2;
    let rc = corrected.residuals[k].l2;
    let ra = ablated.residuals[k].l2;
    let separation = ra / rc;
    let theta_max = record
        .theta
        .last()
        .map(|v| v.iter().fold(0.0f64, |m, &x| m.max(x.abs())))
        .unwrap_or(0.0);
    let trend_ok = alpha.slope < 0.0 && alpha.slope_se.is_finite();
    let separation_ok = separation >= 2.0;
    let pass = trend_ok && separation_ok;
    Ok((
        pass,
        format!(
            "residual rate slope {:.3} +- {:.3} (want < 0); ablation separation {separation:.2}x \
             (want >= 2): accumulated phase tops out at {theta_max:.1e} rad at this data size, \
             so the phase correction is below the solver floor and the separation is unattainable \
             at the mandated epsilon' = 1e-3 (the mechanism is exercised at moderate amplitude \
             in the library tests)",
            alpha.slope, alpha.slope_se
        ),
    ))
}

// ---------------------------------------------------------------------------
// 9. Weighted-norm growth coefficient decreases with the data size

fn c9_gronwall_growth() -> Result<(bool, String)> {
    let model = SigmaModel::matched_section4(1.0)?;
    let grid = Grid::new(1, 8192, 600.0)?;
    let params = params_1d(1.0, 0.0, 0.0);
    let mut slopes = Vec::new();
    for &eps in &[2.4, 1.2, 0.6] {
        let u0 = InitialSpec::NormalizedGaussian {
            epsilon_prime: eps,
            width: 1.0,
        }
        .build(grid, 2.0)?;
        let config = SolverConfig {
            dt0: 0.02,
            t_max: 300.0,
            snapshots: SolverConfig::log_snapshots(3.0, 300.0, 25),
            epsilon_prime: Some(eps),
            gamma: 2.0,
        };
        let traj = evolve(&u0, &config, &model, &params)?;
        let line = crate::evolution::track_weighted_growth(&traj)?;
        slopes.push((eps, line.slope));
    }
    let monotone = slopes[0].1 > slopes[1].1 && slopes[1].1 > slopes[2].1;
    Ok((
        monotone,
        format!(
            "growth coefficient in log log t across the halving sweep: {}",
            slopes
                .iter()
                .map(|(e, s)| format!("eps' = {e}: {s:.4}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    ))
}

// ---------------------------------------------------------------------------
// 10. Fractional-Leibniz ratio stability under grid refinement

fn c10_leibniz_stability() -> Result<(bool, String)> {
    let coarse = Grid::new(1, 1024, 30.0)?;
    let fine = Grid::new(1, 2048, 30.0)?;
    let params = params_1d(1.0, 1.0, 0.5);
    let seed = 2026u64;
    let mut pass = true;
    let mut parts = Vec::new();
    for &gamma in &[0.75, 1.5, 2.5] {
        for (term, name) in [(NonlinearTerm::L, "L"), (NonlinearTerm::S, "S")] {
            let corpus_c = band_limited_corpus(coarse, 50, 0.25, 0.5, seed);
            let corpus_f = band_limited_corpus(fine, 50, 0.25, 0.5, seed);
            let max_of = |fs: &[Field]| {
                fs.iter()
                    .map(|f| leibniz_ratio(f, gamma, &params, term))
                    .fold(0.0f64, f64::max)
            };
            let mc = max_of(&corpus_c);
            let mf = max_of(&corpus_f);
            let change = (mf - mc).abs() / mc;
            let ok = mc.is_finite() && mf.is_finite() && change <= 0.2;
            pass &= ok;
            parts.push(format!("gamma {gamma} {name}: max {mc:.3} -> {mf:.3} ({change:.1e})"));
        }
    }
    Ok((
        pass,
        format!(
            "corpus-max ratio under N -> 2N (limit +-20%): {}",
            parts.join("; ")
        ),
    ))
}
