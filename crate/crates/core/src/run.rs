//! Experiment orchestration: execute one validated [`RunConfig`], emit tidy
//! CSV/JSON artifacts plus a self-describing manifest, and run parameter
//! sweeps as independent parallel jobs.

use crate::acceptance;
use crate::config::{self, Experiment, RunConfig};
use crate::error::{Error, Result};
use crate::evolution;
use crate::nonlinearity::Verdict;
use crate::oscillator::{
    asymptotic_coeffs, default_fit_window, solve_fundamental, verify_a1, FundamentalPair,
    SigmaModel,
};
use crate::scattering::{self, PhaseMuConvention};
use crate::spectral::{
    dispersive_fit, fourier, io as field_io, leibniz_ratio, mdfm_propagate, mdfm_sup_norm, Field,
    Grid, TermL, TermS,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

/// Solver/oracle tolerances in force for a run, recorded in the manifest.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Tolerances {
    pub ode_tol: f64,
    pub quad_tol: f64,
    pub mass_escape_limit: f64,
    pub spectral_tail_limit: f64,
    pub blowup_factor: f64,
    pub wronskian_tol: f64,
    pub l2_drift_limit: f64,
}

pub const TOLERANCES: Tolerances = Tolerances {
    ode_tol: 1e-10,
    quad_tol: 1e-12,
    mass_escape_limit: 1e-6,
    spectral_tail_limit: 1e-8,
    blowup_factor: 10.0,
    wronskian_tol: 1e-8,
    l2_drift_limit: 1e-6,
};

/// Interpretation choices that resolve ambiguities in the source material;
/// recorded so every artifact states which reading produced it.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Interpretations {
    /// F_L in the asymptotic phase is evaluated on the modulus of the
    /// (complex) frequency profile.
    pub f_l_of_modulus: bool,
    pub phase_mu_convention: PhaseMuConvention,
    /// The relation symbol missing from the weighted-growth display is
    /// read as `<=`.
    pub md4_relation: &'static str,
}

#[derive(Debug, Serialize)]
struct RunManifest {
    experiment: &'static str,
    config_sha256: String,
    crate_version: &'static str,
    seed: u64,
    wall_seconds: f64,
    tolerances: Tolerances,
    interpretations: Interpretations,
    artifacts: Vec<String>,
    failures: Vec<String>,
    notes: Vec<String>,
    headline: BTreeMap<String, f64>,
    /// CSV/JSON data artifacts are bit-identical across reruns of the same
    /// config + seed; the manifest itself carries this wall-time field and
    /// is excluded from that guarantee.
    determinism: &'static str,
}

/// Outcome of one run; `ok` means every checked invariant held.
#[derive(Debug, Clone)]
pub struct ExitReport {
    pub experiment: Experiment,
    pub ok: bool,
    pub failures: Vec<String>,
    pub notes: Vec<String>,
    pub artifacts: Vec<String>,
    pub headline: BTreeMap<String, f64>,
    pub wall_seconds: f64,
}

fn sha256_hex(text: &str) -> String {
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    let out = h.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Serde(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Scratch state a driver fills in while it executes.
struct RunScratch {
    artifacts: Vec<String>,
    failures: Vec<String>,
    notes: Vec<String>,
    headline: BTreeMap<String, f64>,
}

impl RunScratch {
    fn new() -> Self {
        RunScratch {
            artifacts: Vec::new(),
            failures: Vec::new(),
            notes: Vec::new(),
            headline: BTreeMap::new(),
        }
    }
    fn metric(&mut self, key: &str, value: f64) {
        self.headline.insert(key.to_string(), value);
    }
}

/// Execute the experiment named by the config, writing all artifacts plus
/// `manifest.json` and the canonical `config.resolved.toml` into `out`.
pub fn run(cfg: &RunConfig, canonical: &str, out: &Path) -> Result<ExitReport> {
    cfg.validate()?;
    std::fs::create_dir_all(out)?;
    let started = std::time::Instant::now();
    let mut scratch = RunScratch::new();
    std::fs::write(out.join("config.resolved.toml"), canonical)?;
    scratch.artifacts.push("config.resolved.toml".into());
    match cfg.experiment {
        Experiment::Zeta => run_zeta(cfg, out, &mut scratch)?,
        Experiment::Propagate => run_propagate(cfg, out, &mut scratch)?,
        Experiment::Evolve => run_evolve(cfg, out, &mut scratch)?,
        Experiment::Scatter => run_scatter(cfg, out, &mut scratch)?,
        Experiment::Classify => run_classify(cfg, out, &mut scratch)?,
        Experiment::LeibnizScan => run_leibniz(cfg, out, &mut scratch)?,
        Experiment::Acceptance => run_acceptance(out, &mut scratch)?,
    }
    let wall_seconds = started.elapsed().as_secs_f64();
    let manifest = RunManifest {
        experiment: cfg.experiment.as_str(),
        config_sha256: sha256_hex(canonical),
        crate_version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        wall_seconds,
        tolerances: TOLERANCES,
        interpretations: Interpretations {
            f_l_of_modulus: true,
            phase_mu_convention: cfg.scatter.convention,
            md4_relation: "le",
        },
        artifacts: scratch.artifacts.clone(),
        failures: scratch.failures.clone(),
        notes: scratch.notes.clone(),
        headline: scratch.headline.clone(),
        determinism: "data artifacts bit-identical for identical config + seed",
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(ExitReport {
        experiment: cfg.experiment,
        ok: scratch.failures.is_empty(),
        failures: scratch.failures,
        notes: scratch.notes,
        artifacts: scratch.artifacts,
        headline: scratch.headline,
        wall_seconds,
    })
}

// ---------------------------------------------------------------------------
// shared helpers

fn build_pair(cfg: &RunConfig, t_max: f64) -> Result<FundamentalPair> {
    solve_fundamental(&cfg.model.build()?, t_max, TOLERANCES.ode_tol)
}

fn initial_field(cfg: &RunConfig, grid: Grid) -> Result<Field> {
    cfg.initial
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("initial data required".into()))?
        .build(grid, cfg.solver.gamma)
}

/// Radius containing all but 1e-8 of the squared mass of the transform.
fn xi_support_radius(u0: &Field) -> f64 {
    let uhat = fourier(u0);
    let grid = uhat.grid;
    let max_r = (grid.npts as f64 / 2.0) * grid.dxi() * (grid.n as f64).sqrt();
    let outside = |r: f64| uhat.mass_fraction_where(|idx| grid.xi_radius_sq(idx) > r * r);
    let (mut lo, mut hi) = (0.0f64, max_r);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if outside(mid) > 1e-8 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Report the box-sizing rule: the dominant spatial growth is dilation by
/// zeta2, so L should exceed |zeta2(t_max)| times the frequency support
/// radius of the data with a 2x margin.
fn box_report(
    u0: &Field,
    pair: &FundamentalPair,
    t_max: f64,
    scratch: &mut RunScratch,
) {
    let r_xi = xi_support_radius(u0);
    let recommended = 2.0 * pair.zeta2(t_max).abs() * r_xi;
    scratch.metric("recommended_box_half_width", recommended);
    if u0.grid.l < recommended {
        scratch.notes.push(format!(
            "box half-width {} below the recommended {recommended:.1} \
             (= 2 |zeta2(t_max)| x frequency support radius {r_xi:.2}); \
             expect the mass-escape monitor to trip",
            u0.grid.l
        ));
    }
}

// ---------------------------------------------------------------------------
// zeta

fn zeta_probe_grid(model: &SigmaModel, t_hi: f64) -> Vec<f64> {
    let mut ts = Vec::new();
    let r0 = model.r0();
    let log_side = |lo: f64, hi: f64, pts: usize, out: &mut Vec<f64>| {
        for i in 0..pts {
            let t = lo * (hi / lo).powf(i as f64 / (pts - 1) as f64);
            out.push(t);
            out.push(-t);
        }
    };
    if let Some(r0) = r0 {
        let interior = r0.min(t_hi);
        for i in 1..=100 {
            let t = interior * i as f64 / 100.0;
            ts.push(t);
            ts.push(-t);
        }
        if t_hi > r0 * 1.001 {
            log_side(r0 * 1.001, t_hi, 300, &mut ts);
        }
    } else {
        log_side((t_hi * 1e-6).max(1e-3), t_hi, 300, &mut ts);
    }
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts
}

#[derive(Serialize)]
struct MatchingReport {
    wronskian_max_dev: f64,
    a1: crate::oscillator::A1Report,
    fit: Option<crate::oscillator::AsymptoticFit>,
}

fn run_zeta(cfg: &RunConfig, out: &Path, scratch: &mut RunScratch) -> Result<()> {
    let model = cfg.model.build()?;
    let t_hi = cfg.solver.t_max.max(10.0);
    let pair = solve_fundamental(&model, t_hi * 1.001 + 1.0, TOLERANCES.ode_tol)?;
    let probes = zeta_probe_grid(&model, t_hi);
    let mut w = std::io::BufWriter::new(std::fs::File::create(out.join("zeta.csv"))?);
    writeln!(w, "t,zeta1,zeta2,dzeta1,dzeta2,wronskian")?;
    let mut max_dev = 0.0f64;
    for &t in &probes {
        let v = pair.eval(t);
        max_dev = max_dev.max((v.wronskian() - 1.0).abs());
        writeln!(
            w,
            "{},{},{},{},{},{}",
            t,
            v.z1,
            v.z2,
            v.dz1,
            v.dz2,
            v.wronskian()
        )?;
    }
    w.flush()?;
    drop(w);
    scratch.artifacts.push("zeta.csv".into());
    let a1 = verify_a1(&pair, &probes);
    let fit = match model.r0() {
        Some(r0) => {
            let (lo, hi) = default_fit_window(r0);
            let hi = hi.min(t_hi);
            if hi > lo * 10.0 {
                Some(asymptotic_coeffs(&pair, (lo, hi))?)
            } else {
                scratch.notes.push(format!(
                    "t_max = {t_hi} leaves no room for the asymptotic fit window \
                     [{lo}, {}]; fit skipped",
                    default_fit_window(r0).1
                ));
                None
            }
        }
        None => None,
    };
    scratch.metric("wronskian_max_dev", max_dev);
    scratch.metric("min_abs_zeta2", a1.min_abs_zeta2);
    if let Some(f) = &fit {
        scratch.metric("zeta1_log_coeff_plus", f.plus.c1.1);
        scratch.metric("zeta1_log_coeff_minus", f.minus.c1.1);
    }
    if max_dev > TOLERANCES.wronskian_tol {
        scratch.failures.push(format!(
            "wronskian deviates by {max_dev:e} (limit {:e})",
            TOLERANCES.wronskian_tol
        ));
    }
    if !a1.pass {
        scratch
            .notes
            .push(format!("structural assumption check failed: {:?}", a1.failures));
    }
    write_json(
        &out.join("matching.json"),
        &MatchingReport {
            wronskian_max_dev: max_dev,
            a1,
            fit,
        },
    )?;
    scratch.artifacts.push("matching.json".into());
    Ok(())
}

// ---------------------------------------------------------------------------
// propagate

fn run_propagate(cfg: &RunConfig, out: &Path, scratch: &mut RunScratch) -> Result<()> {
    let grid = cfg.grid.build()?;
    let solver = cfg.solver.build(grid.n)?;
    let u0 = initial_field(cfg, grid)?;
    let pair = build_pair(cfg, solver.t_max * 1.05 + 1.0)?;
    box_report(&u0, &pair, solver.t_max, scratch);
    let mut series = Vec::new();
    let mut w = std::io::BufWriter::new(std::fs::File::create(out.join("dispersive.csv"))?);
    writeln!(w, "t,sup,abs_zeta2")?;
    for &t in &solver.snapshots {
        match mdfm_sup_norm(&u0, &pair, t) {
            Ok(sup) => {
                writeln!(w, "{},{},{}", t, sup, pair.zeta2(t).abs())?;
                series.push((t, sup));
            }
            Err(Error::SingularTime { .. }) => {
                scratch
                    .notes
                    .push(format!("t = {t}: skipped (zeta2 near a zero)"));
            }
            Err(e) => return Err(e),
        }
    }
    w.flush()?;
    drop(w);
    scratch.artifacts.push("dispersive.csv".into());
    if let Some(&(t_last, _)) = series.last() {
        let u_last = mdfm_propagate(&u0, &pair, t_last)?;
        field_io::write_field(&out.join("u_final.field"), &u_last, t_last)?;
        scratch.artifacts.push("u_final.field".into());
    }
    match dispersive_fit(&series, &pair) {
        Ok(f) => {
            scratch.metric("slope_vs_zeta2", f.slope_vs_zeta2);
            scratch.metric("slope_vs_t", f.slope_vs_t);
            scratch.metric("log_exponent", f.log_exponent);
        }
        Err(e) => scratch.notes.push(format!("dispersive fit unavailable: {e}")),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// evolve

fn evolve_common(
    cfg: &RunConfig,
    out: &Path,
    scratch: &mut RunScratch,
) -> Result<(crate::evolution::Trajectory, FundamentalPair)> {
    let grid = cfg.grid.build()?;
    let solver = cfg.solver.build(grid.n)?;
    let u0 = initial_field(cfg, grid)?;
    let model = cfg.model.build()?;
    let pair = solve_fundamental(&model, solver.t_max * 1.05 + 1.0, TOLERANCES.ode_tol)?;
    box_report(&u0, &pair, solver.t_max, scratch);
    let traj = evolution::evolve(&u0, &solver, &model, &cfg.params)?;
    evolution::write_diagnostics_csv(&out.join("diagnostics.csv"), &traj)?;
    scratch.artifacts.push("diagnostics.csv".into());
    let l2_0 = u0.l2_norm();
    let drift = traj
        .diagnostics
        .iter()
        .map(|d| (d.l2 - l2_0).abs() / l2_0)
        .fold(0.0, f64::max);
    scratch.metric("l2_rel_drift", drift);
    if drift > TOLERANCES.l2_drift_limit {
        scratch.failures.push(format!(
            "L2 mass drifted by {drift:e} (limit {:e})",
            TOLERANCES.l2_drift_limit
        ));
    }
    match evolution::track_weighted_growth(&traj) {
        Ok(f) => {
            scratch.metric("growth_slope", f.slope);
            scratch.metric("growth_slope_se", f.slope_se);
        }
        Err(e) => scratch.notes.push(format!("growth fit unavailable: {e}")),
    }
    Ok((traj, pair))
}

fn run_evolve(cfg: &RunConfig, out: &Path, scratch: &mut RunScratch) -> Result<()> {
    let (traj, _pair) = evolve_common(cfg, out, scratch)?;
    if let Some((t, u)) = traj.snapshots.last() {
        field_io::write_field(&out.join("u_final.field"), u, *t)?;
        scratch.artifacts.push("u_final.field".into());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// scatter

fn l4_exponents(cfg: &RunConfig) -> (f64, f64) {
    let n = cfg.params.n as f64;
    let gamma = cfg.solver.gamma;
    let alpha = cfg
        .scatter
        .alpha
        .unwrap_or_else(|| (0.99 * (gamma - n / 2.0) / 2.0).min(1.0));
    let gamma_prime = cfg.scatter.gamma_prime.unwrap_or(gamma);
    (alpha, gamma_prime)
}

fn run_scatter(cfg: &RunConfig, out: &Path, scratch: &mut RunScratch) -> Result<()> {
    let (traj, pair) = evolve_common(cfg, out, scratch)?;
    let mut record = scattering::build_record(&traj, &pair, &cfg.params, cfg.scatter.convention)?;
    record.finalize()?;
    scattering::write_record(&out.join("record"), &record)?;
    scratch.artifacts.push("record/".into());
    if let Some(a) = &record.alpha {
        scratch.metric("alpha_slope", a.slope);
        scratch.metric("alpha_slope_se", a.slope_se);
    }
    // ablation: the same ladder with Theta forced to zero
    let ablated = scattering::extract_w(&record, false)?;
    {
        let mut w =
            std::io::BufWriter::new(std::fs::File::create(out.join("residuals_ablated.csv"))?);
        writeln!(w, "t,l2,sup")?;
        for r in &ablated.residuals {
            writeln!(w, "{},{},{}", r.t, r.l2, r.sup)?;
        }
        w.flush()?;
    }
    scratch.artifacts.push("residuals_ablated.csv".into());
    if let (Some(rc), Some(ra)) = (
        mid_ladder_residual(&record.residuals),
        mid_ladder_residual(&ablated.residuals),
    ) {
        scratch.metric("mid_residual_corrected", rc);
        scratch.metric("mid_residual_ablated", ra);
    }
    let compare =
        scattering::profile_compare(&traj, &record, &pair, &cfg.params, cfg.scatter.mask_rel)?;
    write_json(&out.join("profile_compare.json"), &compare)?;
    scratch.artifacts.push("profile_compare.json".into());
    let (alpha, gamma_prime) = l4_exponents(cfg);
    match scattering::verify_l4_bound(&traj, &pair, &cfg.params, alpha, cfg.solver.gamma, gamma_prime)
    {
        Ok(l4) => {
            scratch.metric("l4_max_ratio_pointwise", l4.max_ratio_pointwise);
            scratch.metric("l4_max_ratio_integral", l4.max_ratio_integral);
            if !l4.pass {
                scratch
                    .failures
                    .push(format!("dispersive inequality check failed: {:?}", l4.notes));
            }
            write_json(&out.join("l4.json"), &l4)?;
            scratch.artifacts.push("l4.json".into());
        }
        Err(e) => scratch.notes.push(format!("inequality check unavailable: {e}")),
    }
    Ok(())
}

/// Residual at the ladder point nearest t_last / sqrt(10): late enough to be
/// asymptotic, clear of the final point where the residual vanishes by
/// construction.
fn mid_ladder_residual(residuals: &[scattering::ResidualPoint]) -> Option<f64> {
    let t_last = residuals.last()?.t;
    let target = t_last / 10f64.sqrt();
    residuals
        .iter()
        .min_by(|a, b| {
            (a.t - target)
                .abs()
                .total_cmp(&(b.t - target).abs())
        })
        .map(|r| r.l2)
}

// ---------------------------------------------------------------------------
// classify

#[derive(Serialize)]
struct ClassifyReport {
    canonical: Vec<acceptance::CaseOutcome>,
    theta3: Vec<Theta3Row>,
}

#[derive(Serialize)]
struct Theta3Row {
    theta3: f64,
    verdict: Verdict,
    q_hat: f64,
    beta: f64,
}

fn run_classify(cfg: &RunConfig, out: &Path, scratch: &mut RunScratch) -> Result<()> {
    let n = cfg.params.n as f64;
    let spec = &cfg.classify;
    let cases = acceptance::classifier_cases(n, spec.s0(), spec.s_max(), spec.divergence_bound())?;
    let mut rows = Vec::new();
    for &theta3 in &spec.theta3 {
        let rep = crate::nonlinearity::classify_threshold(
            |s: f64| s.powf(-n / 4.0) * s.ln().powf(-n / 2.0),
            |a: f64| a.abs().powf(theta3),
            (spec.s0(), spec.s_max()),
            spec.divergence_bound(),
        )?;
        rows.push(Theta3Row {
            theta3,
            verdict: rep.verdict,
            q_hat: rep.q_hat,
            beta: rep.beta,
        });
    }
    let agreed = cases.iter().filter(|c| c.agrees).count();
    scratch.metric("canonical_cases_passed", agreed as f64);
    for c in &cases {
        if !c.agrees {
            scratch
                .failures
                .push(format!("classifier case `{}` disagrees: {}", c.name, c.detail));
        }
    }
    write_json(
        &out.join("classify.json"),
        &ClassifyReport {
            canonical: cases,
            theta3: rows,
        },
    )?;
    scratch.artifacts.push("classify.json".into());
    Ok(())
}

// ---------------------------------------------------------------------------
// leibniz scan

/// Deterministic corpus of band-limited random functions: each is a sum of
/// 24 Fourier modes with frequencies below `band_fraction` of Nyquist.
/// Frequencies are grid-commensurate multiples of dxi, so the same function
/// is exactly representable on the refined grid with the same box.
pub fn band_limited_corpus(
    grid: Grid,
    count: usize,
    band_fraction: f64,
    amplitude: f64,
    seed: u64,
) -> Vec<Field> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let kmax = ((grid.npts as f64 / 2.0) * band_fraction).floor().max(1.0) as i64;
    let modes = 24usize;
    (0..count)
        .map(|_| {
            let coeffs: Vec<(f64, Complex64)> = (0..modes)
                .map(|_| {
                    let k = rng.gen_range(-kmax..=kmax) as f64;
                    let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    (k * grid.dxi(), c)
                })
                .collect();
            let norm = amplitude / (modes as f64).sqrt();
            Field::from_fn(grid, |x| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (xi, c) in &coeffs {
                    // product of identical 1-d plane waves across axes keeps
                    // the corpus generator dimension-agnostic
                    let phase: f64 = x.iter().map(|&v| xi * v).sum();
                    acc += c * Complex64::from_polar(1.0, phase);
                }
                acc * norm
            })
        })
        .collect()
}

fn refine(grid: Grid) -> Result<Grid> {
    Grid::new(grid.n, grid.npts * 2, grid.l)
}

fn run_leibniz(cfg: &RunConfig, out: &Path, scratch: &mut RunScratch) -> Result<()> {
    let grid = cfg.grid.build()?;
    let fine = refine(grid)?;
    let spec = &cfg.leibniz;
    let mut w = std::io::BufWriter::new(std::fs::File::create(out.join("leibniz.csv"))?);
    writeln!(w, "gamma,term,func,ratio_coarse,ratio_fine")?;
    let mut worst_change = 0.0f64;
    let mut all_finite = true;
    for &gamma in &spec.gammas {
        for (term, name) in [(TermL, "L"), (TermS, "S")] {
            // regenerate from the same seed so coarse and fine grids see
            // identical functions
            let coarse =
                band_limited_corpus(grid, spec.corpus, spec.band_fraction, spec.amplitude, cfg.seed);
            let refined =
                band_limited_corpus(fine, spec.corpus, spec.band_fraction, spec.amplitude, cfg.seed);
            let mut max_c = 0.0f64;
            let mut max_f = 0.0f64;
            for (i, (fc, ff)) in coarse.iter().zip(&refined).enumerate() {
                let rc = leibniz_ratio(fc, gamma, &cfg.params, term);
                let rf = leibniz_ratio(ff, gamma, &cfg.params, term);
                all_finite &= rc.is_finite() && rf.is_finite();
                max_c = max_c.max(rc);
                max_f = max_f.max(rf);
                writeln!(w, "{},{},{},{},{}", gamma, name, i, rc, rf)?;
            }
            let change = (max_f - max_c).abs() / max_c.max(1e-300);
            worst_change = worst_change.max(change);
            scratch.metric(&format!("max_ratio_{name}_gamma_{gamma}"), max_f);
        }
    }
    w.flush()?;
    drop(w);
    scratch.artifacts.push("leibniz.csv".into());
    scratch.metric("worst_refinement_change", worst_change);
    if !all_finite {
        scratch
            .failures
            .push("non-finite fractional-Leibniz ratio in the corpus".into());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// acceptance

fn run_acceptance(out: &Path, scratch: &mut RunScratch) -> Result<()> {
    let results = acceptance::all();
    let mut lines = String::new();
    for c in &results {
        lines.push_str(&c.summary_line());
        lines.push('\n');
        if !c.pass {
            scratch
                .failures
                .push(format!("criterion {} ({}) failed", c.id, c.name));
        }
    }
    std::fs::write(out.join("acceptance.txt"), &lines)?;
    write_json(&out.join("acceptance.json"), &results)?;
    scratch.artifacts.push("acceptance.txt".into());
    scratch.artifacts.push("acceptance.json".into());
    let passed = results.iter().filter(|c| c.pass).count();
    scratch.metric("criteria_passed", passed as f64);
    scratch.metric("criteria_total", results.len() as f64);
    Ok(())
}

// ---------------------------------------------------------------------------
// sweep

#[derive(Debug)]
pub struct SweepReport {
    /// Successful rows written to `sweep.csv`, in input order.
    pub rows: usize,
    /// `(value, error)` pairs for the jobs that failed.
    pub failed: Vec<(String, String)>,
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

/// Run one job per value of `axis`, in parallel batches of `jobs`, each in
/// its own subdirectory; aggregate headline metrics into `sweep.csv`.
/// Failed values are listed in `sweep_failures.json`; successful rows are
/// still emitted.
pub fn sweep(
    base_text: &str,
    axis: &str,
    values: &[String],
    jobs: usize,
    out: &Path,
) -> Result<SweepReport> {
    if values.is_empty() {
        return Err(Error::InvalidConfig(
            "sweep: empty value list, nothing to run".into(),
        ));
    }
    let tree: toml::Value = base_text
        .parse()
        .map_err(|e| Error::InvalidConfig(format!("config parse error: {e}")))?;
    if !config::path_is_scalar(&tree, axis) {
        return Err(Error::InvalidConfig(format!(
            "sweep axis `{axis}` does not name an existing scalar field"
        )));
    }
    // validate the base before spawning anything
    config::parse_with_overrides(base_text, &[])?;
    std::fs::create_dir_all(out)?;
    let jobs = jobs.max(1);
    let mut results: Vec<(String, std::result::Result<ExitReport, String>)> =
        Vec::with_capacity(values.len());
    for batch in values.chunks(jobs) {
        let outcomes = std::thread::scope(|scope| {
            let handles: Vec<_> = batch
                .iter()
                .map(|value| {
                    let subdir = out.join(format!("{}_{}", sanitize(axis), sanitize(value)));
                    scope.spawn(move || {
                        let overrides = [(axis.to_string(), value.clone())];
                        config::parse_with_overrides(base_text, &overrides)
                            .and_then(|(cfg, canonical)| run(&cfg, &canonical, &subdir))
                            .map_err(|e| e.to_string())
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("sweep worker panicked"))
                .collect::<Vec<_>>()
        });
        for (value, outcome) in batch.iter().zip(outcomes) {
            results.push((value.clone(), outcome));
        }
    }
    // union of headline keys across successful jobs, stable order
    let mut keys: Vec<String> = Vec::new();
    for (_, r) in &results {
        if let Ok(rep) = r {
            for k in rep.headline.keys() {
                if !keys.contains(k) {
                    keys.push(k.clone());
                }
            }
        }
    }
    keys.sort();
    let mut w = std::io::BufWriter::new(std::fs::File::create(out.join("sweep.csv"))?);
    write!(w, "{axis},ok")?;
    for k in &keys {
        write!(w, ",{k}")?;
    }
    writeln!(w)?;
    let mut rows = 0usize;
    let mut failed = Vec::new();
    for (value, r) in &results {
        match r {
            Ok(rep) => {
                write!(w, "{value},{}", rep.ok)?;
                for k in &keys {
                    match rep.headline.get(k) {
                        Some(v) => write!(w, ",{v}")?,
                        None => write!(w, ",")?,
                    }
                }
                writeln!(w)?;
                rows += 1;
            }
            Err(e) => failed.push((value.clone(), e.clone())),
        }
    }
    w.flush()?;
    if !failed.is_empty() {
        #[derive(Serialize)]
        struct FailureRow<'a> {
            value: &'a str,
            error: &'a str,
        }
        let rows: Vec<FailureRow> = failed
            .iter()
            .map(|(v, e)| FailureRow { value: v, error: e })
            .collect();
        write_json(&out.join("sweep_failures.json"), &rows)?;
    }
    Ok(SweepReport { rows, failed })
}

#[cfg(test)]
mod tests {
    use super::*;

    const CLASSIFY_CFG: &str = r#"
experiment = "classify"

[model]
kind = "zero"

[params]
mu_l = 1.0
mu_s = 0.0
theta = 0.0
r = 60.0
delta0 = 0.25
n = 1

[grid]
n = 1
npts = 64
l = 20.0

[solver]
dt0 = 0.01
t_max = 10.0
gamma = 2.0
snapshots = [10.0]

[classify]
theta3 = [3.0, 4.5]
"#;

    #[test]
    fn classify_run_writes_artifacts_and_passes() {
        let dir = tempfile::tempdir().unwrap();
        let (cfg, canonical) = config::parse_with_overrides(CLASSIFY_CFG, &[]).unwrap();
        let rep = run(&cfg, &canonical, dir.path()).unwrap();
        assert!(rep.ok, "failures: {:?}", rep.failures);
        assert!(dir.path().join("manifest.json").exists());
        assert!(dir.path().join("classify.json").exists());
        assert!(dir.path().join("config.resolved.toml").exists());
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap())
                .unwrap();
        assert_eq!(manifest["experiment"], "classify");
        assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    }

    #[test]
    fn classify_outputs_are_deterministic() {
        let (cfg, canonical) = config::parse_with_overrides(CLASSIFY_CFG, &[]).unwrap();
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        run(&cfg, &canonical, d1.path()).unwrap();
        run(&cfg, &canonical, d2.path()).unwrap();
        for name in ["classify.json", "config.resolved.toml"] {
            let a = std::fs::read(d1.path().join(name)).unwrap();
            let b = std::fs::read(d2.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between identical runs");
        }
    }

    #[test]
    fn sweep_rejects_empty_values_and_bad_axis() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("sweep");
        let err = sweep(CLASSIFY_CFG, "params.theta", &[], 2, &out).unwrap_err();
        assert!(err.to_string().contains("empty"), "{err}");
        assert!(!out.exists(), "no output on empty sweep");
        let vals = ["0.1".to_string()];
        let err = sweep(CLASSIFY_CFG, "params.no_such", &vals, 2, &out).unwrap_err();
        assert!(err.to_string().contains("no_such"), "{err}");
    }

    #[test]
    fn sweep_aggregates_and_reports_partial_failures() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("sweep");
        // theta = 1.5 is invalid, the other two run
        let vals: Vec<String> = ["0.0", "0.5", "1.5"].iter().map(|s| s.to_string()).collect();
        let rep = sweep(CLASSIFY_CFG, "params.theta", &vals, 3, &out).unwrap();
        assert_eq!(rep.rows, 2);
        assert_eq!(rep.failed.len(), 1);
        assert_eq!(rep.failed[0].0, "1.5");
        let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
        assert!(csv.lines().count() == 3, "{csv}");
        assert!(csv.starts_with("params.theta,ok"), "{csv}");
        assert!(out.join("sweep_failures.json").exists());
        assert!(out.join("params.theta_0.5").join("manifest.json").exists());
    }

    const SCATTER_CFG: &str = r#"
experiment = "scatter"

[model]
kind = "matched_section4"
r0 = 1.0

[params]
mu_l = 1.0
mu_s = 0.0
theta = 0.0
r = 60.0
delta0 = 0.25
n = 1

[grid]
n = 1
npts = 8192
l = 600.0

[solver]
dt0 = 0.02
t_max = 300.0
gamma = 2.0
ladder = { t_min = 3.0, per_decade = 15 }

[initial]
kind = "normalized_gaussian"
epsilon_prime = 0.5
width = 1.0

[scatter]
convention = "single_mu"
"#;

    #[test]
    fn scatter_run_end_to_end() {
        let dir = tempfile::tempdir().unwrap();
        let (cfg, canonical) = config::parse_with_overrides(SCATTER_CFG, &[]).unwrap();
        let rep = run(&cfg, &canonical, dir.path()).unwrap();
        assert!(rep.ok, "failures: {:?}", rep.failures);
        for name in [
            "diagnostics.csv",
            "residuals_ablated.csv",
            "profile_compare.json",
            "l4.json",
        ] {
            assert!(dir.path().join(name).exists(), "missing {name}");
        }
        assert!(dir.path().join("record/manifest.json").exists());
        assert!(dir.path().join("record/w.field").exists());
        assert!(dir.path().join("record/residuals.csv").exists());
        assert!(rep.headline.contains_key("alpha_slope"));
        assert!(rep.headline.contains_key("l2_rel_drift"));
        assert!(rep.headline["l2_rel_drift"] < 1e-9);
        // the persisted record round-trips
        let persisted = scattering::read_record(&dir.path().join("record")).unwrap();
        assert_eq!(persisted.convention, PhaseMuConvention::SingleMu);
        assert!(persisted.times.len() > 20);
    }

    #[test]
    fn leibniz_corpus_is_seed_deterministic_and_band_limited() {
        let grid = Grid::new(1, 128, 20.0).unwrap();
        let a = band_limited_corpus(grid, 3, 0.25, 0.5, 7);
        let b = band_limited_corpus(grid, 3, 0.25, 0.5, 7);
        assert_eq!(a[2].values, b[2].values);
        let c = band_limited_corpus(grid, 3, 0.25, 0.5, 8);
        assert_ne!(a[0].values, c[0].values);
        // spectrum confined to the configured band
        let hat = fourier(&a[0]);
        let kcut = 0.25 * (grid.npts as f64 / 2.0) * grid.dxi();
        let out_of_band = hat.mass_fraction_where(|i| grid.xi_radius_sq(i) > (kcut * 1.01).powi(2));
        assert!(out_of_band < 1e-24, "out-of-band mass {out_of_band:e}");
    }

    #[test]
    fn xi_support_radius_of_gaussian() {
        let grid = Grid::new(1, 1024, 40.0).unwrap();
        let f = Field::from_fn(grid, |x| {
            Complex64::new((-x[0] * x[0] / 2.0).exp(), 0.0)
        });
        let r = xi_support_radius(&f);
        // exp(-xi^2) mass outside radius r is erfc(r); 1e-8 at r ~ 4.0
        assert!(r > 3.5 && r < 4.6, "r = {r}");
    }
}
