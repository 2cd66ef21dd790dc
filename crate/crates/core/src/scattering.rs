//! Modified-scattering diagnostics: the interaction profile
//! `v(t) = U_0(0,t) u(t)`, the accumulated long-range phase Theta, the
//! scattering datum W with its residual series and rate fit, the profile
//! reconstruction comparison, and the pointwise decay inequality checks.

use crate::error::{Error, Result};
use crate::evolution::Trajectory;
use crate::fit::{self, LineFit};
use crate::nonlinearity::{self, NonlinearityParams};
use crate::oscillator::FundamentalPair;
use crate::spectral::{
    fourier, inverse_fourier, mdfm_inverse, mdfm_propagate, sobolev_norm, Field, SobolevSide,
    Space,
};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Where the long-range coefficient mu_L multiplies the accumulated phase.
///
/// The asymptotic phase is written as `exp{i mu_L Int F_L(...) dtau}` while
/// F_L itself already carries a factor mu_L, an apparent doubling. Under
/// `SingleMu` the integrand uses F_L with unit coefficient and mu_L
/// multiplies the integral exactly once (this matches the Duhamel phase of
/// the solver and is the default); `DoubleMu` takes the formula literally,
/// so mu_L enters squared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseMuConvention {
    SingleMu,
    DoubleMu,
}

fn phase_factor(params: &NonlinearityParams, conv: PhaseMuConvention) -> f64 {
    match conv {
        PhaseMuConvention::SingleMu => params.mu_l,
        PhaseMuConvention::DoubleMu => params.mu_l * params.mu_l,
    }
}

/// Long-range term with unit coefficient: `a^{4/n} log(R + 1/a)`.
fn fl_unit(amplitude: f64, params: &NonlinearityParams) -> f64 {
    let unit = NonlinearityParams {
        mu_l: 1.0,
        ..*params
    };
    nonlinearity::eval_fl(amplitude, &unit)
}

/// Short-range term with unit coefficient: `a^{4/n} (log(R + 1/a))^theta`.
fn fs_unit(amplitude: f64, params: &NonlinearityParams) -> f64 {
    let unit = NonlinearityParams {
        mu_s: 1.0,
        ..*params
    };
    nonlinearity::eval_fs(amplitude, &unit)
}

/// Frequency-space interaction profile `F(U_0(0,t) u(t))`: the solution
/// pulled back by the linear flow, then Fourier transformed. Constant in t
/// exactly when the evolution is linear.
pub fn to_profile(u: &Field, pair: &FundamentalPair, t: f64) -> Result<Field> {
    let v = mdfm_inverse(u, pair, t)?;
    Ok(fourier(&v))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResidualPoint {
    pub t: f64,
    pub l2: f64,
    pub sup: f64,
}

/// Ladder of frequency-space profiles with the accumulated phase
/// `Theta(t, xi) = c Int F_L(|zeta2(tau)|^{-n/2} |Fv(tau, xi)|) dtau`
/// (c fixed by the mu convention), quadrature trapezoidal in log tau over
/// the snapshot times. The integral starts at the first ladder time, which
/// therefore must sit at (or just beyond) the radius r0 where the critical
/// tail begins; Theta at the first time is 0 by convention.
#[derive(Debug, Clone)]
pub struct ScatteringRecord {
    pub r0: f64,
    pub convention: PhaseMuConvention,
    pub times: Vec<f64>,
    /// Frequency-space profile at each ladder time.
    pub fv: Vec<Field>,
    /// Real phase field Theta(t_k, xi), one vector of nodal values per time.
    pub theta: Vec<Vec<f64>>,
    /// Set by [`finalize`]: the scattering datum and its residual series.
    pub w: Option<Field>,
    pub residuals: Vec<ResidualPoint>,
    pub alpha: Option<LineFit>,
    /// Empirical residual phase, set by [`profile_compare`]'s estimate.
    pub phi: Option<Vec<f64>>,
}

impl ScatteringRecord {
    pub fn new(r0: f64, convention: PhaseMuConvention) -> Self {
        ScatteringRecord {
            r0,
            convention,
            times: Vec::new(),
            fv: Vec::new(),
            theta: Vec::new(),
            w: None,
            residuals: Vec::new(),
            alpha: None,
            phi: None,
        }
    }

    fn integrand(&self, t: f64, fv: &Field, pair: &FundamentalPair, params: &NonlinearityParams) -> Vec<f64> {
        let decay = pair.zeta2(t).abs().powf(-(fv.grid.n as f64) / 2.0);
        let c = phase_factor(params, self.convention);
        fv.values
            .iter()
            .map(|v| c * fl_unit(decay * v.norm(), params))
            .collect()
    }

    /// Append a snapshot `(t, Fv)` and extend Theta to t by one trapezoid
    /// panel in log tau. Snapshots must arrive in increasing t > r0.
    pub fn push_snapshot(
        &mut self,
        t: f64,
        fv: Field,
        pair: &FundamentalPair,
        params: &NonlinearityParams,
    ) -> Result<()> {
        fv.assert_space(Space::Frequency)?;
        if t <= self.r0 {
            return Err(Error::InvalidConfig(format!(
                "snapshot time {t} not beyond r0 = {}",
                self.r0
            )));
        }
        if let Some(&prev) = self.times.last() {
            if t <= prev {
                return Err(Error::NonMonotoneTime { prev, t });
            }
        }
        if let Some(first) = self.fv.first() {
            if first.grid != fv.grid {
                return Err(Error::GridMismatch(
                    "profile grid changed along the ladder".into(),
                ));
            }
        }
        let theta = match self.times.last() {
            None => vec![0.0; fv.grid.len()],
            Some(&prev) => {
                let half = 0.5 * (t / prev).ln();
                let ga = self.integrand(prev, self.fv.last().unwrap(), pair, params);
                let gb = self.integrand(t, &fv, pair, params);
                let last = self.theta.last().unwrap();
                // Int g dtau = Int g tau dln tau, trapezoid in ln tau
                last.iter()
                    .zip(ga.iter().zip(&gb))
                    .map(|(&acc, (&a, &b))| acc + half * (a * prev + b * t))
                    .collect()
            }
        };
        self.times.push(t);
        self.fv.push(fv);
        self.theta.push(theta);
        Ok(())
    }

    /// Log-t decades spanned by the ladder.
    pub fn decades(&self) -> f64 {
        match (self.times.first(), self.times.last()) {
            (Some(&a), Some(&b)) if a > 0.0 => (b / a).log10(),
            _ => 0.0,
        }
    }

    /// Extract W (phase-corrected), store it with the residual series and
    /// the rate fit on the record.
    pub fn finalize(&mut self) -> Result<()> {
        let ext = extract_w(self, true)?;
        self.w = Some(ext.w);
        self.residuals = ext.residuals;
        self.alpha = Some(ext.alpha);
        Ok(())
    }
}

/// Result of the W extraction.
#[derive(Debug, Clone)]
pub struct WExtraction {
    pub w: Field,
    pub residuals: Vec<ResidualPoint>,
    /// Slope of log residual against log log t over the last 1.5 decades
    /// (negative slope = residual decreasing on the log-t scale).
    pub alpha: LineFit,
}

fn corrected_profile(record: &ScatteringRecord, k: usize, phase_corrected: bool) -> Field {
    let mut f = record.fv[k].clone();
    if phase_corrected {
        for (v, &th) in f.values.iter_mut().zip(&record.theta[k]) {
            *v *= Complex64::from_polar(1.0, th);
        }
    }
    f
}

/// W := Fv(t_last) e^{i Theta(t_last)}, with the residual series
/// `r(t) = ||Fv(t) e^{i Theta(t)} - W||` in L2 and sup norm and the rate
/// slope in log log t. `phase_corrected = false` is the ablation: Theta is
/// forced to 0 throughout (the unmodified-scattering comparison).
pub fn extract_w(record: &ScatteringRecord, phase_corrected: bool) -> Result<WExtraction> {
    let need = 1.5;
    let got = record.decades();
    if got < need {
        return Err(Error::LadderTooShort { got, need });
    }
    let last = record.times.len() - 1;
    let w = corrected_profile(record, last, phase_corrected);
    let mut residuals = Vec::with_capacity(last + 1);
    let weight = w.node_weight().sqrt();
    for k in 0..=last {
        let g = corrected_profile(record, k, phase_corrected);
        let mut l2 = 0.0f64;
        let mut sup = 0.0f64;
        for (a, b) in g.values.iter().zip(&w.values) {
            let d = (a - b).norm();
            l2 += d * d;
            sup = sup.max(d);
        }
        residuals.push(ResidualPoint {
            t: record.times[k],
            l2: l2.sqrt() * weight,
            sup,
        });
    }
    // rate fit over the last 1.5 decades, excluding the final point where
    // the residual vanishes by construction
    let t_last = record.times[last];
    let cut = t_last / 10f64.powf(need);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for r in residuals.iter().take(last) {
        if r.t >= cut && r.t > 1.0 && r.l2 > 0.0 {
            xs.push(r.t.ln().ln());
            ys.push(r.l2.ln());
        }
    }
    // residuals at the exact-zero floor (e.g. a strictly linear run) leave
    // no points to fit; report a flat rate with infinite uncertainty
    let alpha = if xs.len() < 6 {
        LineFit {
            slope: 0.0,
            intercept: 0.0,
            slope_se: f64::INFINITY,
            rms: 0.0,
        }
    } else {
        fit::fit_line(&xs, &ys)?
    };
    Ok(WExtraction {
        w,
        residuals,
        alpha,
    })
}

/// Build the profile ladder from an evolved trajectory: every snapshot
/// beyond r0 is pulled back and pushed; times where the factorization is
/// singular (zeta2 near a zero) are skipped.
pub fn build_record(
    traj: &Trajectory,
    pair: &FundamentalPair,
    params: &NonlinearityParams,
    convention: PhaseMuConvention,
) -> Result<ScatteringRecord> {
    let r0 = pair.r0().unwrap_or(0.0);
    let mut rec = ScatteringRecord::new(r0, convention);
    for (t, u) in &traj.snapshots {
        if *t <= r0 {
            continue;
        }
        match to_profile(u, pair, *t) {
            Ok(fv) => rec.push_snapshot(*t, fv, pair, params)?,
            Err(Error::SingularTime { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    if rec.times.is_empty() {
        return Err(Error::LadderTooShort {
            got: 0.0,
            need: 1.5,
        });
    }
    Ok(rec)
}

/// Outcome of the profile reconstruction comparison.
#[derive(Debug, Clone, Serialize)]
pub enum ProfileCompare {
    /// |W| nowhere above the mask threshold: no phase can be divided out.
    NotApplicable { reason: String },
    Series {
        /// `(t, ||u(t) - prediction(t)||_2)` on the ladder.
        points: Vec<(f64, f64)>,
        /// Fit of log error against log log t over the last decade.
        trend: LineFit,
        decreasing: bool,
        /// Fraction of frequency nodes on the |W| support mask.
        mask_fraction: f64,
    },
}

/// Compare `u(t)` against the reconstructed asymptotic profile
/// `U_0(t,0) F^{-1} [ e^{i(psi + Phi)} W ]` with the closed-form phase
/// model `psi(t, xi) = -F_L(|W(xi)|) log log t` (the sign follows the
/// solver's Duhamel phase: Fv ~ e^{-i Theta} W and Theta grows like a
/// positive multiple of log log t when mu_L > 0). Phi is the angular part
/// of the time-averaged ratio of the measured profile to the model over
/// the last decade, estimated on the mask `|W| >= mask_rel * sup|W|` and 0
/// outside it.
pub fn profile_compare(
    traj: &Trajectory,
    record: &ScatteringRecord,
    pair: &FundamentalPair,
    params: &NonlinearityParams,
    mask_rel: f64,
) -> Result<ProfileCompare> {
    let w = record
        .w
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("record not finalized: W missing".into()))?;
    let wmax = w.linf_norm();
    if wmax <= 0.0 {
        return Ok(ProfileCompare::NotApplicable {
            reason: "W vanishes identically".into(),
        });
    }
    let threshold = mask_rel * wmax;
    let mask: Vec<bool> = w.values.iter().map(|v| v.norm() >= threshold).collect();
    let on_mask = mask.iter().filter(|&&m| m).count();
    if on_mask == 0 {
        return Ok(ProfileCompare::NotApplicable {
            reason: format!("|W| never reaches the mask threshold {threshold:e}"),
        });
    }
    let c = phase_factor(params, record.convention);
    let flw: Vec<f64> = w.values.iter().map(|v| c * fl_unit(v.norm(), params)).collect();
    let t_last = *record.times.last().unwrap();
    // Phi: time-averaged residual phase of Fv against the model over the
    // last decade, pointwise on the mask
    let mut avg = vec![Complex64::new(0.0, 0.0); w.values.len()];
    let mut navg = 0usize;
    for (k, &t) in record.times.iter().enumerate() {
        if t < t_last / 10.0 || t <= 1.0 {
            continue;
        }
        let lnln = t.ln().ln();
        for (j, v) in record.fv[k].values.iter().enumerate() {
            if mask[j] {
                let model = Complex64::from_polar(1.0, -flw[j] * lnln);
                avg[j] += v * model.conj() / w.values[j];
            }
        }
        navg += 1;
    }
    if navg == 0 {
        return Ok(ProfileCompare::NotApplicable {
            reason: "no ladder times in the last decade beyond t = 1".into(),
        });
    }
    let phi: Vec<f64> = avg
        .iter()
        .zip(&mask)
        .map(|(a, &m)| if m { a.arg() } else { 0.0 })
        .collect();
    let mut points = Vec::new();
    for (t, u) in &traj.snapshots {
        let Some(k) = record.times.iter().position(|&s| (s - t).abs() <= 1e-9 * t) else {
            continue;
        };
        let t = record.times[k];
        if t <= 1.0 {
            continue;
        }
        let lnln = t.ln().ln();
        let mut what = w.clone();
        for (j, v) in what.values.iter_mut().enumerate() {
            *v *= Complex64::from_polar(1.0, -flw[j] * lnln + phi[j]);
        }
        let vpred = inverse_fourier(&what);
        let upred = mdfm_propagate(&vpred, pair, t)?;
        let mut err2 = 0.0f64;
        for (a, b) in u.values.iter().zip(&upred.values) {
            err2 += (a - b).norm_sqr();
        }
        points.push((t, err2.sqrt() * u.node_weight().sqrt()));
    }
    if points.len() < 6 {
        return Err(Error::IllConditioned(format!(
            "profile comparison needs >= 6 aligned snapshots, got {}",
            points.len()
        )));
    }
    let cut = t_last / 10.0;
    let xs: Vec<f64> = points
        .iter()
        .filter(|(t, e)| *t >= cut && *e > 0.0)
        .map(|(t, _)| t.ln().ln())
        .collect();
    let ys: Vec<f64> = points
        .iter()
        .filter(|(t, e)| *t >= cut && *e > 0.0)
        .map(|(_, e)| e.ln())
        .collect();
    let trend = fit::fit_line(&xs, &ys)?;
    Ok(ProfileCompare::Series {
        decreasing: trend.slope < 0.0,
        mask_fraction: on_mask as f64 / mask.len() as f64,
        points,
        trend,
    })
}

/// Report of the two decay inequality checks on a trajectory: the
/// pointwise bound `||u||_inf <= C |zeta2|^{-n/2} (||Fv||_inf +
/// |zeta1/zeta2|^alpha ||v||_{0,gamma})` and the integral bound on
/// `||Fv||_inf` with integrand `|mu_L| I1 + |mu_S| I2` (unit-coefficient
/// F_L, F_S inside I1, I2; the mu factors multiply once).
#[derive(Debug, Clone, Serialize)]
pub struct L4Report {
    /// Largest LHS / RHS-shape ratio of the pointwise inequality; the
    /// empirical constant C.
    pub max_ratio_pointwise: f64,
    /// Slope of the log pointwise ratio against log log t (bounded ratio
    /// means non-growing trend).
    pub trend_pointwise: f64,
    pub max_ratio_integral: f64,
    pub trend_integral: f64,
    pub pass: bool,
    pub notes: Vec<String>,
}

/// Evaluate both inequalities on the ladder. Failures of boundedness are
/// report entries; only precondition violations and empty ladders error.
pub fn verify_l4_bound(
    traj: &Trajectory,
    pair: &FundamentalPair,
    params: &NonlinearityParams,
    alpha: f64,
    gamma: f64,
    gamma_prime: f64,
) -> Result<L4Report> {
    let n = params.n as f64;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "alpha = {alpha} outside (0, 1]"
        )));
    }
    if !(gamma_prime > n / 2.0) {
        return Err(Error::InvalidConfig(format!(
            "gamma' = {gamma_prime} not above n/2 = {}",
            n / 2.0
        )));
    }
    if !(gamma > n / 2.0 + 2.0 * alpha) {
        return Err(Error::InvalidConfig(format!(
            "gamma = {gamma} not above n/2 + 2 alpha = {}",
            n / 2.0 + 2.0 * alpha
        )));
    }
    let r0 = pair.r0().unwrap_or(0.0);
    let mut notes = Vec::new();
    let mut ratio1: Vec<(f64, f64)> = Vec::new();
    let mut ratio2: Vec<(f64, f64)> = Vec::new();
    let mut acc = 0.0f64; // integral of |mu_L| I1 + |mu_S| I2
    let mut prev: Option<(f64, f64)> = None; // (t, integrand)
    let mut eps_ref: Option<f64> = None;
    for (t, u) in &traj.snapshots {
        let t = *t;
        if t <= r0 {
            continue;
        }
        let v = match mdfm_inverse(u, pair, t) {
            Ok(v) => v,
            Err(e) => {
                notes.push(format!("t = {t}: skipped ({e})"));
                continue;
            }
        };
        let zv = pair.eval(t);
        let fv = fourier(&v);
        let fv_sup = fv.linf_norm();
        let vg = sobolev_norm(&v, gamma, SobolevSide::PositionWeighted);
        let vgp = sobolev_norm(&v, gamma_prime, SobolevSide::PositionWeighted);
        let decay = zv.z2.abs().powf(-n / 2.0);
        let focus = (zv.z1 / zv.z2).abs().powf(alpha);
        let rhs1 = decay * (fv_sup + focus * vg);
        if rhs1 > 0.0 {
            ratio1.push((t, u.linf_norm() / rhs1));
        }
        let i1 = focus * fl_unit(decay * vgp, params) * vg;
        let i2 = fs_unit(decay * vgp, params) * vgp;
        let g = params.mu_l.abs() * i1 + params.mu_s.abs() * i2;
        if let Some((pt, pg)) = prev {
            acc += 0.5 * (t / pt).ln() * (pg * pt + g * t);
        }
        prev = Some((t, g));
        let eps = *eps_ref.get_or_insert(fv_sup);
        let rhs2 = eps + acc;
        if rhs2 > 0.0 {
            ratio2.push((t, fv_sup / rhs2));
        }
    }
    if ratio1.len() < 6 || ratio2.len() < 6 {
        return Err(Error::IllConditioned(format!(
            "inequality check needs >= 6 usable snapshots beyond r0, got {} / {}",
            ratio1.len(),
            ratio2.len()
        )));
    }
    let trend_of = |pts: &[(f64, f64)]| -> Result<f64> {
        let xs: Vec<f64> = pts.iter().filter(|p| p.0 > 1.0).map(|p| p.0.ln().ln()).collect();
        let ys: Vec<f64> = pts.iter().filter(|p| p.0 > 1.0).map(|p| p.1.ln()).collect();
        Ok(fit::fit_line(&xs, &ys)?.slope)
    };
    let max1 = ratio1.iter().fold(0.0f64, |m, p| m.max(p.1));
    let max2 = ratio2.iter().fold(0.0f64, |m, p| m.max(p.1));
    let t1 = trend_of(&ratio1)?;
    let t2 = trend_of(&ratio2)?;
    let finite = max1.is_finite() && max2.is_finite();
    if !finite {
        notes.push("non-finite ratio encountered".into());
    }
    // The ratios legitimately rise toward a plateau (the empirical
    // constant); what boundedness forbids is continued growth. Pass when
    // the final ratio has not pulled away from the series median.
    let median = |pts: &[(f64, f64)]| {
        let mut v: Vec<f64> = pts.iter().map(|p| p.1).collect();
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let bounded1 = ratio1.last().unwrap().1 <= 2.0 * median(&ratio1);
    let bounded2 = ratio2.last().unwrap().1 <= 2.0 * median(&ratio2);
    if !bounded1 || !bounded2 {
        notes.push(format!(
            "ratio still growing at the ladder end (last/median = {:.2} pointwise, {:.2} integral)",
            ratio1.last().unwrap().1 / median(&ratio1),
            ratio2.last().unwrap().1 / median(&ratio2)
        ));
    }
    let pass = finite && bounded1 && bounded2;
    Ok(L4Report {
        max_ratio_pointwise: max1,
        trend_pointwise: t1,
        max_ratio_integral: max2,
        trend_integral: t2,
        pass,
        notes,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    r0: f64,
    convention: PhaseMuConvention,
    times: Vec<f64>,
    alpha_slope: Option<f64>,
    alpha_slope_se: Option<f64>,
}

/// Persist a finalized record as a directory: JSON manifest, binary W,
/// CSV residual series. The profile ladder itself is not persisted.
pub fn write_record(dir: &std::path::Path, record: &ScatteringRecord) -> Result<()> {
    use std::io::Write;
    let w = record
        .w
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("record not finalized: W missing".into()))?;
    std::fs::create_dir_all(dir)?;
    let manifest = Manifest {
        r0: record.r0,
        convention: record.convention,
        times: record.times.clone(),
        alpha_slope: record.alpha.map(|a| a.slope),
        alpha_slope_se: record.alpha.map(|a| a.slope_se),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Serde(e.to_string()))?;
    std::fs::write(dir.join("manifest.json"), json)?;
    crate::spectral::io::write_field(&dir.join("w.field"), w, *record.times.last().unwrap())?;
    let mut out = std::io::BufWriter::new(std::fs::File::create(dir.join("residuals.csv"))?);
    writeln!(out, "t,l2,sup")?;
    for r in &record.residuals {
        writeln!(out, "{},{},{}", r.t, r.l2, r.sup)?;
    }
    Ok(())
}

/// Summary read back from a persisted record directory.
#[derive(Debug, Clone)]
pub struct PersistedRecord {
    pub r0: f64,
    pub convention: PhaseMuConvention,
    pub times: Vec<f64>,
    pub alpha_slope: Option<f64>,
    pub alpha_slope_se: Option<f64>,
    pub w: Field,
    pub residuals: Vec<ResidualPoint>,
}

pub fn read_record(dir: &std::path::Path) -> Result<PersistedRecord> {
    let json = std::fs::read_to_string(dir.join("manifest.json"))?;
    let manifest: Manifest =
        serde_json::from_str(&json).map_err(|e| Error::Serde(e.to_string()))?;
    let (w, _t) = crate::spectral::io::read_field(&dir.join("w.field"))?;
    let csv = std::fs::read_to_string(dir.join("residuals.csv"))?;
    let mut residuals = Vec::new();
    for line in csv.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(Error::Serde(format!("bad residual row: {line}")));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Serde(format!("bad number {s}: {e}")))
        };
        residuals.push(ResidualPoint {
            t: parse(cols[0])?,
            l2: parse(cols[1])?,
            sup: parse(cols[2])?,
        });
    }
    Ok(PersistedRecord {
        r0: manifest.r0,
        convention: manifest.convention,
        times: manifest.times,
        alpha_slope: manifest.alpha_slope,
        alpha_slope_se: manifest.alpha_slope_se,
        w,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oscillator::{solve_fundamental, SigmaModel};
    use crate::spectral::Grid;
    use std::f64::consts::PI;

    fn gaussian(grid: Grid, amp: f64) -> Field {
        Field::from_fn(grid, |x| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            Complex64::new(amp * PI.powf(-0.25) * (-r2 / 2.0).exp(), 0.0)
        })
    }

    fn params(mu_l: f64) -> NonlinearityParams {
        NonlinearityParams {
            mu_l,
            mu_s: 0.0,
            theta: 0.0,
            r: 60.0,
            delta0: 0.25,
            n: 1,
        }
    }

    fn matched_pair() -> (SigmaModel, FundamentalPair) {
        let model = SigmaModel::matched_section4(1.0).unwrap();
        let pair = solve_fundamental(&model, 1e5, 1e-10).unwrap();
        (model, pair)
    }

    fn log_ladder(lo: f64, hi: f64, count: usize) -> Vec<f64> {
        (0..count)
            .map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64))
            .collect()
    }

    #[test]
    fn to_profile_inverts_linear_flow() {
        let (_m, pair) = matched_pair();
        let grid = Grid::new(1, 2048, 120.0).unwrap();
        let u0 = gaussian(grid, 0.7);
        let fu0 = fourier(&u0);
        for &t in &[3.0, 10.0] {
            let u = mdfm_propagate(&u0, &pair, t).unwrap();
            let fv = to_profile(&u, &pair, t).unwrap();
            let mut err2 = 0.0;
            for (a, b) in fv.values.iter().zip(&fu0.values) {
                err2 += (a - b).norm_sqr();
            }
            let err = (err2 * grid.dxi()).sqrt();
            assert!(err < 1e-8, "t = {t}: profile error {err:e}");
            assert!((fv.l2_norm() - u.l2_norm()).abs() < 1e-8 * u.l2_norm());
        }
    }

    #[test]
    fn theta_zero_when_mu_l_zero() {
        let (_m, pair) = matched_pair();
        let grid = Grid::new(1, 64, 20.0).unwrap();
        let p = params(0.0);
        let mut rec = ScatteringRecord::new(1.0, PhaseMuConvention::SingleMu);
        for t in log_ladder(2.0, 200.0, 40) {
            let fv = Field::from_fn(grid, |_| Complex64::new(0.3, 0.0)).retag(Space::Frequency);
            rec.push_snapshot(t, fv, &pair, &p).unwrap();
        }
        for th in &rec.theta {
            assert!(th.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn theta_matches_quadrature_oracle() {
        // constant |Fv| = a against a high-resolution adaptive quadrature
        // of the same integrand
        let (_m, pair) = matched_pair();
        let grid = Grid::new(1, 16, 4.0).unwrap();
        let p = params(1.3);
        let a = 0.3f64;
        let mut rec = ScatteringRecord::new(1.0, PhaseMuConvention::SingleMu);
        let ladder = log_ladder(2.0, 100.0, 1600);
        for &t in &ladder {
            let fv = Field::from_fn(grid, |_| Complex64::new(a, 0.0)).retag(Space::Frequency);
            rec.push_snapshot(t, fv, &pair, &p).unwrap();
        }
        let oracle = crate::quad::integrate(
            &|tau: f64| 1.3 * fl_unit(pair.zeta2(tau).abs().powf(-0.5) * a, &p),
            2.0,
            100.0,
            1e-12,
        )
        .unwrap();
        let got = *rec.theta.last().unwrap().first().unwrap();
        assert!(
            (got - oracle).abs() < 1e-5 * oracle.abs(),
            "theta {got} vs oracle {oracle}"
        );
        // nondecreasing pointwise for mu_L > 0
        for w in rec.theta.windows(2) {
            assert!(w[1][0] >= w[0][0]);
        }
        // double-mu convention scales by mu_L
        let mut rec2 = ScatteringRecord::new(1.0, PhaseMuConvention::DoubleMu);
        for &t in &ladder {
            let fv = Field::from_fn(grid, |_| Complex64::new(a, 0.0)).retag(Space::Frequency);
            rec2.push_snapshot(t, fv, &pair, &p).unwrap();
        }
        let got2 = *rec2.theta.last().unwrap().first().unwrap();
        assert!((got2 - 1.3 * got).abs() < 1e-12 * got.abs());
    }

    #[test]
    fn push_rejects_nonmonotone_and_early_times() {
        let (_m, pair) = matched_pair();
        let grid = Grid::new(1, 16, 4.0).unwrap();
        let p = params(1.0);
        let fv = || Field::from_fn(grid, |_| Complex64::new(0.1, 0.0)).retag(Space::Frequency);
        let mut rec = ScatteringRecord::new(1.0, PhaseMuConvention::SingleMu);
        assert!(matches!(
            rec.push_snapshot(0.5, fv(), &pair, &p),
            Err(Error::InvalidConfig(_))
        ));
        rec.push_snapshot(2.0, fv(), &pair, &p).unwrap();
        assert!(matches!(
            rec.push_snapshot(2.0, fv(), &pair, &p),
            Err(Error::NonMonotoneTime { .. })
        ));
    }

    #[test]
    fn extract_w_linear_run_and_short_ladder() {
        let (_m, pair) = matched_pair();
        let grid = Grid::new(1, 128, 30.0).unwrap();
        let p = params(0.0);
        let fu0 = fourier(&gaussian(grid, 0.5));
        let mut rec = ScatteringRecord::new(1.0, PhaseMuConvention::SingleMu);
        for t in log_ladder(2.0, 2000.0, 60) {
            rec.push_snapshot(t, fu0.clone(), &pair, &p).unwrap();
        }
        let ext = extract_w(&rec, true).unwrap();
        for (a, b) in ext.w.values.iter().zip(&fu0.values) {
            assert!((a - b).norm() < 1e-14);
        }
        for r in &ext.residuals {
            assert!(r.l2 < 1e-14 && r.sup < 1e-14);
        }
        // short ladder refused
        let mut short = ScatteringRecord::new(1.0, PhaseMuConvention::SingleMu);
        for t in log_ladder(2.0, 20.0, 10) {
            short.push_snapshot(t, fu0.clone(), &pair, &p).unwrap();
        }
        assert!(matches!(
            extract_w(&short, true),
            Err(Error::LadderTooShort { .. })
        ));
    }

    #[test]
    fn gauge_covariance() {
        // constant-phase rotation of the ladder rotates W and leaves
        // Theta and the residual norms unchanged
        let (_m, pair) = matched_pair();
        let grid = Grid::new(1, 64, 20.0).unwrap();
        let p = params(1.0);
        let rot = Complex64::from_polar(1.0, 0.77);
        let mut rec = ScatteringRecord::new(1.0, PhaseMuConvention::SingleMu);
        let mut rec_rot = ScatteringRecord::new(1.0, PhaseMuConvention::SingleMu);
        for t in log_ladder(2.0, 200.0, 50) {
            // a mildly time-dependent ladder so residuals are nonzero
            let amp = 0.3 + 0.01 / t;
            let fv = Field::from_fn(grid, move |x| Complex64::new(amp * (-x[0] * x[0]).exp(), 0.0))
                .retag(Space::Frequency);
            let mut fvr = fv.clone();
            for v in &mut fvr.values {
                *v *= rot;
            }
            rec.push_snapshot(t, fv, &pair, &p).unwrap();
            rec_rot.push_snapshot(t, fvr, &pair, &p).unwrap();
        }
        for (a, b) in rec.theta.iter().zip(&rec_rot.theta) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-15);
            }
        }
        let e = extract_w(&rec, true).unwrap();
        let er = extract_w(&rec_rot, true).unwrap();
        for (a, b) in e.w.values.iter().zip(&er.w.values) {
            assert!((a * rot - b).norm() < 1e-13);
        }
        for (x, y) in e.residuals.iter().zip(&er.residuals) {
            assert!((x.l2 - y.l2).abs() < 1e-13 && (x.sup - y.sup).abs() < 1e-13);
        }
        assert!((e.alpha.slope - er.alpha.slope).abs() < 1e-9);
    }

    #[test]
    fn theta_accumulation_is_interval_additive() {
        // one pass over the full ladder equals a pass that is interrupted
        // and resumed from the stored state (the quadrature has no memory
        // beyond the last panel)
        let (_m, pair) = matched_pair();
        let grid = Grid::new(1, 16, 8.0).unwrap();
        let p = params(0.9);
        let ladder = log_ladder(2.0, 500.0, 80);
        let fv_at = |t: f64| {
            Field::from_fn(grid, move |x| {
                Complex64::new((0.2 + 0.05 / t) * (-x[0] * x[0] / 4.0).exp(), 0.0)
            })
            .retag(Space::Frequency)
        };
        let mut whole = ScatteringRecord::new(1.0, PhaseMuConvention::SingleMu);
        for &t in &ladder {
            whole.push_snapshot(t, fv_at(t), &pair, &p).unwrap();
        }
        let mut part = ScatteringRecord::new(1.0, PhaseMuConvention::SingleMu);
        for &t in &ladder[..40] {
            part.push_snapshot(t, fv_at(t), &pair, &p).unwrap();
        }
        // resume after the break
        for &t in &ladder[40..] {
            part.push_snapshot(t, fv_at(t), &pair, &p).unwrap();
        }
        for (a, b) in whole.theta.iter().zip(&part.theta) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn verify_l4_preconditions() {
        let traj = Trajectory {
            snapshots: vec![],
            diagnostics: vec![],
        };
        let (_m, pair) = matched_pair();
        let p = params(1.0);
        // gamma too small for the requested alpha
        assert!(matches!(
            verify_l4_bound(&traj, &pair, &p, 1.0, 2.0, 0.8),
            Err(Error::InvalidConfig(_))
        ));
        // gamma' below n/2
        assert!(matches!(
            verify_l4_bound(&traj, &pair, &p, 0.5, 2.0, 0.4),
            Err(Error::InvalidConfig(_))
        ));
        // alpha outside (0, 1]
        assert!(matches!(
            verify_l4_bound(&traj, &pair, &p, 1.5, 4.0, 0.8),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn verify_l4_linear_flow_bounded() {
        // exact linear flow: the pointwise inequality reduces to the
        // dispersive estimate and the ratio must stay bounded
        let (_m, pair) = matched_pair();
        let grid = Grid::new(1, 4096, 400.0).unwrap();
        let u0 = gaussian(grid, 0.4);
        let mut snapshots = Vec::new();
        for t in log_ladder(2.0, 60.0, 20) {
            snapshots.push((t, mdfm_propagate(&u0, &pair, t).unwrap()));
        }
        let traj = Trajectory {
            snapshots,
            diagnostics: vec![],
        };
        let p = params(0.0);
        let rep = verify_l4_bound(&traj, &pair, &p, 0.5, 2.0, 0.8).unwrap();
        assert!(rep.pass, "report: {rep:?}");
        assert!(rep.max_ratio_pointwise < 5.0);
        // linear flow: Fv constant, integral side ratio exactly <= 1
        assert!(rep.max_ratio_integral <= 1.0 + 1e-9);
    }

    #[test]
    fn record_roundtrip_on_disk() {
        let (_m, pair) = matched_pair();
        let grid = Grid::new(1, 64, 20.0).unwrap();
        let p = params(1.0);
        let mut rec = ScatteringRecord::new(1.0, PhaseMuConvention::SingleMu);
        for t in log_ladder(2.0, 300.0, 50) {
            let amp = 0.3 + 0.02 / t;
            let fv = Field::from_fn(grid, move |x| {
                Complex64::new(amp * (-x[0] * x[0] / 2.0).exp(), 0.0)
            })
            .retag(Space::Frequency);
            rec.push_snapshot(t, fv, &pair, &p).unwrap();
        }
        rec.finalize().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("record");
        write_record(&path, &rec).unwrap();
        let back = read_record(&path).unwrap();
        assert_eq!(back.times.len(), rec.times.len());
        assert_eq!(back.convention, rec.convention);
        let w = rec.w.as_ref().unwrap();
        for (a, b) in back.w.values.iter().zip(&w.values) {
            assert_eq!(a, b, "binary W must round-trip exactly");
        }
        assert_eq!(back.residuals.len(), rec.residuals.len());
        let slope = rec.alpha.unwrap().slope;
        assert!((back.alpha_slope.unwrap() - slope).abs() < 1e-12);
    }

    #[test]
    fn profile_compare_not_applicable_on_empty_mask() {
        let (_m, pair) = matched_pair();
        let grid = Grid::new(1, 64, 20.0).unwrap();
        let p = params(1.0);
        let mut rec = ScatteringRecord::new(1.0, PhaseMuConvention::SingleMu);
        for t in log_ladder(2.0, 300.0, 50) {
            let fv = Field::zeros(grid, Space::Frequency);
            rec.push_snapshot(t, fv, &pair, &p).unwrap();
        }
        // W = 0: finalize works (residuals all zero) but the rate fit has
        // no usable points, so install W manually for the mask check
        rec.w = Some(Field::zeros(grid, Space::Frequency));
        let traj = Trajectory {
            snapshots: vec![],
            diagnostics: vec![],
        };
        match profile_compare(&traj, &rec, &pair, &p, 1e-3).unwrap() {
            ProfileCompare::NotApplicable { .. } => {}
            other => panic!("expected NotApplicable, got {other:?}"),
        }
    }

    /// Full nonlinear demonstration at moderate amplitude: the accumulated
    /// phase is O(0.1) radians, so the phase-corrected residual beats the
    /// ablated one by a wide margin and the corrected series trends down.
    #[test]
    fn modified_scattering_demo_moderate_amplitude() {
        use crate::evolution::{evolve, SolverConfig};
        let model = SigmaModel::matched_section4(1.0).unwrap();
        let pair = solve_fundamental(&model, 400.0, 1e-10).unwrap();
        let grid = Grid::new(1, 8192, 600.0).unwrap();
        let u0 = gaussian(grid, 0.8);
        let p = params(1.0);
        let config = SolverConfig {
            dt0: 0.02,
            t_max: 300.0,
            snapshots: log_ladder(3.0, 300.0, 50),
            epsilon_prime: None,
            gamma: 2.0,
        };
        let traj = evolve(&u0, &config, &model, &p).unwrap();
        let rec = build_record(&traj, &pair, &p, PhaseMuConvention::SingleMu).unwrap();
        let corrected = extract_w(&rec, true).unwrap();
        let ablated = extract_w(&rec, false).unwrap();
        let mid = rec.times.len() / 2;
        let rc = corrected.residuals[mid].l2;
        let ra = ablated.residuals[mid].l2;
        assert!(
            ra >= 2.0 * rc,
            "phase correction should dominate: corrected {rc:e} vs ablated {ra:e}"
        );
        assert!(
            corrected.alpha.slope < 0.0,
            "corrected residual should decrease, slope {}",
            corrected.alpha.slope
        );
    }
}
