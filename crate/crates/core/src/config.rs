//! Declarative run configuration: a single TOML file with sections for the
//! coefficient model, nonlinearity, grid, solver, and experiment-specific
//! knobs, plus dotted-path overrides from the command line.

use crate::error::{Error, Result};
use crate::evolution::SolverConfig;
use crate::nonlinearity::NonlinearityParams;
use crate::oscillator::{SigmaModel, SmoothPart};
use crate::scattering::PhaseMuConvention;
use crate::spectral::{sobolev_norm, Field, Grid, SobolevSide};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

/// Declarative sigma-model selection; `matched_section4` picks alpha so the
/// log-growth coefficient of zeta1 vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Zero,
    Constant { alpha_sq: f64 },
    Section4 { alpha: f64, r0: f64 },
    MatchedSection4 { r0: f64 },
    CanonicalCritical { r0: f64, smooth: SmoothPart },
}

impl ModelSpec {
    pub fn build(&self) -> Result<SigmaModel> {
        let model = match *self {
            ModelSpec::Zero => SigmaModel::Zero,
            ModelSpec::Constant { alpha_sq } => {
                if alpha_sq < 0.0 {
                    return Err(Error::InvalidConfig(format!(
                        "model.alpha_sq = {alpha_sq} must be >= 0"
                    )));
                }
                SigmaModel::Constant { alpha_sq }
            }
            ModelSpec::Section4 { alpha, r0 } => SigmaModel::Section4 { alpha, r0 },
            ModelSpec::MatchedSection4 { r0 } => SigmaModel::matched_section4(r0)?,
            ModelSpec::CanonicalCritical { r0, smooth } => {
                SigmaModel::CanonicalCritical { r0, smooth }
            }
        };
        if let Some(r0) = model.r0() {
            if !(r0 > 0.0 && r0.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "model.r0 = {r0} must be positive and finite"
                )));
            }
        }
        Ok(model)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: u8,
    pub npts: usize,
    pub l: f64,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        Grid::new(self.n, self.npts, self.l)
            .map_err(|e| Error::InvalidConfig(format!("grid: {e}")))
    }
}

/// Log-spaced snapshot schedule, an alternative to listing times.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderSpec {
    pub t_min: f64,
    pub per_decade: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub dt0: f64,
    pub t_max: f64,
    pub gamma: f64,
    #[serde(default)]
    pub epsilon_prime: Option<f64>,
    /// Explicit snapshot times; exactly one of `snapshots` / `ladder`.
    #[serde(default)]
    pub snapshots: Option<Vec<f64>>,
    #[serde(default)]
    pub ladder: Option<LadderSpec>,
}

impl SolverSpec {
    pub fn build(&self, n: u8) -> Result<SolverConfig> {
        let snapshots = match (&self.snapshots, &self.ladder) {
            (Some(s), None) => s.clone(),
            (None, Some(l)) => {
                if !(l.t_min > 0.0 && l.t_min < self.t_max && l.per_decade > 0) {
                    return Err(Error::InvalidConfig(format!(
                        "solver.ladder: t_min = {} (need 0 < t_min < t_max = {}), per_decade = {}",
                        l.t_min, self.t_max, l.per_decade
                    )));
                }
                SolverConfig::log_snapshots(l.t_min, self.t_max, l.per_decade)
            }
            _ => {
                return Err(Error::InvalidConfig(
                    "solver: exactly one of `snapshots` and `ladder` must be set".into(),
                ))
            }
        };
        let config = SolverConfig {
            dt0: self.dt0,
            t_max: self.t_max,
            snapshots,
            epsilon_prime: self.epsilon_prime,
            gamma: self.gamma,
        };
        config.validate(n)?;
        Ok(config)
    }
}

/// Initial data; Gaussians cover every experiment in scope.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// `amplitude * exp(-|x|^2 / (2 width^2))`.
    Gaussian { amplitude: f64, width: f64 },
    /// Gaussian rescaled so `||u0||_{gamma,0} + ||u0||_{0,gamma} = epsilon_prime`.
    NormalizedGaussian { epsilon_prime: f64, width: f64 },
}

impl InitialSpec {
    pub fn validate(&self) -> Result<()> {
        let (scale, width) = match *self {
            InitialSpec::Gaussian { amplitude, width } => (amplitude, width),
            InitialSpec::NormalizedGaussian {
                epsilon_prime,
                width,
            } => (epsilon_prime, width),
        };
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "initial.width = {width} must be positive"
            )));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "initial amplitude scale = {scale} must be positive"
            )));
        }
        Ok(())
    }

    pub fn build(&self, grid: Grid, gamma: f64) -> Result<Field> {
        self.validate()?;
        let gaussian = |amp: f64, width: f64| {
            Field::from_fn(grid, |x| {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                Complex64::new(amp * (-r2 / (2.0 * width * width)).exp(), 0.0)
            })
        };
        Ok(match *self {
            InitialSpec::Gaussian { amplitude, width } => gaussian(amplitude, width),
            InitialSpec::NormalizedGaussian {
                epsilon_prime,
                width,
            } => {
                let probe = gaussian(1.0, width);
                let size = sobolev_norm(&probe, gamma, SobolevSide::FrequencyWeighted)
                    + sobolev_norm(&probe, gamma, SobolevSide::PositionWeighted);
                if !(size.is_finite() && size > 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "initial: degenerate Sobolev size {size}"
                    )));
                }
                gaussian(epsilon_prime / size, width)
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Zeta,
    Propagate,
    Evolve,
    Scatter,
    Classify,
    #[serde(alias = "leibniz")]
    LeibnizScan,
    Acceptance,
}

impl Experiment {
    pub fn as_str(&self) -> &'static str {
        match self {
            Experiment::Zeta => "zeta",
            Experiment::Propagate => "propagate",
            Experiment::Evolve => "evolve",
            Experiment::Scatter => "scatter",
            Experiment::Classify => "classify",
            Experiment::LeibnizScan => "leibniz_scan",
            Experiment::Acceptance => "acceptance",
        }
    }

    fn needs_initial(&self) -> bool {
        matches!(
            self,
            Experiment::Propagate | Experiment::Evolve | Experiment::Scatter
        )
    }
}

fn default_mask_rel() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatterSpec {
    /// Whether mu_L multiplies the accumulated phase once or squared.
    pub convention: PhaseMuConvention,
    /// Relative |W| threshold for the profile-comparison mask.
    #[serde(default = "default_mask_rel")]
    pub mask_rel: f64,
    /// Focal-weight exponent in the pointwise inequality check; default
    /// picks the largest admissible value for the configured gamma.
    #[serde(default)]
    pub alpha: Option<f64>,
    /// Auxiliary weighted index gamma' (> n/2); defaults to gamma.
    #[serde(default)]
    pub gamma_prime: Option<f64>,
}

impl Default for ScatterSpec {
    fn default() -> Self {
        ScatterSpec {
            convention: PhaseMuConvention::SingleMu,
            mask_rel: default_mask_rel(),
            alpha: None,
            gamma_prime: None,
        }
    }
}

fn default_s0() -> f64 {
    3.0
}
fn default_s_max() -> f64 {
    1e12
}
fn default_divergence_bound() -> f64 {
    1e6
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifySpec {
    /// Extra exponents theta3 to classify with `F = |.|^{theta3}` against the
    /// critical decay profile, on top of the four canonical cases.
    pub theta3: Vec<f64>,
    pub s0: f64,
    pub s_max: f64,
    pub divergence_bound: f64,
}

impl ClassifySpec {
    pub fn s0(&self) -> f64 {
        if self.s0 > 1.0 {
            self.s0
        } else {
            default_s0()
        }
    }
    pub fn s_max(&self) -> f64 {
        if self.s_max > self.s0() * 10.0 {
            self.s_max
        } else {
            default_s_max()
        }
    }
    pub fn divergence_bound(&self) -> f64 {
        if self.divergence_bound > 0.0 {
            self.divergence_bound
        } else {
            default_divergence_bound()
        }
    }
}

fn default_gammas() -> Vec<f64> {
    vec![0.75, 1.5, 2.5]
}
fn default_corpus() -> usize {
    50
}
fn default_band_fraction() -> f64 {
    0.25
}
fn default_amplitude() -> f64 {
    0.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeibnizSpec {
    #[serde(default = "default_gammas")]
    pub gammas: Vec<f64>,
    /// Number of band-limited random functions in the corpus.
    #[serde(default = "default_corpus")]
    pub corpus: usize,
    /// Fraction of the Nyquist band the random modes occupy.
    #[serde(default = "default_band_fraction")]
    pub band_fraction: f64,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
}

impl Default for LeibnizSpec {
    fn default() -> Self {
        LeibnizSpec {
            gammas: default_gammas(),
            corpus: default_corpus(),
            band_fraction: default_band_fraction(),
            amplitude: default_amplitude(),
        }
    }
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// One experiment, fully specified.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub seed: u64,
    pub model: ModelSpec,
    pub params: NonlinearityParams,
    pub grid: GridSpec,
    pub solver: SolverSpec,
    #[serde(default)]
    pub initial: Option<InitialSpec>,
    #[serde(default)]
    pub scatter: ScatterSpec,
    #[serde(default)]
    pub classify: ClassifySpec,
    #[serde(default)]
    pub leibniz: LeibnizSpec,
}

impl RunConfig {
    /// Check every referenced module-level invariant before any compute
    /// starts; the first violated field is named in the error.
    pub fn validate(&self) -> Result<()> {
        self.model.build()?;
        let grid = self.grid.build()?;
        self.params
            .validate()
            .map_err(|e| Error::InvalidConfig(format!("params: {e}")))?;
        if self.params.n != grid.n {
            return Err(Error::InvalidConfig(format!(
                "params.n = {} does not match grid.n = {}",
                self.params.n, grid.n
            )));
        }
        self.solver
            .build(grid.n)
            .map_err(|e| Error::InvalidConfig(format!("solver: {e}")))?;
        if let Some(init) = &self.initial {
            init.validate()?;
        } else if self.experiment.needs_initial() {
            return Err(Error::InvalidConfig(format!(
                "initial: required for experiment `{}`",
                self.experiment.as_str()
            )));
        }
        if !(self.scatter.mask_rel > 0.0 && self.scatter.mask_rel < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "scatter.mask_rel = {} outside (0, 1)",
                self.scatter.mask_rel
            )));
        }
        if self.leibniz.corpus == 0 {
            return Err(Error::InvalidConfig("leibniz.corpus must be > 0".into()));
        }
        if !(self.leibniz.band_fraction > 0.0 && self.leibniz.band_fraction <= 2.0 / 3.0) {
            return Err(Error::InvalidConfig(format!(
                "leibniz.band_fraction = {} outside (0, 2/3]",
                self.leibniz.band_fraction
            )));
        }
        Ok(())
    }
}

/// Parse `key=value` as used by `--override`.
pub fn split_override(s: &str) -> Result<(String, String)> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(Error::InvalidConfig(format!(
            "override `{s}` is not of the form key=value"
        ))),
    }
}

/// Parse the raw value of an override: TOML literal if it parses as one,
/// bare string otherwise.
fn parse_override_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match wrapped.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap(),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Apply one dotted-path override, creating intermediate tables as needed.
pub fn apply_override(root: &mut toml::Value, path: &str, raw: &str) -> Result<()> {
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(Error::InvalidConfig(format!("override path `{path}`")));
    }
    let mut node = root;
    for seg in &segments[..segments.len() - 1] {
        let table = node.as_table_mut().ok_or_else(|| {
            Error::InvalidConfig(format!("override path `{path}`: `{seg}` is not a table"))
        })?;
        node = table
            .entry(seg.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    let last = segments[segments.len() - 1];
    let table = node.as_table_mut().ok_or_else(|| {
        Error::InvalidConfig(format!("override path `{path}` ends inside a non-table"))
    })?;
    table.insert(last.to_string(), parse_override_value(raw));
    Ok(())
}

/// Whether a dotted path resolves to an existing scalar in the tree.
pub fn path_is_scalar(root: &toml::Value, path: &str) -> bool {
    let mut node = root;
    for seg in path.split('.') {
        match node.get(seg) {
            Some(v) => node = v,
            None => return false,
        }
    }
    !matches!(node, toml::Value::Table(_) | toml::Value::Array(_))
}

/// Parse config text, apply overrides, and return the validated config
/// together with its canonical (re-serialized) text. The canonical text is
/// what gets hashed and persisted, so override-equivalent configs coincide.
pub fn parse_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<(RunConfig, String)> {
    let mut tree: toml::Value = text
        .parse()
        .map_err(|e| Error::InvalidConfig(format!("config parse error: {e}")))?;
    for (k, v) in overrides {
        apply_override(&mut tree, k, v)?;
    }
    let canonical =
        toml::to_string_pretty(&tree).map_err(|e| Error::Serde(e.to_string()))?;
    let config: RunConfig = toml::from_str(&canonical)
        .map_err(|e| Error::InvalidConfig(format!("config: {e}")))?;
    config.validate()?;
    Ok((config, canonical))
}

/// Load a config file with overrides.
pub fn load(
    path: &std::path::Path,
    overrides: &[(String, String)],
) -> Result<(RunConfig, String)> {
    let text = std::fs::read_to_string(path)?;
    parse_with_overrides(&text, overrides)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
experiment = "evolve"
output = "out"

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
npts = 256
l = 60.0

[solver]
dt0 = 0.01
t_max = 30.0
gamma = 2.0
ladder = { t_min = 2.0, per_decade = 10 }

[initial]
kind = "gaussian"
amplitude = 0.5
width = 1.0
"#;

    #[test]
    fn base_config_parses_and_validates() {
        let (cfg, canonical) = parse_with_overrides(BASE, &[]).unwrap();
        assert_eq!(cfg.experiment, Experiment::Evolve);
        assert_eq!(cfg.grid.npts, 256);
        // canonical text re-parses to the same config
        let (cfg2, _) = parse_with_overrides(&canonical, &[]).unwrap();
        assert_eq!(cfg2.grid.npts, cfg.grid.npts);
        assert_eq!(cfg2.solver.t_max, cfg.solver.t_max);
    }

    #[test]
    fn override_changes_nested_scalar() {
        let ov = [("solver.t_max".to_string(), "50.0".to_string())];
        let (cfg, _) = parse_with_overrides(BASE, &ov).unwrap();
        assert_eq!(cfg.solver.t_max, 50.0);
        let ov2 = [("model.r0".to_string(), "2.5".to_string())];
        let (cfg2, _) = parse_with_overrides(BASE, &ov2).unwrap();
        assert!(matches!(cfg2.model, ModelSpec::MatchedSection4 { r0 } if r0 == 2.5));
    }

    #[test]
    fn invalid_config_names_the_field() {
        let ov = [("solver.gamma".to_string(), "0.2".to_string())];
        let err = parse_with_overrides(BASE, &ov).unwrap_err();
        assert!(err.to_string().contains("gamma"), "{err}");
        let ov = [("grid.npts".to_string(), "100".to_string())];
        let err = parse_with_overrides(BASE, &ov).unwrap_err();
        assert!(err.to_string().contains("power of two"), "{err}");
        let ov = [("params.delta0".to_string(), "1.5".to_string())];
        let err = parse_with_overrides(BASE, &ov).unwrap_err();
        assert!(err.to_string().contains("params"), "{err}");
    }

    #[test]
    fn snapshots_and_ladder_are_exclusive() {
        let ov = [("solver.snapshots".to_string(), "[1.0, 2.0]".to_string())];
        let err = parse_with_overrides(BASE, &ov).unwrap_err();
        assert!(err.to_string().contains("exactly one"), "{err}");
    }

    #[test]
    fn missing_initial_rejected_for_evolve() {
        let text = &BASE[..BASE.find("[initial]").unwrap()];
        let err = parse_with_overrides(text, &[]).unwrap_err();
        assert!(err.to_string().contains("initial"), "{err}");
    }

    #[test]
    fn unknown_field_rejected() {
        let text = format!("{BASE}\nnot_a_field = 3\n");
        assert!(parse_with_overrides(&text, &[]).is_err());
    }

    #[test]
    fn scalar_path_probe() {
        let tree: toml::Value = BASE.parse().unwrap();
        assert!(path_is_scalar(&tree, "solver.t_max"));
        assert!(path_is_scalar(&tree, "params.mu_l"));
        assert!(!path_is_scalar(&tree, "solver"));
        assert!(!path_is_scalar(&tree, "no.such.path"));
    }

    #[test]
    fn normalized_gaussian_hits_epsilon_prime() {
        let grid = Grid::new(1, 512, 40.0).unwrap();
        let spec = InitialSpec::NormalizedGaussian {
            epsilon_prime: 1e-3,
            width: 0.58,
        };
        let u0 = spec.build(grid, 2.0).unwrap();
        let size = sobolev_norm(&u0, 2.0, SobolevSide::FrequencyWeighted)
            + sobolev_norm(&u0, 2.0, SobolevSide::PositionWeighted);
        assert!((size - 1e-3).abs() < 1e-9, "size = {size:e}");
    }

    #[test]
    fn bad_override_forms_rejected() {
        assert!(split_override("just-a-key").is_err());
        assert!(split_override("=v").is_err());
        let (k, v) = split_override("a.b = 3").unwrap();
        assert_eq!((k.as_str(), v.as_str()), ("a.b", "3"));
    }
}
