//! Experiment configuration: JSON text in, validated settings with defaults out.

use std::collections::BTreeMap;

use condexp::filters::NegativeTarget;
use condexp::linalg;
use condexp::models::{Lorenz84Param, Lorenz84Params};
use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const MODELS: &[(&str, &str)] = &[
    (
        "lorenz84",
        "Lorenz-84 with full-state noisy observations and optional parameter identification",
    ),
    (
        "linear-gaussian",
        "linear state space x' = A x + w, y = H x + v with Gaussian noise",
    ),
    ("cubic", "static scalar state observed as x^3 + sigma_v v"),
];

pub const FILTERS: &[(&str, &str)] = &[
    ("gmkf", "linear update x_f + K (y_hat - y_f) on ensembles or PCE"),
    ("enkf", "the linear update on an ensemble with sample covariances"),
    (
        "polynomial",
        "x_f + phi(y_hat) - phi(y_f) with phi fitted over monomials of degree `degree`",
    ),
    (
        "variance-scaled",
        "mean correction with the fluctuation scaled to the fitted posterior total variance",
    ),
    (
        "covariance-matched",
        "mean correction with the fluctuation mapped to the fitted posterior covariance",
    ),
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid `{field}`: {reason}")]
    Validation { field: String, reason: String },
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("unknown filter `{0}`")]
    UnknownFilter(String),
}

impl ConfigError {
    fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ConfigError::Parse { .. } => "parse",
            ConfigError::Validation { .. } => "validation",
            ConfigError::UnknownModel(_) => "unknown-model",
            ConfigError::UnknownFilter(_) => "unknown-filter",
        }
    }
}

type Matrix = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "id", rename_all = "kebab-case")]
pub enum ModelSpec {
    Lorenz84(Lorenz84Spec),
    LinearGaussian(LinearSpec),
    Cubic(CubicSpec),
}

impl ModelSpec {
    pub fn id(&self) -> &'static str {
        match self {
            ModelSpec::Lorenz84(_) => "lorenz84",
            ModelSpec::LinearGaussian(_) => "linear-gaussian",
            ModelSpec::Cubic(_) => "cubic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lorenz84Spec {
    #[serde(default)]
    pub params: Lorenz84Params,
    /// Parameters appended to the state and estimated along with it.
    #[serde(default)]
    pub identify: Vec<Lorenz84Param>,
    /// Observation noise standard deviations; by default a fraction of the climatological spread.
    #[serde(default)]
    pub obs_noise_sd: Option<[f64; 3]>,
    #[serde(default = "default_noise_fraction")]
    pub obs_noise_fraction: f64,
    #[serde(default)]
    pub process_noise: Option<Matrix>,
    #[serde(default)]
    pub true_init: Option<Vec<f64>>,
    /// Days integrated from (1, 0, 0) before the default truth starts.
    #[serde(default = "default_spinup")]
    pub spinup_days: f64,
}

fn default_noise_fraction() -> f64 {
    0.1
}

fn default_spinup() -> f64 {
    100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearSpec {
    #[serde(rename = "A", default = "default_a")]
    pub a: Matrix,
    #[serde(rename = "H", default = "default_h")]
    pub h: Matrix,
    #[serde(rename = "Q", default = "default_q")]
    pub q: Matrix,
    #[serde(rename = "R", default = "default_r")]
    pub r: Matrix,
    #[serde(default)]
    pub true_init: Option<Vec<f64>>,
}

fn default_a() -> Matrix {
    vec![vec![0.95, 0.1], vec![-0.1, 0.9]]
}

fn default_h() -> Matrix {
    vec![vec![1.0, 0.5]]
}

fn default_q() -> Matrix {
    vec![vec![0.05, 0.01], vec![0.01, 0.02]]
}

fn default_r() -> Matrix {
    vec![vec![0.3]]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CubicSpec {
    #[serde(default = "default_sigma_v")]
    pub sigma_v: f64,
    #[serde(default)]
    pub true_init: Option<Vec<f64>>,
}

fn default_sigma_v() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Representation {
    Ensemble {
        size: usize,
    },
    Pce {
        /// Germ dimension; must equal the state dimension.
        n: usize,
        /// Total polynomial degree.
        p: usize,
        /// Gauss points per germ direction; defaults to `p + 1`.
        #[serde(default)]
        grid_level: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriorSpec {
    pub mean: Option<Vec<f64>>,
    pub covariance: Option<Matrix>,
    pub representation: Representation,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPrior {
    #[serde(default)]
    mean: Option<Vec<f64>>,
    #[serde(default)]
    covariance: Option<Matrix>,
    #[serde(default)]
    representation: Option<Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FilterSpec {
    Gmkf,
    Enkf,
    Polynomial {
        degree: usize,
    },
    VarianceScaled {
        degree: usize,
        negative_target: NegativeTarget,
    },
    CovarianceMatched {
        degree: usize,
    },
}

impl FilterSpec {
    pub fn name(&self) -> String {
        match self {
            FilterSpec::Gmkf => "gmkf".into(),
            FilterSpec::Enkf => "enkf".into(),
            FilterSpec::Polynomial { degree } => format!("polynomial({degree})"),
            FilterSpec::VarianceScaled { degree, .. } => format!("variance-scaled({degree})"),
            FilterSpec::CovarianceMatched { degree } => format!("covariance-matched({degree})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFilter {
    kind: String,
    #[serde(default)]
    degree: Option<usize>,
    #[serde(default)]
    negative_target: Option<NegativeTarget>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    #[serde(default)]
    pub start: f64,
    /// Explicit observation times.
    #[serde(default)]
    pub times: Option<Vec<f64>>,
    /// Regular spacing, used with `until` when `times` is absent.
    #[serde(default)]
    pub every: Option<f64>,
    #[serde(default)]
    pub until: Option<f64>,
}

impl ScheduleSpec {
    /// The observation times this schedule describes.
    pub fn resolve(&self) -> Vec<f64> {
        if let Some(t) = &self.times {
            return t.clone();
        }
        match (self.every, self.until) {
            (Some(every), Some(until)) if every > 0.0 => {
                let count = ((until - self.start) / every + 1e-9).floor().max(0.0) as usize;
                (1..=count).map(|k| self.start + k as f64 * every).collect()
            }
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedSpec {
    #[serde(default)]
    pub master: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdfSpec {
    /// Steps (0-based schedule positions) with density output; all by default.
    #[serde(default)]
    pub steps: Option<Vec<usize>>,
    /// State components with density output; all by default.
    #[serde(default)]
    pub components: Option<Vec<usize>>,
    pub min: f64,
    pub max: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    /// Fixed kernel bandwidth; Silverman's rule when absent.
    #[serde(default)]
    pub bandwidth: Option<f64>,
}

fn default_points() -> usize {
    201
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub dir: Option<String>,
    #[serde(default = "default_quantiles")]
    pub quantiles: Vec<f64>,
    #[serde(default)]
    pub pdf: Option<PdfSpec>,
    /// Monte Carlo samples drawn from PCE variables for quantiles and densities.
    #[serde(default = "default_pce_samples")]
    pub pce_samples: usize,
}

fn default_quantiles() -> Vec<f64> {
    vec![0.05, 0.5, 0.95]
}

fn default_pce_samples() -> usize {
    10_000
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: None,
            quantiles: default_quantiles(),
            pdf: None,
            pce_samples: default_pce_samples(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub prior: PriorSpec,
    pub filter: FilterSpec,
    pub schedule: ScheduleSpec,
    pub seeds: SeedSpec,
    pub output: OutputSpec,
    /// SHA-256 of the configuration text, hex encoded.
    #[serde(skip)]
    pub source_sha256: String,
}

const TOP_LEVEL: &[&str] = &["model", "prior", "filter", "schedule", "seeds", "output"];

fn section<T: DeserializeOwned>(field: &str, value: Value) -> Result<T, ConfigError> {
    serde_json::from_value(value).map_err(|e| ConfigError::invalid(field, e.to_string()))
}

fn take_object(field: &str, value: Value) -> Result<serde_json::Map<String, Value>, ConfigError> {
    match value {
        Value::Object(map) => Ok(map),
        other => Err(ConfigError::invalid(
            field,
            format!("expected an object, found {other}"),
        )),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Parses and validates a configuration, filling in documented defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let root: Value = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut root = take_object("config", root)?;
    if let Some(key) = root.keys().find(|k| !TOP_LEVEL.contains(&k.as_str())) {
        return Err(ConfigError::invalid(key.clone(), "unknown key"));
    }

    let mut model_obj = take_object(
        "model",
        root.remove("model")
            .ok_or_else(|| ConfigError::invalid("model", "missing"))?,
    )?;
    let id = match model_obj.remove("id") {
        Some(Value::String(s)) => s,
        Some(other) => {
            return Err(ConfigError::invalid(
                "model.id",
                format!("expected a string, found {other}"),
            ))
        }
        None => return Err(ConfigError::invalid("model.id", "missing")),
    };
    let model_rest = Value::Object(model_obj);
    let model = match id.as_str() {
        "lorenz84" => ModelSpec::Lorenz84(section("model", model_rest)?),
        "linear-gaussian" => ModelSpec::LinearGaussian(section("model", model_rest)?),
        "cubic" => ModelSpec::Cubic(section("model", model_rest)?),
        _ => return Err(ConfigError::UnknownModel(id)),
    };

    let filter = parse_filter(
        root.remove("filter")
            .ok_or_else(|| ConfigError::invalid("filter", "missing"))?,
    )?;

    let raw_prior: RawPrior = match root.remove("prior") {
        Some(v) => section("prior", v)?,
        None => RawPrior {
            mean: None,
            covariance: None,
            representation: None,
        },
    };
    let representation = match raw_prior.representation {
        Some(v) => section("prior.representation", v)?,
        None => Representation::Ensemble { size: 100 },
    };
    let prior = PriorSpec {
        mean: raw_prior.mean,
        covariance: raw_prior.covariance,
        representation,
    };

    let schedule = match root.remove("schedule") {
        Some(v) => section("schedule", v)?,
        None => default_schedule(&model),
    };
    let seeds = match root.remove("seeds") {
        Some(v) => section("seeds", v)?,
        None => SeedSpec { master: 0 },
    };
    let output = match root.remove("output") {
        Some(v) => section("output", v)?,
        None => OutputSpec::default(),
    };

    let config = ExperimentConfig {
        model,
        prior,
        filter,
        schedule,
        seeds,
        output,
        source_sha256: sha256_hex(text.as_bytes()),
    };
    validate(&config)?;
    Ok(config)
}

fn parse_filter(value: Value) -> Result<FilterSpec, ConfigError> {
    let raw = match value {
        Value::String(kind) => RawFilter {
            kind,
            degree: None,
            negative_target: None,
        },
        v @ Value::Object(_) => section("filter", v)?,
        other => {
            return Err(ConfigError::invalid(
                "filter",
                format!("expected a name or an object, found {other}"),
            ))
        }
    };
    let degree = raw.degree.unwrap_or(if raw.kind == "polynomial" { 2 } else { 1 });
    let linear = matches!(raw.kind.as_str(), "gmkf" | "enkf");
    if linear && (raw.degree.is_some() || raw.negative_target.is_some()) {
        return Err(ConfigError::invalid(
            "filter",
            format!("`{}` takes no options", raw.kind),
        ));
    }
    if raw.negative_target.is_some() && raw.kind != "variance-scaled" {
        return Err(ConfigError::invalid(
            "filter.negative_target",
            "only used by variance-scaled",
        ));
    }
    let spec = match raw.kind.as_str() {
        "gmkf" => FilterSpec::Gmkf,
        "enkf" => FilterSpec::Enkf,
        "polynomial" => FilterSpec::Polynomial { degree },
        "variance-scaled" => FilterSpec::VarianceScaled {
            degree,
            negative_target: raw.negative_target.unwrap_or_default(),
        },
        "covariance-matched" => FilterSpec::CovarianceMatched { degree },
        _ => return Err(ConfigError::UnknownFilter(raw.kind)),
    };
    if degree == 0 {
        return Err(ConfigError::invalid("filter.degree", "must be at least 1"));
    }
    Ok(spec)
}

fn default_schedule(model: &ModelSpec) -> ScheduleSpec {
    let (every, until) = match model {
        ModelSpec::Lorenz84(_) => (1.0, 50.0),
        ModelSpec::LinearGaussian(_) => (1.0, 10.0),
        ModelSpec::Cubic(_) => (1.0, 1.0),
    };
    ScheduleSpec {
        start: 0.0,
        times: None,
        every: Some(every),
        until: Some(until),
    }
}

/// Dimension of the state vector the model propagates.
pub fn state_dim(model: &ModelSpec) -> usize {
    match model {
        ModelSpec::Lorenz84(s) => 3 + s.identify.len(),
        ModelSpec::LinearGaussian(s) => s.a.len(),
        ModelSpec::Cubic(_) => 1,
    }
}

fn check_matrix(field: &str, m: &Matrix, rows: usize, cols: usize) -> Result<(), ConfigError> {
    if m.len() != rows || m.iter().any(|r| r.len() != cols) {
        return Err(ConfigError::invalid(field, format!("expected a {rows}x{cols} matrix")));
    }
    if m.iter().flatten().any(|v| !v.is_finite()) {
        return Err(ConfigError::invalid(field, "entries must be finite"));
    }
    Ok(())
}

fn check_covariance(field: &str, m: &Matrix, n: usize) -> Result<(), ConfigError> {
    check_matrix(field, m, n, n)?;
    let dm = DMatrix::from_fn(n, n, |i, j| m[i][j]);
    let scale = linalg::max_abs(&dm).max(1.0);
    if linalg::max_abs(&(&dm - dm.transpose())) > 1e-12 * scale {
        return Err(ConfigError::invalid(field, "must be symmetric"));
    }
    let low = linalg::min_eigenvalue(&dm);
    if low < -1e-12 * scale {
        return Err(ConfigError::invalid(
            field,
            format!("must be positive semidefinite (smallest eigenvalue {low:e})"),
        ));
    }
    Ok(())
}

fn validate(c: &ExperimentConfig) -> Result<(), ConfigError> {
    let d = state_dim(&c.model);
    match &c.model {
        ModelSpec::Lorenz84(s) => {
            s.params
                .validate()
                .map_err(|e| ConfigError::invalid("model.params", e.to_string()))?;
            let mut seen = BTreeMap::new();
            for p in &s.identify {
                if seen.insert(format!("{p:?}"), ()).is_some() {
                    return Err(ConfigError::invalid("model.identify", "parameters must be distinct"));
                }
            }
            if let Some(sd) = s.obs_noise_sd {
                if sd.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(ConfigError::invalid(
                        "model.obs_noise_sd",
                        "must be finite and nonnegative",
                    ));
                }
            }
            if !(s.obs_noise_fraction.is_finite() && s.obs_noise_fraction >= 0.0) {
                return Err(ConfigError::invalid(
                    "model.obs_noise_fraction",
                    "must be finite and nonnegative",
                ));
            }
            if let Some(q) = &s.process_noise {
                check_covariance("model.process_noise", q, d)?;
            }
            if !(s.spinup_days.is_finite() && s.spinup_days >= 0.0) {
                return Err(ConfigError::invalid("model.spinup_days", "must be nonnegative"));
            }
        }
        ModelSpec::LinearGaussian(s) => {
            if d == 0 {
                return Err(ConfigError::invalid("model.A", "must not be empty"));
            }
            check_matrix("model.A", &s.a, d, d)?;
            let dy = s.h.len();
            if dy == 0 {
                return Err(ConfigError::invalid("model.H", "must not be empty"));
            }
            check_matrix("model.H", &s.h, dy, d)?;
            check_covariance("model.Q", &s.q, d)?;
            check_covariance("model.R", &s.r, dy)?;
        }
        ModelSpec::Cubic(s) => {
            if !(s.sigma_v.is_finite() && s.sigma_v >= 0.0) {
                return Err(ConfigError::invalid("model.sigma_v", "must be finite and nonnegative"));
            }
        }
    }
    let init = match &c.model {
        ModelSpec::Lorenz84(s) => &s.true_init,
        ModelSpec::LinearGaussian(s) => &s.true_init,
        ModelSpec::Cubic(s) => &s.true_init,
    };
    if let Some(x) = init {
        if x.len() != d || x.iter().any(|v| !v.is_finite()) {
            return Err(ConfigError::invalid(
                "model.true_init",
                format!("expected {d} finite values"),
            ));
        }
    }

    if let Some(m) = &c.prior.mean {
        if m.len() != d || m.iter().any(|v| !v.is_finite()) {
            return Err(ConfigError::invalid(
                "prior.mean",
                format!("expected {d} finite values"),
            ));
        }
    }
    if let Some(p) = &c.prior.covariance {
        check_covariance("prior.covariance", p, d)?;
    }
    match c.prior.representation {
        Representation::Ensemble { size } => {
            if size < 2 {
                return Err(ConfigError::invalid(
                    "prior.representation.size",
                    "needs at least 2 members",
                ));
            }
        }
        Representation::Pce { n, p, grid_level } => {
            if n != d {
                return Err(ConfigError::invalid(
                    "prior.representation.n",
                    format!("must equal the state dimension {d}"),
                ));
            }
            if p == 0 {
                return Err(ConfigError::invalid("prior.representation.p", "must be at least 1"));
            }
            if grid_level == Some(0) {
                return Err(ConfigError::invalid(
                    "prior.representation.grid_level",
                    "must be at least 1",
                ));
            }
            if c.filter == FilterSpec::Enkf {
                return Err(ConfigError::invalid("filter", "enkf needs an ensemble prior"));
            }
        }
    }

    let times = c.schedule.resolve();
    if c.schedule.times.is_some() == (c.schedule.every.is_some() || c.schedule.until.is_some()) {
        return Err(ConfigError::invalid(
            "schedule",
            "give either `times` or both `every` and `until`",
        ));
    }
    if c.schedule.times.is_none() && (c.schedule.every.is_none() || c.schedule.until.is_none()) {
        return Err(ConfigError::invalid("schedule", "`every` and `until` go together"));
    }
    if let Some(e) = c.schedule.every {
        if !(e.is_finite() && e > 0.0) {
            return Err(ConfigError::invalid("schedule.every", "must be positive"));
        }
    }
    if times.is_empty() {
        return Err(ConfigError::invalid("schedule", "no observation times"));
    }
    let mut prev = c.schedule.start;
    for t in &times {
        if !(t.is_finite() && *t > prev) {
            return Err(ConfigError::invalid(
                "schedule.times",
                "must increase strictly after `start`",
            ));
        }
        prev = *t;
    }

    if let Some(bad) = c.output.quantiles.iter().find(|q| !(**q > 0.0 && **q < 1.0)) {
        return Err(ConfigError::invalid(
            "output.quantiles",
            format!("level {bad} is outside (0, 1)"),
        ));
    }
    if c.output.pce_samples < 2 {
        return Err(ConfigError::invalid("output.pce_samples", "must be at least 2"));
    }
    if let Some(pdf) = &c.output.pdf {
        if !(pdf.min.is_finite() && pdf.max.is_finite() && pdf.min < pdf.max) {
            return Err(ConfigError::invalid("output.pdf", "needs finite min < max"));
        }
        if pdf.points < 2 {
            return Err(ConfigError::invalid("output.pdf.points", "must be at least 2"));
        }
        if let Some(h) = pdf.bandwidth {
            if !(h.is_finite() && h > 0.0) {
                return Err(ConfigError::invalid("output.pdf.bandwidth", "must be positive"));
            }
        }
        if let Some(comps) = &pdf.components {
            if comps.iter().any(|&j| j >= d) {
                return Err(ConfigError::invalid(
                    "output.pdf.components",
                    format!("components run from 0 to {}", d - 1),
                ));
            }
        }
        if let Some(steps) = &pdf.steps {
            if steps.iter().any(|&k| k >= times.len()) {
                return Err(ConfigError::invalid(
                    "output.pdf.steps",
                    format!("steps run from 0 to {}", times.len() - 1),
                ));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "model": {"id": "lorenz84"},
        "filter": "gmkf",
        "prior": {"representation": {"kind": "pce", "n": 3, "p": 2}}
    }"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        let ModelSpec::Lorenz84(m) = &c.model else { panic!() };
        assert_eq!(m.params, Lorenz84Params::default());
        assert_eq!(m.obs_noise_fraction, 0.1);
        assert_eq!(c.filter, FilterSpec::Gmkf);
        assert_eq!(c.schedule.resolve().len(), 50);
        assert_eq!(c.output.quantiles, vec![0.05, 0.5, 0.95]);
        assert_eq!(c.seeds.master, 0);
        assert_eq!(c.source_sha256, sha256_hex(MINIMAL.as_bytes()));
    }

    #[test]
    fn rejections() {
        let with = |from: &str, to: &str| parse_config(&MINIMAL.replace(from, to));
        assert_eq!(
            with("\"gmkf\"", "\"kalmann\"").unwrap_err(),
            ConfigError::UnknownFilter("kalmann".into())
        );
        assert_eq!(
            with("lorenz84", "lorenz63").unwrap_err(),
            ConfigError::UnknownModel("lorenz63".into())
        );
        let err = with("\"filter\"", "\"output\": {\"quantiles\": [1.5]}, \"filter\"").unwrap_err();
        assert!(matches!(err, ConfigError::Validation { ref field, .. } if field == "output.quantiles"));
        assert!(matches!(
            with("\"filter\"", "\"colour\": 1, \"filter\"").unwrap_err(),
            ConfigError::Validation { .. }
        ));
        assert!(matches!(
            with("\"p\": 2", "\"p\": 2, \"q\": 1").unwrap_err(),
            ConfigError::Validation { .. }
        ));
        assert!(matches!(
            with("\"id\": \"lorenz84\"", "\"id\": \"lorenz84\", \"G\": 1").unwrap_err(),
            ConfigError::Validation { .. }
        ));
        assert!(matches!(
            with("\"n\": 3", "\"n\": 2").unwrap_err(),
            ConfigError::Validation { .. }
        ));
        let parse = parse_config("{\n  \"model\": ,\n}").unwrap_err();
        assert!(matches!(parse, ConfigError::Parse { line: 2, .. }));
    }

    #[test]
    fn filter_forms() {
        let f = |v: &str| parse_filter(serde_json::from_str(v).unwrap());
        assert_eq!(f(r#""polynomial""#).unwrap(), FilterSpec::Polynomial { degree: 2 });
        assert_eq!(
            f(r#"{"kind": "polynomial", "degree": 1}"#).unwrap(),
            FilterSpec::Polynomial { degree: 1 }
        );
        assert_eq!(
            f(r#"{"kind": "variance-scaled", "degree": 2, "negative_target": "clamp"}"#).unwrap(),
            FilterSpec::VarianceScaled {
                degree: 2,
                negative_target: NegativeTarget::Clamp
            }
        );
        assert!(f(r#"{"kind": "gmkf", "degree": 2}"#).is_err());
        assert!(f(r#"{"kind": "polynomial", "degree": 0}"#).is_err());
        assert!(f(r#"{"kind": "polynomial", "order": 2}"#).is_err());
    }

    #[test]
    fn schedules() {
        let s = ScheduleSpec {
            start: 0.0,
            times: None,
            every: Some(10.0),
            until: Some(50.0),
        };
        assert_eq!(s.resolve(), vec![10.0, 20.0, 30.0, 40.0, 50.0]);
        let bad = MINIMAL.replace("\"filter\"", "\"schedule\": {\"times\": [2.0, 1.0]}, \"filter\"");
        assert!(parse_config(&bad).is_err());
    }
}
