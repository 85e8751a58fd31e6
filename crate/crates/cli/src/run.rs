//! Executes a configured twin experiment and writes its result bundle.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use condexp::filters::{assimilate_sequence, DriverOptions, FilterKind, ScheduleEntry, StepOutput};
use condexp::linalg;
use condexp::models::{
    gaussian_noise, lorenz84_climatology, make_twin_experiment, CubicToy, LinearGaussianModel, Lorenz84, Model,
    TwinExperiment,
};
use condexp::rv::{Bandwidth, EnsembleRV, PceRV, PceSampling, Rv};
use condexp::seed::{Seeder, FILTER_V, FILTER_W, PCE_SAMPLING, PRIOR_INIT, TRUTH_V, TRUTH_W};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{state_dim, ConfigError, ExperimentConfig, FilterSpec, ModelSpec, Representation};

/// Span of the trajectory used for the Lorenz-84 climatology, in days.
const CLIMATOLOGY_DAYS: f64 = 1000.0;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numeric failure: {0}")]
    Numeric(#[from] condexp::Error),
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("incompatible bundles: {0}")]
    IncompatibleBundles(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numeric(_) => 3,
            RunError::Io { .. } | RunError::IncompatibleBundles(_) => 1,
        }
    }

    /// One-line JSON description for machine consumption.
    pub fn record(&self) -> Value {
        let mut rec = json!({
            "error": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        match self {
            RunError::Config(ConfigError::Parse { line, column, .. }) => {
                rec["line"] = json!(line);
                rec["column"] = json!(column);
            }
            RunError::Config(ConfigError::Validation { field, reason }) => {
                rec["field"] = json!(field);
                rec["reason"] = json!(reason);
            }
            RunError::Io { path, .. } => rec["path"] = json!(path),
            _ => {}
        }
        rec
    }

    pub fn kind(&self) -> &'static str {
        match self {
            RunError::Config(c) => c.kind(),
            RunError::Numeric(_) => "numeric",
            RunError::Io { .. } => "io",
            RunError::IncompatibleBundles(_) => "incompatible-bundles",
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        RunError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Everything a run produced, in memory.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub twin: TwinExperiment,
    pub steps: Vec<StepOutput>,
    /// The same prior propagated without assimilation.
    pub free_run: Vec<StepOutput>,
    pub rmse: Vec<RmseRow>,
    pub dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmseRow {
    pub time: f64,
    pub rmse_vs_truth: f64,
    pub free_run_rmse: f64,
}

/// A model with everything needed to start a twin run.
pub struct Setup {
    pub model: Box<dyn Model>,
    pub true_init: DVector<f64>,
    pub prior_mean: DVector<f64>,
    pub prior_cov: DMatrix<f64>,
}

fn matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let cols = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j])
}

fn invalid_model(e: condexp::Error) -> RunError {
    RunError::Config(ConfigError::Validation {
        field: "model".into(),
        reason: e.to_string(),
    })
}

/// Builds the model, the true initial state and the prior moments, applying defaults.
pub fn build_setup(config: &ExperimentConfig) -> Result<Setup, RunError> {
    let d = state_dim(&config.model);
    let (model, true_init, mean, cov): (Box<dyn Model>, DVector<f64>, DVector<f64>, DMatrix<f64>) = match &config.model
    {
        ModelSpec::Lorenz84(s) => {
            let (clim_mean, clim_sd) =
                lorenz84_climatology(&s.params, [1.0, 0.0, 0.0], s.spinup_days, CLIMATOLOGY_DAYS)?;
            let obs_sd = s.obs_noise_sd.unwrap_or(clim_sd.map(|v| s.obs_noise_fraction * v));
            let mut model = Lorenz84::new(s.params, s.identify.clone(), obs_sd).map_err(invalid_model)?;
            if let Some(q) = &s.process_noise {
                model.process_cov = matrix(q);
            }
            let params: Vec<f64> = s.identify.iter().map(|p| p.get(&s.params)).collect();
            let true_init = match &s.true_init {
                Some(x) => DVector::from_row_slice(x),
                None => {
                    let steps = (s.spinup_days / s.params.dt).round() as u64;
                    let u = Lorenz84::integrate(&s.params, [1.0, 0.0, 0.0], steps)?;
                    DVector::from_iterator(d, u.into_iter().chain(params.iter().copied()))
                }
            };
            let mean = DVector::from_iterator(d, clim_mean.into_iter().chain(params.iter().copied()));
            let var = clim_sd
                .iter()
                .map(|v| v * v)
                .chain(params.iter().map(|p| (0.1 * p).powi(2)));
            let cov = DMatrix::from_diagonal(&DVector::from_iterator(d, var));
            (Box::new(model), true_init, mean, cov)
        }
        ModelSpec::LinearGaussian(s) => {
            let model = LinearGaussianModel::new(matrix(&s.a), matrix(&s.h), matrix(&s.q), matrix(&s.r))
                .map_err(invalid_model)?;
            let true_init = s
                .true_init
                .as_deref()
                .map_or_else(|| DVector::zeros(d), DVector::from_row_slice);
            (Box::new(model), true_init, DVector::zeros(d), DMatrix::identity(d, d))
        }
        ModelSpec::Cubic(s) => {
            let model = CubicToy::new(s.sigma_v).map_err(invalid_model)?;
            let true_init = s
                .true_init
                .as_deref()
                .map_or_else(|| DVector::from_element(1, 0.8), DVector::from_row_slice);
            (Box::new(model), true_init, DVector::zeros(1), DMatrix::identity(1, 1))
        }
    };
    let prior_mean = config.prior.mean.as_deref().map_or(mean, DVector::from_row_slice);
    let prior_cov = config.prior.covariance.as_deref().map_or(cov, matrix);
    Ok(Setup {
        model,
        true_init,
        prior_mean,
        prior_cov,
    })
}

/// The prior random variable in the configured representation.
///
/// Ensemble member `i` is drawn from stream `prior.init/[i]`.
pub fn build_prior(
    config: &ExperimentConfig,
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    seeder: &Seeder,
) -> Result<Rv, RunError> {
    let factor = linalg::square_factor(cov);
    match config.prior.representation {
        Representation::Ensemble { size } => {
            let d = mean.len();
            let mut samples = DMatrix::zeros(size, d);
            for i in 0..size {
                let x = mean + gaussian_noise(&factor, &mut seeder.stream(PRIOR_INIT, &[i as u64]));
                samples.set_row(i, &x.transpose());
            }
            Ok(Rv::Ensemble(EnsembleRV::uniform(samples)?))
        }
        Representation::Pce { p, .. } => Ok(Rv::Pce(PceRV::gaussian(mean, &factor, p)?)),
    }
}

pub fn filter_kind(spec: FilterSpec) -> FilterKind {
    match spec {
        FilterSpec::Gmkf => FilterKind::Gmkf,
        FilterSpec::Enkf => FilterKind::Enkf,
        FilterSpec::Polynomial { degree } => FilterKind::Polynomial(degree),
        FilterSpec::VarianceScaled {
            degree,
            negative_target,
        } => FilterKind::VarianceScaled {
            degree,
            negative: negative_target,
        },
        FilterSpec::CovarianceMatched { degree } => FilterKind::CovarianceMatched { degree },
    }
}

pub fn driver_options(config: &ExperimentConfig) -> DriverOptions {
    let mut options = DriverOptions {
        initial_time: config.schedule.start,
        ..DriverOptions::default()
    };
    if let Representation::Pce { p, grid_level, .. } = config.prior.representation {
        options.pce_degree = p;
        options.grid_level = grid_level.unwrap_or(p + 1);
    }
    options
}

fn rmse(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    ((a - b).norm_squared() / a.len() as f64).sqrt()
}

/// Twin truth, observations and the filter run, optionally with a free run of the same prior.
pub fn simulate(config: &ExperimentConfig, with_free_run: bool) -> Result<Simulation, RunError> {
    let seeder = Seeder::new(config.seeds.master);
    let setup = build_setup(config)?;
    let model = setup.model.as_ref();
    let times = config.schedule.resolve();
    let twin = make_twin_experiment(model, &setup.true_init, &seeder, config.schedule.start, &times)?;
    let prior = build_prior(config, &setup.prior_mean, &setup.prior_cov, &seeder)?;
    let options = driver_options(config);
    let kind = filter_kind(config.filter);
    let schedule: Vec<ScheduleEntry> = times
        .iter()
        .zip(&twin.observations)
        .map(|(&time, y)| ScheduleEntry {
            time,
            observation: Some(y.clone()),
        })
        .collect();
    let free_run = if with_free_run {
        let silent: Vec<ScheduleEntry> = times
            .iter()
            .map(|&time| ScheduleEntry {
                time,
                observation: None,
            })
            .collect();
        Some(assimilate_sequence(
            model,
            &silent,
            prior.clone(),
            kind,
            &seeder,
            &options,
        )?)
    } else {
        None
    };
    let steps = assimilate_sequence(model, &schedule, prior, kind, &seeder, &options)?;
    Ok(Simulation { twin, steps, free_run })
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub twin: TwinExperiment,
    pub steps: Vec<StepOutput>,
    pub free_run: Option<Vec<StepOutput>>,
}

/// Runs the twin experiment, the filter and a free run, then writes the bundle into `dir`.
pub fn run_experiment(config: &ExperimentConfig, dir: &Path) -> Result<RunOutcome, RunError> {
    let started = Instant::now();
    let seeder = Seeder::new(config.seeds.master);
    let Simulation { twin, steps, free_run } = simulate(config, true)?;
    let free_run = free_run.unwrap_or_default();

    let rmse_rows: Vec<RmseRow> = steps
        .iter()
        .zip(&free_run)
        .zip(&twin.truth)
        .map(|((s, f), truth)| RmseRow {
            time: s.time,
            rmse_vs_truth: rmse(&s.analysis.mean(), truth),
            free_run_rmse: rmse(&f.analysis.mean(), truth),
        })
        .collect();

    fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))?;
    write_file(dir, "truth.csv", |w| twin.write_truth_csv(w))?;
    write_file(dir, "observations.csv", |w| twin.write_observations_csv(w))?;
    write_trajectory(config, dir, &steps, &seeder)?;
    write_updates(dir, &steps)?;
    write_pdfs(config, dir, &steps, &seeder)?;
    write_file(dir, "rmse.csv", |w| {
        writeln!(w, "time,rmse_vs_truth,free_run_rmse")?;
        for r in &rmse_rows {
            writeln!(w, "{},{},{}", fmt(r.time), fmt(r.rmse_vs_truth), fmt(r.free_run_rmse))?;
        }
        Ok(())
    })?;

    let manifest = json!({
        "config_sha256": config.source_sha256,
        "master_seed": config.seeds.master,
        "streams": [TRUTH_W, TRUTH_V, PRIOR_INIT, FILTER_W, FILTER_V, PCE_SAMPLING],
        "version": env!("CARGO_PKG_VERSION"),
        "model": config.model.id(),
        "filter": config.filter.name(),
        "representation": config.prior.representation,
        "steps": steps.len(),
        "wall_time_seconds": started.elapsed().as_secs_f64(),
    });
    write_file(dir, "manifest.json", |w| {
        serde_json::to_writer_pretty(&mut *w, &manifest)?;
        writeln!(w)
    })?;

    Ok(RunOutcome {
        twin,
        steps,
        free_run,
        rmse: rmse_rows,
        dir: dir.to_path_buf(),
    })
}

/// Seventeen significant digits, enough for an exact round trip.
pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_file<F>(dir: &Path, name: &str, body: F) -> Result<(), RunError>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| RunError::io(&path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w).and_then(|_| w.flush()).map_err(|e| RunError::io(&path, e))
}

/// Sampling settings for a statistic of a PCE variable at `step` and `phase`.
fn sampling(config: &ExperimentConfig, seeder: &Seeder, step: usize, phase: u64) -> PceSampling {
    PceSampling {
        count: config.output.pce_samples,
        seed: seeder.stream(PCE_SAMPLING, &[step as u64, phase]).random(),
    }
}

fn quantile_header(level: f64) -> String {
    format!("q_{level}")
}

fn write_trajectory(
    config: &ExperimentConfig,
    dir: &Path,
    steps: &[StepOutput],
    seeder: &Seeder,
) -> Result<(), RunError> {
    let levels = &config.output.quantiles;
    let mut rows = Vec::new();
    for s in steps {
        for (phase_id, phase, rv) in [(0, "forecast", &s.forecast), (1, "analysis", &s.analysis)] {
            let mean = rv.mean();
            let cov = rv.covariance()?;
            let smp = sampling(config, seeder, s.step, phase_id);
            for j in 0..rv.dim() {
                let mut row = vec![
                    fmt(s.time),
                    phase.to_string(),
                    j.to_string(),
                    fmt(mean[j]),
                    fmt(cov[(j, j)]),
                ];
                if !levels.is_empty() {
                    row.extend(rv.quantiles(j, levels, smp)?.into_iter().map(fmt));
                }
                rows.push(row.join(","));
            }
        }
    }
    write_file(dir, "trajectory.csv", |w| {
        let mut header = vec![
            "time".to_string(),
            "phase".into(),
            "component".into(),
            "mean".into(),
            "var".into(),
        ];
        header.extend(levels.iter().map(|&l| quantile_header(l)));
        writeln!(w, "{}", header.join(","))?;
        for r in &rows {
            writeln!(w, "{r}")?;
        }
        Ok(())
    })
}

fn write_updates(dir: &Path, steps: &[StepOutput]) -> Result<(), RunError> {
    let mut lines = Vec::new();
    for s in steps {
        let Some(report) = &s.report else { continue };
        let mut obj = serde_json::Map::new();
        obj.insert("step".into(), json!(s.step));
        obj.insert("time".into(), json!(s.time));
        if let Value::Object(fields) = serde_json::to_value(report).map_err(|e| condexp::Error::Parse(e.to_string()))? {
            obj.extend(fields);
        }
        lines.push(Value::Object(obj).to_string());
    }
    write_file(dir, "updates.jsonl", |w| {
        for l in &lines {
            writeln!(w, "{l}")?;
        }
        Ok(())
    })
}

fn write_pdfs(config: &ExperimentConfig, dir: &Path, steps: &[StepOutput], seeder: &Seeder) -> Result<(), RunError> {
    let Some(pdf) = &config.output.pdf else { return Ok(()) };
    let d = state_dim(&config.model);
    let abscissa: Vec<f64> = (0..pdf.points)
        .map(|i| pdf.min + (pdf.max - pdf.min) * i as f64 / (pdf.points - 1) as f64)
        .collect();
    let bandwidth = pdf.bandwidth.map_or(Bandwidth::Auto, Bandwidth::Fixed);
    let step_ids: Vec<usize> = pdf.steps.clone().unwrap_or_else(|| (0..steps.len()).collect());
    let comps: Vec<usize> = pdf.components.clone().unwrap_or_else(|| (0..d).collect());
    for &k in &step_ids {
        let s = &steps[k];
        for &j in &comps {
            let density = s
                .analysis
                .kde_pdf(j, &abscissa, bandwidth, sampling(config, seeder, k, 1))?;
            write_file(dir, &format!("pdf_{k}_{j}.csv"), |w| {
                writeln!(w, "abscissa,density")?;
                for (x, p) in abscissa.iter().zip(&density) {
                    writeln!(w, "{},{}", fmt(*x), fmt(*p))?;
                }
                Ok(())
            })?;
        }
    }
    Ok(())
}
