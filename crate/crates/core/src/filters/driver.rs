//! Sequential forecast/analysis cycling over an observation schedule.

use nalgebra::{DMatrix, DVector};

use super::{
    covariance_match_update, enkf_update, fit_posterior_covariance, fit_state_map, fit_variance_map, gmkf_update,
    polynomial_filter_update, variance_scaled_update, NegativeTarget, UpdateReport,
};
use crate::basis::{gauss_grid, project, MultiIndexSet, QuadratureGrid};
use crate::error::{Error, Result};
use crate::linalg;
use crate::models::{gaussian_noise, grid_steps, noise_factor, Model};
use crate::rv::{EnsembleRV, GermSpec, PceRV, Rv};
use crate::seed::{Seeder, FILTER_V, FILTER_W};

/// A point of the assimilation time line, with or without a measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleEntry {
    pub time: f64,
    pub observation: Option<DVector<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    Gmkf,
    Enkf,
    Polynomial(usize),
    VarianceScaled { degree: usize, negative: NegativeTarget },
    CovarianceMatched { degree: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriverOptions {
    pub initial_time: f64,
    /// Total degree of forecast PCE variables.
    pub pce_degree: usize,
    /// Gauss points per germ direction for non-intrusive PCE propagation and updates.
    pub grid_level: usize,
}

impl Default for DriverOptions {
    fn default() -> Self {
        Self {
            initial_time: 0.0,
            pce_degree: 2,
            grid_level: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub step: usize,
    pub time: f64,
    pub forecast: Rv,
    pub analysis: Rv,
    pub report: Option<UpdateReport>,
}

struct Forecast {
    x: Rv,
    y: Option<Rv>,
    grid: Option<QuadratureGrid>,
    /// The germ was extended by noise variables and must be compressed afterwards.
    augmented: bool,
}

/// Runs `forecast → predict observation → update` for every schedule entry.
///
/// Ensemble member `i` at step `k` draws its dynamics noise from `filter.w/[k, i]`
/// and its observation noise from `filter.v/[k, i]`. PCE variables are
/// propagated by projection on a tensor Gauss grid; noise enters as extra
/// Gaussian germ directions, after which the posterior is re-expressed as a
/// Gaussian expansion with the same mean and covariance on `d_x` germs.
pub fn assimilate_sequence(
    model: &dyn Model,
    schedule: &[ScheduleEntry],
    prior: Rv,
    kind: FilterKind,
    seeder: &Seeder,
    options: &DriverOptions,
) -> Result<Vec<StepOutput>> {
    if prior.dim() != model.state_dim() {
        return Err(Error::DimensionMismatch {
            what: "prior",
            expected: model.state_dim(),
            found: prior.dim(),
        });
    }
    if kind == FilterKind::Enkf && prior.as_ensemble().is_none() {
        return Err(Error::InvalidArgument(
            "the ensemble Kalman filter needs an ensemble prior".into(),
        ));
    }
    let mut x = prior;
    let mut prev = options.initial_time;
    let mut out = Vec::with_capacity(schedule.len());
    for (k, entry) in schedule.iter().enumerate() {
        grid_steps(options.initial_time, entry.time, model.time_step())?;
        if entry.time <= prev {
            return Err(Error::InvalidArgument(format!(
                "schedule times must increase strictly (at {})",
                entry.time
            )));
        }
        if let Some(y) = &entry.observation {
            if y.len() != model.obs_dim() {
                return Err(Error::DimensionMismatch {
                    what: "observation",
                    expected: model.obs_dim(),
                    found: y.len(),
                });
            }
        }
        let need_obs = entry.observation.is_some();
        let fc = match &x {
            Rv::Ensemble(e) => ensemble_forecast(model, e, prev, entry.time, k, seeder, need_obs)?,
            Rv::Pce(p) => pce_forecast(model, p, prev, entry.time, options, need_obs)?,
        };
        let (analysis, report) = match (&entry.observation, &fc.y) {
            (Some(y_hat), Some(y_f)) => {
                let (a, r) = apply_update(kind, &fc.x, y_f, y_hat, fc.grid.as_ref())?;
                (a, Some(r))
            }
            _ => (fc.x.clone(), None),
        };
        let carried = if fc.augmented {
            compress(&analysis, options.pce_degree)?
        } else {
            analysis.clone()
        };
        out.push(StepOutput {
            step: k,
            time: entry.time,
            forecast: fc.x,
            analysis,
            report,
        });
        x = carried;
        prev = entry.time;
    }
    Ok(out)
}

fn apply_update(
    kind: FilterKind,
    x_f: &Rv,
    y_f: &Rv,
    y_hat: &DVector<f64>,
    grid: Option<&QuadratureGrid>,
) -> Result<(Rv, UpdateReport)> {
    match kind {
        FilterKind::Gmkf => gmkf_update(x_f, y_f, y_hat, grid),
        FilterKind::Enkf => match (x_f, y_f) {
            (Rv::Ensemble(x), Rv::Ensemble(y)) => {
                let (a, r) = enkf_update(x, y, y_hat)?;
                Ok((Rv::Ensemble(a), r))
            }
            _ => Err(Error::InvalidArgument(
                "the ensemble Kalman filter needs ensembles".into(),
            )),
        },
        FilterKind::Polynomial(p) => polynomial_filter_update(x_f, y_f, p, y_hat, grid),
        FilterKind::VarianceScaled { degree, negative } => {
            let fx = fit_state_map(x_f, y_f, degree, grid)?;
            let center = fx.map.evaluate(y_hat.as_slice())?;
            let fv = fit_variance_map(x_f, y_f, degree, &center, grid)?;
            let (a, mut r) = variance_scaled_update(x_f, y_f, &fx.map, &fv.map, y_hat, grid, negative)?;
            r.orthogonality_defect = r.orthogonality_defect.max(fv.defect);
            Ok((a, r))
        }
        FilterKind::CovarianceMatched { degree } => {
            let fx = fit_state_map(x_f, y_f, degree, grid)?;
            let center = fx.map.evaluate(y_hat.as_slice())?;
            let c_a = fit_posterior_covariance(x_f, y_f, degree, &center, y_hat, grid)?;
            let (a, mut r) = covariance_match_update(x_f, y_f, &fx.map, &c_a.matrix, y_hat, grid)?;
            r.orthogonality_defect = r.orthogonality_defect.max(c_a.defect);
            r.clipped = c_a.clipped > 0;
            r.regularized |= c_a.regularized;
            Ok((a, r))
        }
    }
}

fn ensemble_forecast(
    model: &dyn Model,
    x: &EnsembleRV,
    t0: f64,
    t1: f64,
    step: usize,
    seeder: &Seeder,
    need_obs: bool,
) -> Result<Forecast> {
    let wf = noise_factor(&model.process_noise());
    let vf = noise_factor(&model.obs_noise());
    let d_y = model.obs_dim();
    let mut xs = DMatrix::zeros(x.len(), model.state_dim());
    let mut ys = DMatrix::zeros(x.len(), d_y);
    for i in 0..x.len() {
        let counters = [step as u64, i as u64];
        let w = gaussian_noise(&wf, &mut seeder.stream(FILTER_W, &counters));
        let xf = model.forecast(&x.sample(i), &w, t0, t1)?;
        if need_obs {
            let v = gaussian_noise(&vf, &mut seeder.stream(FILTER_V, &counters));
            ys.set_row(i, &model.observe(&xf, &v)?.transpose());
        }
        xs.set_row(i, &xf.transpose());
    }
    Ok(Forecast {
        x: Rv::Ensemble(x.with_samples(xs)?),
        y: if need_obs {
            Some(Rv::Ensemble(x.with_samples(ys)?))
        } else {
            None
        },
        grid: None,
        augmented: false,
    })
}

fn pce_forecast(
    model: &dyn Model,
    x: &PceRV,
    t0: f64,
    t1: f64,
    options: &DriverOptions,
    need_obs: bool,
) -> Result<Forecast> {
    let wf = noise_factor(&model.process_noise());
    let vf = if need_obs {
        noise_factor(&model.obs_noise())
    } else {
        DMatrix::zeros(model.obs_dim(), 0)
    };
    let n = x.germ().dim();
    let (rw, rv) = (wf.ncols(), vf.ncols());
    let germ = if rw + rv > 0 {
        x.germ().concat(&GermSpec::gaussian(rw + rv)?)
    } else {
        x.germ().clone()
    };
    let grid = gauss_grid(&germ, options.grid_level)?;
    let set = MultiIndexSet::total_degree(germ.dim(), options.pce_degree)?;
    let mut xs = DMatrix::zeros(grid.len(), model.state_dim());
    let mut ys = DMatrix::zeros(grid.len(), model.obs_dim());
    for (q, node) in grid.nodes.iter().enumerate() {
        let x0 = x.evaluate(&node[..n])?;
        let w = &wf * DVector::from_row_slice(&node[n..n + rw]);
        let xf = model.forecast(&x0, &w, t0, t1)?;
        if need_obs {
            let v = &vf * DVector::from_row_slice(&node[n + rw..]);
            ys.set_row(q, &model.observe(&xf, &v)?.transpose());
        }
        xs.set_row(q, &xf.transpose());
    }
    let x_f = project(&xs, &grid, &set, &germ)?;
    let y_f = if need_obs {
        Some(Rv::Pce(project(&ys, &grid, &set, &germ)?))
    } else {
        None
    };
    Ok(Forecast {
        x: Rv::Pce(x_f),
        y: y_f,
        grid: Some(grid),
        augmented: rw + rv > 0,
    })
}

/// Gaussian expansion on `dim(x)` germs with the mean and covariance of `x`.
fn compress(x: &Rv, degree: usize) -> Result<Rv> {
    let cov = x.covariance()?;
    let factor = linalg::square_factor(&cov);
    Ok(Rv::Pce(PceRV::gaussian(&x.mean(), &factor, degree)?))
}
