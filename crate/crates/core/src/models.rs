//! Dynamical and observation models, the RK4 integrator, and twin experiments.
//!
//! A model advances a state vector `x` over one forecast interval with a
//! dynamics noise `w`, and predicts the observation `h(x, v)` with a measurement
//! noise `v`. Both noises are zero-mean Gaussian with model-supplied covariances;
//! `w` is drawn once per forecast interval.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::seed::{Seeder, TRUTH_V, TRUTH_W};

pub trait Model {
    fn name(&self) -> &str;
    fn state_dim(&self) -> usize;
    fn obs_dim(&self) -> usize;
    /// Length of one step of the model time grid.
    fn time_step(&self) -> f64;
    /// Covariance of `w`, per forecast interval.
    fn process_noise(&self) -> DMatrix<f64>;
    /// Covariance of `v`.
    fn obs_noise(&self) -> DMatrix<f64>;
    fn forecast(&self, x: &DVector<f64>, w: &DVector<f64>, t0: f64, t1: f64) -> Result<DVector<f64>>;
    fn observe(&self, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>>;
}

/// Number of model steps from `t0` to `t`, or `TimeGridMismatch` if `t` is off the grid.
pub fn grid_steps(t0: f64, t: f64, step: f64) -> Result<u64> {
    let k = (t - t0) / step;
    let r = k.round();
    if !(k.is_finite() && r >= 0.0 && (k - r).abs() <= 1e-9 * r.max(1.0)) {
        return Err(Error::TimeGridMismatch { time: t, step });
    }
    Ok(r as u64)
}

/// Draws `factor · η` with `η` standard normal; `factor` has one column per independent direction.
pub fn gaussian_noise<R: Rng + ?Sized>(factor: &DMatrix<f64>, rng: &mut R) -> DVector<f64> {
    let eta = DVector::from_fn(factor.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
    factor * eta
}

/// Classical fourth-order Runge-Kutta step.
pub fn rk4_step<F>(rhs: F, x: &DVector<f64>, t: f64, dt: f64) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>, f64) -> DVector<f64>,
{
    if dt.is_nan() || dt <= 0.0 {
        return Err(Error::InvalidArgument(format!("time step {dt} must be positive")));
    }
    let k1 = rhs(x, t);
    let k2 = rhs(&(x + &k1 * (dt / 2.0)), t + dt / 2.0);
    let k3 = rhs(&(x + &k2 * (dt / 2.0)), t + dt / 2.0);
    let k4 = rhs(&(x + &k3 * dt), t + dt);
    let out = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(Error::NonFiniteState)
    }
}

/// Parameters of the Lorenz-84 system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Lorenz84Params {
    pub a: f64,
    pub b: f64,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "G")]
    pub g: f64,
    /// Model time step in days.
    pub dt: f64,
    /// RK4 substeps per model step.
    pub substeps: usize,
}

impl Default for Lorenz84Params {
    fn default() -> Self {
        Self {
            a: 0.25,
            b: 4.0,
            f: 8.0,
            g: 1.0,
            dt: 0.05,
            substeps: 1,
        }
    }
}

impl Lorenz84Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt = {} must be positive", self.dt)));
        }
        if self.substeps == 0 {
            return Err(Error::InvalidArgument("substeps must be at least 1".into()));
        }
        Ok(())
    }
}

/// `ẋ = −y² − z² − a x + a F`, `ẏ = x y − b x z − y + G`, `ż = b x y + x z − z`.
pub fn lorenz84_rhs(s: &[f64], p: &Lorenz84Params) -> [f64; 3] {
    let (x, y, z) = (s[0], s[1], s[2]);
    [
        -y * y - z * z - p.a * x + p.a * p.f,
        x * y - p.b * x * z - y + p.g,
        p.b * x * y + x * z - z,
    ]
}

/// Lorenz-84 parameters that can be appended to the state and identified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Lorenz84Param {
    #[serde(rename = "a")]
    A,
    #[serde(rename = "b")]
    B,
    F,
    G,
}

impl Lorenz84Param {
    fn set(self, p: &mut Lorenz84Params, value: f64) {
        match self {
            Lorenz84Param::A => p.a = value,
            Lorenz84Param::B => p.b = value,
            Lorenz84Param::F => p.f = value,
            Lorenz84Param::G => p.g = value,
        }
    }

    pub fn get(self, p: &Lorenz84Params) -> f64 {
        match self {
            Lorenz84Param::A => p.a,
            Lorenz84Param::B => p.b,
            Lorenz84Param::F => p.f,
            Lorenz84Param::G => p.g,
        }
    }
}

/// Lorenz-84 with the full physical state observed under additive noise.
///
/// The state is `[x, y, z, q…]` where `q` lists the parameters named in
/// `identified`; they are read from the state at each forecast and carried
/// through unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct Lorenz84 {
    pub params: Lorenz84Params,
    pub identified: Vec<Lorenz84Param>,
    /// Covariance of the additive dynamics noise on the full state.
    pub process_cov: DMatrix<f64>,
    /// Covariance of the additive observation noise on `(x, y, z)`.
    pub obs_cov: DMatrix<f64>,
}

impl Lorenz84 {
    /// Noise-free dynamics and observation noise with the given per-component standard deviations.
    pub fn new(params: Lorenz84Params, identified: Vec<Lorenz84Param>, obs_sd: [f64; 3]) -> Result<Self> {
        params.validate()?;
        let d = 3 + identified.len();
        Ok(Self {
            params,
            identified,
            process_cov: DMatrix::zeros(d, d),
            obs_cov: DMatrix::from_diagonal(&DVector::from_iterator(3, obs_sd.iter().map(|s| s * s))),
        })
    }

    fn params_from(&self, x: &DVector<f64>) -> Lorenz84Params {
        let mut p = self.params;
        for (k, q) in self.identified.iter().enumerate() {
            q.set(&mut p, x[3 + k]);
        }
        p
    }

    /// Integrates the physical state over `steps` model steps with fixed parameters.
    pub fn integrate(params: &Lorenz84Params, u: [f64; 3], steps: u64) -> Result<[f64; 3]> {
        let h = params.dt / params.substeps as f64;
        let rhs = |s: &DVector<f64>, _t: f64| DVector::from_row_slice(&lorenz84_rhs(s.as_slice(), params));
        let mut s = DVector::from_row_slice(&u);
        for _ in 0..steps * params.substeps as u64 {
            s = rk4_step(rhs, &s, 0.0, h)?;
        }
        Ok([s[0], s[1], s[2]])
    }
}

impl Model for Lorenz84 {
    fn name(&self) -> &str {
        "lorenz84"
    }

    fn state_dim(&self) -> usize {
        3 + self.identified.len()
    }

    fn obs_dim(&self) -> usize {
        3
    }

    fn time_step(&self) -> f64 {
        self.params.dt
    }

    fn process_noise(&self) -> DMatrix<f64> {
        self.process_cov.clone()
    }

    fn obs_noise(&self) -> DMatrix<f64> {
        self.obs_cov.clone()
    }

    fn forecast(&self, x: &DVector<f64>, w: &DVector<f64>, t0: f64, t1: f64) -> Result<DVector<f64>> {
        check_len("state", self.state_dim(), x.len())?;
        check_len("dynamics noise", self.state_dim(), w.len())?;
        let steps = grid_steps(t0, t1, self.params.dt)?;
        let p = self.params_from(x);
        let u = Self::integrate(&p, [x[0], x[1], x[2]], steps)?;
        let mut out = x.clone();
        out[0] = u[0];
        out[1] = u[1];
        out[2] = u[2];
        if w.iter().any(|v| *v != 0.0) {
            out += w;
        }
        Ok(out)
    }

    fn observe(&self, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("state", self.state_dim(), x.len())?;
        check_len("observation noise", 3, v.len())?;
        Ok(DVector::from_row_slice(&[x[0] + v[0], x[1] + v[1], x[2] + v[2]]))
    }
}

/// Time mean and standard deviation of each Lorenz-84 component along one long
/// trajectory, after a spin-up.
pub fn lorenz84_climatology(
    params: &Lorenz84Params,
    start: [f64; 3],
    spinup_days: f64,
    span_days: f64,
) -> Result<([f64; 3], [f64; 3])> {
    params.validate()?;
    let spin = (spinup_days / params.dt).round() as u64;
    let span = ((span_days / params.dt).round() as u64).max(2);
    let mut u = Lorenz84::integrate(params, start, spin)?;
    let mut sums = [linalg::CompensatedSum::default(); 3];
    let mut squares = [linalg::CompensatedSum::default(); 3];
    for _ in 0..span {
        u = Lorenz84::integrate(params, u, 1)?;
        for j in 0..3 {
            sums[j].add(u[j]);
            squares[j].add(u[j] * u[j]);
        }
    }
    let n = span as f64;
    let mut mean = [0.0; 3];
    let mut sd = [0.0; 3];
    for j in 0..3 {
        mean[j] = sums[j].value() / n;
        sd[j] = ((squares[j].value() - n * mean[j] * mean[j]) / (n - 1.0))
            .max(0.0)
            .sqrt();
    }
    Ok((mean, sd))
}

/// `x_{n+1} = A x_n + w`, `y = H x + v` with `w ∼ N(0, Q)` and `v ∼ N(0, R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussianModel {
    pub a: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub dt: f64,
}

impl LinearGaussianModel {
    pub fn new(a: DMatrix<f64>, h: DMatrix<f64>, q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        let d = a.nrows();
        if a.ncols() != d || h.ncols() != d || q.shape() != (d, d) || r.shape() != (h.nrows(), h.nrows()) {
            return Err(Error::ShapeMismatch(format!(
                "A {:?}, H {:?}, Q {:?}, R {:?}",
                a.shape(),
                h.shape(),
                q.shape(),
                r.shape()
            )));
        }
        for (m, what) in [(&q, "Q"), (&r, "R")] {
            let asym = linalg::max_abs(&(m - m.transpose()));
            let min = linalg::min_eigenvalue(m);
            let scale = linalg::max_abs(m).max(1.0);
            if asym > 1e-12 * scale || min < -1e-12 * scale {
                return Err(Error::NotSpd {
                    what: if what == "Q" {
                        "process noise covariance"
                    } else {
                        "observation noise covariance"
                    },
                    min_eigenvalue: min,
                });
            }
        }
        Ok(Self { a, h, q, r, dt: 1.0 })
    }
}

impl Model for LinearGaussianModel {
    fn name(&self) -> &str {
        "linear-gaussian"
    }

    fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    fn obs_dim(&self) -> usize {
        self.h.nrows()
    }

    fn time_step(&self) -> f64 {
        self.dt
    }

    fn process_noise(&self) -> DMatrix<f64> {
        self.q.clone()
    }

    fn obs_noise(&self) -> DMatrix<f64> {
        self.r.clone()
    }

    fn forecast(&self, x: &DVector<f64>, w: &DVector<f64>, t0: f64, t1: f64) -> Result<DVector<f64>> {
        check_len("state", self.state_dim(), x.len())?;
        check_len("dynamics noise", self.state_dim(), w.len())?;
        let mut out = x.clone();
        for _ in 0..grid_steps(t0, t1, self.dt)? {
            out = &self.a * out;
        }
        Ok(out + w)
    }

    fn observe(&self, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("state", self.state_dim(), x.len())?;
        check_len("observation noise", self.obs_dim(), v.len())?;
        Ok(&self.h * x + v)
    }
}

/// One forecast and analysis of the classical Kalman filter.
pub fn exact_kalman_step(
    model: &LinearGaussianModel,
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    y_hat: Option<&DVector<f64>>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let min = linalg::min_eigenvalue(cov);
    if min < -1e-10 * linalg::max_abs(cov).max(1.0) {
        return Err(Error::NotSpd {
            what: "prior covariance",
            min_eigenvalue: min,
        });
    }
    let m = &model.a * mean;
    let p = linalg::symmetrize(&(&model.a * cov * model.a.transpose() + &model.q));
    let Some(y_hat) = y_hat else {
        return Ok((m, p));
    };
    let s = &model.h * &p * model.h.transpose() + &model.r;
    let k = &p * model.h.transpose() * linalg::pinv_symmetric(&s).inverse;
    let m_a = &m + &k * (y_hat - &model.h * &m);
    let p_a = linalg::symmetrize(&(&p - &k * &model.h * &p));
    Ok((m_a, p_a))
}

/// `x³ + σ_v v`.
pub fn cubic_observe(x: f64, v: f64, sigma_v: f64) -> f64 {
    x * x * x + sigma_v * v
}

/// Static scalar state observed through its cube with additive Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicToy {
    pub sigma_v: f64,
}

impl CubicToy {
    pub fn new(sigma_v: f64) -> Result<Self> {
        if !(sigma_v >= 0.0 && sigma_v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma_v = {sigma_v} must be nonnegative"
            )));
        }
        Ok(Self { sigma_v })
    }
}

impl Model for CubicToy {
    fn name(&self) -> &str {
        "cubic"
    }

    fn state_dim(&self) -> usize {
        1
    }

    fn obs_dim(&self) -> usize {
        1
    }

    fn time_step(&self) -> f64 {
        1.0
    }

    fn process_noise(&self) -> DMatrix<f64> {
        DMatrix::zeros(1, 1)
    }

    fn obs_noise(&self) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, 1.0)
    }

    fn forecast(&self, x: &DVector<f64>, w: &DVector<f64>, t0: f64, t1: f64) -> Result<DVector<f64>> {
        check_len("state", 1, x.len())?;
        grid_steps(t0, t1, 1.0)?;
        Ok(x + w)
    }

    fn observe(&self, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("state", 1, x.len())?;
        Ok(DVector::from_element(1, cubic_observe(x[0], v[0], self.sigma_v)))
    }
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { what, expected, found })
    }
}

/// Square-root factor of a noise covariance, with only the nonzero directions kept.
pub fn noise_factor(cov: &DMatrix<f64>) -> DMatrix<f64> {
    if linalg::max_abs(cov) == 0.0 {
        return DMatrix::zeros(cov.nrows(), 0);
    }
    linalg::psd_factor(cov)
}

/// Simulated truth and its noisy observations.
#[derive(Debug, Clone, PartialEq)]
pub struct TwinExperiment {
    pub initial_time: f64,
    pub times: Vec<f64>,
    /// Truth at each entry of `times`.
    pub truth: Vec<DVector<f64>>,
    pub observations: Vec<DVector<f64>>,
}

impl TwinExperiment {
    /// Long-format truth table: `time,component,value`.
    pub fn write_truth_csv<W: std::io::Write>(&self, out: W) -> std::io::Result<()> {
        write_long_csv(out, &self.times, &self.truth)
    }

    pub fn write_observations_csv<W: std::io::Write>(&self, out: W) -> std::io::Result<()> {
        write_long_csv(out, &self.times, &self.observations)
    }
}

fn write_long_csv<W: std::io::Write>(mut out: W, times: &[f64], values: &[DVector<f64>]) -> std::io::Result<()> {
    writeln!(out, "time,component,value")?;
    for (t, v) in times.iter().zip(values) {
        for (j, x) in v.iter().enumerate() {
            writeln!(out, "{t:.16e},{j},{x:.16e}")?;
        }
    }
    Ok(())
}

/// Runs the truth from `true_init` at `t0` through `obs_times` and observes it.
///
/// Dynamics noise for interval `k` comes from stream `truth.w/[k]`, observation
/// noise for observation `k` from `truth.v/[k]`.
pub fn make_twin_experiment(
    model: &dyn Model,
    true_init: &DVector<f64>,
    seeder: &Seeder,
    t0: f64,
    obs_times: &[f64],
) -> Result<TwinExperiment> {
    check_len("initial truth", model.state_dim(), true_init.len())?;
    let wf = noise_factor(&model.process_noise());
    let vf = noise_factor(&model.obs_noise());
    let mut prev = t0;
    let mut x = true_init.clone();
    let mut truth = Vec::with_capacity(obs_times.len());
    let mut observations = Vec::with_capacity(obs_times.len());
    for (k, &t) in obs_times.iter().enumerate() {
        grid_steps(t0, t, model.time_step())?;
        if t <= prev {
            return Err(Error::InvalidArgument(format!(
                "observation times must increase strictly (at {t})"
            )));
        }
        let w = gaussian_noise(&wf, &mut seeder.stream(TRUTH_W, &[k as u64]));
        x = model.forecast(&x, &w, prev, t)?;
        let v = gaussian_noise(&vf, &mut seeder.stream(TRUTH_V, &[k as u64]));
        observations.push(model.observe(&x, &v)?);
        truth.push(x.clone());
        prev = t;
    }
    Ok(TwinExperiment {
        initial_time: t0,
        times: obs_times.to_vec(),
        truth,
        observations,
    })
}
