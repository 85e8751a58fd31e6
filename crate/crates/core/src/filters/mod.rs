//! Bayesian updates built from conditional expectations.
//!
//! Every update maps the forecast `x_f`, the predicted observation `y_f` on the
//! same sample space, and the measured value `ŷ` to a posterior random vector.
//! Affine updates act directly on ensemble members or PCE coefficients.
//! Nonlinear ones are evaluated pointwise (members, or germ quadrature nodes)
//! and, for PCE, projected back onto the forecast's index set.

mod driver;

pub use driver::{assimilate_sequence, DriverOptions, FilterKind, ScheduleEntry, StepOutput};

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::QuadratureGrid;
use crate::cond_expect::{build_obs_basis, galerkin_solve, galerkin_solve_with, mmse_residual, FitOptions, OptimalMap};
use crate::error::{Error, Result};
use crate::linalg::{self, CompensatedSum};
use crate::rv::{EnsembleRV, MomentSummary, Rv};

/// `K = cov(x, y) · cov(y)⁺`.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanGain {
    pub gain: DMatrix<f64>,
    /// The pseudo-inverse cutoff removed at least one direction of `cov(y)`.
    pub regularized: bool,
    pub cutoff: f64,
}

pub fn kalman_gain(x: &Rv, y: &Rv) -> Result<KalmanGain> {
    let c_xy = x.cross_covariance(y)?;
    let c_y = y.covariance()?;
    let pinv = linalg::pinv_symmetric(&c_y);
    let gain = c_xy * &pinv.inverse;
    if gain.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteState);
    }
    Ok(KalmanGain {
        gain,
        regularized: pinv.regularized,
        cutoff: pinv.cutoff,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateKind {
    MeanOnly,
    VarianceScaled,
    CovarianceMatched,
    Linear,
    Polynomial(usize),
}

impl fmt::Display for UpdateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UpdateKind::MeanOnly => f.write_str("mean-only"),
            UpdateKind::VarianceScaled => f.write_str("variance-scaled"),
            UpdateKind::CovarianceMatched => f.write_str("covariance-matched"),
            UpdateKind::Linear => f.write_str("linear"),
            UpdateKind::Polynomial(p) => write!(f, "polynomial-{p}"),
        }
    }
}

impl std::str::FromStr for UpdateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean-only" => Ok(UpdateKind::MeanOnly),
            "variance-scaled" => Ok(UpdateKind::VarianceScaled),
            "covariance-matched" => Ok(UpdateKind::CovarianceMatched),
            "linear" => Ok(UpdateKind::Linear),
            _ => s
                .strip_prefix("polynomial-")
                .and_then(|p| p.parse().ok())
                .filter(|p| *p >= 1)
                .map(UpdateKind::Polynomial)
                .ok_or_else(|| Error::Parse(format!("unknown update kind `{s}`"))),
        }
    }
}

impl Serialize for UpdateKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for UpdateKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Diagnostics of one update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateReport {
    pub kind: UpdateKind,
    pub prior: MomentSummary,
    pub posterior: MomentSummary,
    /// `‖ŷ − E[y_f]‖`.
    pub innovation_norm: f64,
    /// Kalman gain, row by row, for affine updates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<Vec<Vec<f64>>>,
    /// The map `φ_x` for map-based updates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<OptimalMap>,
    /// A pseudo-inverse replaced an ill-conditioned solve.
    pub regularized: bool,
    /// Squared L² norm lost when projecting a nonlinear PCE update back onto its index set.
    pub truncation: f64,
    /// Largest relative Galerkin-orthogonality violation over all fitted maps.
    pub orthogonality_defect: f64,
    /// `E‖x − φ_x(y)‖²` of the state map.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mmse_residual: Option<f64>,
    /// Fitted target variance or covariance was clamped or clipped at zero.
    pub clipped: bool,
}

impl UpdateReport {
    fn new(kind: UpdateKind, x_f: &Rv, y_f: &Rv, y_hat: &DVector<f64>, posterior: &Rv) -> Result<Self> {
        Ok(Self {
            kind,
            prior: x_f.summary()?,
            posterior: posterior.summary()?,
            innovation_norm: (y_hat - y_f.mean()).norm(),
            gain: None,
            map: None,
            regularized: false,
            truncation: 0.0,
            orthogonality_defect: 0.0,
            mmse_residual: None,
            clipped: false,
        })
    }
}

fn check_obs(y_f: &Rv, y_hat: &DVector<f64>) -> Result<()> {
    if y_f.dim() != y_hat.len() {
        return Err(Error::DimensionMismatch {
            what: "observation",
            expected: y_f.dim(),
            found: y_hat.len(),
        });
    }
    Ok(())
}

/// `E[e]` and `E[e yᵀ]` of the affine residual `e = x − E[x] − K(y − E[y])`,
/// relative to the same moments of `x`.
fn affine_orthogonality(x: &EnsembleRV, y: &EnsembleRV, gain: &DMatrix<f64>) -> f64 {
    let mx = x.mean();
    let my = y.mean();
    let w = x.weights();
    let dx = x.dim();
    let dy = y.dim();
    let mut resid = vec![CompensatedSum::default(); dx * (dy + 1)];
    let mut raw = vec![CompensatedSum::default(); dx * (dy + 1)];
    for i in 0..x.len() {
        let xi = x.samples().row(i).transpose();
        let yi = y.samples().row(i).transpose();
        let e = &xi - &mx - gain * (&yi - &my);
        for a in 0..dx {
            resid[a].add(w[i] * e[a]);
            raw[a].add(w[i] * xi[a]);
            for b in 0..dy {
                resid[dx * (b + 1) + a].add(w[i] * e[a] * yi[b]);
                raw[dx * (b + 1) + a].add(w[i] * xi[a] * yi[b]);
            }
        }
    }
    let worst = resid.iter().fold(0.0_f64, |m, r| m.max(r.value().abs()));
    let scale = raw.iter().fold(0.0_f64, |m, r| m.max(r.value().abs())) + 1.0;
    worst / scale
}

/// The linear update `x_a = x_f + K(ŷ − y_f)` as a relation between random vectors.
///
/// Ensembles are updated member by member; PCE coefficients are updated
/// directly, since the map is affine. `grid` is only used for diagnostics of
/// PCE variables and may be omitted.
pub fn gmkf_update(
    x_f: &Rv,
    y_f: &Rv,
    y_hat: &DVector<f64>,
    grid: Option<&QuadratureGrid>,
) -> Result<(Rv, UpdateReport)> {
    x_f.check_same_space(y_f)?;
    check_obs(y_f, y_hat)?;
    let k = kalman_gain(x_f, y_f)?;
    let posterior = x_f.add_mapped(y_f, &(-&k.gain), &(&k.gain * y_hat))?;
    let mut report = UpdateReport::new(UpdateKind::Linear, x_f, y_f, y_hat, &posterior)?;
    report.gain = Some(k.gain.row_iter().map(|r| r.iter().copied().collect()).collect());
    report.regularized = k.regularized;
    if matches!(x_f, Rv::Ensemble(_)) || grid.is_some() {
        let (xp, yp) = x_f.joint_points(y_f, grid)?;
        report.orthogonality_defect = affine_orthogonality(&xp, &yp, &k.gain);
    }
    Ok((posterior, report))
}

/// Member-wise `x_a(ω_ℓ) = x_f(ω_ℓ) + C_{xy} C_y⁻¹ (ŷ − y(ω_ℓ))` with sample covariances.
pub fn enkf_update(x_f: &EnsembleRV, y_f: &EnsembleRV, y_hat: &DVector<f64>) -> Result<(EnsembleRV, UpdateReport)> {
    let (post, report) = gmkf_update(&Rv::Ensemble(x_f.clone()), &Rv::Ensemble(y_f.clone()), y_hat, None)?;
    match post {
        Rv::Ensemble(e) => Ok((e, report)),
        Rv::Pce(_) => unreachable!("ensemble input yields an ensemble"),
    }
}

/// Fit of `E[x | y]` over monomials of degree `degree` with its orthogonality
/// defect and MMSE residual, under the joint measure of `(x_f, y_f)`.
pub fn fit_state_map(x_f: &Rv, y_f: &Rv, degree: usize, grid: Option<&QuadratureGrid>) -> Result<FittedMap> {
    let (xp, yp) = x_f.joint_points(y_f, grid)?;
    let map = galerkin_solve(&build_obs_basis(y_f.dim(), degree)?, &yp, &xp)?;
    let defect = map.orthogonality_defect(&yp, &xp)?;
    let residual = mmse_residual(&map, &xp, &yp)?;
    Ok(FittedMap { map, defect, residual })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedMap {
    pub map: OptimalMap,
    pub defect: f64,
    pub residual: f64,
}

/// Fit of `E[‖x − c‖² | y]` for a fixed center `c` (normally `φ_x(ŷ)`).
pub fn fit_variance_map(
    x_f: &Rv,
    y_f: &Rv,
    degree: usize,
    center: &DVector<f64>,
    grid: Option<&QuadratureGrid>,
) -> Result<FittedMap> {
    let (xp, yp) = x_f.joint_points(y_f, grid)?;
    let target = xp.map_rows(1, |_, x| DVector::from_element(1, (x - center).norm_squared()))?;
    let map = galerkin_solve_with(
        &build_obs_basis(y_f.dim(), degree)?,
        &yp,
        &target,
        FitOptions::default(),
        "variance",
    )?;
    let defect = map.orthogonality_defect(&yp, &target)?;
    let residual = mmse_residual(&map, &target, &yp)?;
    Ok(FittedMap { map, defect, residual })
}

/// Posterior covariance estimate `C_a ≈ E[(x − c)(x − c)ᵀ | ŷ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorCovariance {
    pub matrix: DMatrix<f64>,
    /// Number of negative eigenvalues raised to zero.
    pub clipped: usize,
    pub defect: f64,
    pub regularized: bool,
}

/// Fits every entry of `(x − c)(x − c)ᵀ` with the observation basis, evaluates
/// the fit at `ŷ`, symmetrizes and clips negative eigenvalues at zero.
pub fn fit_posterior_covariance(
    x_f: &Rv,
    y_f: &Rv,
    degree: usize,
    center: &DVector<f64>,
    y_hat: &DVector<f64>,
    grid: Option<&QuadratureGrid>,
) -> Result<PosteriorCovariance> {
    let (xp, yp) = x_f.joint_points(y_f, grid)?;
    let d = x_f.dim();
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i..d).map(move |j| (i, j))).collect();
    let target = xp.map_rows(pairs.len(), |_, x| {
        let e = x - center;
        DVector::from_iterator(pairs.len(), pairs.iter().map(|&(i, j)| e[i] * e[j]))
    })?;
    let map = galerkin_solve_with(
        &build_obs_basis(y_f.dim(), degree)?,
        &yp,
        &target,
        FitOptions::default(),
        "covariance",
    )?;
    let defect = map.orthogonality_defect(&yp, &target)?;
    let values = map.evaluate(y_hat.as_slice())?;
    let mut c = DMatrix::zeros(d, d);
    for (k, &(i, j)) in pairs.iter().enumerate() {
        c[(i, j)] = values[k];
        c[(j, i)] = values[k];
    }
    let eig = nalgebra::SymmetricEigen::new(c);
    let clipped = eig.eigenvalues.iter().filter(|l| **l < 0.0).count();
    let vals = eig.eigenvalues.map(|l| l.max(0.0));
    let matrix =
        linalg::symmetrize(&(&eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()));
    Ok(PosteriorCovariance {
        matrix,
        clipped,
        defect,
        regularized: map.regularized,
    })
}

/// `x_f − φ_x(y_f)` on the shared sample space, with the PCE truncation energy.
fn fluctuation(x_f: &Rv, y_f: &Rv, map: &OptimalMap, grid: Option<&QuadratureGrid>) -> Result<(Rv, f64)> {
    if map.out_dim() != x_f.dim() {
        return Err(Error::DimensionMismatch {
            what: "map output",
            expected: x_f.dim(),
            found: map.out_dim(),
        });
    }
    let (xp, yp) = x_f.joint_points(y_f, grid)?;
    let fitted = map.evaluate_ensemble(&yp)?;
    x_f.rebuild(xp.samples() - fitted.samples(), grid)
}

fn finish_map_report(
    report: &mut UpdateReport,
    map: &OptimalMap,
    x_f: &Rv,
    y_f: &Rv,
    grid: Option<&QuadratureGrid>,
) -> Result<()> {
    let (xp, yp) = x_f.joint_points(y_f, grid)?;
    report.orthogonality_defect = report.orthogonality_defect.max(map.orthogonality_defect(&yp, &xp)?);
    report.mmse_residual = Some(mmse_residual(map, &xp, &yp)?);
    report.regularized |= map.regularized;
    report.map = Some(map.clone());
    Ok(())
}

/// `x_a = φ_x(ŷ) + (x_f − φ_x(y_f))`, which carries the posterior mean `φ_x(ŷ)`.
pub fn mean_correct_update(
    x_f: &Rv,
    y_f: &Rv,
    map: &OptimalMap,
    y_hat: &DVector<f64>,
    grid: Option<&QuadratureGrid>,
) -> Result<(Rv, UpdateReport)> {
    check_obs(y_f, y_hat)?;
    let (perp, lost) = fluctuation(x_f, y_f, map, grid)?;
    let center = map.evaluate(y_hat.as_slice())?;
    let posterior = perp.affine(&DMatrix::identity(x_f.dim(), x_f.dim()), &center)?;
    let mut report = UpdateReport::new(UpdateKind::MeanOnly, x_f, y_f, y_hat, &posterior)?;
    report.truncation = lost;
    finish_map_report(&mut report, map, x_f, y_f, grid)?;
    Ok((posterior, report))
}

/// What to do when a fitted second-moment target is negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NegativeTarget {
    #[default]
    Error,
    /// Replace the target by zero and flag the report.
    Clamp,
}

/// `x_a = φ_x(ŷ) + √(v(ŷ) / tv(x_⊥)) · x_⊥` with `x_⊥ = x_f − φ_x(y_f)` and
/// `v = map_var`, so that the posterior total variance equals `v(ŷ)`.
pub fn variance_scaled_update(
    x_f: &Rv,
    y_f: &Rv,
    map_x: &OptimalMap,
    map_var: &OptimalMap,
    y_hat: &DVector<f64>,
    grid: Option<&QuadratureGrid>,
    negative: NegativeTarget,
) -> Result<(Rv, UpdateReport)> {
    check_obs(y_f, y_hat)?;
    let mut target = map_var.evaluate(y_hat.as_slice())?[0];
    let mut clipped = false;
    if target.is_nan() || target <= 0.0 {
        match negative {
            NegativeTarget::Error => return Err(Error::NegativeTargetVariance(target)),
            NegativeTarget::Clamp => {
                target = 0.0;
                clipped = true;
            }
        }
    }
    let (perp, lost) = fluctuation(x_f, y_f, map_x, grid)?;
    let current = perp.total_variance()?;
    let scale = if current > 0.0 { (target / current).sqrt() } else { 1.0 };
    let d = x_f.dim();
    let center = map_x.evaluate(y_hat.as_slice())?;
    let posterior = perp.affine(&(DMatrix::identity(d, d) * scale), &center)?;
    let mut report = UpdateReport::new(UpdateKind::VarianceScaled, x_f, y_f, y_hat, &posterior)?;
    report.truncation = lost;
    report.clipped = clipped;
    report.regularized = map_var.regularized;
    finish_map_report(&mut report, map_x, x_f, y_f, grid)?;
    Ok((posterior, report))
}

/// `x_a = φ_x(ŷ) + L_a L_1⁻¹ x_⊥` with Cholesky factors `L_1 L_1ᵀ = cov(x_⊥)` and
/// `L_a L_aᵀ = C_a`, so that the posterior covariance equals `C_a`.
///
/// A singular but positive semidefinite `C_a` is factored through its eigendecomposition.
pub fn covariance_match_update(
    x_f: &Rv,
    y_f: &Rv,
    map_x: &OptimalMap,
    c_a: &DMatrix<f64>,
    y_hat: &DVector<f64>,
    grid: Option<&QuadratureGrid>,
) -> Result<(Rv, UpdateReport)> {
    check_obs(y_f, y_hat)?;
    let d = x_f.dim();
    if c_a.shape() != (d, d) {
        return Err(Error::ShapeMismatch(format!(
            "target covariance {:?} for dimension {d}",
            c_a.shape()
        )));
    }
    let (perp, lost) = fluctuation(x_f, y_f, map_x, grid)?;
    let l_1 = linalg::cholesky_lower(&perp.covariance()?, "fluctuation covariance")?;
    let min = linalg::min_eigenvalue(c_a);
    if min < -1e-12 * linalg::max_abs(c_a).max(f64::MIN_POSITIVE) {
        return Err(Error::NotSpd {
            what: "target covariance",
            min_eigenvalue: min,
        });
    }
    let l_a = linalg::square_factor(c_a);
    let l_1_inv = l_1
        .solve_lower_triangular(&DMatrix::identity(d, d))
        .ok_or(Error::NotSpd {
            what: "fluctuation covariance",
            min_eigenvalue: 0.0,
        })?;
    let transform = l_a * l_1_inv;
    let center = map_x.evaluate(y_hat.as_slice())?;
    let posterior = perp.affine(&transform, &center)?;
    let mut report = UpdateReport::new(UpdateKind::CovarianceMatched, x_f, y_f, y_hat, &posterior)?;
    report.truncation = lost;
    finish_map_report(&mut report, map_x, x_f, y_f, grid)?;
    Ok((posterior, report))
}

/// `x_a = x_f + φ_x(ŷ) − φ_x(y_f)` with `φ_x` fitted over monomials of degree `degree`.
pub fn polynomial_filter_update(
    x_f: &Rv,
    y_f: &Rv,
    degree: usize,
    y_hat: &DVector<f64>,
    grid: Option<&QuadratureGrid>,
) -> Result<(Rv, UpdateReport)> {
    let fitted = fit_state_map(x_f, y_f, degree, grid)?;
    let (posterior, mut report) = mean_correct_update(x_f, y_f, &fitted.map, y_hat, grid)?;
    report.kind = UpdateKind::Polynomial(degree);
    Ok((posterior, report))
}
