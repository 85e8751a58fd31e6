//! Finite-variance random vectors as weighted ensembles or polynomial chaos
//! expansions, and their moment algebra.

mod ensemble;
mod germ;
mod pce;
mod stats;

pub use ensemble::EnsembleRV;
pub use germ::{GermFamily, GermSpec};
pub use pce::PceRV;
pub use stats::{kde_of, quantiles_of, silverman_bandwidth, Bandwidth};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{project_indices, QuadratureGrid};
use crate::error::{Error, Result};

/// A random vector in one of the two supported representations.
#[derive(Debug, Clone, PartialEq)]
pub enum Rv {
    Ensemble(EnsembleRV),
    Pce(PceRV),
}

impl From<EnsembleRV> for Rv {
    fn from(e: EnsembleRV) -> Self {
        Rv::Ensemble(e)
    }
}

impl From<PceRV> for Rv {
    fn from(p: PceRV) -> Self {
        Rv::Pce(p)
    }
}

/// Monte Carlo sampling used when a statistic of a PCE variable needs samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PceSampling {
    pub count: usize,
    pub seed: u64,
}

impl Default for PceSampling {
    fn default() -> Self {
        Self { count: 10_000, seed: 0 }
    }
}

impl Rv {
    pub fn dim(&self) -> usize {
        match self {
            Rv::Ensemble(e) => e.dim(),
            Rv::Pce(p) => p.dim(),
        }
    }

    pub fn mean(&self) -> DVector<f64> {
        match self {
            Rv::Ensemble(e) => e.mean(),
            Rv::Pce(p) => p.mean(),
        }
    }

    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        match self {
            Rv::Ensemble(e) => e.covariance(),
            Rv::Pce(p) => Ok(p.covariance()),
        }
    }

    pub fn cross_covariance(&self, other: &Rv) -> Result<DMatrix<f64>> {
        match (self, other) {
            (Rv::Ensemble(a), Rv::Ensemble(b)) => a.cross_covariance(b),
            (Rv::Pce(a), Rv::Pce(b)) => a.cross_covariance(b),
            _ => Err(Error::MismatchedSampleSpace(
                "ensemble paired with polynomial chaos".into(),
            )),
        }
    }

    pub fn total_variance(&self) -> Result<f64> {
        Ok(self.covariance()?.trace())
    }

    pub fn summary(&self) -> Result<MomentSummary> {
        MomentSummary::new(self.mean(), self.covariance()?)
    }

    pub fn as_ensemble(&self) -> Option<&EnsembleRV> {
        match self {
            Rv::Ensemble(e) => Some(e),
            Rv::Pce(_) => None,
        }
    }

    pub fn as_pce(&self) -> Option<&PceRV> {
        match self {
            Rv::Pce(p) => Some(p),
            Rv::Ensemble(_) => None,
        }
    }

    pub fn check_same_space(&self, other: &Rv) -> Result<()> {
        match (self, other) {
            (Rv::Ensemble(a), Rv::Ensemble(b)) => a.check_same_space(b),
            (Rv::Pce(a), Rv::Pce(b)) => a.check_same_space(b),
            _ => Err(Error::MismatchedSampleSpace(
                "ensemble paired with polynomial chaos".into(),
            )),
        }
    }

    /// `transform · self + shift`, realization-wise (ensembles) or
    /// coefficient-wise (PCE, where the shift lands on the mean term).
    pub fn affine(&self, transform: &DMatrix<f64>, shift: &DVector<f64>) -> Result<Rv> {
        if transform.ncols() != self.dim() || transform.nrows() != shift.len() {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} transform, shift {}, variable dim {}",
                transform.nrows(),
                transform.ncols(),
                shift.len(),
                self.dim()
            )));
        }
        match self {
            Rv::Ensemble(e) => {
                let mut s = e.samples() * transform.transpose();
                for mut row in s.row_iter_mut() {
                    row += shift.transpose();
                }
                Ok(Rv::Ensemble(e.with_samples(s)?))
            }
            Rv::Pce(p) => {
                let mut c = p.coeffs() * transform.transpose();
                let z = p.zero_position();
                let mut row = c.row_mut(z);
                row += shift.transpose();
                Ok(Rv::Pce(p.with_coeffs(c)?))
            }
        }
    }

    /// `self + gain · other + shift` on a shared sample space.
    pub fn add_mapped(&self, other: &Rv, gain: &DMatrix<f64>, shift: &DVector<f64>) -> Result<Rv> {
        self.check_same_space(other)?;
        if gain.nrows() != self.dim() || gain.ncols() != other.dim() || shift.len() != self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} gain for {} <- {}",
                gain.nrows(),
                gain.ncols(),
                self.dim(),
                other.dim()
            )));
        }
        match (self, other) {
            (Rv::Ensemble(a), Rv::Ensemble(b)) => {
                let mut s = a.samples() + b.samples() * gain.transpose();
                for mut row in s.row_iter_mut() {
                    row += shift.transpose();
                }
                Ok(Rv::Ensemble(a.with_samples(s)?))
            }
            (Rv::Pce(a), Rv::Pce(b)) => {
                let mut c = a.coeffs() + b.coeffs() * gain.transpose();
                let mut row = c.row_mut(a.zero_position());
                row += shift.transpose();
                Ok(Rv::Pce(a.with_coeffs(c)?))
            }
            _ => unreachable!("checked above"),
        }
    }

    /// The pair `(self, other)` as two discrete measures on the same points:
    /// the ensembles themselves, or PCE values at the grid nodes.
    pub fn joint_points(&self, other: &Rv, grid: Option<&QuadratureGrid>) -> Result<(EnsembleRV, EnsembleRV)> {
        self.check_same_space(other)?;
        match (self, other) {
            (Rv::Ensemble(a), Rv::Ensemble(b)) => Ok((a.clone(), b.clone())),
            (Rv::Pce(a), Rv::Pce(b)) => {
                let grid = grid.ok_or(Error::MissingGrid)?;
                Ok((a.discretize(grid)?, b.discretize(grid)?))
            }
            _ => unreachable!("checked above"),
        }
    }

    /// Rebuilds a variable on this variable's sample space from values at the
    /// points returned by [`Rv::joint_points`]. For PCE the values are projected
    /// back onto the index set; the returned number is the squared L² norm lost
    /// to that truncation (zero for ensembles).
    pub fn rebuild(&self, values: DMatrix<f64>, grid: Option<&QuadratureGrid>) -> Result<(Rv, f64)> {
        match self {
            Rv::Ensemble(e) => Ok((Rv::Ensemble(e.with_samples(values)?), 0.0)),
            Rv::Pce(p) => {
                let grid = grid.ok_or(Error::MissingGrid)?;
                let projected = project_indices(&values, grid, p.index_set(), p.germ())?;
                let energy: f64 = (0..values.nrows())
                    .map(|q| grid.weights[q] * values.row(q).norm_squared())
                    .sum();
                let kept: f64 = projected.coeffs().iter().map(|c| c * c).sum();
                Ok((Rv::Pce(projected), (energy - kept).max(0.0)))
            }
        }
    }

    /// Quantiles of one component; PCE variables are sampled first.
    pub fn quantiles(&self, component: usize, levels: &[f64], sampling: PceSampling) -> Result<Vec<f64>> {
        let column = self.component_samples(component, sampling)?;
        quantiles_of(&column.0, levels)
    }

    /// Kernel density estimate of one component; PCE variables are sampled first.
    pub fn kde_pdf(
        &self,
        component: usize,
        grid: &[f64],
        bandwidth: Bandwidth,
        sampling: PceSampling,
    ) -> Result<Vec<f64>> {
        let (values, weights) = self.component_samples(component, sampling)?;
        kde_of(&values, &weights, grid, bandwidth)
    }

    fn component_samples(&self, component: usize, sampling: PceSampling) -> Result<(Vec<f64>, Vec<f64>)> {
        if component >= self.dim() {
            return Err(Error::DimensionMismatch {
                what: "component",
                expected: self.dim(),
                found: component,
            });
        }
        let ens = match self {
            Rv::Ensemble(e) => e.clone(),
            Rv::Pce(p) => p.sample(sampling.count, sampling.seed)?,
        };
        Ok((
            ens.samples().column(component).iter().copied().collect(),
            ens.weights().iter().copied().collect(),
        ))
    }
}

/// Mean, covariance and total variance of a random vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub total_variance: f64,
}

impl MomentSummary {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        if covariance.nrows() != mean.len() || covariance.ncols() != mean.len() {
            return Err(Error::ShapeMismatch("covariance does not match mean".into()));
        }
        let covariance = crate::linalg::symmetrize(&covariance);
        Ok(Self {
            mean: mean.iter().copied().collect(),
            total_variance: covariance.trace(),
            covariance: covariance.row_iter().map(|r| r.iter().copied().collect()).collect(),
        })
    }

    pub fn mean_vector(&self) -> DVector<f64> {
        DVector::from_vec(self.mean.clone())
    }

    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let d = self.mean.len();
        DMatrix::from_fn(d, d, |i, j| self.covariance[i][j])
    }

    pub fn variances(&self) -> Vec<f64> {
        (0..self.mean.len()).map(|i| self.covariance[i][i]).collect()
    }
}
