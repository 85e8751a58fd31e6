//! Conditional expectation as an orthogonal projection.
//!
//! `E[Ψ(x) | y]` is approximated by the map `φ(y) = Σ_α v_α ψ_α(y)` over a
//! finite basis of functions of the observation. The coefficients solve the
//! Galerkin system `G v = r` with Gram matrix `G_αβ = E[ψ_α(y) ψ_β(y)]` and
//! right-hand side `r_α = E[ψ_α(y) Ψ(x)]`, both taken under the native measure
//! of the random variables (ensemble weights or germ quadrature).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::basis::{MultiIndex, MultiIndexSet};
use crate::error::{Error, Result};
use crate::linalg::{self, CompensatedSum, PINV_RCOND};
use crate::rv::EnsembleRV;

/// Monomials `ψ_α(y) = ∏ y_i^{α_i}` of total degree at most `degree`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObsBasis {
    y_dim: usize,
    degree: usize,
    terms: Vec<MultiIndex>,
}

pub fn build_obs_basis(y_dim: usize, degree: usize) -> Result<ObsBasis> {
    if degree == 0 {
        return Err(Error::InvalidArgument("observation basis degree must be >= 1".into()));
    }
    let set = MultiIndexSet::total_degree(y_dim, degree)?;
    Ok(ObsBasis {
        y_dim,
        degree,
        terms: set.into_indices(),
    })
}

impl ObsBasis {
    pub fn y_dim(&self) -> usize {
        self.y_dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn terms(&self) -> &[MultiIndex] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// All monomials at `z`.
    pub fn eval(&self, z: &[f64]) -> Vec<f64> {
        let powers: Vec<Vec<f64>> = z
            .iter()
            .map(|&v| {
                let mut p = Vec::with_capacity(self.degree + 1);
                let mut acc = 1.0;
                for _ in 0..=self.degree {
                    p.push(acc);
                    acc *= v;
                }
                p
            })
            .collect();
        self.terms
            .iter()
            .map(|alpha| {
                alpha
                    .0
                    .iter()
                    .enumerate()
                    .map(|(i, &a)| powers[i][a as usize])
                    .product()
            })
            .collect()
    }
}

/// Componentwise pre-transform `z = (y - shift) / scale` applied before the monomials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineTransform {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl AffineTransform {
    pub fn identity(dim: usize) -> Self {
        Self {
            shift: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    /// Centers and scales each component by its mean and standard deviation
    /// under the ensemble measure; constant components keep unit scale.
    pub fn standardizing(y: &EnsembleRV) -> Self {
        let mean = y.mean();
        let scale = (0..y.dim())
            .map(|j| {
                let mut acc = CompensatedSum::default();
                for i in 0..y.len() {
                    acc.add(y.weights()[i] * (y.samples()[(i, j)] - mean[j]).powi(2));
                }
                let sd = acc.value().max(0.0).sqrt();
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self {
            shift: mean.iter().copied().collect(),
            scale,
        }
    }

    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(&self.shift)
            .zip(&self.scale)
            .map(|((v, s), c)| (v - s) / c)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FitOptions {
    /// Standardize the observation before building monomials.
    pub standardize: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { standardize: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub matrix: DMatrix<f64>,
    /// Ratio of extreme eigenvalue magnitudes; infinite when singular.
    pub condition: f64,
}

impl GramMatrix {
    fn from_matrix(matrix: DMatrix<f64>) -> Self {
        let condition = linalg::pinv_symmetric(&matrix).condition;
        Self { matrix, condition }
    }
}

/// Design matrix `Ψ[i, α] = ψ_α(T(y_i))`.
fn design(basis: &ObsBasis, transform: &AffineTransform, y: &EnsembleRV) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(y.len(), basis.len());
    let mut row = vec![0.0; y.dim()];
    for i in 0..y.len() {
        for (j, r) in row.iter_mut().enumerate() {
            *r = y.samples()[(i, j)];
        }
        let z = transform.apply(&row);
        for (a, v) in basis.eval(&z).into_iter().enumerate() {
            out[(i, a)] = v;
        }
    }
    out
}

/// `E[A_i,a B_i,b]` under the ensemble weights, with compensated sums.
fn weighted_products(weights: &DVector<f64>, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.ncols(), b.ncols(), |p, q| {
        let mut acc = CompensatedSum::default();
        for i in 0..a.nrows() {
            acc.add(weights[i] * a[(i, p)] * b[(i, q)]);
        }
        acc.value()
    })
}

fn check_obs_dim(basis: &ObsBasis, y: &EnsembleRV) -> Result<()> {
    if y.dim() != basis.y_dim {
        return Err(Error::DimensionMismatch {
            what: "observation",
            expected: basis.y_dim,
            found: y.dim(),
        });
    }
    Ok(())
}

/// Gram matrix of the raw monomial basis under the measure of `y`.
pub fn gram(basis: &ObsBasis, y: &EnsembleRV) -> Result<GramMatrix> {
    check_obs_dim(basis, y)?;
    let psi = design(basis, &AffineTransform::identity(basis.y_dim), y);
    Ok(GramMatrix::from_matrix(weighted_products(y.weights(), &psi, &psi)))
}

/// Galerkin-fitted approximation of `E[Ψ(x) | y]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalMap {
    pub basis: ObsBasis,
    pub transform: AffineTransform,
    /// One row per basis term, one column per output component.
    #[serde(with = "matrix_rows")]
    pub coeffs: DMatrix<f64>,
    pub target: String,
    /// The Gram matrix was singular or too ill-conditioned and a pseudo-inverse was used.
    pub regularized: bool,
    pub condition: f64,
}

impl OptimalMap {
    pub fn out_dim(&self) -> usize {
        self.coeffs.ncols()
    }

    pub fn evaluate(&self, y: &[f64]) -> Result<DVector<f64>> {
        if y.len() != self.basis.y_dim {
            return Err(Error::DimensionMismatch {
                what: "observation",
                expected: self.basis.y_dim,
                found: y.len(),
            });
        }
        let psi = DVector::from_vec(self.basis.eval(&self.transform.apply(y)));
        Ok(self.coeffs.transpose() * psi)
    }

    /// `φ(y_i)` for every realization.
    pub fn evaluate_ensemble(&self, y: &EnsembleRV) -> Result<EnsembleRV> {
        check_obs_dim(&self.basis, y)?;
        let psi = design(&self.basis, &self.transform, y);
        y.with_samples(psi * &self.coeffs)
    }

    /// `E[ψ_α(y) (Ψ(x) − φ(y))]` for every term and output component,
    /// together with the scale `‖r‖∞ + 1`.
    pub fn orthogonality_residual(&self, y: &EnsembleRV, psi_x: &EnsembleRV) -> Result<(DMatrix<f64>, f64)> {
        y.check_same_space(psi_x)?;
        check_obs_dim(&self.basis, y)?;
        let psi = design(&self.basis, &self.transform, y);
        let fitted = &psi * &self.coeffs;
        let err = psi_x.samples() - fitted;
        let r = weighted_products(y.weights(), &psi, psi_x.samples());
        let resid = weighted_products(y.weights(), &psi, &err);
        Ok((resid, linalg::max_abs(&r) + 1.0))
    }

    /// Largest Galerkin-orthogonality violation relative to `‖r‖∞ + 1`.
    pub fn orthogonality_defect(&self, y: &EnsembleRV, psi_x: &EnsembleRV) -> Result<f64> {
        let (resid, scale) = self.orthogonality_residual(y, psi_x)?;
        Ok(linalg::max_abs(&resid) / scale)
    }
}

pub fn evaluate_map(map: &OptimalMap, y_value: &[f64]) -> Result<DVector<f64>> {
    map.evaluate(y_value)
}

/// Solves `G v = r` for the coefficients of `φ_Ψ` with standardized monomials.
pub fn galerkin_solve(basis: &ObsBasis, y: &EnsembleRV, psi_x: &EnsembleRV) -> Result<OptimalMap> {
    galerkin_solve_with(basis, y, psi_x, FitOptions::default(), "x")
}

pub fn galerkin_solve_with(
    basis: &ObsBasis,
    y: &EnsembleRV,
    psi_x: &EnsembleRV,
    options: FitOptions,
    target: &str,
) -> Result<OptimalMap> {
    y.check_same_space(psi_x)?;
    check_obs_dim(basis, y)?;
    let transform = if options.standardize {
        AffineTransform::standardizing(y)
    } else {
        AffineTransform::identity(basis.y_dim)
    };
    let psi = design(basis, &transform, y);
    let g = weighted_products(y.weights(), &psi, &psi);
    let r = weighted_products(y.weights(), &psi, psi_x.samples());

    let eig = SymmetricEigen::new(linalg::symmetrize(&g));
    let max_abs = eig.eigenvalues.iter().fold(0.0_f64, |a, &l| a.max(l.abs()));
    let min_eig = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let cutoff = max_abs * PINV_RCOND;
    let condition = if min_eig > 0.0 {
        max_abs / min_eig
    } else {
        f64::INFINITY
    };

    let solved = if min_eig > cutoff {
        linalg::symmetrize(&g).cholesky().map(|c| c.solve(&r))
    } else {
        None
    };
    let (coeffs, regularized) = match solved {
        Some(v) => (v, false),
        None => (linalg::pinv_symmetric(&g).inverse * &r, true),
    };
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFiniteState);
    }
    Ok(OptimalMap {
        basis: basis.clone(),
        transform,
        coeffs,
        target: target.to_string(),
        regularized,
        condition,
    })
}

/// `E‖Ψ(x) − φ(y)‖²` under the shared measure.
pub fn mmse_residual(map: &OptimalMap, psi_x: &EnsembleRV, y: &EnsembleRV) -> Result<f64> {
    y.check_same_space(psi_x)?;
    if psi_x.dim() != map.out_dim() {
        return Err(Error::DimensionMismatch {
            what: "map output",
            expected: map.out_dim(),
            found: psi_x.dim(),
        });
    }
    let fitted = map.evaluate_ensemble(y)?;
    let mut acc = CompensatedSum::default();
    for i in 0..y.len() {
        let d = (psi_x.samples().row(i) - fitted.samples().row(i)).norm_squared();
        acc.add(y.weights()[i] * d);
    }
    Ok(acc.value())
}

mod matrix_rows {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        (m.ncols(), rows).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let (cols, rows): (usize, Vec<Vec<f64>>) = Deserialize::deserialize(d)?;
        if rows.iter().any(|r| r.len() != cols) {
            return Err(serde::de::Error::custom("ragged coefficient rows"));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Ok(DMatrix::from_row_slice(rows.len(), cols, &flat))
    }
}
