//! Polynomial chaos bases: multi-index sets, orthonormal polynomials in the
//! germ, Gauss grids and non-intrusive projection.

mod multi_index;
mod quadrature;

pub use multi_index::{binomial, MultiIndex, MultiIndexSet};
pub use quadrature::{gauss_grid, gauss_rule, QuadratureGrid};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::CompensatedSum;
use crate::rv::{GermSpec, PceRV};

/// `ψ_α(ξ) = ∏_i ψ_{α_i}(ξ_i)` with each factor orthonormal for its germ family.
pub fn eval_basis(alpha: &MultiIndex, xi: &[f64], germ: &GermSpec) -> Result<f64> {
    if alpha.len() != germ.dim() {
        return Err(Error::DimensionMismatch {
            what: "multi-index",
            expected: germ.dim(),
            found: alpha.len(),
        });
    }
    if xi.len() != germ.dim() {
        return Err(Error::DimensionMismatch {
            what: "germ point",
            expected: germ.dim(),
            found: xi.len(),
        });
    }
    Ok(alpha
        .0
        .iter()
        .zip(xi)
        .zip(germ.families())
        .map(|((&a, &x), f)| f.eval(a as usize, x))
        .product())
}

/// Values of every basis function in `indices` at one germ point.
pub fn eval_basis_all(indices: &[MultiIndex], xi: &[f64], germ: &GermSpec) -> Vec<f64> {
    let max_deg = indices.iter().flat_map(|a| a.0.iter().copied()).max().unwrap_or(0) as usize;
    let tables: Vec<Vec<f64>> = germ
        .families()
        .iter()
        .zip(xi)
        .map(|(f, &x)| f.eval_all(max_deg, x))
        .collect();
    indices
        .iter()
        .map(|alpha| {
            alpha
                .0
                .iter()
                .enumerate()
                .map(|(i, &a)| tables[i][a as usize])
                .product()
        })
        .collect()
}

/// Pseudo-spectral projection `c_α = Σ_q w_q f(ξ_q) ψ_α(ξ_q)`.
///
/// `values` holds one row per grid node. The grid must integrate degree-2p
/// products exactly for the coefficients to be exact; that is on the caller.
pub fn project(values: &DMatrix<f64>, grid: &QuadratureGrid, basis: &MultiIndexSet, germ: &GermSpec) -> Result<PceRV> {
    project_indices(values, grid, basis.indices(), germ)
}

/// [`project`] onto an arbitrary list of multi-indices.
pub fn project_indices(
    values: &DMatrix<f64>,
    grid: &QuadratureGrid,
    indices: &[MultiIndex],
    germ: &GermSpec,
) -> Result<PceRV> {
    if values.nrows() != grid.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} value rows for {} grid nodes",
            values.nrows(),
            grid.len()
        )));
    }
    if grid.dim() != germ.dim() {
        return Err(Error::ShapeMismatch(format!(
            "grid dim {}, germ dim {}",
            grid.dim(),
            germ.dim()
        )));
    }
    let d = values.ncols();
    let m = indices.len();
    let mut acc = vec![CompensatedSum::default(); m * d];
    for (q, (node, &w)) in grid.nodes.iter().zip(&grid.weights).enumerate() {
        let psi = eval_basis_all(indices, node, germ);
        for (a, p) in psi.iter().enumerate() {
            let wp = w * p;
            for j in 0..d {
                acc[a * d + j].add(wp * values[(q, j)]);
            }
        }
    }
    let coeffs = DMatrix::from_fn(m, d, |a, j| acc[a * d + j].value());
    PceRV::new(germ.clone(), indices.to_vec(), coeffs)
}

/// Least-squares fit of PCE coefficients to sampled germ points, for germ
/// dimensions where tensor grids are too large.
pub fn project_regression(
    xi: &DMatrix<f64>,
    values: &DMatrix<f64>,
    basis: &MultiIndexSet,
    germ: &GermSpec,
) -> Result<PceRV> {
    if xi.nrows() != values.nrows() || xi.ncols() != germ.dim() || basis.dim() != germ.dim() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} germ samples, {} value rows, germ dim {}",
            xi.nrows(),
            xi.ncols(),
            values.nrows(),
            germ.dim()
        )));
    }
    if xi.nrows() < basis.len() {
        return Err(Error::InvalidArgument(format!(
            "{} samples cannot determine {} coefficients",
            xi.nrows(),
            basis.len()
        )));
    }
    let mut design = DMatrix::zeros(xi.nrows(), basis.len());
    for r in 0..xi.nrows() {
        let point: Vec<f64> = xi.row(r).iter().copied().collect();
        let psi = eval_basis_all(basis.indices(), &point, germ);
        for (c, p) in psi.into_iter().enumerate() {
            design[(r, c)] = p;
        }
    }
    let coeffs = design
        .svd(true, true)
        .solve(values, 1e-12)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    PceRV::new(germ.clone(), basis.indices().to_vec(), coeffs)
}
