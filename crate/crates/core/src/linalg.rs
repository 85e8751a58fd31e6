//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative cutoff below which eigenvalues are treated as zero in pseudo-inverses.
pub const PINV_RCOND: f64 = 1e-12;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.carry += (self.sum - t) + value;
        } else {
            self.carry += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = CompensatedSum::default();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Pseudo-inverse of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymPinv {
    pub inverse: DMatrix<f64>,
    /// True when at least one eigenvalue fell at or below the cutoff.
    pub regularized: bool,
    pub cutoff: f64,
    /// Largest over smallest absolute eigenvalue; infinite when singular.
    pub condition: f64,
}

pub fn pinv_symmetric(m: &DMatrix<f64>) -> SymPinv {
    let n = m.nrows();
    if n == 0 {
        return SymPinv {
            inverse: DMatrix::zeros(0, 0),
            regularized: false,
            cutoff: 0.0,
            condition: 1.0,
        };
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let max_abs = eig.eigenvalues.iter().fold(0.0_f64, |a, &l| a.max(l.abs()));
    let min_abs = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &l| a.min(l.abs()));
    let cutoff = max_abs * PINV_RCOND;
    let mut regularized = false;
    let inv_vals = DVector::from_iterator(
        n,
        eig.eigenvalues.iter().map(|&l| {
            if l.abs() <= cutoff {
                regularized = true;
                0.0
            } else {
                1.0 / l
            }
        }),
    );
    let v = &eig.eigenvectors;
    let inverse = symmetrize(&(v * DMatrix::from_diagonal(&inv_vals) * v.transpose()));
    let condition = if min_abs > 0.0 {
        max_abs / min_abs
    } else {
        f64::INFINITY
    };
    SymPinv {
        inverse,
        regularized,
        cutoff,
        condition,
    }
}

/// Symmetric square root factor `S` with `S Sᵀ = m`, negative eigenvalues clipped to zero.
/// Columns belonging to zero eigenvalues are dropped, so the factor may be narrow.
pub fn psd_factor(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let max_abs = eig.eigenvalues.iter().fold(0.0_f64, |a, &l| a.max(l.abs()));
    let keep: Vec<usize> = (0..n)
        .filter(|&i| eig.eigenvalues[i] > max_abs * PINV_RCOND && eig.eigenvalues[i] > 0.0)
        .collect();
    let mut factor = DMatrix::zeros(n, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        let s = eig.eigenvalues[i].sqrt();
        factor.set_column(c, &(eig.eigenvectors.column(i) * s));
    }
    factor
}

/// Lower Cholesky factor, or `NotSpd` carrying the smallest eigenvalue.
pub fn cholesky_lower(m: &DMatrix<f64>, what: &'static str) -> Result<DMatrix<f64>> {
    let sym = symmetrize(m);
    match sym.clone().cholesky() {
        Some(c) => Ok(c.l()),
        None => Err(Error::NotSpd {
            what,
            min_eigenvalue: min_eigenvalue(&sym),
        }),
    }
}

/// Square `L` with `L Lᵀ = m`: the Cholesky factor when `m` is positive
/// definite, otherwise the eigen factor of [`psd_factor`] padded with zero columns.
pub fn square_factor(m: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(c) = symmetrize(m).cholesky() {
        return c.l();
    }
    let narrow = psd_factor(m);
    let mut f = DMatrix::zeros(m.nrows(), m.nrows());
    f.columns_mut(0, narrow.ncols()).copy_from(&narrow);
    f
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |a, &v| a.max(v.abs()))
}

pub fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = max_abs(a).max(max_abs(b)).max(f64::MIN_POSITIVE);
    max_abs(&(a - b)) / scale
}
