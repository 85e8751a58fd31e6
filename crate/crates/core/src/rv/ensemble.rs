use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::CompensatedSum;

/// Random vector represented by `N` weighted realizations (rows) of dimension `d`.
///
/// A uniformly weighted ensemble is a Monte Carlo sample; a weighted one can
/// also stand for a quadrature rule over a germ.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleRV {
    samples: DMatrix<f64>,
    weights: DVector<f64>,
    uniform: bool,
}

const WEIGHT_SUM_TOL: f64 = 1e-12;

impl EnsembleRV {
    pub fn new(samples: DMatrix<f64>, weights: DVector<f64>) -> Result<Self> {
        let n = samples.nrows();
        if n == 0 {
            return Err(Error::InvalidRv("ensemble needs at least one sample".into()));
        }
        if weights.len() != n {
            return Err(Error::DimensionMismatch {
                what: "ensemble weights",
                expected: n,
                found: weights.len(),
            });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidRv("weights must be finite and nonnegative".into()));
        }
        let total = crate::linalg::compensated_sum(weights.iter().copied());
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidRv(format!("weights sum to {total}, not 1")));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidRv("samples must be finite".into()));
        }
        let uniform = weights.iter().all(|&w| w == weights[0]);
        Ok(Self {
            samples,
            weights,
            uniform,
        })
    }

    pub fn uniform(samples: DMatrix<f64>) -> Result<Self> {
        let n = samples.nrows();
        if n == 0 {
            return Err(Error::InvalidRv("ensemble needs at least one sample".into()));
        }
        Self::new(samples, DVector::from_element(n, 1.0 / n as f64))
    }

    /// Uniformly weighted scalar ensemble.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::uniform(DMatrix::from_column_slice(values.len(), 1, values))
    }

    pub fn len(&self) -> usize {
        self.samples.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.samples.ncols()
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    pub fn sample(&self, i: usize) -> DVector<f64> {
        self.samples.row(i).transpose()
    }

    /// Another ensemble on the same realizations and weights.
    pub fn with_samples(&self, samples: DMatrix<f64>) -> Result<Self> {
        if samples.nrows() != self.len() {
            return Err(Error::DimensionMismatch {
                what: "ensemble rows",
                expected: self.len(),
                found: samples.nrows(),
            });
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState);
        }
        Ok(Self {
            samples,
            weights: self.weights.clone(),
            uniform: self.uniform,
        })
    }

    /// Applies `f` to every realization.
    pub fn map_rows<F>(&self, out_dim: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, DVector<f64>) -> DVector<f64>,
    {
        let mut out = DMatrix::zeros(self.len(), out_dim);
        for i in 0..self.len() {
            let v = f(i, self.sample(i));
            if v.len() != out_dim {
                return Err(Error::DimensionMismatch {
                    what: "mapped sample",
                    expected: out_dim,
                    found: v.len(),
                });
            }
            out.set_row(i, &v.transpose());
        }
        self.with_samples(out)
    }

    pub fn same_space(&self, other: &EnsembleRV) -> bool {
        self.len() == other.len() && self.weights == other.weights
    }

    pub(crate) fn check_same_space(&self, other: &EnsembleRV) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::MismatchedSampleSpace(format!(
                "{} vs {} samples",
                self.len(),
                other.len()
            )));
        }
        if self.weights != other.weights {
            return Err(Error::MismatchedSampleSpace("weights differ".into()));
        }
        Ok(())
    }

    /// Expectation of each column under the ensemble measure.
    pub fn mean(&self) -> DVector<f64> {
        let n = self.len();
        DVector::from_iterator(
            self.dim(),
            (0..self.dim()).map(|j| {
                let mut acc = CompensatedSum::default();
                if self.uniform {
                    for i in 0..n {
                        acc.add(self.samples[(i, j)]);
                    }
                    acc.value() / n as f64
                } else {
                    for i in 0..n {
                        acc.add(self.weights[i] * self.samples[(i, j)]);
                    }
                    acc.value()
                }
            }),
        )
    }

    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        self.cross_covariance(self)
    }

    /// Unbiased (cross-)covariance: divisor `N-1` for uniform weights, and
    /// `1 - Σw²` normalization for general weights.
    pub fn cross_covariance(&self, other: &EnsembleRV) -> Result<DMatrix<f64>> {
        self.check_same_space(other)?;
        let n = self.len();
        let norm = if self.uniform {
            (n as f64 - 1.0) / n as f64
        } else {
            1.0 - self.weights.iter().map(|w| w * w).sum::<f64>()
        };
        if n < 2 || norm <= 0.0 {
            return Err(Error::InvalidRv(
                "covariance needs at least two samples with positive weight".into(),
            ));
        }
        let mx = self.mean();
        let my = other.mean();
        let (dx, dy) = (self.dim(), other.dim());
        let mut out = DMatrix::zeros(dx, dy);
        for a in 0..dx {
            for b in 0..dy {
                let mut acc = CompensatedSum::default();
                for i in 0..n {
                    let w = if self.uniform { 1.0 } else { self.weights[i] };
                    acc.add(w * (self.samples[(i, a)] - mx[a]) * (other.samples[(i, b)] - my[b]));
                }
                out[(a, b)] = if self.uniform {
                    acc.value() / (n as f64 - 1.0)
                } else {
                    acc.value() / norm
                };
            }
        }
        Ok(out)
    }

    pub fn total_variance(&self) -> Result<f64> {
        Ok(self.covariance()?.trace())
    }

    /// Writes `w,x0,…,x{d-1}` CSV with a header row.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let header: Vec<String> = std::iter::once("w".to_string())
            .chain((0..self.dim()).map(|j| format!("x{j}")))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for i in 0..self.len() {
            let mut fields = vec![format!("{:.17e}", self.weights[i])];
            fields.extend((0..self.dim()).map(|j| format!("{:.17e}", self.samples[(i, j)])));
            writeln!(out, "{}", fields.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty ensemble file".into()))?
            .map_err(|e| Error::Parse(e.to_string()))?;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.first() != Some(&"w") || cols.iter().skip(1).enumerate().any(|(j, c)| *c != format!("x{j}")) {
            return Err(Error::Parse(format!("bad ensemble header `{header}`")));
        }
        let d = cols.len() - 1;
        let mut weights = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::Parse(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<f64> = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))?;
            if fields.len() != d + 1 {
                return Err(Error::Parse(format!("line {}: expected {} fields", lineno + 2, d + 1)));
            }
            weights.push(fields[0]);
            values.extend_from_slice(&fields[1..]);
        }
        let n = weights.len();
        Self::new(DMatrix::from_row_slice(n, d, &values), DVector::from_vec(weights))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn scalar_moments() {
        let e = EnsembleRV::from_scalars(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(e.mean()[0], 2.0);
        let single = EnsembleRV::new(DMatrix::from_element(1, 1, 0.0), DVector::from_element(1, 1.0)).unwrap();
        assert_eq!(single.mean()[0], 0.0);
        assert!(single.covariance().is_err());
        let two = EnsembleRV::from_scalars(&[0.0, 2.0]).unwrap();
        assert_eq!(two.covariance().unwrap()[(0, 0)], 2.0);
        let same = EnsembleRV::from_scalars(&[4.0, 4.0]).unwrap();
        assert_eq!(same.total_variance().unwrap(), 0.0);
    }

    #[test]
    fn two_point_cross_covariance() {
        let x = EnsembleRV::from_scalars(&[0.0, 1.0]).unwrap();
        let y = EnsembleRV::from_scalars(&[0.0, 2.0]).unwrap();
        assert_eq!(x.cross_covariance(&y).unwrap()[(0, 0)], 1.0);
        let z = EnsembleRV::from_scalars(&[0.0, 2.0, 4.0]).unwrap();
        assert!(matches!(x.cross_covariance(&z), Err(Error::MismatchedSampleSpace(_))));
    }

    #[test]
    fn diagonal_total_variance() {
        // columns with variances 1 and 3, uncorrelated
        let s = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, -1.0, 0.0, 0.0, 6f64.sqrt(), 0.0, -(6f64.sqrt())]);
        let e = EnsembleRV::uniform(s).unwrap();
        let c = e.covariance().unwrap();
        assert!((c[(0, 0)] - 2.0 / 3.0).abs() < 1e-15);
        assert!((c[(1, 1)] - 4.0).abs() < 1e-14);
        assert!((e.total_variance().unwrap() - c.trace()).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_weights() {
        let s = DMatrix::from_element(2, 1, 1.0);
        assert!(EnsembleRV::new(s.clone(), DVector::from_vec(vec![0.5, 0.6])).is_err());
        assert!(EnsembleRV::new(s.clone(), DVector::from_vec(vec![1.5, -0.5])).is_err());
        assert!(EnsembleRV::new(DMatrix::from_element(2, 1, f64::NAN), DVector::from_vec(vec![0.5, 0.5])).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let s = DMatrix::from_row_slice(3, 2, &[0.1, 1.0 / 3.0, -2.5, 1e-300, 7.0, 8.0]);
        let e = EnsembleRV::new(s, DVector::from_vec(vec![0.25, 0.25, 0.5])).unwrap();
        let mut buf = Vec::new();
        e.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("w,x0,x1\n"));
        let back = EnsembleRV::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, e);
    }

    fn arb_ensemble() -> impl Strategy<Value = EnsembleRV> {
        (2usize..30, 1usize..4).prop_flat_map(|(n, d)| {
            proptest::collection::vec(-10.0f64..10.0, n * d)
                .prop_map(move |v| EnsembleRV::uniform(DMatrix::from_row_slice(n, d, &v)).unwrap())
        })
    }

    proptest! {
        #[test]
        fn covariance_is_symmetric_psd(e in arb_ensemble()) {
            let c = e.covariance().unwrap();
            prop_assert_eq!(&c, &c.transpose());
            let min = crate::linalg::min_eigenvalue(&c);
            prop_assert!(min >= -1e-10 * c.trace().max(1e-300));
            prop_assert_eq!(e.cross_covariance(&e).unwrap(), c.clone());
            prop_assert!((e.total_variance().unwrap() - c.trace()).abs() <= 1e-15 * c.trace().abs());
        }

        #[test]
        fn affine_maps_transform_moments(e in arb_ensemble(), a in proptest::collection::vec(-2.0f64..2.0, 9), b in proptest::collection::vec(-5.0f64..5.0, 3)) {
            let d = e.dim();
            let am = DMatrix::from_fn(2, d, |i, j| a[i * 3 + j]);
            let bv = DVector::from_fn(2, |i, _| b[i]);
            let y = e.map_rows(2, |_, x| &am * x + &bv).unwrap();
            let mean_err = (y.mean() - (&am * e.mean() + &bv)).abs().max();
            let cov_expected = &am * e.covariance().unwrap() * am.transpose();
            let cov_err = crate::linalg::rel_diff(&y.covariance().unwrap(), &cov_expected);
            let scale = e.samples().abs().max().max(1.0) * am.abs().max().max(1.0) + bv.abs().max();
            prop_assert!(mean_err <= 1e-12 * scale);
            if cov_expected.abs().max() > 1e-6 {
                prop_assert!(cov_err <= 1e-10, "cov rel err {}", cov_err);
            }
        }
    }
}
