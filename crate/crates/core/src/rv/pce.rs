use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EnsembleRV, GermSpec};
use crate::basis::{eval_basis_all, MultiIndex, QuadratureGrid};
use crate::error::{Error, Result};
use crate::seed::{Seeder, PCE_SAMPLING};

/// Random vector `v(ξ) = Σ_α v_α ψ_α(ξ)` over an orthonormal polynomial basis in
/// the germ `ξ`. Row `α` of `coeffs` holds the vector coefficient `v_α`.
#[derive(Debug, Clone, PartialEq)]
pub struct PceRV {
    germ: GermSpec,
    index_set: Vec<MultiIndex>,
    coeffs: DMatrix<f64>,
    zero_pos: usize,
}

impl PceRV {
    pub fn new(germ: GermSpec, index_set: Vec<MultiIndex>, coeffs: DMatrix<f64>) -> Result<Self> {
        if coeffs.nrows() != index_set.len() {
            return Err(Error::DimensionMismatch {
                what: "coefficient rows",
                expected: index_set.len(),
                found: coeffs.nrows(),
            });
        }
        if let Some(bad) = index_set.iter().find(|a| a.len() != germ.dim()) {
            return Err(Error::InvalidRv(format!(
                "multi-index {bad} does not match germ dimension {}",
                germ.dim()
            )));
        }
        let unique: HashSet<&MultiIndex> = index_set.iter().collect();
        if unique.len() != index_set.len() {
            return Err(Error::InvalidRv("duplicate multi-indices".into()));
        }
        let zero_pos = index_set
            .iter()
            .position(MultiIndex::is_zero)
            .ok_or_else(|| Error::InvalidRv("index set lacks the zero multi-index".into()))?;
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidRv("coefficients must be finite".into()));
        }
        Ok(Self {
            germ,
            index_set,
            coeffs,
            zero_pos,
        })
    }

    /// Degree-one Gaussian expansion `mean + factor · ξ` with `dim(ξ) = factor.ncols()`.
    pub fn gaussian(mean: &DVector<f64>, factor: &DMatrix<f64>, degree: usize) -> Result<Self> {
        let n = factor.ncols();
        if factor.nrows() != mean.len() {
            return Err(Error::DimensionMismatch {
                what: "gaussian factor rows",
                expected: mean.len(),
                found: factor.nrows(),
            });
        }
        let set = crate::basis::MultiIndexSet::total_degree(n, degree.max(1))?;
        let mut coeffs = DMatrix::zeros(set.len(), mean.len());
        coeffs.set_row(0, &mean.transpose());
        for k in 0..n {
            coeffs.set_row(1 + k, &factor.column(k).transpose());
        }
        Self::new(GermSpec::gaussian(n)?, set.into_indices(), coeffs)
    }

    pub fn germ(&self) -> &GermSpec {
        &self.germ
    }

    pub fn index_set(&self) -> &[MultiIndex] {
        &self.index_set
    }

    pub fn coeffs(&self) -> &DMatrix<f64> {
        &self.coeffs
    }

    pub fn dim(&self) -> usize {
        self.coeffs.ncols()
    }

    pub fn zero_position(&self) -> usize {
        self.zero_pos
    }

    pub fn max_degree(&self) -> u32 {
        self.index_set.iter().map(MultiIndex::degree).max().unwrap_or(0)
    }

    /// Same germ and index set, new coefficients.
    pub fn with_coeffs(&self, coeffs: DMatrix<f64>) -> Result<Self> {
        Self::new(self.germ.clone(), self.index_set.clone(), coeffs)
    }

    pub fn same_space(&self, other: &PceRV) -> bool {
        self.germ == other.germ && self.index_set == other.index_set
    }

    pub(crate) fn check_same_space(&self, other: &PceRV) -> Result<()> {
        if self.germ != other.germ {
            return Err(Error::MismatchedSampleSpace("germs differ".into()));
        }
        if self.index_set != other.index_set {
            return Err(Error::MismatchedSampleSpace("index sets differ".into()));
        }
        Ok(())
    }

    pub fn mean(&self) -> DVector<f64> {
        self.coeffs.row(self.zero_pos).transpose()
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        self.cross_covariance(self).expect("same space")
    }

    /// `Σ_{α≠0} v_α^x (v_α^y)ᵀ`.
    pub fn cross_covariance(&self, other: &PceRV) -> Result<DMatrix<f64>> {
        self.check_same_space(other)?;
        let mut out = DMatrix::zeros(self.dim(), other.dim());
        for a in 0..self.index_set.len() {
            if a == self.zero_pos {
                continue;
            }
            out += self.coeffs.row(a).transpose() * other.coeffs.row(a);
        }
        Ok(out)
    }

    pub fn total_variance(&self) -> f64 {
        self.coeffs
            .row_iter()
            .enumerate()
            .filter(|(a, _)| *a != self.zero_pos)
            .map(|(_, r)| r.norm_squared())
            .sum()
    }

    pub fn evaluate(&self, xi: &[f64]) -> Result<DVector<f64>> {
        if xi.len() != self.germ.dim() {
            return Err(Error::DimensionMismatch {
                what: "germ point",
                expected: self.germ.dim(),
                found: xi.len(),
            });
        }
        let psi = eval_basis_all(&self.index_set, xi, &self.germ);
        Ok(self.coeffs.transpose() * DVector::from_vec(psi))
    }

    /// Values at every grid node, one row per node.
    pub fn values_at(&self, grid: &QuadratureGrid) -> Result<DMatrix<f64>> {
        if grid.dim() != self.germ.dim() {
            return Err(Error::DimensionMismatch {
                what: "grid dimension",
                expected: self.germ.dim(),
                found: grid.dim(),
            });
        }
        let mut out = DMatrix::zeros(grid.len(), self.dim());
        for (q, node) in grid.nodes.iter().enumerate() {
            let v = self.evaluate(node)?;
            out.set_row(q, &v.transpose());
        }
        Ok(out)
    }

    /// The PCE as a discrete measure: values at the nodes, weighted by the rule.
    pub fn discretize(&self, grid: &QuadratureGrid) -> Result<EnsembleRV> {
        EnsembleRV::new(self.values_at(grid)?, DVector::from_vec(grid.weights.clone()))
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<EnsembleRV> {
        if count == 0 {
            return Err(Error::InvalidArgument("sample count must be >= 1".into()));
        }
        let mut out = DMatrix::zeros(count, self.dim());
        for i in 0..count {
            let xi = self.germ.sample(rng);
            out.set_row(i, &self.evaluate(&xi)?.transpose());
        }
        EnsembleRV::uniform(out)
    }

    /// Draws `count` i.i.d. realizations from the `pce.sampling` stream of `seed`.
    pub fn sample(&self, count: usize, seed: u64) -> Result<EnsembleRV> {
        let mut rng = Seeder::new(seed).stream(PCE_SAMPLING, &[]);
        self.sample_with(count, &mut rng)
    }

    /// Re-expresses the expansion over `germ` (which must extend the current
    /// germ by appending variables) on the given index set. Terms not present
    /// in `index_set` must have zero coefficients.
    pub fn embed(&self, germ: &GermSpec, index_set: &[MultiIndex]) -> Result<PceRV> {
        if germ.dim() < self.germ.dim() || germ.families()[..self.germ.dim()] != *self.germ.families() {
            return Err(Error::MismatchedSampleSpace(
                "target germ does not extend this germ".into(),
            ));
        }
        let mut coeffs = DMatrix::zeros(index_set.len(), self.dim());
        for (a, alpha) in self.index_set.iter().enumerate() {
            let ext = alpha.extended(germ.dim());
            match index_set.iter().position(|b| *b == ext) {
                Some(pos) => coeffs.set_row(pos, &self.coeffs.row(a)),
                None if self.coeffs.row(a).iter().all(|c| *c == 0.0) => {}
                None => {
                    return Err(Error::InvalidRv(format!("term {alpha} is not in the target index set")));
                }
            }
        }
        PceRV::new(germ.clone(), index_set.to_vec(), coeffs)
    }
}

#[derive(Serialize, Deserialize)]
struct PceFile {
    germ: GermSpec,
    index_set: Vec<MultiIndex>,
    rows: usize,
    cols: usize,
    /// Row-major coefficient matrix.
    coeffs: Vec<f64>,
}

impl Serialize for PceRV {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let (rows, cols) = self.coeffs.shape();
        let coeffs = (0..rows)
            .flat_map(|r| (0..cols).map(move |c| (r, c)))
            .map(|rc| self.coeffs[rc])
            .collect();
        PceFile {
            germ: self.germ.clone(),
            index_set: self.index_set.clone(),
            rows,
            cols,
            coeffs,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PceRV {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let f = PceFile::deserialize(deserializer)?;
        if f.coeffs.len() != f.rows * f.cols {
            return Err(serde::de::Error::custom("coefficient count does not match shape"));
        }
        PceRV::new(f.germ, f.index_set, DMatrix::from_row_slice(f.rows, f.cols, &f.coeffs))
            .map_err(serde::de::Error::custom)
    }
}
