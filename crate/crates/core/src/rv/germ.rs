use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distribution of one scalar germ variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GermFamily {
    /// Standard normal N(0, 1); probabilists' Hermite polynomials.
    Gaussian,
    /// Uniform on (-1, 1); Legendre polynomials.
    Uniform,
}

impl GermFamily {
    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            GermFamily::Gaussian => StandardNormal.sample(rng),
            GermFamily::Uniform => Uniform::new(-1.0, 1.0).expect("valid uniform range").sample(rng),
        }
    }

    /// Off-diagonal of the Jacobi matrix of the orthonormal family:
    /// `x ψ_k = b_{k+1} ψ_{k+1} + b_k ψ_{k-1}`.
    pub(crate) fn recurrence_coeff(self, k: usize) -> f64 {
        let k = k as f64;
        match self {
            GermFamily::Gaussian => k.sqrt(),
            GermFamily::Uniform => k / (4.0 * k * k - 1.0).sqrt(),
        }
    }

    /// Orthonormal polynomials `ψ_0(x), …, ψ_max_degree(x)`.
    pub fn eval_all(self, max_degree: usize, x: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(max_degree + 1);
        out.push(1.0);
        if max_degree == 0 {
            return out;
        }
        out.push(x / self.recurrence_coeff(1));
        for k in 1..max_degree {
            let next = (x * out[k] - self.recurrence_coeff(k) * out[k - 1]) / self.recurrence_coeff(k + 1);
            out.push(next);
        }
        out
    }

    pub fn eval(self, degree: usize, x: f64) -> f64 {
        self.eval_all(degree, x)[degree]
    }
}

impl fmt::Display for GermFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GermFamily::Gaussian => f.write_str("gaussian"),
            GermFamily::Uniform => f.write_str("uniform"),
        }
    }
}

impl FromStr for GermFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" | "normal" => Ok(GermFamily::Gaussian),
            "uniform" => Ok(GermFamily::Uniform),
            other => Err(Error::UnsupportedFamily(other.to_string())),
        }
    }
}

/// The independent scalar variables a polynomial chaos expansion is built on.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<GermFamily>", into = "Vec<GermFamily>")]
pub struct GermSpec {
    families: Vec<GermFamily>,
}

impl GermSpec {
    pub fn new(families: Vec<GermFamily>) -> Result<Self> {
        if families.is_empty() {
            return Err(Error::InvalidArgument("germ needs at least one variable".into()));
        }
        Ok(Self { families })
    }

    pub fn gaussian(n: usize) -> Result<Self> {
        Self::new(vec![GermFamily::Gaussian; n])
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(vec![GermFamily::Uniform; n])
    }

    pub fn dim(&self) -> usize {
        self.families.len()
    }

    pub fn families(&self) -> &[GermFamily] {
        &self.families
    }

    /// Germ with `other`'s variables appended.
    pub fn concat(&self, other: &GermSpec) -> GermSpec {
        let mut families = self.families.clone();
        families.extend_from_slice(&other.families);
        GermSpec { families }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.families.iter().map(|f| f.sample(rng)).collect()
    }
}

impl TryFrom<Vec<GermFamily>> for GermSpec {
    type Error = Error;

    fn try_from(families: Vec<GermFamily>) -> Result<Self> {
        GermSpec::new(families)
    }
}

impl From<GermSpec> for Vec<GermFamily> {
    fn from(g: GermSpec) -> Self {
        g.families
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_values() {
        let v = GermFamily::Gaussian.eval_all(3, 2.0);
        assert_eq!(v[0], 1.0);
        assert_eq!(v[1], 2.0);
        assert!((v[2] - 3.0 / 2f64.sqrt()).abs() < 1e-15);
        // He_3(2) = 8 - 6 = 2, normalized by sqrt(6)
        assert!((v[3] - 2.0 / 6f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn legendre_values() {
        // sqrt(2k+1) P_k(x)
        let x = 0.3;
        let v = GermFamily::Uniform.eval_all(2, x);
        assert!((v[1] - 3f64.sqrt() * x).abs() < 1e-15);
        assert!((v[2] - 5f64.sqrt() * 0.5 * (3.0 * x * x - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn parse_rejects_unknown_family() {
        assert_eq!(
            "beta".parse::<GermFamily>(),
            Err(Error::UnsupportedFamily("beta".into()))
        );
        assert!(serde_json::from_str::<GermSpec>("[]").is_err());
    }
}
