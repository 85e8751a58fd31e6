use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rv::{GermFamily, GermSpec};

/// Tensor-product Gauss rule with weights normalized to a probability measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    pub level: usize,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl QuadratureGrid {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.nodes.first().map_or(0, Vec::len)
    }
}

/// One-dimensional `level`-point Gauss rule for `family`, nodes ascending.
///
/// Nodes are the eigenvalues of the Jacobi matrix of the orthonormal family;
/// weights come from the Christoffel function `1 / Σ_k ψ_k(x)²`, which keeps
/// full relative accuracy for the small tail weights.
pub fn gauss_rule(family: GermFamily, level: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if level == 0 {
        return Err(Error::InvalidArgument("quadrature level must be >= 1".into()));
    }
    let mut jacobi = DMatrix::zeros(level, level);
    for k in 1..level {
        let b = family.recurrence_coeff(k);
        jacobi[(k, k - 1)] = b;
        jacobi[(k - 1, k)] = b;
    }
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.total_cmp(b));
    // Both families are symmetric about zero.
    for i in 0..level / 2 {
        let j = level - 1 - i;
        let m = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -m;
        nodes[j] = m;
    }
    if level % 2 == 1 {
        nodes[level / 2] = 0.0;
    }
    let mut weights: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            let s: f64 = family.eval_all(level - 1, x).iter().map(|v| v * v).sum();
            if s.is_finite() {
                1.0 / s
            } else {
                0.0
            }
        })
        .collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok((nodes, weights))
}

/// Full tensor grid of `level`-point rules, the last germ variable varying fastest.
pub fn gauss_grid(germ: &GermSpec, level: usize) -> Result<QuadratureGrid> {
    let rules = germ
        .families()
        .iter()
        .map(|&f| gauss_rule(f, level))
        .collect::<Result<Vec<_>>>()?;
    let mut nodes: Vec<Vec<f64>> = vec![Vec::new()];
    let mut weights = vec![1.0];
    for (xs, ws) in &rules {
        let mut next_nodes = Vec::with_capacity(nodes.len() * xs.len());
        let mut next_weights = Vec::with_capacity(nodes.len() * xs.len());
        for (node, w) in nodes.iter().zip(&weights) {
            for (x, wx) in xs.iter().zip(ws) {
                let mut n = node.clone();
                n.push(*x);
                next_nodes.push(n);
                next_weights.push(w * wx);
            }
        }
        nodes = next_nodes;
        weights = next_weights;
    }
    Ok(QuadratureGrid { level, nodes, weights })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// E[ξ^k] for ξ ~ N(0,1): (k-1)!! for even k.
    fn gaussian_moment(k: u32) -> f64 {
        if k % 2 == 1 {
            return 0.0;
        }
        (1..k).step_by(2).map(f64::from).product()
    }

    /// E[ξ^k] for ξ ~ U(-1,1).
    fn uniform_moment(k: u32) -> f64 {
        if k % 2 == 1 {
            0.0
        } else {
            1.0 / f64::from(k + 1)
        }
    }

    #[test]
    fn hermite_two_and_three_points() {
        let (x, w) = gauss_rule(GermFamily::Gaussian, 2).unwrap();
        assert!((x[0] + 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
        assert!((w[0] - 0.5).abs() < 1e-14 && (w[1] - 0.5).abs() < 1e-14);

        let (x, w) = gauss_rule(GermFamily::Gaussian, 3).unwrap();
        let r3 = 3f64.sqrt();
        assert!((x[0] + r3).abs() < 1e-14 && x[1] == 0.0 && (x[2] - r3).abs() < 1e-14);
        assert!((w[0] - 1.0 / 6.0).abs() < 1e-14);
        assert!((w[1] - 2.0 / 3.0).abs() < 1e-14);
        assert!((w[2] - 1.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn rules_integrate_polynomials_exactly() {
        for level in 1..=12 {
            for (family, moment) in [
                (GermFamily::Gaussian, gaussian_moment as fn(u32) -> f64),
                (GermFamily::Uniform, uniform_moment),
            ] {
                let (x, w) = gauss_rule(family, level).unwrap();
                for k in 0..(2 * level as u32) {
                    let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
                    let scale: f64 = x.iter().zip(&w).map(|(x, w)| w * x.abs().powi(k as i32)).sum();
                    let exact = moment(k);
                    assert!(
                        (q - exact).abs() <= 1e-12 * scale.max(1.0),
                        "{family} level {level} k {k}: {q} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn large_rule_is_normalized() {
        let (x, w) = gauss_rule(GermFamily::Gaussian, 200).unwrap();
        assert!(w.iter().all(|w| *w >= 0.0));
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let var: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        assert!((var - 1.0).abs() < 1e-10);
    }

    #[test]
    fn tensor_grid_size_and_weights() {
        let germ = GermSpec::new(vec![GermFamily::Gaussian, GermFamily::Uniform, GermFamily::Gaussian]).unwrap();
        let g = gauss_grid(&germ, 3).unwrap();
        assert_eq!(g.len(), 27);
        assert_eq!(g.dim(), 3);
        assert!((g.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
