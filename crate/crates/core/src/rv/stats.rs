use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Empirical quantiles with linear interpolation between order statistics:
/// the k-th of N sorted values (1-based) sits at probability (k-1)/(N-1).
pub fn quantiles_of(values: &[f64], levels: &[f64]) -> Result<Vec<f64>> {
    if let Some(&bad) = levels.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
        return Err(Error::BadLevel(bad));
    }
    if values.is_empty() {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Ok(levels
        .iter()
        .map(|&p| {
            if n == 1 {
                return sorted[0];
            }
            let h = p * (n - 1) as f64;
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            let frac = h - lo as f64;
            sorted[lo] + frac * (sorted[hi] - sorted[lo])
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    Fixed(f64),
    /// Silverman's rule `1.06 σ̂ N^{-1/5}`.
    Auto,
}

pub fn silverman_bandwidth(values: &[f64], weights: &[f64]) -> f64 {
    let mean: f64 = values.iter().zip(weights).map(|(v, w)| v * w).sum();
    let var: f64 = values.iter().zip(weights).map(|(v, w)| w * (v - mean).powi(2)).sum();
    1.06 * var.sqrt() * (values.len() as f64).powf(-0.2)
}

/// Weighted Gaussian kernel density estimate at every grid abscissa.
pub fn kde_of(values: &[f64], weights: &[f64], grid: &[f64], bandwidth: Bandwidth) -> Result<Vec<f64>> {
    let h = match bandwidth {
        Bandwidth::Fixed(h) => h,
        Bandwidth::Auto => silverman_bandwidth(values, weights),
    };
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::BadBandwidth(h));
    }
    let norm = 1.0 / (h * (2.0 * PI).sqrt());
    Ok(grid
        .iter()
        .map(|&x| {
            values
                .iter()
                .zip(weights)
                .map(|(&v, &w)| {
                    let u = (x - v) / h;
                    w * (-0.5 * u * u).exp()
                })
                .sum::<f64>()
                * norm
        })
        .collect())
}
