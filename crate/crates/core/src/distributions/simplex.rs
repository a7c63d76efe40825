use alloc::vec;
use alloc::vec::Vec;
use core::ops::Index;

use crate::error::{invalid, Result};
use crate::numeric::{logsumexp, KahanSum};

/// A probability vector: entries in `[0, 1]` summing to one within `1e-12`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexVector(Vec<f64>);

impl SimplexVector {
    /// Validates an already-normalised vector.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(invalid("simplex vector must be nonempty"));
        }
        if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(invalid("simplex entries must lie in [0, 1]"));
        }
        let mut s = KahanSum::new();
        weights.iter().for_each(|&w| s.add(w));
        if (s.value() - 1.0).abs() > 1e-12 {
            return Err(invalid("simplex entries must sum to 1"));
        }
        Ok(Self(weights))
    }

    /// Normalises nonnegative weights.
    pub fn from_unnormalized(mut weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(invalid("weights must be finite and nonnegative"));
        }
        let mut s = KahanSum::new();
        weights.iter().for_each(|&w| s.add(w));
        let total = s.value();
        if !(total > 0.0) {
            return Err(invalid("weights must not all be zero"));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self(weights))
    }

    /// Normalises log-weights; entries at `-inf` become exactly zero.
    pub fn from_log_weights(logw: &[f64]) -> Result<Self> {
        let lse = logsumexp(logw);
        if !lse.is_finite() {
            return Err(invalid("log-weights must have a finite normaliser"));
        }
        Ok(Self(logw.iter().map(|&l| libm::exp(l - lse)).collect()))
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform simplex needs n > 0");
        Self(vec![1.0 / n as f64; n])
    }

    pub fn point_mass(n: usize, k: usize) -> Self {
        let mut w = vec![0.0; n];
        w[k] = 1.0;
        Self(w)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> core::slice::Iter<'_, f64> {
        self.0.iter()
    }

    /// Total-variation distance to another simplex vector of the same length.
    pub fn tv_distance(&self, other: &SimplexVector) -> f64 {
        0.5 * self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }
}

impl Index<usize> for SimplexVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Mean of a Dirichlet distribution, `α_k / Σ α_i`.
pub fn dirichlet_mean(alpha: &[f64]) -> Result<SimplexVector> {
    if alpha.len() < 2 {
        return Err(invalid("dirichlet needs at least two coordinates"));
    }
    SimplexVector::from_unnormalized(alpha.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dirichlet_mean_examples() {
        assert_eq!(dirichlet_mean(&[1.0, 1.0]).unwrap().as_slice(), &[0.5, 0.5]);
        assert_eq!(dirichlet_mean(&[2.0, 6.0]).unwrap().as_slice(), &[0.25, 0.75]);
        assert_eq!(dirichlet_mean(&[0.0, 3.0]).unwrap().as_slice(), &[0.0, 1.0]);
        assert!(dirichlet_mean(&[0.0, 0.0]).is_err());
        assert!(dirichlet_mean(&[1.0]).is_err());
    }

    #[test]
    fn log_weights_zero_exactly() {
        let s = SimplexVector::from_log_weights(&[0.0, f64::NEG_INFINITY, 0.0]).unwrap();
        assert_eq!(s[1], 0.0);
        assert_eq!(s[0], 0.5);
    }

    #[test]
    fn validation_rejects_bad_vectors() {
        assert!(SimplexVector::new(vec![0.5, 0.6]).is_err());
        assert!(SimplexVector::new(vec![-0.1, 1.1]).is_err());
        assert!(SimplexVector::new(vec![0.25, 0.75]).is_ok());
    }
}
