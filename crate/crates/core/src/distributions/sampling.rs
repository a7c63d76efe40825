use alloc::vec::Vec;

use rand::distr::Open01;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Geometric, Poisson, StandardNormal};

use super::simplex::SimplexVector;
use crate::error::{invalid, Result};

pub fn uniform_open<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(Open01)
}

pub fn normal_sample<R: Rng + ?Sized>(mean: f64, var: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    mean + libm::sqrt(var) * z
}

/// Draws `log X` for `X ~ Gamma(shape, 1)`.
///
/// Small shapes use `X = Y·U^(1/shape)` with `Y ~ Gamma(1 + shape)`, kept in log
/// space so that Dirichlet draws with tiny concentrations do not underflow.
pub fn log_gamma_sample<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> Result<f64> {
    if !(shape >= 0.0) || !shape.is_finite() {
        return Err(invalid("gamma shape must be finite and nonnegative"));
    }
    if shape == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if shape >= 1.0 {
        let g = Gamma::new(shape, 1.0).map_err(|_| invalid("gamma shape"))?;
        return Ok(libm::log(g.sample(rng)));
    }
    let g = Gamma::new(shape + 1.0, 1.0).map_err(|_| invalid("gamma shape"))?;
    let y = g.sample(rng);
    Ok(libm::log(y) + libm::log(uniform_open(rng)) / shape)
}

/// `Gamma(shape, rate)`.
pub fn gamma_sample<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    if !(rate > 0.0) {
        return Err(invalid("gamma rate must be positive"));
    }
    Ok(libm::exp(log_gamma_sample(shape, rng)?) / rate)
}

/// `Dir(α)`; coordinates with `α_k = 0` are exactly zero.
pub fn dirichlet_sample<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Result<SimplexVector> {
    if alpha.is_empty() || alpha.iter().all(|&a| a == 0.0) {
        return Err(invalid("dirichlet needs at least one positive concentration"));
    }
    let logs = alpha
        .iter()
        .map(|&a| log_gamma_sample(a, rng))
        .collect::<Result<Vec<_>>>()?;
    SimplexVector::from_log_weights(&logs)
}

/// `Beta(a, b)`, allowing one degenerate parameter.
pub fn beta_sample<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> Result<f64> {
    Ok(dirichlet_sample(&[a, b], rng)?[0])
}

/// Number of failures before the first success, success probability `p`.
pub fn geometric_sample<R: Rng + ?Sized>(p: f64, rng: &mut R) -> Result<u64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(invalid("geometric success probability must be in (0, 1]"));
    }
    if p == 1.0 {
        return Ok(0);
    }
    Ok(Geometric::new(p).map_err(|_| invalid("geometric"))?.sample(rng))
}

pub fn poisson_sample<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<u64> {
    if lambda == 0.0 {
        return Ok(0);
    }
    let d = Poisson::new(lambda).map_err(|_| invalid("poisson rate must be positive"))?;
    Ok(d.sample(rng) as u64)
}

/// Inverse-CDF draw from nonnegative (not necessarily normalised) weights.
/// Zero-weight entries are never returned.
pub fn categorical_sample<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}
