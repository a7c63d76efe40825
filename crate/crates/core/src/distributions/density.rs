use crate::error::{invalid, Result};
use crate::numeric::{ln_beta, ln_choose, ln_factorial, ln_gamma, log_add_exp, logsumexp, xlogy};

use super::duration::DurationParams;

pub use crate::numeric::normal_logpdf;

/// Which negative-binomial expression the duration model uses.
///
/// `Shifted` is `C(d+r-1, r-1) ϕ^(d-1) (1-ϕ)^r` on `d ≥ 1`, the duration
/// density as written. `Standard` is the usual
/// `C(d+r-1, d) ϕ^d (1-ϕ)^r` on `d ≥ 0`, the form the beta update is conjugate to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NegBinForm {
    #[default]
    Shifted,
    Standard,
}

pub fn poisson_logpmf(k: u64, lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(invalid("poisson rate must be finite and nonnegative"));
    }
    if lambda == 0.0 {
        return Ok(if k == 0 { 0.0 } else { f64::NEG_INFINITY });
    }
    Ok(k as f64 * libm::log(lambda) - lambda - ln_factorial(k))
}

pub fn negbin_logpmf(d: u64, r: u32, p: f64, form: NegBinForm) -> Result<f64> {
    if r == 0 || !(0.0..1.0).contains(&p) {
        return Err(invalid("negative binomial needs r >= 1 and p in [0, 1)"));
    }
    let rf = r as f64;
    let df = d as f64;
    let coef = ln_choose(df + rf - 1.0, rf - 1.0);
    let tail = rf * libm::log1p(-p);
    Ok(match form {
        NegBinForm::Shifted => {
            if d == 0 {
                f64::NEG_INFINITY
            } else {
                coef + xlogy(df - 1.0, p) + tail
            }
        }
        NegBinForm::Standard => coef + xlogy(df, p) + tail,
    })
}

/// `φ·Poisson(d; λ) + (1-φ)·NegBin(d; r, ϕ)` in log space.
pub fn duration_logpmf(params: &DurationParams, d: u64, form: NegBinForm) -> Result<f64> {
    params.validate()?;
    let pois = if params.phi > 0.0 {
        libm::log(params.phi) + poisson_logpmf(d, params.lambda)?
    } else {
        f64::NEG_INFINITY
    };
    let nb = if params.phi < 1.0 {
        libm::log1p(-params.phi) + negbin_logpmf(d, params.r, params.nb_p, form)?
    } else {
        f64::NEG_INFINITY
    };
    Ok(log_add_exp(pois, nb))
}

/// `log Σ_m w_m f_m` given weights and per-component log densities.
pub fn mixture_logpdf(weights: &[f64], component_logpdf: &[f64]) -> Result<f64> {
    if weights.len() != component_logpdf.len() || weights.is_empty() {
        return Err(invalid("mixture needs one weight per component"));
    }
    let mut terms = alloc::vec::Vec::with_capacity(weights.len());
    for (&w, &l) in weights.iter().zip(component_logpdf) {
        if w < 0.0 {
            return Err(invalid("mixture weights must be nonnegative"));
        }
        terms.push(if w == 0.0 { f64::NEG_INFINITY } else { libm::log(w) + l });
    }
    Ok(logsumexp(&terms))
}

/// Gamma density with shape/rate parametrisation.
pub fn gamma_logpdf(x: f64, shape: f64, rate: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * libm::log(rate) - ln_gamma(shape) + (shape - 1.0) * libm::log(x) - rate * x
}

pub fn beta_logpdf(x: f64, a: f64, b: f64) -> f64 {
    if !(x > 0.0 && x < 1.0) {
        return f64::NEG_INFINITY;
    }
    (a - 1.0) * libm::log(x) + (b - 1.0) * libm::log1p(-x) - ln_beta(a, b)
}
