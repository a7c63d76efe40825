//! Gibbs sampling for finite mixtures of conjugate families.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::distributions::{
    beta_sample, categorical_sample, conj_update_beta_negbin, conj_update_dirichlet,
    conj_update_gamma_poisson, conj_update_normal, dirichlet_sample, gamma_sample, negbin_logpmf,
    normal_logpdf, normal_sample, poisson_logpmf, BetaHyper, GammaHyper, NegBinForm, NormalPrior,
    SimplexVector,
};
use crate::error::{invalid, Result};

/// A likelihood with a conjugate prior on a scalar parameter.
pub trait ConjugateFamily {
    fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64>;
    fn sample_posterior<R: Rng + ?Sized>(&self, data: &[f64], rng: &mut R) -> Result<f64>;
    fn log_likelihood(&self, param: f64, x: f64) -> f64;
}

/// Normal observations with known variance, normal prior on the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalMean {
    pub prior: NormalPrior,
    pub sigma2: f64,
}

impl ConjugateFamily for NormalMean {
    fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        Ok(normal_sample(self.prior.mean, self.prior.var, rng))
    }

    fn sample_posterior<R: Rng + ?Sized>(&self, data: &[f64], rng: &mut R) -> Result<f64> {
        let post = conj_update_normal(self.prior, data.iter().sum(), data.len() as u64, self.sigma2)?;
        Ok(normal_sample(post.mean, post.var, rng))
    }

    fn log_likelihood(&self, param: f64, x: f64) -> f64 {
        normal_logpdf(x, param, self.sigma2)
    }
}

/// Poisson counts, gamma prior on the rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonRate {
    pub hyper: GammaHyper,
}

impl ConjugateFamily for PoissonRate {
    fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        Ok(gamma_sample(self.hyper.shape, self.hyper.rate, rng)?.max(f64::MIN_POSITIVE))
    }

    fn sample_posterior<R: Rng + ?Sized>(&self, data: &[f64], rng: &mut R) -> Result<f64> {
        let sum = data.iter().map(|&d| d as u64).sum();
        let post = conj_update_gamma_poisson(self.hyper, sum, data.len() as u64)?;
        Ok(gamma_sample(post.shape, post.rate, rng)?.max(f64::MIN_POSITIVE))
    }

    fn log_likelihood(&self, param: f64, x: f64) -> f64 {
        poisson_logpmf(x as u64, param).unwrap_or(f64::NEG_INFINITY)
    }
}

/// Negative-binomial counts with fixed `r`, beta prior on the probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegBinProb {
    pub hyper: BetaHyper,
    pub r: u32,
    pub form: NegBinForm,
}

const MAX_PROB: f64 = 1.0 - f64::EPSILON;

impl ConjugateFamily for NegBinProb {
    fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        Ok(beta_sample(self.hyper.a, self.hyper.b, rng)?.min(MAX_PROB))
    }

    fn sample_posterior<R: Rng + ?Sized>(&self, data: &[f64], rng: &mut R) -> Result<f64> {
        let sum = data.iter().map(|&d| d as u64).sum();
        let post = conj_update_beta_negbin(self.hyper, sum, data.len() as u64, self.r)?;
        Ok(beta_sample(post.a, post.b, rng)?.min(MAX_PROB))
    }

    fn log_likelihood(&self, param: f64, x: f64) -> f64 {
        negbin_logpmf(x as u64, self.r, param, self.form).unwrap_or(f64::NEG_INFINITY)
    }
}

/// One state of the mixture sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSample {
    pub weights: SimplexVector,
    pub params: Vec<f64>,
    pub labels: Vec<usize>,
}

/// Draws labels `Z_i ∝ ϖ_m f(x_i | ϑ_m)`.
pub fn sample_labels<F: ConjugateFamily, R: Rng + ?Sized>(
    obs: &[f64],
    weights: &[f64],
    components: &[F],
    params: &[f64],
    rng: &mut R,
) -> Result<Vec<usize>> {
    let mut logw = vec![0.0; components.len()];
    obs.iter()
        .map(|&x| {
            for (m, w) in logw.iter_mut().enumerate() {
                *w = if weights[m] > 0.0 {
                    libm::log(weights[m]) + components[m].log_likelihood(params[m], x)
                } else {
                    f64::NEG_INFINITY
                };
            }
            let p = SimplexVector::from_log_weights(&logw)?;
            Ok(categorical_sample(p.as_slice(), rng))
        })
        .collect()
}

/// Finite-mixture Gibbs sampler.
///
/// Each sweep draws the component parameters given the labels, then the
/// weights given the labels, then the labels given everything. Labels start
/// from `init_labels` or, if absent, uniformly at random.
pub fn mixture_gibbs<F: ConjugateFamily, R: Rng + ?Sized>(
    obs: &[f64],
    weights_prior: &[f64],
    components: &[F],
    init_labels: Option<Vec<usize>>,
    sweeps: usize,
    rng: &mut R,
) -> Result<Vec<MixtureSample>> {
    let m = components.len();
    if m == 0 {
        return Err(invalid("mixture needs at least one component"));
    }
    if weights_prior.len() != m {
        return Err(invalid("one Dirichlet weight per component"));
    }
    let mut labels = match init_labels {
        Some(l) if l.len() == obs.len() && l.iter().all(|&z| z < m) => l,
        Some(_) => return Err(invalid("initial labels do not match the observations")),
        None => obs.iter().map(|_| rng.random_range(0..m)).collect(),
    };
    let mut out = Vec::with_capacity(sweeps);
    for _ in 0..sweeps {
        let mut groups: Vec<Vec<f64>> = vec![Vec::new(); m];
        for (&x, &z) in obs.iter().zip(&labels) {
            groups[z].push(x);
        }
        let params = components
            .iter()
            .zip(&groups)
            .map(|(c, g)| if g.is_empty() { c.sample_prior(rng) } else { c.sample_posterior(g, rng) })
            .collect::<Result<Vec<_>>>()?;
        let counts: Vec<u64> = groups.iter().map(|g| g.len() as u64).collect();
        let weights = dirichlet_sample(&conj_update_dirichlet(weights_prior, &counts)?, rng)?;
        labels = sample_labels(obs, weights.as_slice(), components, &params, rng)?;
        out.push(MixtureSample { weights, params, labels: labels.clone() });
    }
    Ok(out)
}
