//! Finite-state Bayesian HMM with Gaussian emissions: simulation, log-space
//! forward/backward messages, blocked state sampling and the Gibbs sweep.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::distributions::{
    categorical_sample, conj_update_dirichlet, conj_update_normal, dirichlet_sample, normal_sample,
    NormalPrior, SimplexVector,
};
use crate::error::{invalid, Error, Result};
use crate::numeric::{logsumexp, normal_logpdf};

/// Conjugate priors: `π_j ~ Dir(α_j)` and `θ_j ~ N(μ_j, τ_j²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HmmPrior {
    pub alpha: Vec<Vec<f64>>,
    pub emission: Vec<NormalPrior>,
}

impl HmmPrior {
    /// Uses the same Dirichlet vector for every row.
    pub fn shared_alpha(alpha: Vec<f64>, emission: Vec<NormalPrior>) -> Self {
        Self { alpha: vec![alpha; emission.len()], emission }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HmmParams {
    pub pi: Vec<SimplexVector>,
    pub theta: Vec<f64>,
    pub sigma2: f64,
    pub init: SimplexVector,
    pub prior: HmmPrior,
}

impl HmmParams {
    /// Builds parameters with a uniform initial distribution.
    pub fn new(pi: Vec<SimplexVector>, theta: Vec<f64>, sigma2: f64, prior: HmmPrior) -> Result<Self> {
        let j = theta.len();
        let p = Self { pi, theta, sigma2, init: SimplexVector::uniform(j.max(1)), prior };
        p.validate()?;
        Ok(p)
    }

    pub fn with_init(mut self, init: SimplexVector) -> Result<Self> {
        self.init = init;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let j = self.theta.len();
        if j == 0 {
            return Err(invalid("an HMM needs at least one state"));
        }
        if !(self.sigma2 > 0.0) {
            return Err(invalid("sigma2 must be positive"));
        }
        let dims = [self.pi.len(), self.init.len(), self.prior.alpha.len(), self.prior.emission.len()];
        for d in dims.into_iter().chain(self.pi.iter().map(|r| r.len())).chain(self.prior.alpha.iter().map(|r| r.len())) {
            if d != j {
                return Err(Error::DimensionMismatch { expected: j, found: d });
            }
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.theta.len()
    }

    pub fn log_pi(&self) -> Vec<Vec<f64>> {
        self.pi.iter().map(|r| r.iter().map(|&p| libm::log(p)).collect()).collect()
    }

    fn log_init(&self) -> Vec<f64> {
        self.init.iter().map(|&p| libm::log(p)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HmmState {
    pub x: Vec<usize>,
    pub params: HmmParams,
}

/// `log N(y_t; θ_j, σ²)` as a `T × J` table.
pub fn emission_loglik(theta: &[f64], sigma2: f64, y: &[f64]) -> Vec<Vec<f64>> {
    y.iter().map(|&yt| theta.iter().map(|&th| normal_logpdf(yt, th, sigma2)).collect()).collect()
}

/// Draws `(x, y)`; negative emissions are clamped to zero.
pub fn simulate_hmm<R: Rng + ?Sized>(params: &HmmParams, t_len: usize, rng: &mut R) -> Result<(Vec<usize>, Vec<f64>)> {
    params.validate()?;
    if t_len == 0 {
        return Err(invalid("T must be at least 1"));
    }
    let mut x = Vec::with_capacity(t_len);
    let mut y = Vec::with_capacity(t_len);
    let mut state = categorical_sample(params.init.as_slice(), rng);
    for t in 0..t_len {
        if t > 0 {
            state = categorical_sample(params.pi[state].as_slice(), rng);
        }
        x.push(state);
        y.push(normal_sample(params.theta[state], params.sigma2, rng).max(0.0));
    }
    Ok((x, y))
}

/// `f_t(x) = log p(y_{1:t}, x_t = x)`.
pub fn forward_messages(params: &HmmParams, y: &[f64]) -> Result<Vec<Vec<f64>>> {
    params.validate()?;
    if y.is_empty() {
        return Err(invalid("observation sequence is empty"));
    }
    let j = params.num_states();
    let em = emission_loglik(&params.theta, params.sigma2, y);
    let log_pi = params.log_pi();
    let mut f = Vec::with_capacity(y.len());
    f.push(params.log_init().iter().zip(&em[0]).map(|(a, b)| a + b).collect::<Vec<_>>());
    let mut terms = vec![0.0; j];
    for t in 1..y.len() {
        let prev: &Vec<f64> = &f[t - 1];
        let row: Vec<f64> = (0..j)
            .map(|x| {
                for (k, term) in terms.iter_mut().enumerate() {
                    *term = prev[k] + log_pi[k][x];
                }
                em[t][x] + logsumexp(&terms)
            })
            .collect();
        f.push(row);
    }
    Ok(f)
}

/// `b_t(x) = log p(y_{t+1:T} | x_t = x)`, with `b_T ≡ 0`.
pub fn backward_messages(params: &HmmParams, y: &[f64]) -> Result<Vec<Vec<f64>>> {
    params.validate()?;
    if y.is_empty() {
        return Err(invalid("observation sequence is empty"));
    }
    let j = params.num_states();
    let em = emission_loglik(&params.theta, params.sigma2, y);
    let log_pi = params.log_pi();
    let t_len = y.len();
    let mut b = vec![vec![0.0; j]; t_len];
    let mut terms = vec![0.0; j];
    for t in (0..t_len - 1).rev() {
        for x in 0..j {
            for (k, term) in terms.iter_mut().enumerate() {
                *term = log_pi[x][k] + em[t + 1][k] + b[t + 1][k];
            }
            b[t][x] = logsumexp(&terms);
        }
    }
    Ok(b)
}

/// `log p(y_{1:T})` from the last forward message.
pub fn log_likelihood(f: &[Vec<f64>]) -> f64 {
    f.last().map_or(f64::NEG_INFINITY, |row| logsumexp(row))
}

/// `p(x_t | y_{1:T}) ∝ f_t b_t`.
pub fn smoothing_marginals(f: &[Vec<f64>], b: &[Vec<f64>]) -> Result<Vec<SimplexVector>> {
    f.iter()
        .zip(b)
        .map(|(ft, bt)| {
            let s: Vec<f64> = ft.iter().zip(bt).map(|(a, c)| a + c).collect();
            SimplexVector::from_log_weights(&s)
        })
        .collect()
}

/// `p(x_t | y_{1:t}) ∝ f_t`.
pub fn filtering_marginals(f: &[Vec<f64>]) -> Result<Vec<SimplexVector>> {
    f.iter().map(|ft| SimplexVector::from_log_weights(ft)).collect()
}

/// One exact draw of `x_{1:T}` from `p(x | y, θ, π)`, given backward messages.
pub fn blocked_sample_states<R: Rng + ?Sized>(
    params: &HmmParams,
    y: &[f64],
    b: &[Vec<f64>],
    rng: &mut R,
) -> Result<Vec<usize>> {
    if b.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: y.len(), found: b.len() });
    }
    let j = params.num_states();
    let log_pi = params.log_pi();
    let mut x: Vec<usize> = Vec::with_capacity(y.len());
    let mut logw = vec![0.0; j];
    for t in 0..y.len() {
        for (k, w) in logw.iter_mut().enumerate() {
            let prior = if t == 0 { libm::log(params.init[k]) } else { log_pi[x[t - 1]][k] };
            *w = prior + normal_logpdf(y[t], params.theta[k], params.sigma2) + b[t][k];
        }
        let probs = SimplexVector::from_log_weights(&logw)?;
        x.push(categorical_sample(probs.as_slice(), rng));
    }
    Ok(x)
}

/// `n[j][k]` = number of `j → k` transitions along `x`.
pub fn transition_counts(x: &[usize], j: usize) -> Vec<Vec<u64>> {
    let mut n = vec![vec![0u64; j]; j];
    for w in x.windows(2) {
        n[w[0]][w[1]] += 1;
    }
    n
}

/// Per-state emission sums and counts along `x`.
pub fn emission_stats(x: &[usize], y: &[f64], j: usize) -> (Vec<f64>, Vec<u64>) {
    let mut sums = vec![0.0; j];
    let mut counts = vec![0u64; j];
    for (&s, &v) in x.iter().zip(y) {
        sums[s] += v;
        counts[s] += 1;
    }
    (sums, counts)
}

/// Blocked `x`, then each `θ_j`, then each `π_j`.
pub fn gibbs_sweep_hmm<R: Rng + ?Sized>(state: HmmState, y: &[f64], rng: &mut R) -> Result<HmmState> {
    let HmmState { params, .. } = state;
    let b = backward_messages(&params, y)?;
    let x = blocked_sample_states(&params, y, &b, rng)?;
    let j = params.num_states();
    let (sums, counts) = emission_stats(&x, y, j);
    let mut params = params;
    for k in 0..j {
        let post = conj_update_normal(params.prior.emission[k], sums[k], counts[k], params.sigma2)?;
        params.theta[k] = normal_sample(post.mean, post.var, rng);
    }
    let n = transition_counts(&x, j);
    for k in 0..j {
        let alpha = conj_update_dirichlet(&params.prior.alpha[k], &n[k])?;
        params.pi[k] = dirichlet_sample(&alpha, rng)?;
    }
    Ok(HmmState { x, params })
}
