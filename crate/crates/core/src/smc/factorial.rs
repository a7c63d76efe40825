use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::learning::{pl_sample_params, pl_update_stats, ChainParams, ChainPrior, SufficientStats};
use super::resample::{ancestors, systematic_resample, ResamplePolicy};
use super::{map_indexed, Ensemble};
use crate::distributions::{categorical_sample, normal_sample, SimplexVector};
use crate::error::{invalid, Error, Result};
use crate::numeric::{logsumexp, normal_logpdf};
use crate::rng::{Stream, StreamSeed};

pub const DEFAULT_JOINT_CAP: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct FactorialConfig {
    pub chains: Vec<ChainPrior>,
    /// Largest joint state space that will be enumerated.
    pub joint_cap: usize,
    pub policy: ResamplePolicy,
}

impl FactorialConfig {
    pub fn new(chains: Vec<ChainPrior>) -> Self {
        Self { chains, joint_cap: DEFAULT_JOINT_CAP, policy: ResamplePolicy::EveryStep }
    }

    pub fn validate(&self) -> Result<()> {
        if self.chains.is_empty() {
            return Err(invalid("need at least one chain"));
        }
        for c in &self.chains {
            c.validate()?;
        }
        joint_size(&self.chains, self.joint_cap).map(|_| ())
    }
}

/// One particle of the factorial filter. `x` is `None` before the first
/// observation; `y` holds the per-chain emissions, which sum to the aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorialParticle {
    pub x: Option<Vec<usize>>,
    pub y: Vec<f64>,
    pub stats: Vec<SufficientStats>,
    pub params: Vec<ChainParams>,
}

fn joint_size(chains: &[ChainPrior], cap: usize) -> Result<usize> {
    let mut size = 1usize;
    for c in chains {
        size = size.saturating_mul(c.num_states());
    }
    if size > cap {
        return Err(Error::Capacity { size, cap });
    }
    Ok(size)
}

/// Decodes a joint index; chain 0 varies fastest.
pub(crate) fn decode(mut idx: usize, chains: &[ChainPrior], out: &mut [usize]) {
    for (k, c) in chains.iter().enumerate() {
        let j = c.num_states();
        out[k] = idx % j;
        idx /= j;
    }
}

fn joint_log_terms(
    x_prev: Option<&[usize]>,
    params: &[ChainParams],
    chains: &[ChainPrior],
    ybar: f64,
    size: usize,
) -> Vec<f64> {
    let k_len = chains.len();
    let rows: Vec<Vec<f64>> = (0..k_len)
        .map(|k| match x_prev {
            Some(x) => params[k].log_row(x[k]).to_vec(),
            None => chains[k].init.iter().map(|&p| libm::log(p)).collect(),
        })
        .collect();
    let mut var = 0.0;
    for c in chains {
        var += c.sigma2;
    }
    let mut x = vec![0usize; k_len];
    let mut out = Vec::with_capacity(size);
    for idx in 0..size {
        decode(idx, chains, &mut x);
        let mut lt = 0.0;
        let mut mean = 0.0;
        for k in 0..k_len {
            lt += rows[k][x[k]];
            mean += params[k].theta[x[k]];
        }
        out.push(lt + normal_logpdf(ybar, mean, var));
    }
    out
}

/// Distribution of the joint state given the previous joint state, the
/// current parameters and the aggregate, with the log predictive
/// `log p(ȳ_n | x_{n-1}, ζ)`. Joint index `Σ_k x_k · Π_{l<k} J_l`.
pub fn factorial_state_proposal(
    x_prev: Option<&[usize]>,
    params: &[ChainParams],
    config: &FactorialConfig,
    ybar: f64,
) -> Result<(SimplexVector, f64)> {
    let chains = &config.chains;
    if params.len() != chains.len() {
        return Err(Error::DimensionMismatch { expected: chains.len(), found: params.len() });
    }
    let size = joint_size(chains, config.joint_cap)?;
    let terms = joint_log_terms(x_prev, params, chains, ybar, size);
    let lse = logsumexp(&terms);
    Ok((SimplexVector::from_log_weights(&terms)?, lse))
}

/// Draws per-chain emissions given the joint state and their sum `ȳ`:
/// `y = θ + z - σ²(Σz - (ȳ - Σθ)) / Σσ²` with independent `z_k ~ N(0, σ_k²)`.
/// The last component absorbs rounding so the sum is `ȳ` to machine precision.
pub fn conditional_emission_sample<R: Rng + ?Sized>(
    x: &[usize],
    params: &[ChainParams],
    sigma2: &[f64],
    ybar: f64,
    rng: &mut R,
) -> Vec<f64> {
    let k_len = x.len();
    if k_len == 1 {
        return vec![ybar];
    }
    let mut m: Vec<f64> = (0..k_len).map(|k| params[k].theta[x[k]] + normal_sample(0.0, sigma2[k], rng)).collect();
    let total: f64 = sigma2.iter().sum();
    let resid = ybar - m.iter().sum::<f64>();
    for k in 0..k_len {
        m[k] += sigma2[k] / total * resid;
    }
    let head: f64 = m[..k_len - 1].iter().sum();
    m[k_len - 1] = ybar - head;
    m
}

/// Ensemble at `n = 0` with every chain's parameters drawn from its prior.
pub fn fbpf_init<R: Rng + ?Sized>(
    config: &FactorialConfig,
    n_particles: usize,
    rng: &mut R,
) -> Result<Ensemble<FactorialParticle>> {
    config.validate()?;
    if n_particles == 0 {
        return Err(invalid("need at least one particle"));
    }
    let base = StreamSeed::new(rng.random());
    let particles = map_indexed(n_particles, |i| {
        let mut rng = base.child(i as u64).stream();
        let stats: Vec<SufficientStats> = config.chains.iter().map(|c| SufficientStats::new(c.num_states())).collect();
        let params = config
            .chains
            .iter()
            .zip(&stats)
            .map(|(c, s)| pl_sample_params(s, c, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(FactorialParticle { x: None, y: vec![0.0; config.chains.len()], stats, params })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble { particles, weights: SimplexVector::uniform(n_particles), n: 0 })
}

/// Weight by the aggregate predictive, resample, draw the joint state and the
/// per-chain emissions, update each chain's statistics and draw its parameters.
pub fn fbpf_step<R: Rng + ?Sized>(
    ensemble: Ensemble<FactorialParticle>,
    ybar: f64,
    config: &FactorialConfig,
    rng: &mut R,
) -> Result<Ensemble<FactorialParticle>> {
    let n = ensemble.n + 1;
    let chains = &config.chains;
    let size = joint_size(chains, config.joint_cap)?;
    let base = StreamSeed::new(rng.random());
    let terms: Vec<Vec<f64>> = map_indexed(ensemble.len(), |i| {
        let p = &ensemble.particles[i];
        joint_log_terms(p.x.as_deref(), &p.params, chains, ybar, size)
    });
    let logw: Vec<f64> = terms.iter().zip(ensemble.weights.iter()).map(|(t, &w)| libm::log(w) + logsumexp(t)).collect();
    let w = SimplexVector::from_log_weights(&logw).map_err(|_| Error::Degenerate { step: n })?;
    let (anc, weights) = if config.policy.should_resample(&w) {
        let anc = ancestors(&systematic_resample(&w, rng));
        let u = SimplexVector::uniform(anc.len());
        (anc, u)
    } else {
        ((0..w.len()).collect(), w)
    };
    let sigma2: Vec<f64> = chains.iter().map(|c| c.sigma2).collect();
    let particles = map_indexed(anc.len(), |i| {
        let a = anc[i];
        let mut rng: Stream = base.child(i as u64).stream();
        let q = SimplexVector::from_log_weights(&terms[a])?;
        let mut x = vec![0usize; chains.len()];
        decode(categorical_sample(q.as_slice(), &mut rng), chains, &mut x);
        let parent = &ensemble.particles[a];
        let y = conditional_emission_sample(&x, &parent.params, &sigma2, ybar, &mut rng);
        let mut stats = parent.stats.clone();
        let mut params = Vec::with_capacity(chains.len());
        for k in 0..chains.len() {
            pl_update_stats(&mut stats[k], parent.x.as_ref().map(|p| p[k]), x[k], y[k]);
            params.push(pl_sample_params(&stats[k], &chains[k], &mut rng)?);
        }
        Ok(FactorialParticle { x: Some(x), y, stats, params })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble { particles, weights, n })
}
