use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::generic::optimal_log_terms;
use super::resample::{ancestors, systematic_resample, ResamplePolicy};
use super::{map_indexed, Ensemble};
use crate::distributions::{
    categorical_sample, conj_update_dirichlet, conj_update_normal, dirichlet_sample, normal_sample, NormalPrior,
    SimplexVector,
};
use crate::error::{invalid, Error, Result};
use crate::hmm::HmmParams;
use crate::numeric::logsumexp;
use crate::rng::{Stream, StreamSeed};

/// Priors and fixed quantities of one Bayesian HMM chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainPrior {
    pub alpha: Vec<Vec<f64>>,
    pub emission: Vec<NormalPrior>,
    pub sigma2: f64,
    pub init: SimplexVector,
}

impl ChainPrior {
    pub fn from_hmm(params: &HmmParams) -> Self {
        Self {
            alpha: params.prior.alpha.clone(),
            emission: params.prior.emission.clone(),
            sigma2: params.sigma2,
            init: params.init.clone(),
        }
    }

    pub fn num_states(&self) -> usize {
        self.emission.len()
    }

    pub fn validate(&self) -> Result<()> {
        let j = self.num_states();
        if j == 0 {
            return Err(invalid("a chain needs at least one state"));
        }
        if !(self.sigma2 > 0.0) {
            return Err(invalid("sigma2 must be positive"));
        }
        for d in [self.alpha.len(), self.init.len()].into_iter().chain(self.alpha.iter().map(|r| r.len())) {
            if d != j {
                return Err(Error::DimensionMismatch { expected: j, found: d });
            }
        }
        if self.alpha.iter().flatten().any(|&a| !(a >= 0.0) || !a.is_finite()) {
            return Err(invalid("Dirichlet concentrations must be finite and nonnegative"));
        }
        Ok(())
    }
}

/// Transition counts and per-state emission sums.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SufficientStats {
    pub trans: Vec<Vec<u64>>,
    pub sums: Vec<f64>,
    pub counts: Vec<u64>,
}

impl SufficientStats {
    pub fn new(j: usize) -> Self {
        Self { trans: vec![vec![0; j]; j], sums: vec![0.0; j], counts: vec![0; j] }
    }

    pub fn total_transitions(&self) -> u64 {
        self.trans.iter().flatten().sum()
    }
}

/// Sampled chain parameters, with cached log transition rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainParams {
    pub theta: Vec<f64>,
    pub pi: Vec<SimplexVector>,
    log_pi: Vec<Vec<f64>>,
}

impl ChainParams {
    pub fn new(theta: Vec<f64>, pi: Vec<SimplexVector>) -> Result<Self> {
        if pi.len() != theta.len() {
            return Err(Error::DimensionMismatch { expected: theta.len(), found: pi.len() });
        }
        let log_pi = pi.iter().map(|r| r.iter().map(|&p| libm::log(p)).collect()).collect();
        Ok(Self { theta, pi, log_pi })
    }

    pub fn log_row(&self, i: usize) -> &[f64] {
        &self.log_pi[i]
    }
}

/// One particle of the Bayesian particle filter. `x` is `None` before the
/// first observation.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainParticle {
    pub x: Option<usize>,
    pub stats: SufficientStats,
    pub params: ChainParams,
}

/// Adds one observation; the transition count is skipped at the first step.
pub fn pl_update_stats(r: &mut SufficientStats, x_prev: Option<usize>, x_new: usize, y: f64) {
    if let Some(i) = x_prev {
        r.trans[i][x_new] += 1;
    }
    r.sums[x_new] += y;
    r.counts[x_new] += 1;
}

/// Draws every `θ_j`, then every row `π_j`, from their conjugate posteriors.
pub fn pl_sample_params<R: Rng + ?Sized>(r: &SufficientStats, prior: &ChainPrior, rng: &mut R) -> Result<ChainParams> {
    let j = prior.num_states();
    let mut theta = Vec::with_capacity(j);
    for k in 0..j {
        let post = conj_update_normal(prior.emission[k], r.sums[k], r.counts[k], prior.sigma2)?;
        theta.push(normal_sample(post.mean, post.var, rng));
    }
    let mut pi = Vec::with_capacity(j);
    for k in 0..j {
        pi.push(dirichlet_sample(&conj_update_dirichlet(&prior.alpha[k], &r.trans[k])?, rng)?);
    }
    ChainParams::new(theta, pi)
}




fn chain_terms(prior: &ChainPrior, p: &ChainParticle, y: f64) -> Vec<f64> {
    match p.x {
        Some(i) => p
            .params
            .log_row(i)
            .iter()
            .zip(&p.params.theta)
            .map(|(&lp, &th)| lp + crate::numeric::normal_logpdf(y, th, prior.sigma2))
            .collect(),
        None => optimal_log_terms(prior.init.as_slice(), &p.params.theta, prior.sigma2, y),
    }
}

/// Ensemble at `n = 0`: parameters drawn from the prior.
pub fn bpf_init<R: Rng + ?Sized>(prior: &ChainPrior, n_particles: usize, rng: &mut R) -> Result<Ensemble<ChainParticle>> {
    prior.validate()?;
    if n_particles == 0 {
        return Err(invalid("need at least one particle"));
    }
    let base = StreamSeed::new(rng.random());
    let j = prior.num_states();
    let particles = map_indexed(n_particles, |i| {
        let stats = SufficientStats::new(j);
        let params = pl_sample_params(&stats, prior, &mut base.child(i as u64).stream())?;
        Ok(ChainParticle { x: None, stats, params })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble { particles, weights: SimplexVector::uniform(n_particles), n: 0 })
}

/// Weight by `p(y_n | x_{n-1}, ζ_{n-1})`, resample, propagate, update the
/// statistics and draw fresh parameters.
pub fn bpf_step<R: Rng + ?Sized>(
    ensemble: Ensemble<ChainParticle>,
    y: f64,
    prior: &ChainPrior,
    policy: ResamplePolicy,
    rng: &mut R,
) -> Result<Ensemble<ChainParticle>> {
    let n = ensemble.n + 1;
    let base = StreamSeed::new(rng.random());
    let terms: Vec<Vec<f64>> = map_indexed(ensemble.len(), |i| chain_terms(prior, &ensemble.particles[i], y));
    let logw: Vec<f64> = terms.iter().zip(ensemble.weights.iter()).map(|(t, &w)| libm::log(w) + logsumexp(t)).collect();
    let w = SimplexVector::from_log_weights(&logw).map_err(|_| Error::Degenerate { step: n })?;
    let (anc, weights) = if policy.should_resample(&w) {
        let anc = ancestors(&systematic_resample(&w, rng));
        let u = SimplexVector::uniform(anc.len());
        (anc, u)
    } else {
        ((0..w.len()).collect(), w)
    };
    let particles = map_indexed(anc.len(), |i| {
        let a = anc[i];
        let mut rng: Stream = base.child(i as u64).stream();
        let q = SimplexVector::from_log_weights(&terms[a])?;
        let x = categorical_sample(q.as_slice(), &mut rng);
        let parent = &ensemble.particles[a];
        let mut stats = parent.stats.clone();
        pl_update_stats(&mut stats, parent.x, x, y);
        let params = pl_sample_params(&stats, prior, &mut rng)?;
        Ok(ChainParticle { x: Some(x), stats, params })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble { particles, weights, n })
}
