//! Weak-limit HDP transition prior and the HDP-HSMM Gibbs sampler.
//!
//! `β ~ Dir(γ/L, …, γ/L)` and `π_j ~ Dir(αβ)`. The sweep augments with
//! geometric self-transition counts `ρ` and Antoniak table counts `m`, then
//! draws `β` and every `π_j` from their Dirichlet conditionals.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::distributions::{
    beta_logpdf, categorical_sample, conj_update_normal, dirichlet_sample, gamma_logpdf,
    geometric_sample, normal_logpdf, normal_sample, DurationHyper, DurationLaw, DurationParams,
    DurationTable, NegBinForm, NormalPrior, SimplexVector,
};
use crate::error::{invalid, Error, Result};
use crate::hsmm::{sample_duration_params_state, HsmmModel, SegmentPath};
use crate::mixture::{ConjugateFamily, NegBinProb, PoissonRate};
use crate::numeric::ln_gamma;

/// Unsigned Stirling number of the first kind `|s(n, m)|`, exact for `n ≤ 30`.
pub fn stirling_unsigned(n: usize, m: usize) -> Result<u128> {
    if n > 30 {
        return Err(Error::OutOfRange(alloc::format!("stirling numbers are tabulated for n <= 30, got {n}")));
    }
    if m > n {
        return Ok(0);
    }
    let mut row = vec![0u128; n + 1];
    row[0] = 1;
    for k in 0..n {
        for j in (1..=k + 1).rev() {
            row[j] = row[j - 1] + k as u128 * row[j];
        }
        row[0] = 0;
    }
    Ok(row[m])
}

/// Antoniak table count: `m = Σ_{i<n} Bernoulli(w / (i + w))`.
///
/// Past the first `SKIP_FROM` customers the gaps between new tables are drawn
/// by inverting `P(no table at i..j) = Γ(j)Γ(i+w) / (Γ(i)Γ(j+w))`, so the cost
/// grows with `log n` rather than `n`.
pub fn sample_m<R: Rng + ?Sized>(n: u64, weight: f64, rng: &mut R) -> Result<u64> {
    if !(weight > 0.0) {
        return Err(invalid("table-count weight must be positive"));
    }
    let mut m = 0;
    for i in 0..n.min(SKIP_FROM) {
        if rng.random::<f64>() * (i as f64 + weight) < weight {
            m += 1;
        }
    }
    let mut i = SKIP_FROM;
    while i < n {
        // first success index j >= i: smallest j with log S(j+1) < log u
        let log_u = libm::log(1.0 - rng.random::<f64>());
        let base = ln_gamma_ratio(i as f64, weight);
        let log_surv = |j: u64| base - ln_gamma_ratio(j as f64, weight);
        if log_surv(n) >= log_u {
            break;
        }
        let (mut lo, mut hi) = (i, n);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if log_surv(mid + 1) < log_u {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        m += 1;
        i = lo + 1;
    }
    Ok(m)
}

const SKIP_FROM: u64 = 1024;

/// `ln Γ(x + w) - ln Γ(x)`, switching to the large-`x` expansion before the
/// two log-gammas cancel catastrophically.
fn ln_gamma_ratio(x: f64, w: f64) -> f64 {
    if x > 1e8 {
        w * libm::log(x) + w * (w - 1.0) / (2.0 * x)
    } else {
        ln_gamma(x + w) - ln_gamma(x)
    }
}

/// `count` draws of `Geo(1 - π_jj)` on `{0, 1, …}`.
pub fn sample_rho<R: Rng + ?Sized>(pi_jj: f64, count: u64, rng: &mut R) -> Result<Vec<u64>> {
    if !(0.0..1.0).contains(&pi_jj) {
        return Err(invalid("self-transition probability must be in [0, 1)"));
    }
    (0..count).map(|_| geometric_sample(1.0 - pi_jj, rng)).collect()
}

/// `β ~ Dir(γ/L + m·_1, …, γ/L + m·_L)` with `m·_j = Σ_k m[k][j]`.
pub fn sample_beta_posterior<R: Rng + ?Sized>(m: &[Vec<u64>], gamma: f64, rng: &mut R) -> Result<SimplexVector> {
    let l = m.len();
    if l == 0 || !(gamma > 0.0) {
        return Err(invalid("beta posterior needs L >= 1 and gamma > 0"));
    }
    let alpha: Vec<f64> = (0..l).map(|j| gamma / l as f64 + m.iter().map(|row| row[j]).sum::<u64>() as f64).collect();
    if l == 1 {
        return Ok(SimplexVector::uniform(1));
    }
    dirichlet_sample(&alpha, rng)
}

/// `π_j ~ Dir(αβ + n_j)`.
pub fn sample_pi_posterior<R: Rng + ?Sized>(beta: &SimplexVector, alpha: f64, n_row: &[u64], rng: &mut R) -> Result<SimplexVector> {
    if n_row.len() != beta.len() {
        return Err(Error::DimensionMismatch { expected: beta.len(), found: n_row.len() });
    }
    if beta.len() == 1 {
        return Ok(SimplexVector::uniform(1));
    }
    let a: Vec<f64> = beta.iter().zip(n_row).map(|(&b, &n)| alpha * b + n as f64).collect();
    dirichlet_sample(&a, rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakLimitHdp {
    pub gamma: f64,
    pub alpha: f64,
    pub beta: SimplexVector,
    pub pi: Vec<SimplexVector>,
    /// Transition counts with the diagonal holding `Σ_i ρ_ji`.
    pub n: Vec<Vec<u64>>,
    pub rho: Vec<Vec<u64>>,
    /// `m[k][j]`: tables in restaurant `k` serving dish `j`.
    pub m: Vec<Vec<u64>>,
}

impl WeakLimitHdp {
    pub fn from_prior<R: Rng + ?Sized>(l: usize, gamma: f64, alpha: f64, rng: &mut R) -> Result<Self> {
        if l == 0 || !(gamma > 0.0 && alpha > 0.0) {
            return Err(invalid("weak-limit HDP needs L >= 1, gamma > 0, alpha > 0"));
        }
        let zeros = vec![vec![0u64; l]; l];
        let beta = sample_beta_posterior(&zeros, gamma, rng)?;
        let pi = (0..l).map(|_| sample_pi_posterior(&beta, alpha, &zeros[0], rng)).collect::<Result<Vec<_>>>()?;
        Ok(Self { gamma, alpha, beta, pi, n: zeros.clone(), rho: vec![Vec::new(); l], m: zeros })
    }

    pub fn num_states(&self) -> usize {
        self.beta.len()
    }

    /// Rows `π̄_j = π_{j,-j} / (1 - π_jj)` with an exact zero diagonal.
    pub fn normalized_rows(&self) -> Vec<SimplexVector> {
        let l = self.num_states();
        if l == 1 {
            return vec![SimplexVector::uniform(1)];
        }
        (0..l)
            .map(|j| {
                let mut w = self.pi[j].as_slice().to_vec();
                w[j] = 0.0;
                SimplexVector::from_unnormalized(w.clone()).unwrap_or_else(|_| {
                    let mut u = vec![1.0; l];
                    u[j] = 0.0;
                    SimplexVector::from_unnormalized(u).expect("L >= 2")
                })
            })
            .collect()
    }
}

/// One pass in the order `ρ`, `m`, `β`, `π` given super-state transition counts.
pub fn hdp_sweep<R: Rng + ?Sized>(hdp: WeakLimitHdp, transitions: &[Vec<u64>], rng: &mut R) -> Result<WeakLimitHdp> {
    hdp_sweep_with_first(hdp, transitions, None, rng)
}

/// As [`hdp_sweep`], when the first super-state is itself a draw from `β`;
/// it adds one count to that column of the `β` posterior.
pub fn hdp_sweep_with_first<R: Rng + ?Sized>(
    hdp: WeakLimitHdp,
    transitions: &[Vec<u64>],
    first: Option<usize>,
    rng: &mut R,
) -> Result<WeakLimitHdp> {
    let l = hdp.num_states();
    if transitions.len() != l || transitions.iter().any(|r| r.len() != l) {
        return Err(Error::DimensionMismatch { expected: l, found: transitions.len() });
    }
    let mut n: Vec<Vec<u64>> = transitions.to_vec();
    let mut rho = Vec::with_capacity(l);
    for j in 0..l {
        let leaving: u64 = (0..l).filter(|&k| k != j).map(|k| transitions[j][k]).sum();
        let stay = (1.0 - hdp.pi[j].iter().enumerate().filter(|&(k, _)| k != j).map(|(_, &p)| p).sum::<f64>()).clamp(0.0, 1.0 - 1e-12);
        let r = sample_rho(stay, leaving, rng)?;
        n[j][j] = r.iter().sum();
        rho.push(r);
    }
    let mut m = vec![vec![0u64; l]; l];
    for k in 0..l {
        for j in 0..l {
            if n[k][j] > 0 {
                m[k][j] = sample_m(n[k][j], hdp.alpha * hdp.beta[j], rng)?;
            }
        }
    }
    let beta = match first {
        Some(z) if z < l => {
            let mut with_first = m.clone();
            with_first[z][z] += 1;
            sample_beta_posterior(&with_first, hdp.gamma, rng)?
        }
        Some(z) => return Err(Error::OutOfRange(alloc::format!("first state {z} with L = {l}"))),
        None => sample_beta_posterior(&m, hdp.gamma, rng)?,
    };
    let pi = (0..l).map(|j| sample_pi_posterior(&beta, hdp.alpha, &n[j], rng)).collect::<Result<Vec<_>>>()?;
    Ok(WeakLimitHdp { gamma: hdp.gamma, alpha: hdp.alpha, beta, pi, n, rho, m })
}

/// Base measure `H = f ⊗ g`: a normal mixture for `θ` and a mixture of
/// duration priors for `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionMixturePrior {
    pub weights: SimplexVector,
    pub components: Vec<NormalPrior>,
    pub duration_weights: SimplexVector,
    pub duration_components: Vec<DurationHyper>,
}

impl EmissionMixturePrior {
    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != self.components.len() || self.duration_weights.len() != self.duration_components.len() {
            return Err(invalid("mixture weights and components disagree in length"));
        }
        self.duration_components.iter().try_for_each(|h| h.validate())
    }
}

/// Fixed settings of an HDP-HSMM run.
#[derive(Debug, Clone, PartialEq)]
pub struct HdpHsmmConfig {
    pub sigma2: f64,
    pub form: NegBinForm,
    pub max_duration: Option<usize>,
    pub prior: EmissionMixturePrior,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HdpHsmmState {
    pub hdp: WeakLimitHdp,
    pub theta: Vec<f64>,
    pub durations: Vec<DurationParams>,
    pub theta_labels: Vec<usize>,
    pub duration_labels: Vec<usize>,
    pub path: SegmentPath,
}

impl HdpHsmmState {
    /// Draws everything from the prior, then a segmentation given `y`.
    pub fn from_prior<R: Rng + ?Sized>(
        config: &HdpHsmmConfig,
        l: usize,
        gamma: f64,
        alpha: f64,
        y: &[f64],
        rng: &mut R,
    ) -> Result<Self> {
        config.prior.validate()?;
        let hdp = WeakLimitHdp::from_prior(l, gamma, alpha, rng)?;
        let mut theta = Vec::with_capacity(l);
        let mut theta_labels = Vec::with_capacity(l);
        let mut durations = Vec::with_capacity(l);
        let mut duration_labels = Vec::with_capacity(l);
        for _ in 0..l {
            let c = categorical_sample(config.prior.weights.as_slice(), rng);
            let p = config.prior.components[c];
            theta.push(normal_sample(p.mean, p.var, rng));
            theta_labels.push(c);
            let c = categorical_sample(config.prior.duration_weights.as_slice(), rng);
            durations.push(sample_duration_prior(&config.prior.duration_components[c], rng)?);
            duration_labels.push(c);
        }
        let mut state = Self { hdp, theta, durations, theta_labels, duration_labels, path: SegmentPath { z: vec![0], d: vec![y.len()] } };
        let model = state.model(config, y)?;
        state.path = model.sample(&model.messages(), rng)?;
        Ok(state)
    }

    /// The HSMM given the current parameters, using the normalised rows `π̄`
    /// and `β` as the law of the first super-state.
    pub fn model(&self, config: &HdpHsmmConfig, y: &[f64]) -> Result<HsmmModel> {
        let l = self.hdp.num_states();
        let rows = self.hdp.normalized_rows();
        let log_pi = (0..l)
            .map(|a| (0..l).map(|b| if a == b { f64::NEG_INFINITY } else { libm::log(rows[a][b]) }).collect())
            .collect();
        let log_init = self.hdp.beta.iter().map(|&b| libm::log(b)).collect();
        let tables = self
            .durations
            .iter()
            .map(|&w| DurationTable::new(DurationLaw::Mixture { params: w, form: config.form }, y.len(), config.max_duration))
            .collect::<Result<Vec<_>>>()?;
        HsmmModel::from_parts(log_pi, log_init, tables, &self.theta, config.sigma2, y)
    }

    /// States with at least one segment.
    pub fn used_states(&self) -> usize {
        let mut used = vec![false; self.hdp.num_states()];
        self.path.z.iter().for_each(|&z| used[z] = true);
        used.iter().filter(|&&u| u).count()
    }
}

/// Draws `w = (φ, λ, r, ϕ)` from a duration hyperprior.
pub fn sample_duration_prior<R: Rng + ?Sized>(h: &DurationHyper, rng: &mut R) -> Result<DurationParams> {
    let pois = PoissonRate { hyper: h.lambda };
    let nb = NegBinProb { hyper: h.nb_p, r: h.r, form: NegBinForm::Standard };
    Ok(DurationParams {
        phi: crate::distributions::beta_sample(h.phi.a, h.phi.b, rng)?,
        lambda: pois.sample_prior(rng)?,
        r: h.r,
        nb_p: nb.sample_prior(rng)?,
    })
}

fn duration_prior_logpdf(w: &DurationParams, h: &DurationHyper) -> f64 {
    if w.r != h.r {
        return f64::NEG_INFINITY;
    }
    let clamp = |x: f64| x.clamp(1e-300, 1.0 - 1e-16);
    beta_logpdf(clamp(w.phi), h.phi.a, h.phi.b)
        + gamma_logpdf(w.lambda.max(1e-300), h.lambda.shape, h.lambda.rate)
        + beta_logpdf(clamp(w.nb_p), h.nb_p.a, h.nb_p.b)
}

/// Blocked segments with `π̄`, then the HDP sweep, then `θ` and `w` through
/// their mixture priors.
pub fn gibbs_sweep_hdphsmm<R: Rng + ?Sized>(
    state: HdpHsmmState,
    config: &HdpHsmmConfig,
    y: &[f64],
    rng: &mut R,
) -> Result<HdpHsmmState> {
    let l = state.hdp.num_states();
    let model = state.model(config, y)?;
    let path = model.sample(&model.messages(), rng)?;
    let hdp = hdp_sweep_with_first(state.hdp, &path.transition_counts(l), path.z.first().copied(), rng)?;

    let x = path.expand(y.len());
    let (sums, counts) = crate::hmm::emission_stats(&x, y, l);
    let prior = &config.prior;
    let mut theta = state.theta;
    let mut theta_labels = state.theta_labels;
    let mut logw = vec![0.0; prior.components.len()];
    for j in 0..l {
        for (m, w) in logw.iter_mut().enumerate() {
            let c = prior.components[m];
            *w = libm::log(prior.weights[m]) + normal_logpdf(theta[j], c.mean, c.var);
        }
        let c = categorical_sample(SimplexVector::from_log_weights(&logw)?.as_slice(), rng);
        let post = conj_update_normal(prior.components[c], sums[j], counts[j], config.sigma2)?;
        theta[j] = normal_sample(post.mean, post.var, rng);
        theta_labels[j] = c;
    }

    let by_state = path.durations_by_state(l);
    let mut durations = state.durations;
    let mut duration_labels = state.duration_labels;
    let mut logw = vec![0.0; prior.duration_components.len()];
    for j in 0..l {
        for (m, w) in logw.iter_mut().enumerate() {
            *w = libm::log(prior.duration_weights[m]) + duration_prior_logpdf(&durations[j], &prior.duration_components[m]);
        }
        let c = match SimplexVector::from_log_weights(&logw) {
            Ok(p) => categorical_sample(p.as_slice(), rng),
            Err(_) => categorical_sample(prior.duration_weights.as_slice(), rng),
        };
        let h = &prior.duration_components[c];
        let current = DurationParams { r: h.r, ..durations[j] };
        durations[j] = sample_duration_params_state(&by_state[j], h, &current, config.form, rng)?;
        duration_labels[j] = c;
    }
    Ok(HdpHsmmState { hdp, theta, durations, theta_labels, duration_labels, path })
}

#[cfg(test)]
#[path = "hdp_tests.rs"]
mod tests;
