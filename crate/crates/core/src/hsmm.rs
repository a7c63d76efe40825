//! Explicit-duration HSMM: simulation with a right-censored last segment,
//! backward messages over segment boundaries, blocked segment sampling and
//! the Gibbs sweep including the duration-mixture update.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::distributions::{
    categorical_sample, conj_update_dirichlet, conj_update_normal, dirichlet_sample, normal_sample,
    DurationHyper, DurationLaw, DurationParams, DurationTable, NegBinForm, NormalPrior,
    SimplexVector,
};
use crate::error::{invalid, Error, Result};
use crate::mixture::{ConjugateFamily, NegBinProb, PoissonRate};
use crate::numeric::{logsumexp, normal_logpdf, prefix_sums};

#[derive(Debug, Clone, PartialEq)]
pub struct HsmmPrior {
    pub emission: Vec<NormalPrior>,
    /// Dirichlet rows; the diagonal entry is ignored.
    pub alpha: Vec<Vec<f64>>,
    pub duration: Vec<DurationHyper>,
}

/// HSMM parameters. Rows of `pi` have an exact zero on the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct HsmmParams {
    pub pi: Vec<SimplexVector>,
    pub theta: Vec<f64>,
    pub sigma2: f64,
    pub init: SimplexVector,
    /// Mixture laws are resampled by the Gibbs sweep; explicit laws stay fixed.
    pub durations: Vec<DurationLaw>,
    pub prior: HsmmPrior,
    /// Optional cap on segment length used by the messages.
    pub max_duration: Option<usize>,
}

impl HsmmParams {
    pub fn new(
        pi: Vec<SimplexVector>,
        theta: Vec<f64>,
        sigma2: f64,
        durations: Vec<DurationLaw>,
        prior: HsmmPrior,
    ) -> Result<Self> {
        let j = theta.len();
        let p = Self {
            pi,
            theta,
            sigma2,
            init: SimplexVector::uniform(j.max(1)),
            durations,
            prior,
            max_duration: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let j = self.theta.len();
        if j == 0 {
            return Err(invalid("an HSMM needs at least one state"));
        }
        if !(self.sigma2 > 0.0) {
            return Err(invalid("sigma2 must be positive"));
        }
        for d in [self.pi.len(), self.init.len(), self.durations.len(), self.prior.emission.len(), self.prior.alpha.len()] {
            if d != j {
                return Err(Error::DimensionMismatch { expected: j, found: d });
            }
        }
        if j > 1 {
            for (i, row) in self.pi.iter().enumerate() {
                if row.len() != j {
                    return Err(Error::DimensionMismatch { expected: j, found: row.len() });
                }
                if row[i] != 0.0 {
                    return Err(invalid("HSMM transition rows need an exact zero diagonal"));
                }
            }
        }
        for law in &self.durations {
            law.validate()?;
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.theta.len()
    }

    fn log_pi(&self) -> Vec<Vec<f64>> {
        let j = self.num_states();
        (0..j)
            .map(|a| {
                (0..j)
                    .map(|b| if a == b || j == 1 { f64::NEG_INFINITY } else { libm::log(self.pi[a][b]) })
                    .collect()
            })
            .collect()
    }
}

/// Super-states and durations; `Σ_{s<S} D_s < T ≤ Σ_s D_s`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentPath {
    pub z: Vec<usize>,
    pub d: Vec<usize>,
}

impl SegmentPath {
    /// Expanded state sequence, truncated at `t_len`.
    pub fn expand(&self, t_len: usize) -> Vec<usize> {
        let mut x = Vec::with_capacity(t_len);
        for (&z, &d) in self.z.iter().zip(&self.d) {
            for _ in 0..d {
                if x.len() == t_len {
                    return x;
                }
                x.push(z);
            }
        }
        x
    }

    /// Checks the censoring constraint and the absence of self-transitions.
    pub fn is_valid(&self, t_len: usize) -> bool {
        if self.z.is_empty() || self.z.len() != self.d.len() || self.d.iter().any(|&d| d == 0) {
            return false;
        }
        let total: usize = self.d.iter().sum();
        let before_last = total - self.d[self.d.len() - 1];
        before_last < t_len && t_len <= total && self.z.windows(2).all(|w| w[0] != w[1])
    }

    /// Durations of the segments spent in each state.
    pub fn durations_by_state(&self, j: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); j];
        for (&z, &d) in self.z.iter().zip(&self.d) {
            out[z].push(d);
        }
        out
    }

    /// Super-state transition counts `n[j][k]`.
    pub fn transition_counts(&self, j: usize) -> Vec<Vec<u64>> {
        let mut n = vec![vec![0u64; j]; j];
        for w in self.z.windows(2) {
            n[w[0]][w[1]] += 1;
        }
        n
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HsmmState {
    pub path: SegmentPath,
    pub params: HsmmParams,
}

/// Backward messages in log space.
///
/// `b[t][i] = log p(y_{t+1:T} | segment in i ended at t)` for `t = 0..=T`,
/// `bstar[t][i] = log p(y_{t+1:T} | segment in i starts at t+1)` for `t < T`.
#[derive(Debug, Clone, PartialEq)]
pub struct HsmmMessages {
    pub b: Vec<Vec<f64>>,
    pub bstar: Vec<Vec<f64>>,
}

/// Everything the messages and the sampler need, precomputed from `(params, y)`.
#[derive(Debug, Clone)]
pub struct HsmmModel {
    log_pi: Vec<Vec<f64>>,
    log_init: Vec<f64>,
    tables: Vec<DurationTable>,
    cum: Vec<Vec<f64>>,
    t_len: usize,
}

impl HsmmModel {
    pub fn new(params: &HsmmParams, y: &[f64]) -> Result<Self> {
        params.validate()?;
        if y.is_empty() {
            return Err(invalid("observation sequence is empty"));
        }
        let tables = params
            .durations
            .iter()
            .map(|law| DurationTable::new(law.clone(), y.len(), params.max_duration))
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(params.log_pi(), params.init.iter().map(|&p| libm::log(p)).collect(), tables, &params.theta, params.sigma2, y)
    }

    /// Builds a model from arbitrary duration tables (used by oracles).
    pub fn from_parts(
        log_pi: Vec<Vec<f64>>,
        log_init: Vec<f64>,
        tables: Vec<DurationTable>,
        theta: &[f64],
        sigma2: f64,
        y: &[f64],
    ) -> Result<Self> {
        let j = theta.len();
        if log_pi.len() != j || log_init.len() != j || tables.len() != j {
            return Err(invalid("HSMM model parts disagree on the number of states"));
        }
        if tables.iter().any(|t| t.horizon() < y.len()) {
            return Err(invalid("duration tables must cover the sequence length"));
        }
        let cum = theta
            .iter()
            .map(|&th| {
                let ll: Vec<f64> = y.iter().map(|&v| normal_logpdf(v, th, sigma2)).collect();
                prefix_sums(&ll)
            })
            .collect();
        Ok(Self { log_pi, log_init, tables, cum, t_len: y.len() })
    }

    fn seg(&self, i: usize, start: usize, end: usize) -> f64 {
        self.cum[i][end] - self.cum[i][start]
    }

    pub fn num_states(&self) -> usize {
        self.log_init.len()
    }

    /// Largest mass discarded by the duration window.
    pub fn window_truncation(&self) -> f64 {
        self.tables.iter().map(|t| t.truncation()).fold(0.0, f64::max)
    }

    pub fn messages(&self) -> HsmmMessages {
        let j = self.num_states();
        let t_len = self.t_len;
        let mut b = vec![vec![f64::NEG_INFINITY; j]; t_len + 1];
        let mut bstar = vec![vec![f64::NEG_INFINITY; j]; t_len];
        b[t_len] = vec![0.0; j];
        let mut terms = Vec::new();
        for t in (0..t_len).rev() {
            for i in 0..j {
                let table = &self.tables[i];
                let dmax = (t_len - t).min(table.max_duration());
                terms.clear();
                for d in 1..=dmax {
                    terms.push(table.log_pmf(d) + self.seg(i, t, t + d) + b[t + d][i]);
                }
                terms.push(table.log_tail(t_len - t) + self.seg(i, t, t_len));
                bstar[t][i] = logsumexp(&terms);
            }
            for i in 0..j {
                terms.clear();
                terms.extend((0..j).map(|k| bstar[t][k] + self.log_pi[i][k]));
                b[t][i] = logsumexp(&terms);
            }
        }
        HsmmMessages { b, bstar }
    }

    /// `log p(y_{1:T})`.
    pub fn log_likelihood(&self, msgs: &HsmmMessages) -> f64 {
        let terms: Vec<f64> = (0..self.num_states()).map(|i| self.log_init[i] + msgs.bstar[0][i]).collect();
        logsumexp(&terms)
    }

    /// Forward segment-start messages: `fstar[t][i] = log p(y_{1:t}, segment in i starts at t+1)`.
    pub fn forward_starts(&self) -> Vec<Vec<f64>> {
        let j = self.num_states();
        let t_len = self.t_len;
        let mut fstar = vec![vec![f64::NEG_INFINITY; j]; t_len];
        fstar[0] = self.log_init.clone();
        let mut ends = vec![f64::NEG_INFINITY; j];
        let mut terms = Vec::new();
        for t in 1..t_len {
            for (i, end) in ends.iter_mut().enumerate() {
                let table = &self.tables[i];
                terms.clear();
                for d in 1..=t.min(table.max_duration()) {
                    terms.push(fstar[t - d][i] + table.log_pmf(d) + self.seg(i, t - d, t));
                }
                *end = logsumexp(&terms);
            }
            for i in 0..j {
                terms.clear();
                terms.extend((0..j).map(|k| ends[k] + self.log_pi[k][i]));
                fstar[t][i] = logsumexp(&terms);
            }
        }
        fstar
    }

    /// Posterior marginals `p(x_t = i | y_{1:T})`.
    pub fn state_marginals(&self, msgs: &HsmmMessages) -> Result<Vec<SimplexVector>> {
        let j = self.num_states();
        let t_len = self.t_len;
        let fstar = self.forward_starts();
        let log_z = self.log_likelihood(msgs);
        let mut diff = vec![vec![0.0; j]; t_len + 1];
        for t0 in 0..t_len {
            for i in 0..j {
                if fstar[t0][i] == f64::NEG_INFINITY {
                    continue;
                }
                let table = &self.tables[i];
                let dmax = (t_len - t0).min(table.max_duration());
                for d in 1..=dmax {
                    let w = libm::exp(fstar[t0][i] + table.log_pmf(d) + self.seg(i, t0, t0 + d) + msgs.b[t0 + d][i] - log_z);
                    diff[t0][i] += w;
                    diff[t0 + d][i] -= w;
                }
                let w = libm::exp(fstar[t0][i] + table.log_tail(t_len - t0) + self.seg(i, t0, t_len) - log_z);
                diff[t0][i] += w;
            }
        }
        let mut acc = vec![0.0; j];
        (0..t_len)
            .map(|t| {
                for i in 0..j {
                    acc[i] += diff[t][i];
                }
                SimplexVector::from_unnormalized(acc.iter().map(|&a| a.max(0.0)).collect())
            })
            .collect()
    }

    /// Exact joint draw of `(z, D)` given the messages.
    pub fn sample<R: Rng + ?Sized>(&self, msgs: &HsmmMessages, rng: &mut R) -> Result<SegmentPath> {
        let j = self.num_states();
        let t_len = self.t_len;
        let mut z: Vec<usize> = Vec::new();
        let mut d = Vec::new();
        let mut t = 0;
        let mut logw = vec![0.0; j];
        while t < t_len {
            for (k, w) in logw.iter_mut().enumerate() {
                let prior = match z.last() {
                    None => self.log_init[k],
                    Some(&prev) => self.log_pi[prev][k],
                };
                *w = prior + msgs.bstar[t][k];
            }
            let state = categorical_sample(SimplexVector::from_log_weights(&logw)?.as_slice(), rng);
            let table = &self.tables[state];
            let dmax = (t_len - t).min(table.max_duration());
            let mut dw: Vec<f64> = (1..=dmax)
                .map(|dd| table.log_pmf(dd) + self.seg(state, t, t + dd) + msgs.b[t + dd][state])
                .collect();
            dw.push(table.log_tail(t_len - t) + self.seg(state, t, t_len));
            let pick = categorical_sample(SimplexVector::from_log_weights(&dw)?.as_slice(), rng);
            let dur = if pick == dmax { table.sample_beyond(t_len - t, rng)? } else { pick + 1 };
            z.push(state);
            d.push(dur);
            t += dur;
        }
        Ok(SegmentPath { z, d })
    }
}

/// Backward messages for `(params, y)`.
pub fn hsmm_backward_messages(params: &HsmmParams, y: &[f64]) -> Result<HsmmMessages> {
    Ok(HsmmModel::new(params, y)?.messages())
}

/// Blocked draw of the segmentation.
pub fn blocked_sample_segments<R: Rng + ?Sized>(
    params: &HsmmParams,
    y: &[f64],
    msgs: &HsmmMessages,
    rng: &mut R,
) -> Result<SegmentPath> {
    HsmmModel::new(params, y)?.sample(msgs, rng)
}

/// Simulates a path and observations; the final segment is cut at `t_len`.
pub fn simulate_hsmm<R: Rng + ?Sized>(params: &HsmmParams, t_len: usize, rng: &mut R) -> Result<(SegmentPath, Vec<f64>)> {
    params.validate()?;
    if t_len == 0 {
        return Err(invalid("T must be at least 1"));
    }
    let tables = params
        .durations
        .iter()
        .map(|law| DurationTable::new(law.clone(), 1, None))
        .collect::<Result<Vec<_>>>()?;
    let mut z: Vec<usize> = Vec::new();
    let mut d = Vec::new();
    let mut t = 0;
    while t < t_len {
        let state = match z.last() {
            None => categorical_sample(params.init.as_slice(), rng),
            Some(&prev) if params.num_states() > 1 => categorical_sample(params.pi[prev].as_slice(), rng),
            Some(&prev) => prev,
        };
        let dur = tables[state].sample_beyond(0, rng)?;
        if z.last() == Some(&state) {
            *d.last_mut().expect("nonempty") += dur;
        } else {
            z.push(state);
            d.push(dur);
        }
        t += dur;
    }
    let path = SegmentPath { z, d };
    let y = path
        .expand(t_len)
        .iter()
        .map(|&s| normal_sample(params.theta[s], params.sigma2, rng).max(0.0))
        .collect();
    Ok((path, y))
}

/// Component labels `U_s` for each duration: `0` for Poisson, `1` for negative binomial.
pub fn duration_labels<R: Rng + ?Sized>(
    durations: &[usize],
    current: &DurationParams,
    form: NegBinForm,
    rng: &mut R,
) -> Result<Vec<usize>> {
    current.validate()?;
    durations
        .iter()
        .map(|&d| {
            let d = d as u64;
            let l1 = if current.phi > 0.0 {
                libm::log(current.phi) + crate::distributions::poisson_logpmf(d, current.lambda)?
            } else {
                f64::NEG_INFINITY
            };
            let l2 = if current.phi < 1.0 {
                libm::log1p(-current.phi) + crate::distributions::negbin_logpmf(d, current.r, current.nb_p, form)?
            } else {
                f64::NEG_INFINITY
            };
            let p = SimplexVector::from_log_weights(&[l1, l2])?;
            Ok(categorical_sample(p.as_slice(), rng))
        })
        .collect()
}

/// One duration-mixture pass for a single state: labels, then `λ`, `ϕ`, `φ`.
pub fn sample_duration_params_state<R: Rng + ?Sized>(
    durations: &[usize],
    hyper: &DurationHyper,
    current: &DurationParams,
    form: NegBinForm,
    rng: &mut R,
) -> Result<DurationParams> {
    hyper.validate()?;
    let pois = PoissonRate { hyper: hyper.lambda };
    let nb = NegBinProb { hyper: hyper.nb_p, r: hyper.r, form };
    let labels = duration_labels(durations, current, form, rng)?;
    let (mut s1, mut s2) = (Vec::new(), Vec::new());
    for (&d, &u) in durations.iter().zip(&labels) {
        if u == 0 {
            s1.push(d as f64);
        } else {
            s2.push(d as f64);
        }
    }
    let lambda = if s1.is_empty() { pois.sample_prior(rng)? } else { pois.sample_posterior(&s1, rng)? };
    let nb_p = if s2.is_empty() { nb.sample_prior(rng)? } else { nb.sample_posterior(&s2, rng)? };
    let phi = crate::distributions::beta_sample(hyper.phi.a + s1.len() as f64, hyper.phi.b + s2.len() as f64, rng)?;
    Ok(DurationParams { phi, lambda, r: hyper.r, nb_p })
}

/// Duration-parameter update for every state.
pub fn sample_duration_params<R: Rng + ?Sized>(
    durations_by_state: &[Vec<usize>],
    hyper: &[DurationHyper],
    current: &[DurationParams],
    form: NegBinForm,
    rng: &mut R,
) -> Result<Vec<DurationParams>> {
    durations_by_state
        .iter()
        .zip(hyper)
        .zip(current)
        .map(|((d, h), c)| sample_duration_params_state(d, h, c, form, rng))
        .collect()
}

/// Blocked segments, then `θ`, then the off-diagonal rows of `π`, then `w`.
pub fn gibbs_sweep_hsmm<R: Rng + ?Sized>(state: HsmmState, y: &[f64], rng: &mut R) -> Result<HsmmState> {
    let mut params = state.params;
    let model = HsmmModel::new(&params, y)?;
    let msgs = model.messages();
    let path = model.sample(&msgs, rng)?;
    let j = params.num_states();
    let x = path.expand(y.len());
    let (sums, counts) = crate::hmm::emission_stats(&x, y, j);
    for k in 0..j {
        let post = conj_update_normal(params.prior.emission[k], sums[k], counts[k], params.sigma2)?;
        params.theta[k] = normal_sample(post.mean, post.var, rng);
    }
    if j > 1 {
        let n = path.transition_counts(j);
        for k in 0..j {
            let mut alpha = params.prior.alpha[k].clone();
            alpha[k] = 0.0;
            params.pi[k] = dirichlet_sample(&conj_update_dirichlet(&alpha, &n[k])?, rng)?;
        }
    }
    let by_state = path.durations_by_state(j);
    for k in 0..j {
        if let DurationLaw::Mixture { params: w, form } = params.durations[k] {
            let w = sample_duration_params_state(&by_state[k], &params.prior.duration[k], &w, form, rng)?;
            params.durations[k] = DurationLaw::Mixture { params: w, form };
        }
    }
    Ok(HsmmState { path, params })
}

#[cfg(test)]
#[path = "hsmm_tests.rs"]
mod tests;
