use alloc::vec::Vec;

use rand::Rng;

use super::resample::{ancestors, systematic_resample};
use super::Ensemble;
use crate::distributions::{categorical_sample, SimplexVector};
use crate::error::{Error, Result};
use crate::hmm::HmmParams;
use crate::numeric::{logsumexp, normal_logpdf};
use crate::rng::{Stream, StreamSeed};

/// Model hooks for the generic filters. `prev = None` means the first step.
pub trait StateSpaceModel {
    type State: Clone;

    /// Draws `x_n ~ q_n(· | x_{n-1})` and returns it with the log incremental
    /// weight `log p(x_n | x_{n-1}) + log p(y_n | x_n) - log q_n(x_n | x_{n-1})`.
    fn propose(&self, prev: Option<&Self::State>, y: f64, rng: &mut Stream) -> Result<(Self::State, f64)>;

    /// `log p(y_n | x_{n-1})`.
    fn log_predictive(&self, prev: Option<&Self::State>, y: f64) -> Result<f64>;

    /// Draws from `p(x_n | x_{n-1}, y_n)`.
    fn sample_optimal(&self, prev: Option<&Self::State>, y: f64, rng: &mut Stream) -> Result<Self::State>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Proposal {
    /// Transition kernel; the weight is the emission likelihood.
    Prior,
    /// `p(x_n | x_{n-1}, y_n)`; the weight is the predictive likelihood.
    #[default]
    Optimal,
}

/// A finite-state HMM with known parameters.
#[derive(Debug, Clone)]
pub struct KnownHmm {
    pub params: HmmParams,
    pub proposal: Proposal,
}

fn transition_row(params: &HmmParams, x_prev: Option<usize>) -> &SimplexVector {
    match x_prev {
        Some(i) => &params.pi[i],
        None => &params.init,
    }
}

pub(crate) fn optimal_log_terms(row: &[f64], theta: &[f64], sigma2: f64, y: f64) -> Vec<f64> {
    row.iter()
        .zip(theta)
        .map(|(&p, &th)| libm::log(p) + normal_logpdf(y, th, sigma2))
        .collect()
}

/// Optimal proposal over `x_n` and the predictive `log p(y_n | x_{n-1})`.
pub fn optimal_proposal_hmm(params: &HmmParams, x_prev: Option<usize>, y: f64) -> Result<(SimplexVector, f64)> {
    if let Some(i) = x_prev {
        if i >= params.num_states() {
            return Err(Error::OutOfRange(alloc::format!("state {i}")));
        }
    }
    let terms = optimal_log_terms(transition_row(params, x_prev).as_slice(), &params.theta, params.sigma2, y);
    let lse = logsumexp(&terms);
    Ok((SimplexVector::from_log_weights(&terms)?, lse))
}

impl StateSpaceModel for KnownHmm {
    type State = usize;

    fn propose(&self, prev: Option<&usize>, y: f64, rng: &mut Stream) -> Result<(usize, f64)> {
        match self.proposal {
            Proposal::Prior => {
                let x = categorical_sample(transition_row(&self.params, prev.copied()).as_slice(), rng);
                Ok((x, normal_logpdf(y, self.params.theta[x], self.params.sigma2)))
            }
            Proposal::Optimal => {
                let (q, lse) = optimal_proposal_hmm(&self.params, prev.copied(), y)?;
                Ok((categorical_sample(q.as_slice(), rng), lse))
            }
        }
    }

    fn log_predictive(&self, prev: Option<&usize>, y: f64) -> Result<f64> {
        Ok(optimal_proposal_hmm(&self.params, prev.copied(), y)?.1)
    }

    fn sample_optimal(&self, prev: Option<&usize>, y: f64, rng: &mut Stream) -> Result<usize> {
        let (q, _) = optimal_proposal_hmm(&self.params, prev.copied(), y)?;
        Ok(categorical_sample(q.as_slice(), rng))
    }
}

fn normalise(logw: &[f64], step: usize) -> Result<SimplexVector> {
    SimplexVector::from_log_weights(logw).map_err(|_| Error::Degenerate { step })
}

fn weighted_propagate<M: StateSpaceModel>(
    model: &M,
    prev: Option<&Ensemble<M::State>>,
    n_particles: usize,
    y: f64,
    base: StreamSeed,
) -> Result<(Vec<M::State>, Vec<f64>)> {
    let mut states = Vec::with_capacity(n_particles);
    let mut logw = Vec::with_capacity(n_particles);
    for i in 0..n_particles {
        let mut rng = base.child(i as u64).stream();
        let (x, la) = model.propose(prev.map(|e| &e.particles[i]), y, &mut rng)?;
        let lw = prev.map_or(0.0, |e| libm::log(e.weights[i]));
        states.push(x);
        logw.push(lw + la);
    }
    Ok((states, logw))
}

/// First step of SIS: `N` draws from `q_1`, weighted by `α_1`.
pub fn sis_init<M: StateSpaceModel, R: Rng + ?Sized>(
    model: &M,
    n_particles: usize,
    y: f64,
    rng: &mut R,
) -> Result<Ensemble<M::State>> {
    if n_particles == 0 {
        return Err(Error::InvalidParameter("need at least one particle".into()));
    }
    let base = StreamSeed::new(rng.random());
    let (particles, logw) = weighted_propagate(model, None, n_particles, y, base)?;
    Ok(Ensemble { particles, weights: normalise(&logw, 1)?, n: 1 })
}

pub fn sis_step<M: StateSpaceModel, R: Rng + ?Sized>(
    ensemble: Ensemble<M::State>,
    model: &M,
    y: f64,
    rng: &mut R,
) -> Result<Ensemble<M::State>> {
    let base = StreamSeed::new(rng.random());
    let n = ensemble.n + 1;
    let (particles, logw) = weighted_propagate(model, Some(&ensemble), ensemble.len(), y, base)?;
    Ok(Ensemble { particles, weights: normalise(&logw, n)?, n })
}

fn resample_all<S: Clone, R: Rng + ?Sized>(ens: Ensemble<S>, rng: &mut R) -> Ensemble<S> {
    let anc = ancestors(&systematic_resample(&ens.weights, rng));
    let particles = anc.iter().map(|&a| ens.particles[a].clone()).collect();
    Ensemble { particles, weights: SimplexVector::uniform(anc.len()), n: ens.n }
}

pub fn sir_init<M: StateSpaceModel, R: Rng + ?Sized>(
    model: &M,
    n_particles: usize,
    y: f64,
    rng: &mut R,
) -> Result<Ensemble<M::State>> {
    let ens = sis_init(model, n_particles, y, rng)?;
    Ok(resample_all(ens, rng))
}

/// SIS step followed by systematic resampling.
pub fn sir_step<M: StateSpaceModel, R: Rng + ?Sized>(
    ensemble: Ensemble<M::State>,
    model: &M,
    y: f64,
    rng: &mut R,
) -> Result<Ensemble<M::State>> {
    let ens = sis_step(ensemble, model, y, rng)?;
    Ok(resample_all(ens, rng))
}

/// First APF step: exact draws from `p(x_1 | y_1)` with uniform weights.
pub fn apf_init<M: StateSpaceModel, R: Rng + ?Sized>(
    model: &M,
    n_particles: usize,
    y: f64,
    rng: &mut R,
) -> Result<Ensemble<M::State>> {
    if n_particles == 0 {
        return Err(Error::InvalidParameter("need at least one particle".into()));
    }
    let base = StreamSeed::new(rng.random());
    let particles = (0..n_particles)
        .map(|i| model.sample_optimal(None, y, &mut base.child(i as u64).stream()))
        .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble { particles, weights: SimplexVector::uniform(n_particles), n: 1 })
}

/// Weight by `p(y_n | x_{n-1})`, resample, then propagate with the optimal proposal.
pub fn apf_step<M: StateSpaceModel, R: Rng + ?Sized>(
    ensemble: Ensemble<M::State>,
    model: &M,
    y: f64,
    rng: &mut R,
) -> Result<Ensemble<M::State>> {
    let n = ensemble.n + 1;
    let base = StreamSeed::new(rng.random());
    let logw = ensemble
        .particles
        .iter()
        .zip(ensemble.weights.iter())
        .map(|(x, &w)| Ok(libm::log(w) + model.log_predictive(Some(x), y)?))
        .collect::<Result<Vec<f64>>>()?;
    let w = normalise(&logw, n)?;
    let anc = ancestors(&systematic_resample(&w, rng));
    let particles = anc
        .iter()
        .enumerate()
        .map(|(i, &a)| model.sample_optimal(Some(&ensemble.particles[a]), y, &mut base.child(i as u64).stream()))
        .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble { weights: SimplexVector::uniform(particles.len()), particles, n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::NormalPrior;
    use crate::hmm::{filtering_marginals, forward_messages, simulate_hmm, HmmPrior};
    use alloc::vec;

    fn hmm(pi: [[f64; 2]; 2], theta: [f64; 2], sigma2: f64) -> HmmParams {
        let prior = HmmPrior::shared_alpha(vec![1.0, 1.0], vec![NormalPrior::new(0.0, 100.0).unwrap(); 2]);
        HmmParams::new(
            pi.iter().map(|r| SimplexVector::new(r.to_vec()).unwrap()).collect(),
            theta.to_vec(),
            sigma2,
            prior,
        )
        .unwrap()
    }

    fn marginal(ens: &Ensemble<usize>, j: usize) -> SimplexVector {
        let mut m = vec![0.0; j];
        for (x, w) in ens.particles.iter().zip(ens.weights.iter()) {
            m[*x] += w;
        }
        SimplexVector::from_unnormalized(m).unwrap()
    }

    #[test]
    fn optimal_proposal_matches_direct_normalisation() {
        let prior = HmmPrior::shared_alpha(vec![1.0; 3], vec![NormalPrior::new(0.0, 100.0).unwrap(); 3]);
        let pi = vec![
            SimplexVector::new(vec![0.2, 0.5, 0.3]).unwrap(),
            SimplexVector::new(vec![0.6, 0.1, 0.3]).unwrap(),
            SimplexVector::new(vec![0.25, 0.25, 0.5]).unwrap(),
        ];
        let p = HmmParams::new(pi, vec![0.0, 1.5, 3.0], 0.8, prior).unwrap();
        let y = 1.1;
        let (q, lp) = optimal_proposal_hmm(&p, Some(1), y).unwrap();
        let dens = |m: f64| (-(y - m) * (y - m) / 1.6).exp() / (2.0 * core::f64::consts::PI * 0.8).sqrt();
        let raw = [0.6 * dens(0.0), 0.1 * dens(1.5), 0.3 * dens(3.0)];
        let tot: f64 = raw.iter().sum();
        for k in 0..3 {
            assert!((q[k] - raw[k] / tot).abs() < 1e-14);
        }
        assert!((lp - tot.ln()).abs() < 1e-13);
    }

    #[test]
    fn flat_emissions_give_transition_row() {
        let p = hmm([[0.3, 0.7], [0.9, 0.1]], [2.0, 2.0], 1.0);
        let (q, _) = optimal_proposal_hmm(&p, Some(0), 17.0).unwrap();
        assert!((q[0] - 0.3).abs() < 1e-14 && (q[1] - 0.7).abs() < 1e-14);
    }

    #[test]
    fn single_state_is_point_mass() {
        let prior = HmmPrior::shared_alpha(vec![1.0], vec![NormalPrior::new(0.0, 1.0).unwrap()]);
        let p = HmmParams::new(vec![SimplexVector::uniform(1)], vec![3.0], 2.0, prior).unwrap();
        let (q, lp) = optimal_proposal_hmm(&p, Some(0), 4.0).unwrap();
        assert_eq!(q.as_slice(), &[1.0]);
        assert!((lp - normal_logpdf(4.0, 3.0, 2.0)).abs() < 1e-15);
        let model = KnownHmm { params: p, proposal: Proposal::Prior };
        let mut rng = StreamSeed::new(1).stream();
        let mut e = sis_init(&model, 50, 1.0, &mut rng).unwrap();
        for y in [2.0, 5.0, 3.0] {
            e = sis_step(e, &model, y, &mut rng).unwrap();
            assert!(e.weights.iter().all(|&w| (w - 1.0 / 50.0).abs() < 1e-15));
        }
    }

    #[test]
    fn sis_optimal_weights_telescope() {
        let p = hmm([[0.8, 0.2], [0.3, 0.7]], [0.0, 2.0], 1.0);
        let model = KnownHmm { params: p.clone(), proposal: Proposal::Optimal };
        let ys = [0.1, 1.9, 2.2, -0.3, 1.0];
        let mut rng = StreamSeed::new(9).stream();
        let mut paths: Vec<Vec<usize>> = Vec::new();
        let mut e = sis_init(&model, 40, ys[0], &mut rng).unwrap();
        paths.extend(e.particles.iter().map(|&x| vec![x]));
        for &y in &ys[1..] {
            e = sis_step(e, &model, y, &mut rng).unwrap();
            for (p, &x) in paths.iter_mut().zip(&e.particles) {
                p.push(x);
            }
        }
        let logw: Vec<f64> = paths
            .iter()
            .map(|path| {
                let mut s = optimal_proposal_hmm(&p, None, ys[0]).unwrap().1;
                for t in 1..ys.len() {
                    s += optimal_proposal_hmm(&p, Some(path[t - 1]), ys[t]).unwrap().1;
                }
                s
            })
            .collect();
        let expect = SimplexVector::from_log_weights(&logw).unwrap();
        for i in 0..40 {
            assert!((e.weights[i] - expect[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn apf_tracks_exact_filter() {
        let p = hmm([[0.9, 0.1], [0.2, 0.8]], [0.0, 1.5], 1.0);
        let mut rng = StreamSeed::new(21).stream();
        let (_, y) = simulate_hmm(&p, 50, &mut rng).unwrap();
        let exact = filtering_marginals(&forward_messages(&p, &y).unwrap()).unwrap();
        let model = KnownHmm { params: p, proposal: Proposal::Optimal };
        let mut e = apf_init(&model, 1000, y[0], &mut rng).unwrap();
        let mut tv = marginal(&e, 2).tv_distance(&exact[0]);
        for t in 1..50 {
            e = apf_step(e, &model, y[t], &mut rng).unwrap();
            assert!(e.weights.iter().all(|&w| w == 1.0 / 1000.0));
            tv += marginal(&e, 2).tv_distance(&exact[t]);
        }
        assert!(tv / 50.0 < 0.05, "{}", tv / 50.0);
    }

    #[test]
    fn sir_tracks_exact_filter() {
        let p = hmm([[0.9, 0.1], [0.2, 0.8]], [0.0, 1.5], 1.0);
        let mut rng = StreamSeed::new(22).stream();
        let (_, y) = simulate_hmm(&p, 30, &mut rng).unwrap();
        let exact = filtering_marginals(&forward_messages(&p, &y).unwrap()).unwrap();
        let model = KnownHmm { params: p, proposal: Proposal::Prior };
        let mut e = sis_init(&model, 2000, y[0], &mut rng).unwrap();
        let mut tv = marginal(&e, 2).tv_distance(&exact[0]);
        for t in 1..30 {
            e = sir_step(e, &model, y[t], &mut rng).unwrap();
            tv += marginal(&e, 2).tv_distance(&exact[t]);
        }
        assert!(tv / 30.0 < 0.05);
    }
}
