use alloc::vec;
use alloc::vec::Vec;

use super::factorial::FactorialParticle;
use super::Ensemble;

/// Per-chain summaries of a factorial ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainEstimate {
    /// Weighted particle vote; ties go to the lowest state index.
    pub map_state: usize,
    /// Weighted vote fraction of each state.
    pub votes: Vec<f64>,
    /// Posterior-mean emission level `θ_j` of each state.
    pub theta_mean: Vec<f64>,
    /// Posterior-mean emission of the chain at the current step.
    pub power_mean: f64,
}

/// MAP state and posterior-mean power for every chain. Chains of particles
/// that have not seen an observation vote for nothing.
pub fn estimators(ensemble: &Ensemble<FactorialParticle>) -> Vec<ChainEstimate> {
    let Some(first) = ensemble.particles.first() else {
        return Vec::new();
    };
    (0..first.params.len())
        .map(|k| {
            let j = first.params[k].theta.len();
            let mut votes = vec![0.0; j];
            let mut theta_mean = vec![0.0; j];
            let mut power_mean = 0.0;
            for (p, &w) in ensemble.particles.iter().zip(ensemble.weights.iter()) {
                if let Some(x) = &p.x {
                    votes[x[k]] += w;
                }
                for (m, &t) in theta_mean.iter_mut().zip(&p.params[k].theta) {
                    *m += w * t;
                }
                power_mean += w * p.y[k];
            }
            let mut map_state = 0;
            for s in 1..j {
                if votes[s] > votes[map_state] {
                    map_state = s;
                }
            }
            ChainEstimate { map_state, votes, theta_mean, power_mean }
        })
        .collect()
}
