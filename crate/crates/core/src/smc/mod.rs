//! Sequential Monte Carlo: resampling, generic SIS/SIR/APF steps, particle
//! learning for the Bayesian HMM and the factorial Bayesian particle filter.

mod estimators;
mod factorial;
mod generic;
mod learning;
mod resample;

pub use estimators::{estimators, ChainEstimate};
pub use factorial::{
    conditional_emission_sample, factorial_state_proposal, fbpf_init, fbpf_step, FactorialConfig,
    FactorialParticle, DEFAULT_JOINT_CAP,
};
pub use generic::{
    apf_init, apf_step, optimal_proposal_hmm, sir_init, sir_step, sis_init, sis_step, KnownHmm,
    Proposal, StateSpaceModel,
};
pub use learning::{
    bpf_init, bpf_step, pl_sample_params, pl_update_stats, ChainParams, ChainParticle, ChainPrior,
    SufficientStats,
};
pub use resample::{effective_sample_size, systematic_resample, ResamplePolicy};

use alloc::vec::Vec;

use crate::distributions::SimplexVector;

/// Particles, their normalised weights and the time index `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble<P> {
    pub particles: Vec<P>,
    pub weights: SimplexVector,
    pub n: usize,
}

impl<P> Ensemble<P> {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }
}

/// Applies `f` to `0..n`, in parallel when the `parallel` feature is on.
/// Output order is the index order either way.
#[cfg(feature = "parallel")]
pub(crate) fn map_indexed<T: Send, F: Fn(usize) -> T + Sync + Send>(n: usize, f: F) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_indexed<T, F: Fn(usize) -> T>(n: usize, f: F) -> Vec<T> {
    (0..n).map(f).collect()
}
