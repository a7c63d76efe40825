use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::distributions::SimplexVector;

/// When to resample.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ResamplePolicy {
    #[default]
    EveryStep,
    /// Resample only when the effective sample size drops below `fraction · N`.
    EssBelow(f64),
}

impl ResamplePolicy {
    pub fn should_resample(&self, weights: &SimplexVector) -> bool {
        match *self {
            ResamplePolicy::EveryStep => true,
            ResamplePolicy::EssBelow(f) => effective_sample_size(weights) < f * weights.len() as f64,
        }
    }
}

pub fn effective_sample_size(weights: &SimplexVector) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

/// Offspring counts from systematic resampling: `U_1 ~ U[0, 1/N)`,
/// `U_i = U_1 + (i-1)/N`.
pub fn systematic_resample<R: Rng + ?Sized>(weights: &SimplexVector, rng: &mut R) -> Vec<usize> {
    let n = weights.len();
    let step = 1.0 / n as f64;
    let u1 = rng.random::<f64>() * step;
    let mut counts = vec![0usize; n];
    let mut cum = 0.0;
    let mut i = 0;
    for j in 0..n {
        let u = u1 + j as f64 * step;
        while i < n - 1 && cum + weights[i] <= u {
            cum += weights[i];
            i += 1;
        }
        counts[i] += 1;
    }
    counts
}

/// Ancestor index of every new particle, in increasing order.
pub(crate) fn ancestors(counts: &[usize]) -> Vec<usize> {
    counts.iter().enumerate().flat_map(|(i, &c)| core::iter::repeat_n(i, c)).collect()
}
