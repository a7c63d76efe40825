use alloc::vec::Vec;

use rand::Rng;

use super::sampling::beta_sample;
use super::simplex::SimplexVector;
use crate::error::{invalid, Result};

/// GEM(γ) weights, truncated once the unassigned mass drops below `epsilon`.
/// The leftover mass is added to the last atom.
pub fn stick_breaking<R: Rng + ?Sized>(gamma: f64, epsilon: f64, rng: &mut R) -> Result<SimplexVector> {
    if !(gamma > 0.0) || !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid("stick breaking needs gamma > 0 and 0 < epsilon < 1"));
    }
    let mut weights = Vec::new();
    let mut residual = 1.0;
    loop {
        let b = beta_sample(1.0, gamma, rng)?;
        weights.push(b * residual);
        residual *= 1.0 - b;
        if residual < epsilon {
            break;
        }
    }
    *weights.last_mut().expect("at least one atom") += residual;
    SimplexVector::from_unnormalized(weights)
}

/// Chinese-restaurant predictive law: existing tables then a new one.
pub fn crp_predictive(table_counts: &[u64], gamma: f64) -> Result<SimplexVector> {
    if !(gamma > 0.0) {
        return Err(invalid("crp concentration must be positive"));
    }
    let n: u64 = table_counts.iter().sum();
    let denom = n as f64 + gamma;
    let mut w: Vec<f64> = table_counts.iter().map(|&c| c as f64 / denom).collect();
    w.push(gamma / denom);
    SimplexVector::from_unnormalized(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamSeed;

    #[test]
    fn crp_examples() {
        assert_eq!(crp_predictive(&[], 1.0).unwrap().as_slice(), &[1.0]);
        let p = crp_predictive(&[3, 1], 1.0).unwrap();
        for (a, b) in p.iter().zip([0.6, 0.2, 0.2]) {
            assert!((a - b).abs() < 1e-15);
        }
        let p = crp_predictive(&[1, 1, 1], 3.0).unwrap();
        for (a, b) in p.iter().zip([1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0, 0.5]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn small_gamma_concentrates_first_atom() {
        let mut rng = StreamSeed::new(9).stream();
        let w = stick_breaking(1e-4, 1e-6, &mut rng).unwrap();
        assert!(w[0] > 0.99);
    }

    #[test]
    fn partial_sums_increase_to_one() {
        let mut rng = StreamSeed::new(10).stream();
        let w = stick_breaking(1.0, 1e-6, &mut rng).unwrap();
        let mut acc = 0.0;
        for &x in w.iter() {
            assert!(x > 0.0);
            acc += x;
        }
        assert!((acc - 1.0).abs() < 1e-12);
    }

    #[test]
    fn atom_count_matches_independent_simulation() {
        // With residual ∏(1-b_k), b_k ~ Beta(1, γ), the residual after k atoms
        // is a product of Beta(γ, 1) variables, i.e. exp(-Gamma(k, γ)).
        // So K = 1 + (number of Poisson(γ) arrivals before time -ln ε).
        let gamma = 5.0;
        let eps: f64 = 0.01;
        let reps = 100_000;
        let mut rng = StreamSeed::new(11).stream();
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..reps {
            let k = stick_breaking(gamma, eps, &mut rng).unwrap().len() as f64;
            sum += k;
            sq += k * k;
        }
        let mean = sum / reps as f64;
        let sd = libm::sqrt(sq / reps as f64 - mean * mean);
        let expected = 1.0 + gamma * -libm::log(eps);
        assert!((mean - expected).abs() < 3.0 * sd / libm::sqrt(reps as f64), "{mean} vs {expected}");
    }
}
