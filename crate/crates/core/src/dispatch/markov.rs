use alloc::vec;
use alloc::vec::Vec;

use crate::distributions::SimplexVector;
use crate::error::{Error, Result};
use crate::linalg::{solve_real, Matrix};

fn reach(p: &Matrix, from: usize) -> Vec<bool> {
    let n = p.rows();
    let mut seen = vec![false; n];
    let mut stack = vec![from];
    seen[from] = true;
    while let Some(i) = stack.pop() {
        for (j, &v) in p.row(i).iter().enumerate() {
            if v > 0.0 && !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen
}

/// True when the chain has exactly one closed communicating class, i.e. some
/// state is reachable from every state. Transient states are allowed.
pub fn is_unichain(p: &Matrix) -> bool {
    let n = p.rows();
    let sets: Vec<Vec<bool>> = (0..n).map(|i| reach(p, i)).collect();
    (0..n).any(|s| sets.iter().all(|r| r[s]))
}

/// Invariant pmf of a unichain kernel, by a dense solve of `(Pᵀ - I) π = 0`
/// with the last equation replaced by `Σ π = 1`.
pub fn invariant_pmf(p: &Matrix) -> Result<SimplexVector> {
    let n = p.rows();
    if p.cols() != n || n == 0 {
        return Err(Error::DimensionMismatch { expected: n, found: p.cols() });
    }
    if !is_unichain(p) {
        return Err(Error::Reducible);
    }
    let mut a = p.transpose();
    for i in 0..n {
        a[(i, i)] -= 1.0;
    }
    a.row_mut(n - 1).fill(1.0);
    let mut rhs = vec![0.0; n];
    rhs[n - 1] = 1.0;
    let mut pi = solve_real(&a, &rhs)?;
    // One step of iterative refinement.
    let r: Vec<f64> = a.mul_vec(&pi).iter().zip(&rhs).map(|(ax, b)| b - ax).collect();
    let d = solve_real(&a, &r)?;
    for (x, dx) in pi.iter_mut().zip(d) {
        *x = (*x + dx).max(0.0);
    }
    SimplexVector::from_unnormalized(pi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamSeed;
    use rand::Rng;

    #[test]
    fn doubly_stochastic_is_uniform() {
        let p = Matrix::from_rows(&[vec![0.2, 0.5, 0.3], vec![0.3, 0.2, 0.5], vec![0.5, 0.3, 0.2]]).unwrap();
        let pi = invariant_pmf(&p).unwrap();
        assert!(pi.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn reducible_is_rejected() {
        let p = Matrix::identity(3);
        assert!(matches!(invariant_pmf(&p), Err(Error::Reducible)));
    }

    #[test]
    fn transient_states_get_zero_mass() {
        let p = Matrix::from_rows(&[vec![0.5, 0.5, 0.0], vec![0.0, 0.3, 0.7], vec![0.0, 0.6, 0.4]]).unwrap();
        let pi = invariant_pmf(&p).unwrap();
        assert_eq!(pi[0], 0.0);
        assert!((pi[1] - 6.0 / 13.0).abs() < 1e-15);
    }

    #[test]
    fn agrees_with_power_iteration() {
        let mut rng = StreamSeed::new(3).stream();
        for _ in 0..20 {
            let rows: Vec<Vec<f64>> = (0..3)
                .map(|_| {
                    let r: Vec<f64> = (0..3).map(|_| rng.random::<f64>() + 0.05).collect();
                    let s: f64 = r.iter().sum();
                    r.into_iter().map(|v| v / s).collect()
                })
                .collect();
            let p = Matrix::from_rows(&rows).unwrap();
            let pi = invariant_pmf(&p).unwrap();
            let mut mu = vec![1.0, 0.0, 0.0];
            for _ in 0..2000 {
                mu = p.left_mul(&mu);
            }
            let fixed = p.left_mul(pi.as_slice());
            for k in 0..3 {
                assert!((pi[k] - mu[k]).abs() < 1e-13);
                assert!((fixed[k] - pi[k]).abs() < 1e-12);
            }
        }
    }
}
