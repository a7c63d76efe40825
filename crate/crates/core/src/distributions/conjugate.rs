use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};

/// Normal prior on an emission mean: `N(mean, var)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalPrior {
    pub mean: f64,
    pub var: f64,
}

impl NormalPrior {
    pub fn new(mean: f64, var: f64) -> Result<Self> {
        if !(var > 0.0) || !mean.is_finite() {
            return Err(invalid("normal prior needs finite mean and var > 0"));
        }
        Ok(Self { mean, var })
    }
}

/// `Gamma(shape, rate)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaHyper {
    pub shape: f64,
    pub rate: f64,
}

/// `Beta(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaHyper {
    pub a: f64,
    pub b: f64,
}

/// Posterior of a normal mean with known variance `sigma2` after observing
/// `obs_count` values summing to `obs_sum`.
pub fn conj_update_normal(
    prior: NormalPrior,
    obs_sum: f64,
    obs_count: u64,
    sigma2: f64,
) -> Result<NormalPrior> {
    if !(sigma2 > 0.0) {
        return Err(invalid("sigma2 must be positive"));
    }
    if obs_count == 0 {
        return Ok(prior);
    }
    let var = 1.0 / (1.0 / prior.var + obs_count as f64 / sigma2);
    let mean = (prior.mean / prior.var + obs_sum / sigma2) * var;
    Ok(NormalPrior { mean, var })
}

/// `Dir(α) → Dir(α + c)`.
pub fn conj_update_dirichlet(alpha: &[f64], counts: &[u64]) -> Result<Vec<f64>> {
    if alpha.len() != counts.len() {
        return Err(Error::DimensionMismatch {
            expected: alpha.len(),
            found: counts.len(),
        });
    }
    Ok(alpha.iter().zip(counts).map(|(a, &c)| a + c as f64).collect())
}

/// Gamma prior on a Poisson rate: `(shape + Σd, rate + n)`.
pub fn conj_update_gamma_poisson(hyper: GammaHyper, data_sum: u64, data_n: u64) -> Result<GammaHyper> {
    if !(hyper.shape > 0.0 && hyper.rate > 0.0) {
        return Err(invalid("gamma hyperparameters must be positive"));
    }
    Ok(GammaHyper {
        shape: hyper.shape + data_sum as f64,
        rate: hyper.rate + data_n as f64,
    })
}

/// Beta prior on a negative-binomial probability: `(a + Σd, b + r·n)`.
pub fn conj_update_beta_negbin(hyper: BetaHyper, data_sum: u64, data_n: u64, r: u32) -> Result<BetaHyper> {
    if !(hyper.a > 0.0 && hyper.b > 0.0) || r == 0 {
        return Err(invalid("beta hyperparameters must be positive and r >= 1"));
    }
    Ok(BetaHyper {
        a: hyper.a + data_sum as f64,
        b: hyper.b + r as f64 * data_n as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_update_examples() {
        let p = conj_update_normal(NormalPrior::new(0.0, 1.0).unwrap(), 2.0, 1, 1.0).unwrap();
        assert!((p.mean - 1.0).abs() < 1e-15 && (p.var - 0.5).abs() < 1e-15);
        let prior = NormalPrior::new(5.0, 2.0).unwrap();
        assert_eq!(conj_update_normal(prior, 0.0, 0, 1.0).unwrap(), prior);
        assert!(conj_update_normal(prior, 0.0, 0, 0.0).is_err());
    }

    #[test]
    fn dirichlet_update_examples() {
        assert_eq!(conj_update_dirichlet(&[1.0, 1.0, 1.0], &[0, 0, 0]).unwrap(), [1.0, 1.0, 1.0]);
        assert_eq!(conj_update_dirichlet(&[1.0, 1.0], &[3, 7]).unwrap(), [4.0, 8.0]);
        assert_eq!(conj_update_dirichlet(&[0.0, 1.0], &[0, 2]).unwrap(), [0.0, 3.0]);
        assert!(conj_update_dirichlet(&[1.0], &[1, 2]).is_err());
    }

    #[test]
    fn gamma_and_beta_examples() {
        let g = GammaHyper { shape: 2.0, rate: 3.0 };
        assert_eq!(conj_update_gamma_poisson(g, 10, 4).unwrap(), GammaHyper { shape: 12.0, rate: 7.0 });
        let one = GammaHyper { shape: 1.0, rate: 1.0 };
        assert_eq!(conj_update_gamma_poisson(one, 0, 0).unwrap(), one);
        let b = BetaHyper { a: 1.0, b: 1.0 };
        assert_eq!(conj_update_beta_negbin(b, 12, 2, 3).unwrap(), BetaHyper { a: 13.0, b: 7.0 });
        assert_eq!(conj_update_beta_negbin(b, 0, 0, 3).unwrap(), b);
        assert!(conj_update_beta_negbin(b, 1, 1, 0).is_err());
    }
}
