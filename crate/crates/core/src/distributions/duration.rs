use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::conjugate::{BetaHyper, GammaHyper};
use super::density::{duration_logpmf, NegBinForm};
use crate::error::{invalid, Result};
use crate::numeric::KahanSum;

/// Duration parameters `w = (φ, λ, r, ϕ)` of the Poisson/negative-binomial mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DurationParams {
    /// Weight of the Poisson component.
    pub phi: f64,
    pub lambda: f64,
    pub r: u32,
    pub nb_p: f64,
}

impl DurationParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.phi)
            || !(self.lambda > 0.0 && self.lambda.is_finite())
            || self.r == 0
            || !(0.0..1.0).contains(&self.nb_p)
        {
            return Err(invalid("duration params need φ∈[0,1], λ>0, r≥1, ϕ∈[0,1)"));
        }
        Ok(())
    }
}

/// Priors on `(φ, λ, ϕ)` with `r` fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DurationHyper {
    pub phi: BetaHyper,
    pub lambda: GammaHyper,
    pub nb_p: BetaHyper,
    pub r: u32,
}

impl DurationHyper {
    pub fn validate(&self) -> Result<()> {
        let pos = [self.phi.a, self.phi.b, self.lambda.shape, self.lambda.rate, self.nb_p.a, self.nb_p.b];
        if pos.iter().any(|&x| !(x > 0.0 && x.is_finite())) || self.r == 0 {
            return Err(invalid("duration hyperparameters must be positive and r >= 1"));
        }
        Ok(())
    }
}

/// A segment-length law on `d ≥ 1`.
///
/// The mixture is renormalised over `d ≥ 1` because a segment always lasts at
/// least one step; `Explicit` holds `p(1), p(2), …` directly.
#[derive(Debug, Clone, PartialEq)]
pub enum DurationLaw {
    Mixture { params: DurationParams, form: NegBinForm },
    Explicit(Vec<f64>),
}

impl DurationLaw {
    /// Geometric law `p(d) = ϕ^(d-1)(1-ϕ)`.
    pub fn geometric(stay: f64) -> Self {
        DurationLaw::Mixture {
            params: DurationParams { phi: 0.0, lambda: 1.0, r: 1, nb_p: stay },
            form: NegBinForm::Shifted,
        }
    }

    fn log_normalizer(params: &DurationParams, form: NegBinForm) -> f64 {
        let p = params.nb_p;
        let r = params.r as f64;
        let none = libm::pow(1.0 - p, r);
        let nb_mass = match form {
            NegBinForm::Standard => 1.0 - none,
            NegBinForm::Shifted if p == 0.0 => r,
            NegBinForm::Shifted => (1.0 - none) / p,
        };
        let pois_mass = -libm::expm1(-params.lambda);
        libm::log(params.phi * pois_mass + (1.0 - params.phi) * nb_mass)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DurationLaw::Mixture { params, .. } => params.validate(),
            DurationLaw::Explicit(p) => {
                let s: f64 = p.iter().sum();
                if p.is_empty() || p.iter().any(|&x| x < 0.0) || (s - 1.0).abs() > 1e-12 {
                    return Err(invalid("explicit duration pmf must be a simplex over d = 1.."));
                }
                Ok(())
            }
        }
    }

    /// `log p(D = d)` for the law restricted to `d ≥ 1`.
    pub fn log_pmf(&self, d: u64) -> f64 {
        if d == 0 {
            return f64::NEG_INFINITY;
        }
        match self {
            DurationLaw::Mixture { params, form } => {
                duration_logpmf(params, d, *form).unwrap_or(f64::NEG_INFINITY)
                    - Self::log_normalizer(params, *form)
            }
            DurationLaw::Explicit(p) => match p.get(d as usize - 1) {
                Some(&x) if x > 0.0 => libm::log(x),
                _ => f64::NEG_INFINITY,
            },
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            DurationLaw::Mixture { params, form } => {
                let p = params.nb_p;
                let r = params.r as f64;
                let nb = match form {
                    NegBinForm::Standard => r * p / (1.0 - p),
                    NegBinForm::Shifted => r / (1.0 - p),
                };
                (params.phi * params.lambda + (1.0 - params.phi) * nb)
                    / libm::exp(Self::log_normalizer(params, *form))
            }
            DurationLaw::Explicit(p) => p.iter().enumerate().map(|(i, &x)| (i + 1) as f64 * x).sum(),
        }
    }
}

/// Tabulated `log p(d)` and `log P(d < D ≤ cap)` for `d = 0..=horizon`.
///
/// With a window `W` durations above `W` are dropped; the discarded mass is
/// kept in [`DurationTable::truncation`].
#[derive(Debug, Clone)]
pub struct DurationTable {
    law: DurationLaw,
    log_pmf: Vec<f64>,
    log_tail: Vec<f64>,
    window: Option<usize>,
    truncation: f64,
}

impl DurationTable {
    pub fn new(law: DurationLaw, horizon: usize, window: Option<usize>) -> Result<Self> {
        law.validate()?;
        if window == Some(0) {
            return Err(invalid("duration window must be at least 1"));
        }
        let cap = window.map_or(horizon, |w| w.min(horizon));
        let pmf: Vec<f64> = (0..=horizon).map(|d| libm::exp(law.log_pmf(d as u64))).collect();
        let mut tail = vec![0.0; horizon + 1];
        match &law {
            DurationLaw::Explicit(p) => {
                let mut acc = KahanSum::new();
                let mut upper = vec![0.0; p.len() + 1];
                for d in (0..p.len()).rev() {
                    acc.add(p[d]);
                    upper[d] = acc.value();
                }
                for (k, t) in tail.iter_mut().enumerate() {
                    *t = upper.get(k).copied().unwrap_or(0.0);
                }
            }
            DurationLaw::Mixture { .. } => {
                let mut acc = KahanSum::new();
                for k in 0..=horizon {
                    acc.add(pmf[k]);
                    tail[k] = (1.0 - acc.value()).max(0.0);
                }
            }
        }
        let truncation = if window.is_some() { tail[cap] } else { 0.0 };
        let log_pmf = pmf
            .iter()
            .enumerate()
            .map(|(d, &p)| if d <= cap && p > 0.0 { libm::log(p) } else { f64::NEG_INFINITY })
            .collect();
        let log_tail = tail
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                let m = if window.is_some() { (t - truncation).max(0.0) } else { t };
                if k < cap || window.is_none() {
                    if m > 0.0 {
                        libm::log(m)
                    } else {
                        f64::NEG_INFINITY
                    }
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        Ok(Self { law, log_pmf, log_tail, window, truncation })
    }

    pub fn law(&self) -> &DurationLaw {
        &self.law
    }

    pub fn horizon(&self) -> usize {
        self.log_pmf.len() - 1
    }

    /// Largest duration with positive tabulated mass.
    pub fn max_duration(&self) -> usize {
        self.window.map_or(self.horizon(), |w| w.min(self.horizon()))
    }

    pub fn log_pmf(&self, d: usize) -> f64 {
        self.log_pmf.get(d).copied().unwrap_or(f64::NEG_INFINITY)
    }

    /// `log P(D > k)` (within the window, if any).
    pub fn log_tail(&self, k: usize) -> f64 {
        self.log_tail.get(k).copied().unwrap_or(f64::NEG_INFINITY)
    }

    /// Mass lost by the duration window.
    pub fn truncation(&self) -> f64 {
        self.truncation
    }

    /// Draws `D` conditioned on `D > k`.
    pub fn sample_beyond<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Result<usize> {
        let log_tail = self.log_tail(k);
        if log_tail == f64::NEG_INFINITY {
            return Err(invalid("no duration mass beyond the requested length"));
        }
        let target = rng.random::<f64>() * libm::exp(log_tail);
        let limit = self.window.unwrap_or(usize::MAX);
        let mut acc = KahanSum::new();
        let mut d = k + 1;
        let mut last_positive = k + 1;
        loop {
            let lp = if d <= self.horizon() { self.log_pmf(d) } else { self.law.log_pmf(d as u64) };
            let p = libm::exp(lp);
            if p > 0.0 {
                last_positive = d;
            }
            acc.add(p);
            if acc.value() > target || d >= limit || d - k > 10_000_000 {
                return Ok(if p > 0.0 { d } else { last_positive });
            }
            d += 1;
        }
    }
}
