//! Per-device hyperparameters: the emission mixture prior, the duration
//! mixture hyperprior, the per-minute transition prior and the fixed noise.

use std::path::Path;

use anyhow::{bail, Context, Result};
use nilm_core::dispatch::invariant_pmf;
use nilm_core::distributions::{BetaHyper, DurationHyper, GammaHyper, NormalPrior, SimplexVector};
use nilm_core::hdp::EmissionMixturePrior;
use nilm_core::linalg::Matrix;
use nilm_core::smc::ChainPrior;
use serde::{Deserialize, Serialize};

use crate::output::write_json;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bundle {
    pub devices: Vec<DeviceHyper>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceHyper {
    pub name: String,
    /// Per-minute emission noise variance (W²).
    pub sigma2: f64,
    /// Modes ordered by increasing mean power.
    pub emission: Vec<EmissionMode>,
    pub duration: Vec<DurationComponent>,
    /// Dirichlet prior on the per-minute mode transition rows.
    pub transition_alpha: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmissionMode {
    pub weight: f64,
    /// Mean power level (W).
    pub mean: f64,
    /// Prior variance of a state's level around `mean` (W²).
    pub var: f64,
    /// Standard deviation of the mode mean across training houses (W).
    #[serde(default)]
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DurationComponent {
    pub weight: f64,
    /// Beta prior on the Poisson weight `φ`.
    pub phi: [f64; 2],
    /// Gamma prior (shape, rate) on the Poisson rate `λ`.
    pub lambda: [f64; 2],
    /// Beta prior on the negative-binomial probability `ϕ`.
    pub nb_p: [f64; 2],
    pub r: u32,
}

impl DurationComponent {
    /// Prior centred on `(φ, λ, ϕ)` with pseudo-count `strength`.
    pub fn centred(weight: f64, phi: f64, lambda: f64, nb_p: f64, r: u32, strength: f64) -> Self {
        let beta = |m: f64| {
            let m = m.clamp(0.01, 0.99);
            [m * strength, (1.0 - m) * strength]
        };
        Self { weight, phi: beta(phi), lambda: [strength, strength / lambda.max(1e-3)], nb_p: beta(nb_p), r }
    }

    pub fn hyper(&self) -> DurationHyper {
        DurationHyper {
            phi: BetaHyper { a: self.phi[0], b: self.phi[1] },
            lambda: GammaHyper { shape: self.lambda[0], rate: self.lambda[1] },
            nb_p: BetaHyper { a: self.nb_p[0], b: self.nb_p[1] },
            r: self.r,
        }
    }
}

fn simplex(w: Vec<f64>, what: &str, device: &str) -> Result<SimplexVector> {
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > 1e-6 {
        bail!("{device}: {what} weights sum to {s}, not 1");
    }
    SimplexVector::from_unnormalized(w).with_context(|| format!("{device}: {what} weights"))
}

impl DeviceHyper {
    pub fn num_modes(&self) -> usize {
        self.emission.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = &self.name;
        let m = self.emission.len();
        if m == 0 || self.duration.is_empty() {
            bail!("{n}: needs at least one emission mode and one duration component");
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            bail!("{n}: sigma2 must be positive");
        }
        if self.emission.iter().any(|e| !(e.var > 0.0) || !e.mean.is_finite() || !(e.weight >= 0.0)) {
            bail!("{n}: emission modes need finite means, positive variances and nonnegative weights");
        }
        simplex(self.emission.iter().map(|e| e.weight).collect(), "emission", n)?;
        simplex(self.duration.iter().map(|d| d.weight).collect(), "duration", n)?;
        for d in &self.duration {
            d.hyper().validate().with_context(|| format!("{n}: duration component"))?;
        }
        if self.transition_alpha.len() != m || self.transition_alpha.iter().any(|r| r.len() != m) {
            bail!("{n}: transition_alpha must be {m} x {m}");
        }
        if self.transition_alpha.iter().flatten().any(|&a| !(a > 0.0 && a.is_finite())) {
            bail!("{n}: transition_alpha entries must be positive");
        }
        Ok(())
    }

    /// Mode means of the transition prior, row-normalised.
    pub fn mean_transitions(&self) -> Vec<Vec<f64>> {
        self.transition_alpha
            .iter()
            .map(|r| {
                let s: f64 = r.iter().sum();
                r.iter().map(|a| a / s).collect()
            })
            .collect()
    }

    /// Prior of one factorial-filter chain: one state per mode.
    pub fn chain_prior(&self) -> Result<ChainPrior> {
        self.validate()?;
        let p = Matrix::from_rows(&self.mean_transitions())?;
        let init = invariant_pmf(&p).unwrap_or_else(|_| SimplexVector::uniform(self.num_modes()));
        let prior = ChainPrior {
            alpha: self.transition_alpha.clone(),
            emission: self.emission.iter().map(|e| NormalPrior::new(e.mean, e.var)).collect::<Result<Vec<_>, _>>()?,
            sigma2: self.sigma2,
            init,
        };
        prior.validate()?;
        Ok(prior)
    }

    /// Base measure of the device's HDP-HSMM.
    pub fn emission_prior(&self) -> Result<EmissionMixturePrior> {
        let n = &self.name;
        let prior = EmissionMixturePrior {
            weights: simplex(self.emission.iter().map(|e| e.weight).collect(), "emission", n)?,
            components: self.emission.iter().map(|e| NormalPrior::new(e.mean, e.var)).collect::<Result<Vec<_>, _>>()?,
            duration_weights: simplex(self.duration.iter().map(|d| d.weight).collect(), "duration", n)?,
            duration_components: self.duration.iter().map(|d| d.hyper()).collect(),
        };
        prior.validate()?;
        Ok(prior)
    }
}

impl Bundle {
    pub fn validate(&self) -> Result<()> {
        if self.devices.is_empty() {
            bail!("bundle has no devices");
        }
        let mut seen = std::collections::BTreeSet::new();
        for d in &self.devices {
            if !seen.insert(d.name.as_str()) {
                bail!("device {:?} appears twice", d.name);
            }
            d.validate()?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let b: Bundle = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        b.validate().with_context(|| format!("in {}", path.display()))?;
        Ok(b)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn device(&self, name: &str) -> Option<&DeviceHyper> {
        self.devices.iter().find(|d| d.name == name)
    }

    /// The named devices in the given order; all of them when `names` is empty.
    pub fn select(&self, names: &[String]) -> Result<Bundle> {
        if names.is_empty() {
            return Ok(self.clone());
        }
        let devices = names
            .iter()
            .map(|n| self.device(n).cloned().with_context(|| format!("device {n:?} is not in the bundle")))
            .collect::<Result<Vec<_>>>()?;
        Ok(Bundle { devices })
    }

    /// Four simulated devices, with the air compressor drawing about ten
    /// times the power of the others.
    pub fn builtin() -> Self {
        let dev = |name: &str, on: f64, on_sd: f64, sigma: f64, off_len: f64, on_len: f64| {
            let stay = |len: f64| 1.0 - 1.0 / len;
            DeviceHyper {
                name: name.into(),
                sigma2: sigma * sigma,
                emission: vec![
                    EmissionMode { weight: 0.5, mean: 0.0, var: 4.0, spread: 0.0 },
                    EmissionMode { weight: 0.5, mean: on, var: on_sd * on_sd, spread: 0.0 },
                ],
                duration: vec![
                    DurationComponent::centred(0.5, 0.5, on_len, 1.0 - 2.0 / on_len, 2, 50.0),
                    DurationComponent::centred(0.5, 0.5, off_len, 1.0 - 2.0 / off_len, 2, 50.0),
                ],
                transition_alpha: vec![
                    vec![20.0 * stay(off_len), 20.0 * (1.0 - stay(off_len))],
                    vec![20.0 * (1.0 - stay(on_len)), 20.0 * stay(on_len)],
                ],
            }
        };
        Bundle {
            devices: vec![
                dev("air compressor", 3000.0, 60.0, 20.0, 40.0, 20.0),
                dev("furnace", 300.0, 15.0, 8.0, 60.0, 15.0),
                dev("refrigerator", 150.0, 8.0, 4.0, 25.0, 15.0),
                dev("dishwasher", 250.0, 15.0, 8.0, 240.0, 60.0),
            ],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_is_valid_and_dominated_by_the_compressor() {
        let b = Bundle::builtin();
        b.validate().unwrap();
        let on: Vec<f64> = b.devices.iter().map(|d| d.emission[1].mean).collect();
        assert!(on[1..].iter().all(|&x| on[0] >= 10.0 * x));
        for d in &b.devices {
            assert_eq!(d.chain_prior().unwrap().num_states(), 2);
            d.emission_prior().unwrap();
        }
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.json");
        let b = Bundle::builtin();
        b.save(&p).unwrap();
        let back = Bundle::load(&p).unwrap();
        // values are stored to nine significant digits
        for (x, y) in b.devices.iter().zip(&back.devices) {
            for (rx, ry) in x.transition_alpha.iter().zip(&y.transition_alpha) {
                for (a, c) in rx.iter().zip(ry) {
                    assert!((a - c).abs() <= 1e-8 * a.abs());
                }
            }
            assert_eq!(x.emission, y.emission);
        }
        let again = dir.path().join("again.json");
        back.save(&again).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&again).unwrap());
    }

    #[test]
    fn bad_weights_are_rejected() {
        let mut b = Bundle::builtin();
        b.devices[0].emission[0].weight = 0.9;
        assert!(b.validate().is_err());
        let mut b = Bundle::builtin();
        b.devices[1].transition_alpha[0].pop();
        assert!(b.validate().is_err());
        let mut b = Bundle::builtin();
        b.devices.push(b.devices[0].clone());
        assert!(b.validate().is_err());
    }

    #[test]
    fn selection_keeps_the_requested_order() {
        let b = Bundle::builtin();
        let s = b.select(&["refrigerator".into(), "air compressor".into()]).unwrap();
        assert_eq!(s.devices[0].name, "refrigerator");
        assert_eq!(s.devices[1].name, "air compressor");
        assert!(b.select(&["toaster".into()]).is_err());
    }

    #[test]
    fn centred_duration_prior_has_the_requested_means() {
        let c = DurationComponent::centred(1.0, 0.3, 12.0, 0.8, 2, 40.0);
        let h = c.hyper();
        assert!((h.phi.a / (h.phi.a + h.phi.b) - 0.3).abs() < 1e-12);
        assert!((h.lambda.shape / h.lambda.rate - 12.0).abs() < 1e-12);
        assert!((h.nb_p.a / (h.nb_p.a + h.nb_p.b) - 0.8).abs() < 1e-12);
    }
}
