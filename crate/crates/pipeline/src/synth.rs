//! Synthetic houses: one weak-limit HDP-HSMM draw per device, summed with
//! additive white noise on the total.

use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use chrono::NaiveDateTime;
use nilm_core::distributions::{categorical_sample, normal_sample, DurationLaw, NegBinForm, NormalPrior};
use nilm_core::hdp::{sample_duration_prior, WeakLimitHdp};
use nilm_core::hsmm::{simulate_hsmm, HsmmParams, HsmmPrior, SegmentPath};
use nilm_core::rng::StreamSeed;
use rayon::prelude::*;

use crate::bundle::{Bundle, DeviceHyper};
use crate::config::RunConfig;
use crate::output::write_csv;
use crate::trace::{format_timestamp, parse_timestamp, write_trace, PowerTrace, Session};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSettings {
    pub weak_limit: usize,
    pub gamma: f64,
    pub alpha: f64,
    pub form: NegBinForm,
    pub minutes: usize,
    pub noise_var: f64,
}

impl SynthSettings {
    pub fn from_config(c: &RunConfig) -> Self {
        Self {
            weak_limit: c.weak_limit,
            gamma: c.gamma,
            alpha: c.alpha,
            form: c.form(),
            minutes: c.synth.minutes,
            noise_var: c.synth.noise_var,
        }
    }
}

/// One device's draw.
#[derive(Debug, Clone)]
pub struct DeviceDraw {
    pub params: HsmmParams,
    pub path: SegmentPath,
    /// Emission mode of each super-state.
    pub state_modes: Vec<usize>,
    /// Emission mode at each minute.
    pub modes: Vec<usize>,
    pub power: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SynthHouse {
    pub trace: PowerTrace,
    pub draws: Vec<DeviceDraw>,
}

impl SynthHouse {
    /// `labels[k][t]`: emission mode of device `k` at minute `t`.
    pub fn labels(&self) -> Vec<Vec<usize>> {
        self.draws.iter().map(|d| d.modes.clone()).collect()
    }
}

pub fn synth_device(dev: &DeviceHyper, s: &SynthSettings, seed: StreamSeed) -> Result<DeviceDraw> {
    let l = s.weak_limit;
    if l < 2 {
        bail!("the weak limit needs at least two states");
    }
    let mut rng = seed.stream();
    let prior = dev.emission_prior()?;
    let hdp = WeakLimitHdp::from_prior(l, s.gamma, s.alpha, &mut rng)?;
    let mut theta = Vec::with_capacity(l);
    let mut state_modes = Vec::with_capacity(l);
    let mut durations = Vec::with_capacity(l);
    let mut duration_hypers = Vec::with_capacity(l);
    let mut emission = Vec::with_capacity(l);
    for _ in 0..l {
        let m = categorical_sample(prior.weights.as_slice(), &mut rng);
        let c: NormalPrior = prior.components[m];
        theta.push(normal_sample(c.mean, c.var, &mut rng));
        state_modes.push(m);
        emission.push(c);
        let k = categorical_sample(prior.duration_weights.as_slice(), &mut rng);
        let h = prior.duration_components[k];
        durations.push(DurationLaw::Mixture { params: sample_duration_prior(&h, &mut rng)?, form: s.form });
        duration_hypers.push(h);
    }
    let hsmm_prior = HsmmPrior { emission, alpha: vec![vec![s.alpha; l]; l], duration: duration_hypers };
    let mut params = HsmmParams::new(hdp.normalized_rows(), theta, dev.sigma2, durations, hsmm_prior)?;
    params.init = hdp.beta.clone();
    let (path, power) = simulate_hsmm(&params, s.minutes, &mut rng)?;
    let modes = path.expand(s.minutes).iter().map(|&z| state_modes[z]).collect();
    Ok(DeviceDraw { params, path, state_modes, modes, power })
}

pub fn synth_house(bundle: &Bundle, s: &SynthSettings, start: NaiveDateTime, name: &str, seed: StreamSeed) -> Result<SynthHouse> {
    bundle.validate()?;
    let draws = bundle
        .devices
        .iter()
        .enumerate()
        .map(|(k, d)| synth_device(d, s, seed.child(k as u64)))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = seed.child(bundle.devices.len() as u64).stream();
    let total = (0..s.minutes)
        .map(|t| {
            let sum: f64 = draws.iter().map(|d| d.power[t]).sum();
            let noise = if s.noise_var > 0.0 { normal_sample(0.0, s.noise_var, &mut rng) } else { 0.0 };
            (sum + noise).max(0.0)
        })
        .collect();
    let session = Session { start, total, devices: draws.iter().map(|d| d.power.clone()).collect() };
    let trace = PowerTrace {
        name: name.into(),
        devices: bundle.devices.iter().map(|d| d.name.clone()).collect(),
        sessions: vec![session],
    };
    Ok(SynthHouse { trace, draws })
}

pub fn house_name(i: usize) -> String {
    format!("house_{i:03}")
}

/// All houses of a run, generated in parallel from per-house streams.
pub fn synth_generate(bundle: &Bundle, config: &RunConfig) -> Result<Vec<SynthHouse>> {
    let s = SynthSettings::from_config(config);
    let start = parse_timestamp(&config.synth.start)?;
    let root = StreamSeed::new(config.seed).child(STREAM_TAG);
    (0..config.synth.houses)
        .into_par_iter()
        .map(|h| synth_house(bundle, &s, start, &house_name(h), root.child(h as u64)))
        .collect()
}

const STREAM_TAG: u64 = 1;

/// Writes `<name>.csv` for each house and `labels/<name>.csv` with the
/// emission mode of every device at every minute.
pub fn write_houses(dir: &Path, houses: &[SynthHouse]) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for h in houses {
        let p = dir.join(format!("{}.csv", h.trace.name));
        write_trace(&p, &h.trace)?;
        written.push(p);
        let s = &h.trace.sessions[0];
        let mut header = vec!["timestamp"];
        header.extend(h.trace.devices.iter().map(|d| d.as_str()));
        let labels = h.labels();
        let rows = (0..s.len()).map(|t| {
            let mut r = vec![format_timestamp(s.timestamp(t))];
            r.extend(labels.iter().map(|l| l[t].to_string()));
            r
        });
        let lp = dir.join("labels").join(format!("{}.csv", h.trace.name));
        write_csv(&lp, &header, rows)?;
        written.push(lp);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nilm_core::dispatch::invariant_pmf;
    use nilm_core::linalg::Matrix;

    fn settings(minutes: usize, noise_var: f64) -> SynthSettings {
        SynthSettings { weak_limit: 4, gamma: 2.0, alpha: 4.0, form: NegBinForm::Shifted, minutes, noise_var }
    }

    fn start() -> NaiveDateTime {
        parse_timestamp("2016-01-01T00:00").unwrap()
    }

    #[test]
    fn single_device_total_is_device_plus_noise() {
        let b = Bundle { devices: vec![Bundle::builtin().devices[1].clone()] };
        let h = synth_house(&b, &settings(2000, 25.0), start(), "h", StreamSeed::new(3)).unwrap();
        let s = &h.trace.sessions[0];
        let resid: Vec<f64> = s.total.iter().zip(&s.devices[0]).map(|(t, d)| t - d).collect();
        let mean = resid.iter().sum::<f64>() / resid.len() as f64;
        let var = resid.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / resid.len() as f64;
        // clamping at zero trims a little of the noise while the device is off
        assert!(mean.abs() < 1.0 && var > 15.0 && var < 27.0, "mean {mean} var {var}");
    }

    #[test]
    fn zero_noise_total_is_the_exact_sum() {
        let h = synth_house(&Bundle::builtin(), &settings(3000, 0.0), start(), "h", StreamSeed::new(5)).unwrap();
        let s = &h.trace.sessions[0];
        for t in 0..s.len() {
            let sum: f64 = s.devices.iter().map(|d| d[t]).sum();
            assert_eq!(s.total[t], sum);
        }
        assert!(s.devices.iter().flatten().all(|&x| x >= 0.0));
    }

    /// Stationary ON fraction implied by the embedded chain and the mean
    /// durations, and the observed ON fraction.
    fn duty_cycle(d: &DeviceDraw) -> (f64, f64) {
        let l = d.params.num_states();
        let rows: Vec<Vec<f64>> = d.params.pi.iter().map(|r| r.as_slice().to_vec()).collect();
        let nu = invariant_pmf(&Matrix::from_rows(&rows).unwrap()).unwrap();
        let occ: Vec<f64> = (0..l).map(|j| nu[j] * d.params.durations[j].mean()).collect();
        let total: f64 = occ.iter().sum();
        let expected: f64 = (0..l).filter(|&j| d.state_modes[j] == 1).map(|j| occ[j] / total).sum();
        let observed = d.modes.iter().filter(|&&m| m == 1).count() as f64 / d.modes.len() as f64;
        (expected, observed)
    }

    #[test]
    fn duty_cycles_match_duration_means() {
        let b = Bundle::builtin();
        let h = synth_house(&b, &settings(20_000, 0.0), start(), "h", StreamSeed::new(11)).unwrap();
        // the dishwasher's long cycles leave about 100 segments in 20000
        // minutes, too few for 10% on a single draw
        for (dev, d) in b.devices.iter().zip(&h.draws).take(3) {
            let (expected, observed) = duty_cycle(d);
            assert!((observed - expected).abs() <= 0.1 * expected, "{}: {observed} vs {expected}", dev.name);
        }
    }

    #[test]
    fn duty_cycles_are_unbiased_across_draws() {
        let b = Bundle::builtin();
        let s = settings(20_000, 0.0);
        let mut ratios = vec![Vec::new(); b.devices.len()];
        for seed in 0..30 {
            let h = synth_house(&b, &s, start(), "h", StreamSeed::new(seed)).unwrap();
            for (k, d) in h.draws.iter().enumerate() {
                let (expected, observed) = duty_cycle(d);
                if expected > 0.05 && expected < 0.95 {
                    ratios[k].push(observed / expected);
                }
            }
        }
        for (dev, r) in b.devices.iter().zip(&ratios) {
            assert!(r.len() >= 10, "{}: only {} usable draws", dev.name, r.len());
            let mean = r.iter().sum::<f64>() / r.len() as f64;
            assert!((mean - 1.0).abs() < 0.1, "{}: mean ratio {mean}", dev.name);
        }
    }

    #[test]
    fn houses_are_reproducible_and_distinct() {
        let mut c = RunConfig::default();
        c.synth.houses = 2;
        c.synth.minutes = 300;
        let a = synth_generate(&Bundle::builtin(), &c).unwrap();
        let b = synth_generate(&Bundle::builtin(), &c).unwrap();
        assert_eq!(a[0].trace, b[0].trace);
        assert_eq!(a[1].trace, b[1].trace);
        assert_ne!(a[0].trace.sessions, a[1].trace.sessions);
        assert_eq!(a[1].trace.name, "house_001");
    }
}
