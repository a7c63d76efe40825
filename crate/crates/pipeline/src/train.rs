//! Hyperparameter estimation from a corpus of metered houses.
//!
//! For every device and house an HDP-HSMM is run on the device's own trace
//! and each minute gets its most frequent post-burn-in state. States whose
//! levels are close are merged into modes; modes are aligned across houses
//! by rank. Emission hyperparameters come from moments of the state levels,
//! duration hyperparameters from an EM fit of the Poisson/negative-binomial
//! mixture to mode run lengths, and the transition prior from per-minute
//! mode transitions.

use std::collections::BTreeMap;

use anyhow::{bail, Result};
use log::{info, warn};
use nilm_core::distributions::{duration_logpmf, DurationLaw, DurationParams, NegBinForm, NormalPrior, SimplexVector};
use nilm_core::hdp::{gibbs_sweep_hdphsmm, EmissionMixturePrior, HdpHsmmConfig, HdpHsmmState};
use nilm_core::rng::StreamSeed;
use rayon::prelude::*;

use crate::bundle::{Bundle, DeviceHyper, DurationComponent, EmissionMode};
use crate::config::RunConfig;
use crate::trace::PowerTrace;

const STREAM_TAG: u64 = 2;

/// Smallest per-minute noise variance (W²) used for a device.
pub const MIN_NOISE_VAR: f64 = 1.0;

/// Noise variance from the median absolute first difference, which ignores
/// the rare level changes.
pub fn estimate_noise_var(y: &[f64]) -> f64 {
    if y.len() < 3 {
        return MIN_NOISE_VAR;
    }
    let mut d: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    d.sort_by(f64::total_cmp);
    let mad = d[d.len() / 2];
    let sd = 1.4826 * mad / std::f64::consts::SQRT_2;
    (sd * sd).max(MIN_NOISE_VAR)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DurationFit {
    /// Weight of the Poisson component in the core parametrisation.
    pub phi: f64,
    pub lambda: f64,
    pub nb_p: f64,
    pub r: u32,
    pub log_likelihood: f64,
    pub iterations: usize,
}

impl DurationFit {
    pub fn params(&self) -> DurationParams {
        DurationParams { phi: self.phi, lambda: self.lambda, r: self.r, nb_p: self.nb_p }
    }
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Maximum-likelihood fit of the duration mixture (restricted to `d ≥ 1`)
/// with `r` fixed. EM on the mixture of the two renormalised components,
/// golden-section M-steps for `λ` and `ϕ`, then the weight is mapped back to
/// the core parametrisation.
pub fn fit_duration_mixture(durations: &[u64], r: u32, form: NegBinForm, iterations: usize) -> Result<DurationFit> {
    if durations.is_empty() || durations.contains(&0) {
        bail!("need at least one duration, all at least 1");
    }
    let mut counts: BTreeMap<u64, f64> = BTreeMap::new();
    for &d in durations {
        *counts.entry(d).or_default() += 1.0;
    }
    let (vals, wts): (Vec<u64>, Vec<f64>) = counts.into_iter().unzip();
    let n = durations.len() as f64;
    let pois = |lambda: f64, d: u64| DurationLaw::Mixture { params: DurationParams { phi: 1.0, lambda, r, nb_p: 0.5 }, form }.log_pmf(d);
    let nb = |p: f64, d: u64| DurationLaw::Mixture { params: DurationParams { phi: 0.0, lambda: 1.0, r, nb_p: p }, form }.log_pmf(d);

    // start with the Poisson on the short half and the negative binomial on the long half
    let mut sorted = durations.to_vec();
    sorted.sort_unstable();
    let half = |xs: &[u64]| xs.iter().sum::<u64>() as f64 / xs.len() as f64;
    let lo = half(&sorted[..sorted.len().div_ceil(2)]);
    let hi = half(&sorted[sorted.len() / 2..]);
    let mut w: f64 = 0.5;
    let mut lambda = lo.max(0.5);
    let mut p = (1.0 - r as f64 / hi.max(r as f64 + 1.0)).clamp(0.01, 0.999);
    let max_d = *sorted.last().expect("nonempty") as f64;

    let mut ll_prev = f64::NEG_INFINITY;
    let mut resp = vec![0.0; vals.len()];
    let mut iters = 0;
    for it in 0..iterations.max(1) {
        iters = it + 1;
        let mut ll = 0.0;
        for (i, &d) in vals.iter().enumerate() {
            let a = w.ln() + pois(lambda, d);
            let b = (1.0 - w).ln() + nb(p, d);
            let m = a.max(b);
            let lse = m + ((a - m).exp() + (b - m).exp()).ln();
            resp[i] = (a - lse).exp();
            ll += wts[i] * lse;
        }
        let mass: f64 = resp.iter().zip(&wts).map(|(r, c)| r * c).sum();
        w = (mass / n).clamp(1e-6, 1.0 - 1e-6);
        let pl = |x: f64| vals.iter().zip(&resp).zip(&wts).map(|((&d, r), c)| r * c * pois(x.exp(), d)).sum::<f64>();
        lambda = golden_max(pl, (0.01f64).ln(), (10.0 * max_d).ln()).exp();
        let nl = |x: f64| vals.iter().zip(&resp).zip(&wts).map(|((&d, r), c)| (1.0 - r) * c * nb(logistic(x), d)).sum::<f64>();
        p = logistic(golden_max(nl, -10.0, 15.0)).min(1.0 - 1e-9);
        if (ll - ll_prev).abs() <= 1e-10 * ll.abs() {
            ll_prev = ll;
            break;
        }
        ll_prev = ll;
    }
    // weight of the unnormalised Poisson term: w = φA / (φA + (1-φ)B)
    let ln_a = duration_logpmf(&DurationParams { phi: 1.0, lambda, r, nb_p: 0.5 }, 1, form)? - pois(lambda, 1);
    let ln_b = duration_logpmf(&DurationParams { phi: 0.0, lambda: 1.0, r, nb_p: p }, 1, form)? - nb(p, 1);
    let x = w / ln_a.exp();
    let y = (1.0 - w) / ln_b.exp();
    Ok(DurationFit { phi: x / (x + y), lambda, nb_p: p, r, log_likelihood: ll_prev, iterations: iters })
}

/// Summary of one used state under the modal labelling.
#[derive(Debug, Clone, Copy, PartialEq)]
struct StateFit {
    mean: f64,
    count: usize,
    /// Sum of squared deviations from `mean`.
    ss: f64,
}

/// One device in one house after the sampler and mode merging.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct HouseFit {
    pub house: String,
    /// Mode of each minute, modes ordered by level.
    pub modes: Vec<usize>,
    /// Level of each mode (W).
    pub mode_means: Vec<f64>,
    /// Levels of the states making up each mode.
    pub state_means: Vec<Vec<f64>>,
    /// Within-state sum of squares and its degrees of freedom.
    pub ss: f64,
    pub dof: usize,
    pub used_states: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSettings {
    pub weak_limit: usize,
    pub gamma: f64,
    pub alpha: f64,
    pub sweeps: usize,
    pub burn_in: usize,
    pub max_duration: Option<usize>,
    pub form: NegBinForm,
    pub r: u32,
    pub merge_sd: f64,
    pub merge_rel: f64,
}

impl FitSettings {
    pub fn from_config(c: &RunConfig) -> Self {
        Self {
            weak_limit: c.weak_limit,
            gamma: c.gamma,
            alpha: c.alpha,
            sweeps: c.sweeps,
            burn_in: c.burn_in,
            max_duration: c.max_duration,
            form: c.form(),
            r: c.train.r,
            merge_sd: c.train.merge_sd,
            merge_rel: c.train.merge_rel,
        }
    }
}

/// Runs the HDP-HSMM sampler on one device trace and reduces the modal
/// labelling to modes.
pub fn fit_house(y: &[f64], house: &str, s: &FitSettings, seed: StreamSeed) -> Result<HouseFit> {
    if y.len() < 2 {
        bail!("{house}: need at least two minutes");
    }
    let sigma2 = estimate_noise_var(y);
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let spread = (hi - lo).max(sigma2.sqrt());
    let dur = DurationComponent::centred(1.0, 0.5, 30.0, 1.0 - 2.0 / 30.0, s.r, 2.0);
    let config = HdpHsmmConfig {
        sigma2,
        form: s.form,
        max_duration: s.max_duration,
        prior: EmissionMixturePrior {
            weights: SimplexVector::uniform(1),
            components: vec![NormalPrior::new(mean, spread * spread)?],
            duration_weights: SimplexVector::uniform(1),
            duration_components: vec![dur.hyper()],
        },
    };
    let mut rng = seed.stream();
    let l = s.weak_limit;
    let mut state = HdpHsmmState::from_prior(&config, l, s.gamma, s.alpha, y, &mut rng)?;
    let mut votes = vec![0u32; y.len() * l];
    for sweep in 0..s.sweeps {
        state = gibbs_sweep_hdphsmm(state, &config, y, &mut rng)?;
        if sweep >= s.burn_in {
            for (t, &z) in state.path.expand(y.len()).iter().enumerate() {
                votes[t * l + z] += 1;
            }
        }
    }
    let labels: Vec<usize> = (0..y.len())
        .map(|t| {
            let v = &votes[t * l..(t + 1) * l];
            (0..l).fold(0, |best, j| if v[j] > v[best] { j } else { best })
        })
        .collect();

    let mut stats = vec![(0.0, 0usize); l];
    for (&z, &v) in labels.iter().zip(y) {
        stats[z].0 += v;
        stats[z].1 += 1;
    }
    let mut states: Vec<(usize, StateFit)> = stats
        .iter()
        .enumerate()
        .filter(|(_, s)| s.1 > 0)
        .map(|(j, &(sum, count))| (j, StateFit { mean: sum / count as f64, count, ss: 0.0 }))
        .collect();
    for (&z, &v) in labels.iter().zip(y) {
        if let Some((_, st)) = states.iter_mut().find(|(j, _)| *j == z) {
            st.ss += (v - st.mean) * (v - st.mean);
        }
    }
    states.sort_by(|a, b| a.1.mean.total_cmp(&b.1.mean));

    // states with very few minutes join the nearest mode without shaping it
    let min_count = 5.max(y.len() / 200);
    let sig: Vec<&(usize, StateFit)> = states.iter().filter(|(_, s)| s.count >= min_count).collect();
    let sig: Vec<&(usize, StateFit)> = if sig.is_empty() { states.iter().collect() } else { sig };
    let sd = sigma2.sqrt();
    let mut groups: Vec<Vec<&(usize, StateFit)>> = Vec::new();
    for st in sig {
        match groups.last_mut() {
            Some(g) => {
                let prev = g.last().expect("nonempty").1.mean;
                let gap = st.1.mean - prev;
                if gap <= s.merge_sd * sd + s.merge_rel * prev.abs().max(st.1.mean.abs()) {
                    g.push(st);
                } else {
                    groups.push(vec![st]);
                }
            }
            None => groups.push(vec![st]),
        }
    }
    let mode_means: Vec<f64> = groups
        .iter()
        .map(|g| {
            let n: usize = g.iter().map(|s| s.1.count).sum();
            g.iter().map(|s| s.1.mean * s.1.count as f64).sum::<f64>() / n as f64
        })
        .collect();
    let mut mode_of_state = vec![0usize; l];
    for (j, st) in &states {
        mode_of_state[*j] = groups
            .iter()
            .position(|g| g.iter().any(|s| s.0 == *j))
            .unwrap_or_else(|| {
                (0..mode_means.len())
                    .min_by(|&a, &b| (mode_means[a] - st.mean).abs().total_cmp(&(mode_means[b] - st.mean).abs()))
                    .expect("at least one mode")
            });
    }
    let modes = labels.iter().map(|&z| mode_of_state[z]).collect();
    let state_means = groups.iter().map(|g| g.iter().map(|s| s.1.mean).collect()).collect();
    let ss = states.iter().map(|s| s.1.ss).sum();
    let dof = states.iter().map(|s| s.1.count.saturating_sub(1)).sum();
    Ok(HouseFit { house: house.into(), modes, mode_means, state_means, ss, dof, used_states: states.len() })
}

/// Run lengths of a label sequence without the first and last runs, which
/// are censored.
pub fn interior_runs(labels: &[usize]) -> Vec<(usize, u64)> {
    let mut runs: Vec<(usize, u64)> = Vec::new();
    for &m in labels {
        match runs.last_mut() {
            Some((lab, len)) if *lab == m => *len += 1,
            _ => runs.push((m, 1)),
        }
    }
    if runs.len() <= 2 {
        return Vec::new();
    }
    runs[1..runs.len() - 1].to_vec()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub bundle: Bundle,
    pub warnings: Vec<String>,
    /// Per device, the houses used and their mode levels.
    pub fits: Vec<(String, Vec<HouseFit>)>,
}

/// The device's trace in one house: its longest session, cut to `max_minutes`.
fn device_series(trace: &PowerTrace, k: usize, max_minutes: usize) -> Vec<f64> {
    let s = trace.sessions.iter().fold(&trace.sessions[0], |best, s| if s.len() > best.len() { s } else { best });
    s.devices[k].iter().take(max_minutes).copied().collect()
}

pub fn train_hyperparams(corpus: &[PowerTrace], config: &RunConfig) -> Result<TrainReport> {
    if corpus.is_empty() {
        bail!("the training corpus is empty");
    }
    let mut warnings = Vec::new();
    if corpus.len() < 2 {
        warnings.push(format!("only {} house in the corpus: fitting a single house, spreads are zero", corpus.len()));
    }
    let names: Vec<String> = if config.devices.is_empty() {
        let mut names: Vec<String> = Vec::new();
        for t in corpus {
            for d in &t.devices {
                if !names.contains(d) {
                    names.push(d.clone());
                }
            }
        }
        names
    } else {
        config.devices.clone()
    };
    let s = FitSettings::from_config(config);
    let root = StreamSeed::new(config.seed).child(STREAM_TAG);

    let mut jobs = Vec::new();
    for (di, name) in names.iter().enumerate() {
        for (hi, t) in corpus.iter().enumerate() {
            if let Some(k) = t.device_index(name) {
                let y = device_series(t, k, config.train.max_minutes);
                if y.iter().any(|&v| v > 0.0) {
                    jobs.push((di, hi, y));
                }
            }
        }
    }
    let fits: Vec<(usize, Result<HouseFit>)> = jobs
        .par_iter()
        .map(|(di, hi, y)| (*di, fit_house(y, &corpus[*hi].name, &s, root.child(*di as u64).child(*hi as u64))))
        .collect();
    let mut per_device: Vec<Vec<HouseFit>> = vec![Vec::new(); names.len()];
    for (di, f) in fits {
        per_device[di].push(f?);
    }

    let mut devices = Vec::new();
    let mut report_fits = Vec::new();
    for (name, fits) in names.iter().zip(per_device) {
        if fits.is_empty() {
            warnings.push(format!("device {name:?} is absent or never used in every house: excluded"));
            continue;
        }
        let (hyper, used) = combine(name, &fits, config)?;
        info!("{name}: {} modes from {} of {} houses", hyper.num_modes(), used.len(), fits.len());
        devices.push(hyper);
        report_fits.push((name.clone(), used));
    }
    if devices.is_empty() {
        bail!("no device could be trained");
    }
    for w in &warnings {
        warn!("{w}");
    }
    let bundle = Bundle { devices };
    bundle.validate()?;
    Ok(TrainReport { bundle, warnings, fits: report_fits })
}

/// Pools the per-house fits of one device into its hyperparameters.
fn combine(name: &str, fits: &[HouseFit], config: &RunConfig) -> Result<(DeviceHyper, Vec<HouseFit>)> {
    // the most common number of modes; ties go to fewer modes
    let mut tally: BTreeMap<usize, usize> = BTreeMap::new();
    for f in fits {
        *tally.entry(f.mode_means.len()).or_default() += 1;
    }
    let m = tally.iter().fold((0, 0), |best, (&k, &c)| if c > best.1 { (k, c) } else { best }).0;
    let used: Vec<HouseFit> = fits.iter().filter(|f| f.mode_means.len() == m).cloned().collect();
    let h = used.len() as f64;

    let ss: f64 = used.iter().map(|f| f.ss).sum();
    let dof: usize = used.iter().map(|f| f.dof).sum();
    let sigma2 = if dof > 0 { (ss / dof as f64).max(MIN_NOISE_VAR) } else { MIN_NOISE_VAR };

    let mut emission = Vec::with_capacity(m);
    for k in 0..m {
        let means: Vec<f64> = used.iter().map(|f| f.mode_means[k]).collect();
        let mu = means.iter().sum::<f64>() / h;
        let spread = if used.len() > 1 { (means.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (h - 1.0)).sqrt() } else { 0.0 };
        let levels: Vec<f64> = used.iter().flat_map(|f| f.state_means[k].iter().copied()).collect();
        let var = levels.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / levels.len() as f64;
        let weight = used.iter().map(|f| f.state_means[k].len() as f64 / f.state_means.iter().map(Vec::len).sum::<usize>() as f64).sum::<f64>() / h;
        emission.push(EmissionMode { weight, mean: mu, var: var.max(sigma2), spread });
    }

    let mut runs: Vec<Vec<u64>> = vec![Vec::new(); m];
    let mut trans = vec![vec![0u64; m]; m];
    for f in &used {
        for (lab, len) in interior_runs(&f.modes) {
            runs[lab].push(len);
        }
        for w in f.modes.windows(2) {
            trans[w[0]][w[1]] += 1;
        }
    }
    let all: Vec<u64> = runs.iter().flatten().copied().collect();
    let n_runs = all.len().max(1) as f64;
    let strength = config.train.prior_strength;
    let mut duration = Vec::with_capacity(m);
    for r in &runs {
        let data = if r.len() >= 2 { r.as_slice() } else { all.as_slice() };
        let weight = if all.is_empty() { 1.0 / m as f64 } else { r.len() as f64 / n_runs };
        let c = if data.is_empty() {
            DurationComponent::centred(weight, 0.5, 30.0, 1.0 - 2.0 / 30.0, config.train.r, strength)
        } else {
            let fit = fit_duration_mixture(data, config.train.r, config.form(), config.train.em_iterations)?;
            DurationComponent::centred(weight, fit.phi, fit.lambda, fit.nb_p, fit.r, strength)
        };
        duration.push(c);
    }
    let transition_alpha = trans
        .iter()
        .map(|row| {
            let n: u64 = row.iter().sum();
            row.iter().map(|&c| if n > 0 { strength * c as f64 / n as f64 } else { strength / m as f64 } + 0.1).collect()
        })
        .collect();
    let hyper = DeviceHyper { name: name.into(), sigma2, emission, duration, transition_alpha };
    Ok((hyper, used))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synth_house, SynthSettings};
    use crate::trace::parse_timestamp;
    use nilm_core::distributions::DurationTable;

    fn small_config() -> RunConfig {
        let mut c = RunConfig::default();
        c.weak_limit = 6;
        c.sweeps = 60;
        c.burn_in = 20;
        c.max_duration = Some(150);
        c.train.max_minutes = 1500;
        c
    }

    #[test]
    fn noise_estimate_ignores_level_changes() {
        let mut rng = StreamSeed::new(1).stream();
        let y: Vec<f64> = (0..4000)
            .map(|t| if (t / 50) % 2 == 0 { 0.0 } else { 500.0 } + nilm_core::distributions::normal_sample(0.0, 100.0, &mut rng))
            .collect();
        let v = estimate_noise_var(&y);
        assert!((v / 100.0 - 1.0).abs() < 0.1, "{v}");
    }

    #[test]
    fn interior_runs_drop_censored_ends() {
        assert_eq!(interior_runs(&[0, 0, 1, 1, 1, 0, 1, 1]), vec![(1, 3), (0, 1)]);
        assert!(interior_runs(&[0, 0, 1]).is_empty());
    }

    fn draw(law: &DurationLaw, n: usize, seed: u64) -> Vec<u64> {
        let table = DurationTable::new(law.clone(), 1, None).unwrap();
        let mut rng = StreamSeed::new(seed).stream();
        (0..n).map(|_| table.sample_beyond(0, &mut rng).unwrap() as u64).collect()
    }

    #[test]
    fn em_recovers_the_mixing_weight() {
        for (form, phi) in [(NegBinForm::Standard, 0.3), (NegBinForm::Shifted, 0.6)] {
            let truth = DurationParams { phi, lambda: 5.0, r: 2, nb_p: 0.94 };
            let d = draw(&DurationLaw::Mixture { params: truth, form }, 5000, 7);
            let fit = fit_duration_mixture(&d, 2, form, 500).unwrap();
            assert!((fit.phi - phi).abs() < 0.05, "{form:?}: {fit:?}");
            assert!((fit.lambda / 5.0 - 1.0).abs() < 0.1, "{fit:?}");
        }
    }

    #[test]
    fn em_increases_the_likelihood() {
        let truth = DurationParams { phi: 0.5, lambda: 8.0, r: 2, nb_p: 0.9 };
        let d = draw(&DurationLaw::Mixture { params: truth, form: NegBinForm::Standard }, 1000, 3);
        let one = fit_duration_mixture(&d, 2, NegBinForm::Standard, 1).unwrap();
        let many = fit_duration_mixture(&d, 2, NegBinForm::Standard, 300).unwrap();
        assert!(many.log_likelihood >= one.log_likelihood);
        let law = DurationLaw::Mixture { params: many.params(), form: NegBinForm::Standard };
        let direct: f64 = d.iter().map(|&x| law.log_pmf(x)).sum();
        assert!((direct - many.log_likelihood).abs() < 1e-6 * direct.abs());
    }

    fn corpus(bundle: &Bundle, houses: usize, minutes: usize, seed: u64) -> Vec<PowerTrace> {
        let s = SynthSettings { weak_limit: 4, gamma: 2.0, alpha: 4.0, form: NegBinForm::Shifted, minutes, noise_var: 25.0 };
        let start = parse_timestamp("2016-01-01T00:00").unwrap();
        (0..houses)
            .map(|h| synth_house(bundle, &s, start, &format!("h{h}"), StreamSeed::new(seed).child(h as u64)).unwrap().trace)
            .collect()
    }

    /// Relative error for nonzero levels; zero levels are judged against the
    /// device's top level.
    fn level_error(est: f64, truth: f64, scale: f64) -> f64 {
        if truth == 0.0 { est.abs() / scale } else { (est / truth - 1.0).abs() }
    }

    #[test]
    fn well_separated_levels_are_recovered() {
        let b = Bundle { devices: vec![Bundle::builtin().devices[0].clone()] };
        let c = small_config();
        let rep = train_hyperparams(&corpus(&b, 3, 1500, 21), &c).unwrap();
        let d = &rep.bundle.devices[0];
        assert_eq!(d.num_modes(), 2, "{d:?}");
        for (e, t) in d.emission.iter().zip(&b.devices[0].emission) {
            assert!(level_error(e.mean, t.mean, 3000.0) < 0.05, "{} vs {}", e.mean, t.mean);
        }
        assert!(rep.warnings.is_empty());
    }

    #[test]
    fn retraining_on_synthetic_data_is_a_fixed_point() {
        let b = Bundle::builtin();
        let mut c = small_config();
        c.devices = vec!["air compressor".into(), "furnace".into(), "refrigerator".into()];
        let rep = train_hyperparams(&corpus(&b, 3, 1500, 5), &c).unwrap();
        for d in &rep.bundle.devices {
            let t = b.device(&d.name).unwrap();
            assert_eq!(d.num_modes(), t.num_modes(), "{d:?}");
            let top = t.emission.last().unwrap().mean;
            for (e, m) in d.emission.iter().zip(&t.emission) {
                assert!(level_error(e.mean, m.mean, top) < 0.1, "{}: {} vs {}", d.name, e.mean, m.mean);
            }
        }
    }

    #[test]
    fn absent_devices_and_single_houses_warn() {
        let b = Bundle { devices: vec![Bundle::builtin().devices[2].clone()] };
        let mut t = corpus(&b, 1, 600, 9);
        t[0].devices.push("sauna".into());
        let n = t[0].sessions[0].len();
        t[0].sessions[0].devices.push(vec![0.0; n]);
        let mut c = small_config();
        c.sweeps = 20;
        c.burn_in = 5;
        let rep = train_hyperparams(&t, &c).unwrap();
        assert_eq!(rep.bundle.devices.len(), 1);
        assert_eq!(rep.warnings.len(), 2, "{:?}", rep.warnings);
        assert!(rep.warnings[1].contains("sauna"));
        assert!(rep.bundle.devices[0].emission.iter().all(|e| e.spread == 0.0));
    }
}
