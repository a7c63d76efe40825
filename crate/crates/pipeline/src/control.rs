//! Demand-dispatch experiment on a simulated TCL fleet, optionally closing
//! the loop through per-house disaggregation.
//!
//! Dispatch quantities are per-load averages in kW; house meters and the
//! disaggregation filters work in W.

use anyhow::{Context, Result};
use nilm_core::dispatch::{
    bode_points, closed_loop_simulate, fit_pi_gains, linearize, tcl_nominal_model, tcl_schedule, BodePoint,
    ClosedLoopConfig, ClosedLoopTrace, DisaggHook, LoadEstimate, NominalLoadModel, PiDesign, PiGains, TclConfig,
};
use nilm_core::distributions::{normal_sample, NormalPrior};
use nilm_core::rng::{Stream, StreamSeed};
use nilm_core::smc::{estimators, fbpf_init, fbpf_step, ChainPrior, Ensemble, FactorialConfig, FactorialParticle};
use rayon::prelude::*;
use serde::Serialize;

use crate::bundle::Bundle;
use crate::config::{DisaggControl, Gains, RunConfig};
use crate::synth::{synth_device, SynthSettings};

const STREAM_TAG: u64 = 4;
const W_PER_KW: f64 = 1000.0;

/// Noise variance (W²) the filters assume for the controlled load.
const TCL_SIGMA2: f64 = 100.0;

#[derive(Debug, Clone, PartialEq)]
pub struct BodeResult {
    pub points: Vec<BodePoint>,
    pub design: Option<PiDesign>,
}

/// Bode data of the fleet linearised at `ζ = 0`, and the PI recipe fitted to it.
pub fn bode(config: &RunConfig) -> Result<BodeResult> {
    let tcl = TclConfig::from(&config.control.tcl);
    let lin = linearize(&tcl_nominal_model(&tcl)?, 0.0)?;
    let points = bode_points(&lin, &config.bode.frequencies())?;
    let design = fit_pi_gains(&points).ok();
    Ok(BodeResult { points, design })
}

/// Per-minute ON/OFF transition probabilities of a load running nominally.
pub fn mode_transitions(model: &NominalLoadModel) -> Result<Vec<Vec<f64>>> {
    let p = model.nominal_kernel();
    let pi = nilm_core::dispatch::invariant_pmf(&p)?;
    let nu = model.num_controllable();
    let mut flow = vec![vec![0.0; nu]; nu];
    for x in 0..model.num_states() {
        let u = model.split(x).0;
        for (x2, &q) in p.row(x).iter().enumerate() {
            flow[u][model.split(x2).0] += pi[x] * q;
        }
    }
    Ok(flow
        .into_iter()
        .map(|row| {
            let s: f64 = row.iter().sum();
            row.into_iter().map(|f| if s > 0.0 { f / s } else { 1.0 / nu as f64 }).collect()
        })
        .collect())
}

/// Filter chain for the controlled load: one state per controllable mode.
fn tcl_chain(model: &NominalLoadModel, strength: f64) -> Result<ChainPrior> {
    let trans = mode_transitions(model)?;
    let power = model.power();
    let prior = ChainPrior {
        alpha: trans.iter().map(|r| r.iter().map(|p| strength * p + 0.1).collect()).collect(),
        emission: power
            .iter()
            .map(|&p| NormalPrior::new(p * W_PER_KW, (0.05 * p * W_PER_KW).powi(2).max(TCL_SIGMA2)))
            .collect::<Result<Vec<_>, _>>()?,
        sigma2: TCL_SIGMA2,
        init: nilm_core::dispatch::invariant_pmf(&model.nominal_kernel())
            .map(|pi| {
                let mut m = vec![0.0; power.len()];
                for (x, &w) in pi.iter().enumerate() {
                    m[model.split(x).0] += w;
                }
                m
            })
            .and_then(nilm_core::distributions::SimplexVector::from_unnormalized)?,
    };
    prior.validate()?;
    Ok(prior)
}

struct House {
    ensemble: Option<Ensemble<FactorialParticle>>,
    rng: Stream,
    /// Other devices' power, summed (W).
    background: Vec<f64>,
    noise: Vec<f64>,
    hits: usize,
}

/// Loads `0..houses` each run a factorial filter on their house meter and
/// act on its estimate; the others use their true state.
pub struct FilterHook {
    config: FactorialConfig,
    houses: Vec<House>,
}

impl FilterHook {
    pub fn new(d: &DisaggControl, bundle: &Bundle, model: &NominalLoadModel, steps: usize, s: &RunConfig, seed: StreamSeed) -> Result<Self> {
        let background: Vec<_> = bundle.devices.iter().filter(|x| x.name != d.controlled_device).collect();
        let mut chains = vec![tcl_chain(model, s.train.prior_strength)?];
        for b in &background {
            chains.push(b.chain_prior()?);
        }
        let config = FactorialConfig::new(chains);
        config.validate()?;
        let settings = SynthSettings { minutes: steps, noise_var: s.synth.noise_var, ..SynthSettings::from_config(s) };
        let houses = (0..d.houses)
            .into_par_iter()
            .map(|h| {
                let hs = seed.child(h as u64);
                let mut bg = vec![0.0; steps];
                for (k, dev) in background.iter().enumerate() {
                    let draw = synth_device(dev, &settings, hs.child(k as u64))?;
                    bg.iter_mut().zip(&draw.power).for_each(|(a, b)| *a += b);
                }
                let mut nrng = hs.child(background.len() as u64).stream();
                let noise = (0..steps)
                    .map(|_| if settings.noise_var > 0.0 { normal_sample(0.0, settings.noise_var, &mut nrng) } else { 0.0 })
                    .collect();
                let mut rng = hs.child(background.len() as u64 + 1).stream();
                let ensemble = fbpf_init(&config, d.particles, &mut rng)?;
                Ok(House { ensemble: Some(ensemble), rng, background: bg, noise, hits: 0 })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { config, houses })
    }

    /// Fraction of filtered house-steps where the estimated mode was right.
    pub fn state_accuracy(&self, steps: usize) -> f64 {
        let hits: usize = self.houses.iter().map(|h| h.hits).sum();
        hits as f64 / (self.houses.len() * steps).max(1) as f64
    }
}

impl DisaggHook for FilterHook {
    fn estimate(&mut self, t: usize, states: &[usize], model: &NominalLoadModel) -> nilm_core::Result<Vec<LoadEstimate>> {
        let config = &self.config;
        let updates: Vec<nilm_core::Result<LoadEstimate>> = self
            .houses
            .par_iter_mut()
            .enumerate()
            .map(|(i, h)| {
                let (u, _) = model.split(states[i]);
                let meter = (model.power()[u] * W_PER_KW + h.background[t] + h.noise[t]).max(0.0);
                let e = fbpf_step(h.ensemble.take().expect("ensemble present"), meter, config, &mut h.rng)?;
                let est = &estimators(&e)[0];
                h.ensemble = Some(e);
                let rank = crate::metrics::canonical_rank(&est.theta_mean);
                let mut levels = est.theta_mean.clone();
                levels.sort_by(f64::total_cmp);
                let controllable = rank[est.map_state];
                if controllable == u {
                    h.hits += 1;
                }
                Ok(LoadEstimate { controllable, power: levels.iter().map(|p| p / W_PER_KW).collect() })
            })
            .collect();
        let mut out = Vec::with_capacity(states.len());
        for u in updates {
            out.push(u?);
        }
        let p = model.power().to_vec();
        out.extend(states[out.len()..].iter().map(|&x| LoadEstimate { controllable: model.split(x).0, power: p.clone() }));
        Ok(out)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ControlSummary {
    pub loads: usize,
    pub steps: usize,
    pub transient: usize,
    pub kp: f64,
    pub ki: f64,
    pub flat_band: Option<(f64, f64)>,
    pub flat_band_magnitude_db: Option<f64>,
    pub cutoff: Option<f64>,
    /// `RMS(r - ỹ) / RMS(r)` after the transient; absent for a zero reference.
    pub normalized_rms_error: Option<f64>,
    /// `RMS(r - ỹ)` after the transient (kW per load).
    pub rms_error: f64,
    pub max_abs_zeta: f64,
    pub disaggregated_houses: usize,
    pub disaggregation_state_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ControlResult {
    pub bode: BodeResult,
    pub trace: ClosedLoopTrace,
    pub summary: ControlSummary,
}

pub fn simulate_control(config: &RunConfig, bundle: &Bundle, reference: &[f64]) -> Result<ControlResult> {
    let c = &config.control;
    let tcl = TclConfig::from(&c.tcl);
    let schedule = tcl_schedule(&tcl)?;
    let bode = bode(config)?;
    let gains = match c.gains {
        Gains::Manual { kp, ki } => PiGains { kp, ki },
        Gains::Auto(_) => bode.design.context("no flat band or -45° crossing in the bode data; set gains by hand")?.gains,
    };
    let root = StreamSeed::new(config.seed).child(STREAM_TAG);
    let mut hook = match &c.disaggregation {
        Some(d) => Some(FilterHook::new(d, bundle, schedule.at(0), reference.len(), config, root.child(1))?),
        None => None,
    };
    let cl = ClosedLoopConfig { gains, record_states: false };
    let mut rng = root.child(0).stream();
    let trace = closed_loop_simulate(
        c.loads,
        &schedule,
        reference,
        &cl,
        hook.as_mut().map(|h| h as &mut dyn DisaggHook),
        &mut rng,
    )?;
    let from = c.transient.min(trace.y.len());
    let n = (trace.y.len() - from).max(1) as f64;
    let rms = ((from..trace.y.len()).map(|t| (trace.reference[t] - trace.y_tilde[t]).powi(2)).sum::<f64>() / n).sqrt();
    let ref_energy: f64 = reference[from..].iter().map(|r| r * r).sum();
    let summary = ControlSummary {
        loads: c.loads,
        steps: reference.len(),
        transient: c.transient,
        kp: gains.kp,
        ki: gains.ki,
        flat_band: bode.design.map(|d| d.flat_band),
        flat_band_magnitude_db: bode.design.map(|d| d.magnitude_db),
        cutoff: bode.design.map(|d| d.cutoff),
        normalized_rms_error: (ref_energy > 0.0).then(|| trace.normalized_rms_error(from)),
        rms_error: rms,
        max_abs_zeta: trace.zeta.iter().fold(0.0, |m: f64, z| m.max(z.abs())),
        disaggregated_houses: hook.as_ref().map_or(0, |h| h.houses.len()),
        disaggregation_state_accuracy: hook.as_ref().map(|h| h.state_accuracy(reference.len().saturating_sub(1))),
    };
    Ok(ControlResult { bode, trace, summary })
}
