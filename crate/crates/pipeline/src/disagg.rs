//! Streaming disaggregation with the factorial particle filter.

use anyhow::{Context, Result};
use chrono::NaiveDateTime;
use nilm_core::rng::{Stream, StreamSeed};
use nilm_core::smc::{estimators, fbpf_init, fbpf_step, Ensemble, FactorialConfig, FactorialParticle};
use serde::Serialize;

use crate::bundle::Bundle;
use crate::metrics::{canonical_rank, nearest_rank, rmse, state_accuracy};
use crate::trace::PowerTrace;

pub const STREAM_TAG: u64 = 3;

/// Estimate for one device at one minute.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceEstimate {
    /// MAP state, as its rank by posterior-mean level.
    pub state: usize,
    /// Posterior-mean power (W).
    pub power: f64,
    /// Posterior-mean level of the MAP state (W).
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub timestamp: NaiveDateTime,
    pub total: f64,
    pub devices: Vec<DeviceEstimate>,
    /// Aggregate minus the sum of the MAP-state levels (W).
    pub residual: f64,
}

/// One filter run; feed it one aggregate reading per call.
pub struct Disaggregator {
    config: FactorialConfig,
    ensemble: Option<Ensemble<FactorialParticle>>,
    rng: Stream,
}

impl Disaggregator {
    pub fn new(bundle: &Bundle, particles: usize, seed: StreamSeed) -> Result<Self> {
        let chains = bundle.devices.iter().map(|d| d.chain_prior()).collect::<Result<Vec<_>>>()?;
        let config = FactorialConfig::new(chains);
        let mut rng = seed.stream();
        let ensemble = fbpf_init(&config, particles, &mut rng)?;
        Ok(Self { config, ensemble: Some(ensemble), rng })
    }

    /// Forgets the current joint state so the next reading is treated as the
    /// start of a new session; learned parameters are kept.
    pub fn restart(&mut self) {
        if let Some(e) = self.ensemble.as_mut() {
            e.particles.iter_mut().for_each(|p| p.x = None);
        }
    }

    pub fn step(&mut self, total: f64) -> Result<(Vec<DeviceEstimate>, f64)> {
        let e = self.ensemble.take().context("filter is in a failed state")?;
        let e = fbpf_step(e, total, &self.config, &mut self.rng)?;
        let est = estimators(&e);
        self.ensemble = Some(e);
        let devices: Vec<DeviceEstimate> = est
            .iter()
            .map(|c| DeviceEstimate {
                state: canonical_rank(&c.theta_mean)[c.map_state],
                power: c.power_mean,
                level: c.theta_mean[c.map_state],
            })
            .collect();
        let residual = total - devices.iter().map(|d| d.level).sum::<f64>();
        Ok((devices, residual))
    }

    /// Posterior-mean level of every state, per device.
    pub fn levels(&self) -> Vec<Vec<f64>> {
        self.ensemble.as_ref().map(|e| estimators(e).into_iter().map(|c| c.theta_mean).collect()).unwrap_or_default()
    }

    pub fn ensemble(&self) -> Option<&Ensemble<FactorialParticle>> {
        self.ensemble.as_ref()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviceMetrics {
    pub device: String,
    pub rmse: f64,
    pub state_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisaggResult {
    pub house: String,
    pub devices: Vec<String>,
    pub records: Vec<StepRecord>,
    /// Present when the trace carries every bundle device.
    pub metrics: Option<Vec<DeviceMetrics>>,
}

/// Runs the filter over every session of `trace`. `labels[k][t]`, when
/// given, are true mode ranks over the concatenated sessions; otherwise the
/// true state is the rank of the final level nearest to the metered power.
pub fn disaggregate(
    trace: &PowerTrace,
    bundle: &Bundle,
    particles: usize,
    seed: StreamSeed,
    labels: Option<&[Vec<usize>]>,
) -> Result<DisaggResult> {
    let mut filter = Disaggregator::new(bundle, particles, seed)?;
    let mut records = Vec::with_capacity(trace.minutes());
    for (si, s) in trace.sessions.iter().enumerate() {
        if si > 0 {
            filter.restart();
        }
        for (t, &y) in s.total.iter().enumerate() {
            let (devices, residual) = filter.step(y).with_context(|| format!("{} at {}", trace.name, s.timestamp(t)))?;
            records.push(StepRecord { timestamp: s.timestamp(t), total: y, devices, residual });
        }
    }
    let cols: Option<Vec<usize>> = bundle.devices.iter().map(|d| trace.device_index(&d.name)).collect();
    let metrics = match cols {
        None => None,
        Some(cols) => {
            let levels = filter.levels();
            let mut out = Vec::new();
            for (k, &c) in cols.iter().enumerate() {
                let truth: Vec<f64> = trace.sessions.iter().flat_map(|s| s.devices[c].iter().copied()).collect();
                let est: Vec<f64> = records.iter().map(|r| r.devices[k].power).collect();
                let est_state: Vec<usize> = records.iter().map(|r| r.devices[k].state).collect();
                let true_state: Vec<usize> = match labels {
                    Some(l) => l[k].clone(),
                    None => truth.iter().map(|&y| nearest_rank(y, &levels[k])).collect(),
                };
                out.push(DeviceMetrics {
                    device: bundle.devices[k].name.clone(),
                    rmse: rmse(&est, &truth)?,
                    state_accuracy: state_accuracy(&est_state, &true_state)?,
                });
            }
            Some(out)
        }
    };
    Ok(DisaggResult {
        house: trace.name.clone(),
        devices: bundle.devices.iter().map(|d| d.name.clone()).collect(),
        records,
        metrics,
    })
}
