use alloc::vec::Vec;

use rand::Rng;

use super::kernel::{controlled_rows, tilt_row, NominalLoadModel};
use super::markov::invariant_pmf;
use super::pi::{pi_step, PiGains, PiState};
use crate::distributions::{categorical_sample, SimplexVector};
use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;
use crate::rng::{Stream, StreamSeed};

/// Nominal models indexed by time step. An empty index means one model for
/// every step.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadSchedule {
    models: Vec<NominalLoadModel>,
    index: Vec<usize>,
}

impl LoadSchedule {
    pub fn constant(model: NominalLoadModel) -> Self {
        Self { models: alloc::vec![model], index: Vec::new() }
    }

    pub fn new(models: Vec<NominalLoadModel>, index: Vec<usize>) -> Result<Self> {
        let first = models.first().ok_or_else(|| invalid("schedule needs a model"))?;
        let (n, nu) = (first.num_states(), first.num_controllable());
        if models.iter().any(|m| m.num_states() != n || m.num_controllable() != nu) {
            return Err(invalid("scheduled models must share a state space"));
        }
        if index.iter().any(|&i| i >= models.len()) {
            return Err(Error::OutOfRange("schedule index".into()));
        }
        Ok(Self { models, index })
    }

    /// Number of scheduled steps, `None` when unbounded.
    pub fn len(&self) -> Option<usize> {
        (!self.index.is_empty()).then_some(self.index.len())
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn num_models(&self) -> usize {
        self.models.len()
    }

    fn model_index(&self, t: usize) -> usize {
        if self.index.is_empty() { 0 } else { self.index[t] }
    }

    pub fn at(&self, t: usize) -> &NominalLoadModel {
        &self.models[self.model_index(t)]
    }
}

/// What a load's controller believes about its own device.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadEstimate {
    /// Estimated controllable state.
    pub controllable: usize,
    /// Estimated power of each controllable state.
    pub power: Vec<f64>,
}

/// Replaces the true controllable state and power map of each load before it
/// draws its next state.
pub trait DisaggHook {
    fn estimate(&mut self, t: usize, states: &[usize], model: &NominalLoadModel) -> Result<Vec<LoadEstimate>>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedLoopConfig {
    pub gains: PiGains,
    /// Keep every load's state at every step.
    pub record_states: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClosedLoopTrace {
    pub reference: Vec<f64>,
    /// Average power per load.
    pub y: Vec<f64>,
    /// Nominal average power from the uncontrolled mean-field twin.
    pub y_nominal: Vec<f64>,
    pub y_tilde: Vec<f64>,
    pub error: Vec<f64>,
    pub zeta: Vec<f64>,
    /// `states[t][i]`, only when recorded.
    pub states: Vec<Vec<usize>>,
}

impl ClosedLoopTrace {
    /// `RMS(r - ỹ) / RMS(r)` over steps `from..`.
    pub fn normalized_rms_error(&self, from: usize) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for t in from..self.reference.len() {
            num += (self.reference[t] - self.y_tilde[t]) * (self.reference[t] - self.y_tilde[t]);
            den += self.reference[t] * self.reference[t];
        }
        libm::sqrt(num / den)
    }
}

fn draw(r_row: &[f64], q_row: &[f64], nn: usize, rng: &mut Stream) -> usize {
    let u = categorical_sample(r_row, rng);
    let k = categorical_sample(q_row, rng);
    u * nn + k
}

#[cfg(feature = "parallel")]
fn advance<F: Fn(usize, usize, &mut Stream) -> usize + Sync>(states: &mut [usize], rngs: &mut [Stream], f: F) {
    use rayon::prelude::*;
    states.par_iter_mut().zip(rngs.par_iter_mut()).enumerate().for_each(|(i, (x, r))| *x = f(i, *x, r));
}

#[cfg(not(feature = "parallel"))]
fn advance<F: Fn(usize, usize, &mut Stream) -> usize>(states: &mut [usize], rngs: &mut [Stream], f: F) {
    states.iter_mut().zip(rngs.iter_mut()).enumerate().for_each(|(i, (x, r))| *x = f(i, *x, r));
}

/// Simulates `n_loads` loads under PI feedback. Each step: measure the
/// average power `y_t`, form `ỹ_t = y_t - ȳ_t` against the `ζ ≡ 0` mean-field
/// twin, `e_t = r_t - ỹ_t`, update `ζ_t`, then let every load draw from
/// `P_{ζ_t}`. Loads start from the invariant pmf of the first model.
pub fn closed_loop_simulate<R: Rng + ?Sized>(
    n_loads: usize,
    schedule: &LoadSchedule,
    reference: &[f64],
    config: &ClosedLoopConfig,
    mut hook: Option<&mut dyn DisaggHook>,
    rng: &mut R,
) -> Result<ClosedLoopTrace> {
    if n_loads == 0 {
        return Err(invalid("need at least one load"));
    }
    if let Some(len) = schedule.len() {
        if reference.len() > len {
            return Err(Error::OutOfRange(alloc::format!("reference has {} steps, profile {len}", reference.len())));
        }
    }
    let base = StreamSeed::new(rng.random());
    let mut rngs: Vec<Stream> = (0..n_loads).map(|i| base.child(i as u64).stream()).collect();
    let first = schedule.at(0);
    let nominal: Vec<Matrix> = schedule.models.iter().map(|m| m.nominal_kernel()).collect();
    let pi0 = invariant_pmf(&nominal[schedule.model_index(0)])?;
    let mut states: Vec<usize> = rngs.iter_mut().map(|r| categorical_sample(pi0.as_slice(), r)).collect();
    let mut mu_bar = pi0;
    let mut pi = PiState::new(config.gains);
    let steps = reference.len();
    let mut trace = ClosedLoopTrace { reference: reference.to_vec(), ..Default::default() };
    let nn = first.num_uncontrollable();
    for (t, &r) in reference.iter().enumerate() {
        let model = schedule.at(t);
        let y = states.iter().map(|&x| model.state_power(x)).sum::<f64>() / n_loads as f64;
        let y_bar: f64 = mu_bar.iter().enumerate().map(|(x, &m)| m * model.state_power(x)).sum();
        let e = r - (y - y_bar);
        let (zeta, next_pi) = pi_step(e, pi);
        pi = next_pi;
        trace.y.push(y);
        trace.y_nominal.push(y_bar);
        trace.y_tilde.push(y - y_bar);
        trace.error.push(e);
        trace.zeta.push(zeta);
        if config.record_states {
            trace.states.push(states.clone());
        }
        if t + 1 == steps {
            break;
        }
        match hook.as_deref_mut() {
            None => {
                let rows = controlled_rows(model, zeta);
                advance(&mut states, &mut rngs, |_, x, rng| draw(rows.row(x), model.q0().row(x), nn, rng));
            }
            Some(h) => {
                let est = h.estimate(t, &states, model)?;
                if est.len() != n_loads {
                    return Err(Error::DimensionMismatch { expected: n_loads, found: est.len() });
                }
                let nu = model.num_controllable();
                advance(&mut states, &mut rngs, |i, x, rng| {
                    let xh = est[i].controllable.min(nu - 1) * nn + model.split(x).1;
                    let mut row = alloc::vec![0.0; nu];
                    tilt_row(model.r0().row(xh), &est[i].power, zeta, &mut row);
                    draw(&row, model.q0().row(xh), nn, rng)
                });
            }
        }
        let p0 = &nominal[schedule.model_index(t)];
        mu_bar = SimplexVector::from_unnormalized(p0.left_mul(mu_bar.as_slice()).into_iter().map(|v| v.max(0.0)).collect())?;
    }
    Ok(trace)
}
