use alloc::vec;
use alloc::vec::Vec;

use super::closed_loop::LoadSchedule;
use super::kernel::NominalLoadModel;
use crate::error::{invalid, Result};
use crate::linalg::Matrix;

/// A cooling thermostatically controlled load on a temperature grid.
/// Controllable states: 0 = OFF, 1 = ON.
#[derive(Debug, Clone, PartialEq)]
pub struct TclConfig {
    /// Ambient temperature per minute (°C); a single value means constant.
    pub ambient: Vec<f64>,
    /// Thermal time constant (minutes).
    pub time_constant: f64,
    /// Temperature drop per minute while ON (°C).
    pub cooling_rate: f64,
    pub theta_lo: f64,
    pub theta_hi: f64,
    /// Grid resolution (°C); the deadband edges must lie on the grid.
    pub grid: f64,
    /// Extra grid points kept on each side of the deadband.
    pub margin: usize,
    /// Power drawn while ON (kW).
    pub power_on: f64,
    /// Probability of a spontaneous switch inside the deadband.
    pub switching_noise: f64,
}

impl Default for TclConfig {
    fn default() -> Self {
        Self {
            ambient: vec![25.0],
            time_constant: 40.0,
            cooling_rate: 0.2,
            theta_lo: 19.0,
            theta_hi: 23.0,
            grid: 0.25,
            margin: 4,
            power_on: 1.0,
            switching_noise: 0.01,
        }
    }
}

impl TclConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ambient.is_empty() || self.ambient.iter().any(|a| !a.is_finite()) {
            return Err(invalid("ambient profile must be nonempty and finite"));
        }
        if !(self.theta_lo < self.theta_hi) {
            return Err(invalid("need theta_lo < theta_hi"));
        }
        if !(self.grid > 0.0) || !(self.time_constant >= 1.0) || !(self.cooling_rate >= 0.0) {
            return Err(invalid("grid, time constant and cooling rate must be positive"));
        }
        let cells = (self.theta_hi - self.theta_lo) / self.grid;
        if (cells - libm::round(cells)).abs() > 1e-9 {
            return Err(invalid("deadband width must be a multiple of the grid"));
        }
        if self.margin < 2 {
            return Err(invalid("the grid needs at least two points of margin"));
        }
        if !(0.0..0.5).contains(&self.switching_noise) {
            return Err(invalid("switching noise must lie in [0, 0.5)"));
        }
        Ok(())
    }

    fn band_cells(&self) -> usize {
        libm::round((self.theta_hi - self.theta_lo) / self.grid) as usize
    }

    pub fn num_temperatures(&self) -> usize {
        self.band_cells() + 1 + 2 * self.margin
    }

    pub fn temperature(&self, k: usize) -> f64 {
        self.theta_lo + (k as f64 - self.margin as f64) * self.grid
    }

    pub fn mean_ambient(&self) -> f64 {
        self.ambient.iter().sum::<f64>() / self.ambient.len() as f64
    }
}

/// Model at the mean ambient temperature.
pub fn tcl_nominal_model(config: &TclConfig) -> Result<NominalLoadModel> {
    tcl_model_at(config, config.mean_ambient())
}

/// `Q_0`: Euler step `θ' = θ + (θ_amb - θ)/τ - c 1{ON}` split between the two
/// neighbouring grid points in proportion to proximity (stochastic rounding).
/// `R_0`: thermostat with hysteresis. Inside the band the current mode is kept
/// with probability `1 - ε`; at the upper (lower) edge the load turns ON (OFF)
/// with probability `1 - ε`; beyond the edges it is forced.
pub fn tcl_model_at(config: &TclConfig, ambient: f64) -> Result<NominalLoadModel> {
    config.validate()?;
    let nt = config.num_temperatures();
    let k_lo = config.margin;
    let k_hi = config.margin + config.band_cells();
    let eps = config.switching_noise;
    let n = 2 * nt;
    let mut r0 = Matrix::zeros(n, 2);
    let mut q0 = Matrix::zeros(n, nt);
    for u in 0..2 {
        for k in 0..nt {
            let x = u * nt + k;
            let on = match k {
                k if k > k_hi => 1.0,
                k if k == k_hi => 1.0 - eps,
                k if k < k_lo => 0.0,
                k if k == k_lo => eps,
                _ if u == 1 => 1.0 - eps,
                _ => eps,
            };
            r0[(x, 0)] = 1.0 - on;
            r0[(x, 1)] = on;
            let theta = config.temperature(k);
            let next = theta + (ambient - theta) / config.time_constant - config.cooling_rate * u as f64;
            let pos = ((next - config.temperature(0)) / config.grid).clamp(0.0, (nt - 1) as f64);
            let below = libm::floor(pos) as usize;
            let frac = pos - below as f64;
            if frac == 0.0 || below + 1 >= nt {
                q0[(x, below)] = 1.0;
            } else {
                q0[(x, below)] = 1.0 - frac;
                q0[(x, below + 1)] = frac;
            }
        }
    }
    NominalLoadModel::new(r0, q0, vec![0.0, config.power_on])
}

/// One model per minute of the ambient profile; repeated temperatures share
/// a model.
pub fn tcl_schedule(config: &TclConfig) -> Result<LoadSchedule> {
    if config.ambient.len() == 1 {
        return Ok(LoadSchedule::constant(tcl_model_at(config, config.ambient[0])?));
    }
    let mut models: Vec<NominalLoadModel> = Vec::new();
    let mut keys: Vec<u64> = Vec::new();
    let mut index = Vec::with_capacity(config.ambient.len());
    for &a in &config.ambient {
        let key = a.to_bits();
        let i = match keys.iter().position(|&k| k == key) {
            Some(i) => i,
            None => {
                keys.push(key);
                models.push(tcl_model_at(config, a)?);
                models.len() - 1
            }
        };
        index.push(i);
    }
    LoadSchedule::new(models, index)
}
