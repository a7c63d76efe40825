//! The JSON run configuration. Unknown keys are rejected; every field has a
//! default, so `{}` is a valid configuration.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nilm_core::dispatch::TclConfig;
use nilm_core::distributions::NegBinForm;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed; every random stream is derived from it.
    pub seed: u64,
    /// Particles per factorial filter.
    pub particles: usize,
    /// Number of weak-limit HDP states `L`.
    pub weak_limit: usize,
    /// Top-level HDP concentration `γ`.
    pub gamma: f64,
    /// Transition concentration `α`.
    pub alpha: f64,
    /// Gibbs sweeps per training run, including burn-in.
    pub sweeps: usize,
    pub burn_in: usize,
    /// Longest segment (minutes) the HSMM messages consider; `null` for none.
    pub max_duration: Option<usize>,
    pub negbin_form: NegBinFormName,
    /// Devices to use, by name; empty means every device available.
    pub devices: Vec<String>,
    pub synth: SynthConfig,
    pub train: TrainConfig,
    pub control: ControlConfig,
    pub bode: BodeConfig,
    pub paths: PathsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            particles: 2000,
            weak_limit: 10,
            gamma: 2.0,
            alpha: 4.0,
            sweeps: 300,
            burn_in: 100,
            max_duration: Some(240),
            negbin_form: NegBinFormName::Shifted,
            devices: Vec::new(),
            synth: SynthConfig::default(),
            train: TrainConfig::default(),
            control: ControlConfig::default(),
            bode: BodeConfig::default(),
            paths: PathsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum NegBinFormName {
    Shifted,
    Standard,
}

impl From<NegBinFormName> for NegBinForm {
    fn from(f: NegBinFormName) -> Self {
        match f {
            NegBinFormName::Shifted => NegBinForm::Shifted,
            NegBinFormName::Standard => NegBinForm::Standard,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    /// Houses to generate.
    pub houses: usize,
    /// Minutes per house.
    pub minutes: usize,
    /// Variance of the additive noise on the total (W²).
    pub noise_var: f64,
    /// First timestamp, `YYYY-MM-DDTHH:MM`.
    pub start: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { houses: 1, minutes: 5000, noise_var: 100.0, start: "2016-01-01T00:00".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Only the first this many minutes of each session are used.
    pub max_minutes: usize,
    /// Adjacent state levels closer than `merge_sd` noise standard
    /// deviations plus `merge_rel` times the larger level form one mode.
    pub merge_sd: f64,
    pub merge_rel: f64,
    /// Fixed negative-binomial shape `r`.
    pub r: u32,
    /// Pseudo-count strength of the fitted duration and transition priors.
    pub prior_strength: f64,
    /// EM iterations for the duration mixtures.
    pub em_iterations: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { max_minutes: 2880, merge_sd: 4.0, merge_rel: 0.2, r: 2, prior_strength: 20.0, em_iterations: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct ControlConfig {
    /// Number of simulated loads.
    pub loads: usize,
    /// Minutes simulated.
    pub steps: usize,
    pub gains: Gains,
    pub reference: ReferenceConfig,
    /// Steps excluded from the tracking error.
    pub transient: usize,
    pub tcl: TclSettings,
    /// Close the loop through per-house disaggregation instead of the true
    /// device state; `null` disables it.
    pub disaggregation: Option<DisaggControl>,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            loads: 10_000,
            steps: 1440,
            gains: Gains::default(),
            reference: ReferenceConfig::default(),
            transient: 200,
            tcl: TclSettings::default(),
            disaggregation: None,
        }
    }
}

/// `"auto"` for the flat-band recipe, or explicit gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(untagged)]
pub enum Gains {
    Auto(AutoGains),
    Manual { kp: f64, ki: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum AutoGains {
    Auto,
}

impl Default for Gains {
    fn default() -> Self {
        Gains::Auto(AutoGains::Auto)
    }
}

/// Sinusoidal reference `r_t = amplitude · sin(2π t / period)` in kW per load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct ReferenceConfig {
    pub amplitude: f64,
    /// Period in minutes.
    pub period: f64,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self { amplitude: 0.1, period: 2880.0 }
    }
}

impl ReferenceConfig {
    pub fn series(&self, steps: usize) -> Vec<f64> {
        (0..steps).map(|t| self.amplitude * (2.0 * PI * t as f64 / self.period).sin()).collect()
    }
}

/// Thermostatically controlled load fleet; see the README for units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct TclSettings {
    /// Ambient temperature (°C), one value or one per minute.
    pub ambient: Vec<f64>,
    pub time_constant: f64,
    pub cooling_rate: f64,
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub grid: f64,
    pub margin: usize,
    /// kW drawn while ON.
    pub power_on: f64,
    pub switching_noise: f64,
}

impl Default for TclSettings {
    fn default() -> Self {
        let c = TclConfig::default();
        Self {
            ambient: c.ambient,
            time_constant: c.time_constant,
            cooling_rate: c.cooling_rate,
            theta_lo: c.theta_lo,
            theta_hi: c.theta_hi,
            grid: c.grid,
            margin: c.margin,
            power_on: c.power_on,
            switching_noise: c.switching_noise,
        }
    }
}

impl From<&TclSettings> for TclConfig {
    fn from(s: &TclSettings) -> Self {
        TclConfig {
            ambient: s.ambient.clone(),
            time_constant: s.time_constant,
            cooling_rate: s.cooling_rate,
            theta_lo: s.theta_lo,
            theta_hi: s.theta_hi,
            grid: s.grid,
            margin: s.margin,
            power_on: s.power_on,
            switching_noise: s.switching_noise,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct DisaggControl {
    /// Houses (loads) that run their own filter; the rest use the true state.
    pub houses: usize,
    /// Particles per house filter.
    pub particles: usize,
    /// Bundle device that is the controlled load; the others form the
    /// background consumption of each house.
    pub controlled_device: String,
}

impl Default for DisaggControl {
    fn default() -> Self {
        Self { houses: 100, particles: 100, controlled_device: "air compressor".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct BodeConfig {
    /// Lowest frequency (rad/sample).
    pub min_freq: f64,
    /// Highest frequency (rad/sample), at most π.
    pub max_freq: f64,
    /// Log-spaced points.
    pub points: usize,
}

impl Default for BodeConfig {
    fn default() -> Self {
        Self { min_freq: 1e-4, max_freq: PI, points: 91 }
    }
}

impl BodeConfig {
    pub fn frequencies(&self) -> Vec<f64> {
        let (a, b) = (self.min_freq.ln(), self.max_freq.ln());
        let n = self.points;
        (0..n).map(|i| if n == 1 { self.min_freq } else { (a + (b - a) * i as f64 / (n - 1) as f64).exp() }).collect()
    }
}

/// Input files. Relative paths are taken relative to the config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    /// Hyperparameter bundle; the built-in bundle is used when absent.
    pub bundle: Option<PathBuf>,
    /// Trace to disaggregate.
    pub trace: Option<PathBuf>,
    /// Trace files or directories of `.csv` files for `usage` and `train`.
    pub corpus: Vec<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: RunConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    /// Reads and validates a config; relative input paths are resolved
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut c = Self::from_json(&text).with_context(|| format!("in {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        c.paths.bundle.as_mut().map(fix);
        c.paths.trace.as_mut().map(fix);
        c.paths.corpus.iter_mut().for_each(fix);
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 {
            bail!("particles must be at least 1");
        }
        if self.weak_limit < 2 {
            bail!("weak_limit must be at least 2");
        }
        if !(self.gamma > 0.0 && self.alpha > 0.0) {
            bail!("gamma and alpha must be positive");
        }
        if self.burn_in >= self.sweeps {
            bail!("burn_in ({}) must be smaller than sweeps ({})", self.burn_in, self.sweeps);
        }
        if self.max_duration == Some(0) {
            bail!("max_duration must be at least 1");
        }
        if self.synth.minutes == 0 || self.synth.houses == 0 || !(self.synth.noise_var >= 0.0) {
            bail!("synth needs minutes >= 1, houses >= 1 and noise_var >= 0");
        }
        crate::trace::parse_timestamp(&self.synth.start)?;
        if self.train.r == 0 || !(self.train.prior_strength > 0.0) || !(self.train.merge_sd > 0.0) || !(self.train.merge_rel >= 0.0) {
            bail!("train needs r >= 1, prior_strength > 0, merge_sd > 0 and merge_rel >= 0");
        }
        let c = &self.control;
        if c.loads == 0 || c.steps == 0 {
            bail!("control needs at least one load and one step");
        }
        if c.transient >= c.steps {
            bail!("control.transient must be smaller than control.steps");
        }
        if !(c.reference.period > 0.0) || !c.reference.amplitude.is_finite() {
            bail!("reference needs a positive period and a finite amplitude");
        }
        if let Gains::Manual { kp, ki } = c.gains {
            if !(kp.is_finite() && ki.is_finite()) {
                bail!("gains must be finite");
            }
        }
        if let Some(d) = &c.disaggregation {
            if d.houses > c.loads || d.particles == 0 {
                bail!("disaggregation needs houses <= loads and at least one particle");
            }
        }
        TclConfig::from(&c.tcl).validate()?;
        let b = &self.bode;
        if !(b.min_freq > 0.0 && b.min_freq < b.max_freq && b.max_freq <= PI) || b.points < 2 {
            bail!("bode needs 0 < min_freq < max_freq <= pi and at least two points");
        }
        Ok(())
    }

    pub fn form(&self) -> NegBinForm {
        self.negbin_form.into()
    }
}

/// JSON Schema of [`RunConfig`].
pub fn schema() -> String {
    let s = schemars::schema_for!(RunConfig);
    let mut out = serde_json::to_string_pretty(&s).expect("schema serialises");
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        assert_eq!(RunConfig::from_json("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_json(r#"{"particle": 10}"#).is_err());
        assert!(RunConfig::from_json(r#"{"control": {"load": 10}}"#).is_err());
    }

    #[test]
    fn gains_accept_auto_or_numbers() {
        let c = RunConfig::from_json(r#"{"control": {"gains": "auto"}}"#).unwrap();
        assert_eq!(c.control.gains, Gains::default());
        let c = RunConfig::from_json(r#"{"control": {"gains": {"kp": 1.5, "ki": 0.01}}}"#).unwrap();
        assert_eq!(c.control.gains, Gains::Manual { kp: 1.5, ki: 0.01 });
        assert!(RunConfig::from_json(r#"{"control": {"gains": "fast"}}"#).is_err());
    }

    #[test]
    fn invalid_values_fail_validation() {
        assert!(RunConfig::from_json(r#"{"particles": 0}"#).is_err());
        assert!(RunConfig::from_json(r#"{"sweeps": 10, "burn_in": 10}"#).is_err());
        assert!(RunConfig::from_json(r#"{"bode": {"max_freq": 4.0}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"synth": {"start": "yesterday"}}"#).is_err());
    }

    #[test]
    fn round_trips_through_json() {
        let c = RunConfig::default();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), c);
    }

    #[test]
    fn published_schema_is_current() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("config.schema.json");
        let on_disk = std::fs::read_to_string(&path).unwrap_or_default();
        assert!(on_disk == schema(), "regenerate with `nilm schema > {}`", path.display());
    }

    #[test]
    fn frequencies_are_log_spaced() {
        let f = BodeConfig { min_freq: 1e-3, max_freq: 1e-1, points: 3 }.frequencies();
        assert!((f[1] - 1e-2).abs() < 1e-15 && (f[2] - 1e-1).abs() < 1e-15);
    }
}
