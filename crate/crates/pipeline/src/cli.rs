//! The `nilm` command line.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use log::info;
use nilm_core::rng::StreamSeed;
use rayon::prelude::*;
use serde::Serialize;

use crate::bundle::Bundle;
use crate::config::{schema, RunConfig};
use crate::control::{bode, simulate_control, ControlSummary};
use crate::disagg::{disaggregate, DeviceMetrics, DisaggResult};
use crate::output::{write_atomic, write_json};
use crate::plot::{write_bode, write_control_trace, write_disagg, write_usage};
use crate::synth::{synth_generate, write_houses};
use crate::trace::{expand_corpus, load_trace, PowerTrace};
use crate::train::{train_hyperparams, HouseFit};
use crate::usage::{device_usage_report, house_usage, DeviceUsage};

/// Environment variable holding the log filter (`error` .. `trace`).
pub const LOG_ENV: &str = "NILM_LOG";

#[derive(Debug, Parser)]
#[command(name = "nilm", version, about = "Bayesian load disaggregation and demand dispatch")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration; defaults apply when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Overrides the configured particle count.
    #[arg(long, global = true)]
    pub particles: Option<usize>,
    /// Overrides the configured weak-limit truncation.
    #[arg(long = "weak-limit", global = true)]
    pub weak_limit: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate houses from the bundle.
    Synth,
    /// Device usage and share-of-total statistics over the corpus.
    Usage,
    /// Fit a hyperparameter bundle to the corpus.
    Train,
    /// Disaggregate `paths.trace`, or every corpus house.
    Disagg,
    /// Closed-loop demand-dispatch experiment.
    Control,
    /// Bode data of the linearised fleet and the PI gains fitted to it.
    Bode,
    /// Print the JSON schema of the run configuration.
    Schema,
}

impl Cli {
    pub fn run_config(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(n) = self.particles {
            c.particles = n;
        }
        if let Some(l) = self.weak_limit {
            c.weak_limit = l;
        }
        c.validate()?;
        Ok(c)
    }
}

fn bundle_for(c: &RunConfig) -> Result<Bundle> {
    let b = match &c.paths.bundle {
        Some(p) => Bundle::load(p)?,
        None => Bundle::builtin(),
    };
    b.select(&c.devices)
}

fn corpus(c: &RunConfig) -> Result<Vec<PowerTrace>> {
    if c.paths.corpus.is_empty() {
        bail!("paths.corpus is empty");
    }
    expand_corpus(&c.paths.corpus)?.par_iter().map(|p| load_trace(p)).collect()
}

/// Mode labels written by `synth` next to a trace, reordered to the bundle's
/// devices. `None` unless every device is labelled over the whole trace.
fn sibling_labels(trace_path: &Path, trace: &PowerTrace, bundle: &Bundle) -> Result<Option<Vec<Vec<usize>>>> {
    let Some(dir) = trace_path.parent() else { return Ok(None) };
    let p = dir.join("labels").join(format!("{}.csv", trace.name));
    if !p.is_file() {
        return Ok(None);
    }
    let mut rdr = csv::Reader::from_path(&p).with_context(|| format!("opening {}", p.display()))?;
    let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    let Some(cols) = bundle.devices.iter().map(|d| header.iter().position(|h| *h == d.name)).collect::<Option<Vec<_>>>() else {
        return Ok(None);
    };
    let mut labels = vec![Vec::new(); cols.len()];
    for rec in rdr.records() {
        let rec = rec?;
        for (l, &c) in labels.iter_mut().zip(&cols) {
            l.push(rec[c].parse::<usize>().with_context(|| format!("{}: bad label", p.display()))?);
        }
    }
    Ok(labels.iter().all(|l| l.len() == trace.minutes()).then_some(labels))
}

#[derive(Serialize)]
struct SynthSummary {
    seed: u64,
    houses: Vec<String>,
    devices: Vec<String>,
    minutes: usize,
    noise_var: f64,
}

#[derive(Serialize)]
struct TrainSummary {
    houses: usize,
    warnings: Vec<String>,
    fits: Vec<DeviceFits>,
}

#[derive(Serialize)]
struct DeviceFits {
    device: String,
    houses: Vec<FitRow>,
}

#[derive(Serialize)]
struct FitRow {
    house: String,
    mode_means: Vec<f64>,
    used_states: usize,
}

impl From<&HouseFit> for FitRow {
    fn from(f: &HouseFit) -> Self {
        Self { house: f.house.clone(), mode_means: f.mode_means.clone(), used_states: f.used_states }
    }
}

#[derive(Serialize)]
struct DisaggSummary {
    particles: usize,
    devices: Vec<String>,
    houses: Vec<HouseSummary>,
}

#[derive(Serialize)]
struct HouseSummary {
    house: String,
    minutes: usize,
    sessions: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    metrics: Option<Vec<DeviceMetrics>>,
}

#[derive(Serialize)]
struct BodeSummary {
    points: usize,
    kp: Option<f64>,
    ki: Option<f64>,
    flat_band: Option<(f64, f64)>,
    flat_band_magnitude_db: Option<f64>,
    cutoff: Option<f64>,
}

/// Runs one subcommand and returns the files it wrote.
pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>> {
    if let Command::Schema = cli.command {
        let s = schema();
        if cli.out == Path::new(".") {
            print!("{s}");
            return Ok(Vec::new());
        }
        let p = cli.out.join("config.schema.json");
        write_atomic(&p, s.as_bytes())?;
        return Ok(vec![p]);
    }
    let c = cli.run_config()?;
    let out = &cli.out;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut written = Vec::new();
    match cli.command {
        Command::Schema => unreachable!(),
        Command::Synth => {
            let bundle = bundle_for(&c)?;
            let houses = synth_generate(&bundle, &c)?;
            written.extend(write_houses(out, &houses)?);
            let p = out.join("synth_summary.json");
            write_json(
                &p,
                &SynthSummary {
                    seed: c.seed,
                    houses: houses.iter().map(|h| h.trace.name.clone()).collect(),
                    devices: bundle.devices.iter().map(|d| d.name.clone()).collect(),
                    minutes: c.synth.minutes,
                    noise_var: c.synth.noise_var,
                },
            )?;
            written.push(p);
        }
        Command::Usage => {
            let traces = corpus(&c)?;
            let per_house: Vec<_> = traces.iter().map(house_usage).collect();
            let report: Vec<DeviceUsage> = device_usage_report(&per_house);
            let p = out.join("usage.csv");
            write_usage(&p, &per_house.concat())?;
            written.push(p);
            let p = out.join("usage_report.json");
            write_json(&p, &report)?;
            written.push(p);
        }
        Command::Train => {
            let traces = corpus(&c)?;
            let r = train_hyperparams(&traces, &c)?;
            let p = out.join("bundle.json");
            r.bundle.save(&p)?;
            written.push(p);
            let p = out.join("train_report.json");
            let summary = TrainSummary {
                houses: traces.len(),
                warnings: r.warnings.clone(),
                fits: r
                    .fits
                    .iter()
                    .map(|(d, f)| DeviceFits { device: d.clone(), houses: f.iter().map(FitRow::from).collect() })
                    .collect(),
            };
            write_json(&p, &summary)?;
            written.push(p);
        }
        Command::Disagg => {
            let bundle = bundle_for(&c)?;
            let paths = match &c.paths.trace {
                Some(t) => vec![t.clone()],
                None => expand_corpus(&c.paths.corpus).context("set paths.trace or paths.corpus")?,
            };
            let root = StreamSeed::new(c.seed).child(crate::disagg::STREAM_TAG);
            let results: Vec<(PathBuf, DisaggResult, usize)> = paths
                .par_iter()
                .enumerate()
                .map(|(i, p)| {
                    let t = load_trace(p)?;
                    let labels = sibling_labels(p, &t, &bundle)?;
                    let r = disaggregate(&t, &bundle, c.particles, root.child(i as u64), labels.as_deref())?;
                    info!("{}: {} minutes", r.house, r.records.len());
                    let f = out.join("disagg").join(format!("{}.csv", r.house));
                    write_disagg(&f, &r)?;
                    Ok((f, r, t.sessions.len()))
                })
                .collect::<Result<_>>()?;
            let mut houses = Vec::new();
            for (f, r, sessions) in results {
                written.push(f);
                houses.push(HouseSummary { house: r.house, minutes: r.records.len(), sessions, metrics: r.metrics });
            }
            let p = out.join("disagg_summary.json");
            write_json(
                &p,
                &DisaggSummary {
                    particles: c.particles,
                    devices: bundle.devices.iter().map(|d| d.name.clone()).collect(),
                    houses,
                },
            )?;
            written.push(p);
        }
        Command::Control => {
            let bundle = bundle_for(&c)?;
            let reference = c.control.reference.series(c.control.steps);
            let r = simulate_control(&c, &bundle, &reference)?;
            let p = out.join("control_trace.csv");
            write_control_trace(&p, &r.trace)?;
            written.push(p);
            let p = out.join("bode.csv");
            write_bode(&p, &r.bode.points)?;
            written.push(p);
            let p = out.join("control_summary.json");
            let s: &ControlSummary = &r.summary;
            write_json(&p, s)?;
            written.push(p);
        }
        Command::Bode => {
            let b = bode(&c)?;
            let p = out.join("bode.csv");
            write_bode(&p, &b.points)?;
            written.push(p);
            let p = out.join("bode_summary.json");
            write_json(
                &p,
                &BodeSummary {
                    points: b.points.len(),
                    kp: b.design.map(|d| d.gains.kp),
                    ki: b.design.map(|d| d.gains.ki),
                    flat_band: b.design.map(|d| d.flat_band),
                    flat_band_magnitude_db: b.design.map(|d| d.magnitude_db),
                    cutoff: b.design.map(|d| d.cutoff),
                },
            )?;
            written.push(p);
        }
    }
    Ok(written)
}
