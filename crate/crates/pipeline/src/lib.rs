//! File formats, training, synthesis, disaggregation and control drivers
//! behind the `nilm` command.

pub mod bundle;
pub mod cli;
pub mod config;
pub mod control;
pub mod disagg;
pub mod metrics;
pub mod output;
pub mod plot;
pub mod synth;
pub mod trace;
pub mod train;
pub mod usage;
