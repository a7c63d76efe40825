//! Bayesian models and online inference for non-intrusive load monitoring,
//! together with the mean-field demand-dispatch control layer.
//!
//! The crate is `no_std` (it needs `alloc`). Every stochastic routine takes an
//! explicit random stream so that runs are reproducible from a seed.
#![no_std]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod dispatch;
pub mod distributions;
pub mod error;
pub mod hdp;
pub mod hmm;
pub mod hsmm;
pub mod linalg;
pub mod mixture;
pub mod numeric;
pub mod rng;
pub mod smc;

pub use error::{Error, Result};
