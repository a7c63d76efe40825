//! Demand dispatch: exponentially tilted load kernels, mean-field dynamics,
//! the linearised transfer function, PI feedback and the N-load closed loop.

mod closed_loop;
mod kernel;
mod markov;
mod pi;
mod tcl;
mod transfer;

pub use closed_loop::{closed_loop_simulate, ClosedLoopConfig, ClosedLoopTrace, DisaggHook, LoadEstimate, LoadSchedule};
pub use kernel::{controlled_kernel, controlled_rows, kernel_derivative, mean_field_step, MeanFieldState, NominalLoadModel};
pub use markov::{invariant_pmf, is_unichain};
pub use pi::{closed_loop_response, fit_pi_gains, pi_step, PiDesign, PiGains, PiState};
pub use tcl::{tcl_model_at, tcl_nominal_model, tcl_schedule, TclConfig};
pub use transfer::{bode_points, linearize, transfer_function, BodePoint, Linearization};
