//! Probability primitives: simplex vectors, conjugate updates, log densities,
//! samplers, nonparametric constructions and the duration model.

mod conjugate;
mod density;
mod duration;
mod nonparametric;
mod sampling;
mod simplex;

pub use conjugate::{
    conj_update_beta_negbin, conj_update_dirichlet, conj_update_gamma_poisson, conj_update_normal,
    BetaHyper, GammaHyper, NormalPrior,
};
pub use density::{
    beta_logpdf, duration_logpmf, gamma_logpdf, mixture_logpdf, negbin_logpmf, normal_logpdf,
    poisson_logpmf, NegBinForm,
};
pub use duration::{DurationHyper, DurationLaw, DurationParams, DurationTable};
pub use nonparametric::{crp_predictive, stick_breaking};
pub use sampling::{
    beta_sample, categorical_sample, dirichlet_sample, gamma_sample, geometric_sample,
    log_gamma_sample, normal_sample, poisson_sample, uniform_open,
};
pub use simplex::{dirichlet_mean, SimplexVector};
