//! Bayesian inversion with Cauchy Markov random field priors.
//!
//! The crate builds deconvolution posteriors from a Gaussian likelihood and one of
//! several edge-preserving (Cauchy difference, Cauchy sheet, Cauchy SPDE) or
//! reference (Gaussian, total variation) priors, computes MAP estimates with
//! L-BFGS, samples posteriors with adaptive Metropolis-within-Gibbs,
//! Repelling-Attracting Metropolis and multinomial NUTS, and reports chain
//! diagnostics.
//!
//! All numerical code is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the scalar to `f64`, which is what the CLI uses.

// `!(x > 0)` rejects NaN on purpose; index loops mirror the stencil formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod forward;
pub mod lattice;
pub mod linalg;
pub mod num;
pub mod optimize;
pub mod posterior;
pub mod priors;
pub mod quadrature;
pub mod realizations;
pub mod samplers;

pub use diagnostics::{diagnose, DiagnosticsReport, WithinVariance};
pub use error::{Error, Result};
pub use forward::{build_operator, simulate_data, ForwardOperator, Measurement, Phantom};
pub use lattice::{Field, IndexSet, Lattice};
pub use num::Real;
pub use optimize::{lbfgs_map, MapResult, OptimizerConfig};
pub use posterior::{CachedState, Posterior};
pub use priors::{Prior, PriorSpec, PriorVariant};
pub use realizations::{NoiseFamily, NoiseSpec};
pub use samplers::{Algorithm, Chain, SamplerConfig};

pub type Field64 = Field<f64>;
pub type Field32 = Field<f32>;
pub type Prior64 = Prior<f64>;
pub type Prior32 = Prior<f32>;
pub type ForwardOperator64 = ForwardOperator<f64>;
pub type ForwardOperator32 = ForwardOperator<f32>;
pub type Posterior64 = Posterior<f64>;
pub type Posterior32 = Posterior<f32>;
pub type Chain64 = Chain<f64>;
