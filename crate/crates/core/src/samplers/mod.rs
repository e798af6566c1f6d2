//! MCMC samplers: adaptive Metropolis-within-Gibbs, Repelling-Attracting Metropolis
//! within Gibbs, and multinomial NUTS.
//!
//! Samplers are generic over small target traits so the same code runs on a
//! [`Posterior`] and on analytic test densities. Each chain owns its state and a
//! ChaCha8 stream, so a fixed seed gives a bit-identical chain.

pub mod adapt;
mod chain;
mod mwg;
mod nuts;
mod ram;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;
use crate::posterior::{CachedState, Posterior};

pub use chain::{Chain, ChainMeta};
pub use mwg::mwg_sample;
pub use nuts::{leapfrog_step, nuts_sample, u_turn_check, u_turn_check_original, Leapfrog};
pub use ram::ram_sample;

/// Unnormalized log density.
pub trait LogDensity<T> {
    fn dim(&self) -> usize;
    fn log_density(&self, u: &[T]) -> T;
}

pub trait GradLogDensity<T>: LogDensity<T> {
    /// Writes the gradient into `g` and returns the log density.
    fn log_density_and_grad(&self, u: &[T], g: &mut [T]) -> T;
}

/// Single-site incremental evaluation, as used by Gibbs-type samplers.
pub trait Conditional<T> {
    type State: Clone;
    fn dim(&self) -> usize;
    fn init(&self, u: &[T]) -> Self::State;
    fn values<'a>(&self, st: &'a Self::State) -> &'a [T];
    /// Change in log density if site `k` took `value`.
    fn delta(&self, st: &Self::State, k: usize, value: T) -> T;
    fn commit(&self, st: &mut Self::State, k: usize, value: T);
}

impl<T: Real> LogDensity<T> for Posterior<T> {
    fn dim(&self) -> usize {
        Posterior::dim(self)
    }

    fn log_density(&self, u: &[T]) -> T {
        self.log_post(u).expect("field has posterior dimensions")
    }
}

impl<T: Real> GradLogDensity<T> for Posterior<T> {
    fn log_density_and_grad(&self, u: &[T], g: &mut [T]) -> T {
        self.value_and_grad(u, g).expect("field has posterior dimensions")
    }
}

impl<T: Real> Conditional<T> for Posterior<T> {
    type State = CachedState<T>;

    fn dim(&self) -> usize {
        Posterior::dim(self)
    }

    fn init(&self, u: &[T]) -> CachedState<T> {
        self.state(u.to_vec()).expect("field has posterior dimensions")
    }

    fn values<'a>(&self, st: &'a CachedState<T>) -> &'a [T] {
        st.u()
    }

    fn delta(&self, st: &CachedState<T>, k: usize, value: T) -> T {
        self.delta_unchecked(st, k, value)
    }

    fn commit(&self, st: &mut CachedState<T>, k: usize, value: T) {
        Posterior::commit(self, st, k, value)
    }
}

/// Closure-backed density, handy for analytic test targets.
pub struct FnDensity<F> {
    dim: usize,
    f: F,
}

impl<F> FnDensity<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnDensity { dim, f }
    }
}

impl<T, F: Fn(&[T]) -> T> LogDensity<T> for FnDensity<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, u: &[T]) -> T {
        (self.f)(u)
    }
}

/// Closure-backed density with gradient; the closure writes the gradient and returns the value.
pub struct FnGradDensity<F> {
    dim: usize,
    f: F,
}

impl<F> FnGradDensity<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnGradDensity { dim, f }
    }
}

impl<T: Real, F: Fn(&[T], &mut [T]) -> T> LogDensity<T> for FnGradDensity<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, u: &[T]) -> T {
        let mut g = vec![T::zero(); u.len()];
        (self.f)(u, &mut g)
    }
}

impl<T: Real, F: Fn(&[T], &mut [T]) -> T> GradLogDensity<T> for FnGradDensity<F> {
    fn log_density_and_grad(&self, u: &[T], g: &mut [T]) -> T {
        (self.f)(u, g)
    }
}

/// Conditional evaluation by full recomputation, for targets without a cache.
pub struct FullRecompute<D>(pub D);

impl<T: Real, D: LogDensity<T>> Conditional<T> for FullRecompute<D> {
    type State = (Vec<T>, T);

    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn init(&self, u: &[T]) -> (Vec<T>, T) {
        (u.to_vec(), self.0.log_density(u))
    }

    fn values<'a>(&self, st: &'a (Vec<T>, T)) -> &'a [T] {
        &st.0
    }

    fn delta(&self, st: &(Vec<T>, T), k: usize, value: T) -> T {
        let mut u = st.0.clone();
        u[k] = value;
        self.0.log_density(&u) - st.1
    }

    fn commit(&self, st: &mut (Vec<T>, T), k: usize, value: T) {
        st.0[k] = value;
        st.1 = self.0.log_density(&st.0);
    }
}

/// Change in log density if the sites of `block` took `values` (state untouched).
pub(crate) fn block_delta<T: Real, C: Conditional<T>>(target: &C, st: &C::State, block: &[usize], values: &[T]) -> T {
    if let [k] = block {
        return target.delta(st, *k, values[0]);
    }
    let mut scratch = st.clone();
    let mut total = T::zero();
    for (&k, &v) in block.iter().zip(values) {
        total += target.delta(&scratch, k, v);
        target.commit(&mut scratch, k, v);
    }
    total
}

pub(crate) fn block_commit<T: Real, C: Conditional<T>>(target: &C, st: &mut C::State, block: &[usize], values: &[T]) {
    for (&k, &v) in block.iter().zip(values) {
        target.commit(st, k, v);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Mwg,
    Ram,
    Nuts,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::Mwg => "mwg",
            Algorithm::Ram => "ram",
            Algorithm::Nuts => "nuts",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UTurnRule {
    /// Velocity at either end against the summed momentum.
    Generalized,
    /// Velocity at either end against the end-to-end displacement.
    Original,
}

/// Sampler settings. `n_adapt` adaptation iterations run first and are not stored;
/// then `n_samples * thin` iterations run and every `thin`-th state is kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub algorithm: Algorithm,
    pub n_samples: usize,
    pub n_adapt: usize,
    pub thin: usize,
    pub seed: u64,
    /// Index blocks updated in turn by MwG/RAM; `None` means one block per site.
    pub blocks: Option<Vec<Vec<usize>>>,
    /// Ridge added to the proposal covariance.
    pub cov_regularizer: f64,
    /// Proposal standard deviation before the empirical covariance takes over.
    pub initial_proposal_sd: f64,
    /// Adaptation iterations that use `initial_proposal_sd` before covariance adaptation starts.
    pub adapt_start: usize,
    pub repelling_max_tries: usize,
    /// Initial NUTS step size; `None` picks one heuristically.
    pub step_size: Option<f64>,
    pub max_depth: usize,
    pub target_accept: f64,
    /// Diagonal mass matrix `M`; `None` means identity.
    pub metric: Option<Vec<f64>>,
    pub adapt_metric: bool,
    pub u_turn: UTurnRule,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            algorithm: Algorithm::Mwg,
            n_samples: 1000,
            n_adapt: 1000,
            thin: 1,
            seed: 0,
            blocks: None,
            cov_regularizer: 1e-10,
            initial_proposal_sd: 0.1,
            adapt_start: 100,
            repelling_max_tries: 1000,
            step_size: None,
            max_depth: 10,
            target_accept: 0.8,
            metric: None,
            adapt_metric: true,
            u_turn: UTurnRule::Generalized,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_samples == 0 || self.thin == 0 {
            return bad("n_samples and thin must be positive".into());
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return bad(format!("target_accept must lie in (0, 1), got {}", self.target_accept));
        }
        if self.max_depth == 0 || self.max_depth > 30 {
            return bad(format!("max_depth must lie in 1..=30, got {}", self.max_depth));
        }
        if !(self.cov_regularizer > 0.0) {
            return bad(format!("cov_regularizer must be positive, got {}", self.cov_regularizer));
        }
        if !(self.initial_proposal_sd > 0.0) {
            return bad(format!("initial_proposal_sd must be positive, got {}", self.initial_proposal_sd));
        }
        if self.repelling_max_tries == 0 {
            return bad("repelling_max_tries must be positive".into());
        }
        if let Some(e) = self.step_size {
            if !(e > 0.0 && e.is_finite()) {
                return bad(format!("step_size must be positive, got {e}"));
            }
        }
        if let Some(m) = &self.metric {
            if m.len() != dim {
                return Err(Error::Dimension { expected: dim, got: m.len() });
            }
            if m.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return bad("metric entries must be positive".into());
            }
        }
        if let Some(blocks) = &self.blocks {
            let mut seen = vec![false; dim];
            for &k in blocks.iter().flatten() {
                if k >= dim {
                    return Err(Error::OutOfRange { index: k, len: dim });
                }
                if std::mem::replace(&mut seen[k], true) {
                    return bad(format!("site {k} appears in more than one block"));
                }
            }
            if blocks.iter().any(|b| b.is_empty()) || seen.iter().any(|s| !s) {
                return bad("blocks must partition the sites into non-empty sets".into());
            }
        }
        Ok(())
    }

    pub(crate) fn block_list(&self, dim: usize) -> Vec<Vec<usize>> {
        self.blocks.clone().unwrap_or_else(|| (0..dim).map(|k| vec![k]).collect())
    }

    pub(crate) fn total_iterations(&self) -> usize {
        self.n_adapt + self.n_samples * self.thin
    }

    /// Whether post-adaptation iteration `i` (0-based over the whole run) is stored.
    pub(crate) fn stores(&self, i: usize) -> bool {
        i >= self.n_adapt && (i - self.n_adapt + 1).is_multiple_of(self.thin)
    }
}

/// Runs `n_chains` chains in parallel with seeds `cfg.seed + i`, using `cfg.algorithm`.
pub fn run_chains<T, P>(target: &P, u0: &[T], cfg: &SamplerConfig, n_chains: usize) -> Result<Vec<Chain<T>>>
where
    T: Real,
    P: Conditional<T> + GradLogDensity<T> + Sync,
{
    (0..n_chains as u64)
        .into_par_iter()
        .map(|i| {
            let c = SamplerConfig { seed: cfg.seed.wrapping_add(i), ..cfg.clone() };
            match c.algorithm {
                Algorithm::Mwg => mwg_sample(target, u0, &c),
                Algorithm::Ram => ram_sample(target, u0, &c),
                Algorithm::Nuts => nuts_sample(target, u0, &c),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests;
