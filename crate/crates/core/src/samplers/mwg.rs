use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::adapt::{regularized_factor, Welford};
use super::{block_commit, block_delta, Algorithm, Chain, ChainMeta, Conditional, SamplerConfig};
use crate::error::{Error, Result};
use crate::num::Real;

/// Gaussian random-walk proposal for one block, with its adaptation state.
pub(crate) struct BlockProposal<T> {
    pub sites: Vec<usize>,
    factor: Vec<T>,
    moments: Welford<T>,
    delta: T,
    pub accepted: usize,
    pub proposed: usize,
}

impl<T: Real> BlockProposal<T> {
    pub fn new(sites: Vec<usize>, sd: f64, delta: f64) -> Self {
        let d = sites.len();
        let mut factor = vec![T::zero(); d * d];
        for i in 0..d {
            factor[i * d + i] = T::lit(sd);
        }
        BlockProposal { factor, moments: Welford::full(d), delta: T::lit(delta), sites, accepted: 0, proposed: 0 }
    }

    pub fn current(&self, values: &[T]) -> Vec<T> {
        self.sites.iter().map(|&k| values[k]).collect()
    }

    /// `from + L z` with `z` standard normal.
    pub fn propose(&self, from: &[T], rng: &mut ChaCha8Rng) -> Vec<T> {
        let d = from.len();
        let z: Vec<T> = (0..d).map(|_| T::lit(rng.sample::<f64, _>(StandardNormal))).collect();
        (0..d).map(|i| from[i] + (0..=i).fold(T::zero(), |s, j| s + self.factor[i * d + j] * z[j])).collect()
    }

    /// Adds the current block value to the history and, once `start` values are in,
    /// resets the factor to `chol(2.38^2 / d * (cov_scale * cov + delta I))`.
    pub fn adapt(&mut self, values: &[T], start: usize, cov_scale: T) {
        self.moments.push(values);
        if self.moments.count() < start.max(2) {
            return;
        }
        let d = self.sites.len();
        let cov: Vec<T> = self.moments.covariance().into_iter().map(|v| v * cov_scale).collect();
        let scale = T::lit(2.38 * 2.38) / T::from_usize_lossy(d);
        match regularized_factor(&cov, d, scale, &mut self.delta) {
            Some(l) => self.factor = l,
            None => log::warn!("keeping previous proposal for block starting at site {}", self.sites[0]),
        }
    }

    pub fn factor_f64(&self) -> Vec<f64> {
        self.factor.iter().map(|v| v.as_f64()).collect()
    }

    pub fn acceptance(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

pub(crate) fn check_start<T: Real>(dim: usize, u0: &[T], cfg: &SamplerConfig) -> Result<()> {
    if u0.len() != dim {
        return Err(Error::Dimension { expected: dim, got: u0.len() });
    }
    if u0.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("initial state is not finite"));
    }
    cfg.validate(dim)
}

/// Adaptive blockwise Metropolis-within-Gibbs.
///
/// Blocks are visited in order each sweep. While adapting, each block proposal uses
/// the empirical covariance of that block's history scaled by `2.38^2 / d`.
pub fn mwg_sample<T: Real, C: Conditional<T>>(target: &C, u0: &[T], cfg: &SamplerConfig) -> Result<Chain<T>> {
    let dim = target.dim();
    check_start(dim, u0, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut st = target.init(u0);
    let mut blocks: Vec<BlockProposal<T>> = cfg
        .block_list(dim)
        .into_iter()
        .map(|b| BlockProposal::new(b, cfg.initial_proposal_sd, cfg.cov_regularizer))
        .collect();
    let mut samples = Vec::with_capacity(cfg.n_samples * dim);
    for i in 0..cfg.total_iterations() {
        let adapting = i < cfg.n_adapt;
        for b in blocks.iter_mut() {
            let cur = b.current(target.values(&st));
            let prop = b.propose(&cur, &mut rng);
            let d = block_delta(target, &st, &b.sites, &prop);
            let accept = rng.random::<f64>().ln() < d.as_f64();
            if accept {
                block_commit(target, &mut st, &b.sites, &prop);
            }
            if adapting {
                b.adapt(if accept { &prop } else { &cur }, cfg.adapt_start, T::one());
            } else {
                b.proposed += 1;
                b.accepted += accept as usize;
            }
        }
        if cfg.stores(i) {
            samples.extend_from_slice(target.values(&st));
        }
    }
    let mut meta = ChainMeta::new(Algorithm::Mwg, dim, cfg.seed, cfg.thin, cfg.n_adapt);
    meta.rows = samples.len() / dim;
    meta.acceptance_rate = blocks.iter().map(|b| b.acceptance()).collect();
    meta.proposal_factors = blocks.iter().map(|b| b.factor_f64()).collect();
    Ok(Chain { samples, meta })
}
