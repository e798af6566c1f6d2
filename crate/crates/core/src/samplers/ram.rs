use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::mwg::{check_start, BlockProposal};
use super::{block_commit, block_delta, Algorithm, Chain, ChainMeta, Conditional, SamplerConfig};
use crate::error::Result;
use crate::num::Real;

struct Stage<'a, T, C: Conditional<T>> {
    target: &'a C,
    st: &'a C::State,
    max_tries: usize,
    fallbacks: usize,
}

impl<T: Real, C: Conditional<T>> Stage<'_, T, C> {
    /// Proposes from `from` until `accept(log density of proposal, ln U)` holds.
    /// Log densities are relative to the current state.
    fn run(
        &mut self,
        b: &BlockProposal<T>,
        from: &[T],
        rng: &mut ChaCha8Rng,
        accept: impl Fn(f64, f64) -> bool,
    ) -> (Vec<T>, f64) {
        let mut last = (from.to_vec(), 0.0);
        for _ in 0..self.max_tries {
            let prop = b.propose(from, rng);
            let l = block_delta(self.target, self.st, &b.sites, &prop).as_f64();
            if accept(l, rng.random::<f64>().ln()) {
                return (prop, l);
            }
            last = (prop, l);
        }
        self.fallbacks += 1;
        log::debug!("RAM stage hit {} tries; accepting last proposal", self.max_tries);
        last
    }
}

/// Log of `min(1, pi(u'') min(1, pi(u)/pi(w)) / (pi(u) min(1, pi(u'')/pi(w*))))` (before the
/// outer `min`), with every density given as a log ratio to `pi(u)`.
pub(crate) fn log_acceptance(l_new: f64, l_aux: f64, l_aux_new: f64) -> f64 {
    l_new + (-l_aux).min(0.0) - (l_new - l_aux_new).min(0.0)
}

/// Repelling-Attracting Metropolis within Gibbs.
///
/// Per block: a downhill (repelling) move, an uphill (attracting) move from there,
/// and an auxiliary repelling draw that enters the final acceptance ratio. The
/// auxiliary field starts at `u0`.
pub fn ram_sample<T: Real, C: Conditional<T>>(target: &C, u0: &[T], cfg: &SamplerConfig) -> Result<Chain<T>> {
    let dim = target.dim();
    check_start(dim, u0, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut st = target.init(u0);
    let mut w = u0.to_vec();
    let mut blocks: Vec<BlockProposal<T>> = cfg
        .block_list(dim)
        .into_iter()
        .map(|b| BlockProposal::new(b, cfg.initial_proposal_sd, cfg.cov_regularizer))
        .collect();
    let mut samples = Vec::with_capacity(cfg.n_samples * dim);
    let mut fallbacks = 0;
    for i in 0..cfg.total_iterations() {
        let adapting = i < cfg.n_adapt;
        for b in blocks.iter_mut() {
            let x = b.current(target.values(&st));
            let mut stage = Stage { target, st: &st, max_tries: cfg.repelling_max_tries, fallbacks: 0 };
            // Repelling: accept with min(1, pi(x) / pi(x')).
            let (x1, l1) = stage.run(b, &x, &mut rng, |l, lu| lu < -l);
            // Attracting: accept with min(1, pi(x'') / pi(x')).
            let (x2, l2) = stage.run(b, &x1, &mut rng, |l, lu| lu < l - l1);
            // Auxiliary repelling draw from x''.
            let (z, lz_star) = stage.run(b, &x2, &mut rng, |l, lu| lu < l2 - l);
            fallbacks += stage.fallbacks;
            let wp = b.current(&w);
            let lw = block_delta(target, &st, &b.sites, &wp).as_f64();
            let log_alpha = log_acceptance(l2, lw, lz_star);
            let accept = rng.random::<f64>().ln() < log_alpha;
            if accept {
                block_commit(target, &mut st, &b.sites, &x2);
                for (&k, &v) in b.sites.iter().zip(&z) {
                    w[k] = v;
                }
            }
            if adapting {
                b.adapt(if accept { &x2 } else { &x }, cfg.adapt_start, T::lit(0.5));
            } else {
                b.proposed += 1;
                b.accepted += accept as usize;
            }
        }
        if cfg.stores(i) {
            samples.extend_from_slice(target.values(&st));
        }
    }
    if fallbacks > 0 {
        log::warn!("RAM: {fallbacks} stages fell back after {} tries", cfg.repelling_max_tries);
    }
    let mut meta = ChainMeta::new(Algorithm::Ram, dim, cfg.seed, cfg.thin, cfg.n_adapt);
    meta.rows = samples.len() / dim;
    meta.acceptance_rate = blocks.iter().map(|b| b.acceptance()).collect();
    meta.proposal_factors = blocks.iter().map(|b| b.factor_f64()).collect();
    meta.fallbacks = fallbacks;
    Ok(Chain { samples, meta })
}
