use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::adapt::{metric_windows, DualAveraging, Welford};
use super::mwg::check_start;
use super::{Algorithm, Chain, ChainMeta, GradLogDensity, SamplerConfig, UTurnRule};
use crate::error::{Error, Result};
use crate::num::Real;

/// Energy error beyond which a trajectory is declared divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1000.0;

/// Phase-space point with its cached log density and gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Leapfrog<T> {
    pub u: Vec<T>,
    pub p: Vec<T>,
    pub grad: Vec<T>,
    pub log_density: T,
}

impl<T: Real> Leapfrog<T> {
    pub fn new<D: GradLogDensity<T>>(target: &D, u: Vec<T>, p: Vec<T>) -> Self {
        let mut grad = vec![T::zero(); u.len()];
        let log_density = target.log_density_and_grad(&u, &mut grad);
        Leapfrog { u, p, grad, log_density }
    }

    /// `-log pi(u) + p^T M^-1 p / 2`
    pub fn hamiltonian(&self, inv_metric: &[T]) -> T {
        let k = self.p.iter().zip(inv_metric).fold(T::zero(), |s, (&p, &m)| s + m * p * p);
        -self.log_density + T::lit(0.5) * k
    }
}

/// One Störmer–Verlet step: half kick, drift by `eps M^-1 p`, half kick. A negative
/// `eps` integrates backwards. Non-finite output signals a divergence to the caller.
pub fn leapfrog_step<T: Real, D: GradLogDensity<T>>(
    target: &D,
    s: &Leapfrog<T>,
    eps: T,
    inv_metric: &[T],
) -> Leapfrog<T> {
    let half = T::lit(0.5) * eps;
    let mut p: Vec<T> = s.p.iter().zip(&s.grad).map(|(&p, &g)| p + half * g).collect();
    let u: Vec<T> = s.u.iter().zip(&p).zip(inv_metric).map(|((&u, &p), &m)| u + eps * m * p).collect();
    let mut grad = vec![T::zero(); u.len()];
    let log_density = target.log_density_and_grad(&u, &mut grad);
    for (pi, &g) in p.iter_mut().zip(&grad) {
        *pi += half * g;
    }
    Leapfrog { u, p, grad, log_density }
}

fn velocity_dot<T: Real>(p: &[T], v: &[T], metric: &[T]) -> T {
    p.iter().zip(v).zip(metric).fold(T::zero(), |s, ((&a, &b), &m)| s + a / m * b)
}

/// Generalized no-U-turn criterion: `M^-1 p- . sum < 0` or `M^-1 p+ . sum < 0`, with
/// `sum` the total momentum of the trajectory and `metric` the diagonal of `M`.
pub fn u_turn_check<T: Real>(p_minus: &[T], p_plus: &[T], p_sum: &[T], metric: &[T]) -> bool {
    velocity_dot(p_minus, p_sum, metric) < T::zero() || velocity_dot(p_plus, p_sum, metric) < T::zero()
}

/// Original criterion on the end-to-end displacement `u+ - u-`.
pub fn u_turn_check_original<T: Real>(u_minus: &[T], u_plus: &[T], p_minus: &[T], p_plus: &[T], metric: &[T]) -> bool {
    let span: Vec<T> = u_plus.iter().zip(u_minus).map(|(&a, &b)| a - b).collect();
    velocity_dot(p_minus, &span, metric) < T::zero() || velocity_dot(p_plus, &span, metric) < T::zero()
}

struct Subtree<T> {
    minus: Leapfrog<T>,
    plus: Leapfrog<T>,
    sample: Leapfrog<T>,
    log_w: f64,
    p_sum: Vec<T>,
    accept_sum: f64,
    states: usize,
    stop: bool,
    divergent: bool,
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        m
    } else {
        m + ((a - m).exp() + (b - m).exp()).ln()
    }
}

struct Trajectory<'a, T, D> {
    target: &'a D,
    eps: T,
    metric: &'a [T],
    inv_metric: &'a [T],
    h0: f64,
    rule: UTurnRule,
    rng: &'a mut ChaCha8Rng,
}

impl<T: Real, D: GradLogDensity<T>> Trajectory<'_, T, D> {
    fn turning(&self, minus: &Leapfrog<T>, plus: &Leapfrog<T>, p_sum: &[T]) -> bool {
        match self.rule {
            UTurnRule::Generalized => u_turn_check(&minus.p, &plus.p, p_sum, self.metric),
            UTurnRule::Original => u_turn_check_original(&minus.u, &plus.u, &minus.p, &plus.p, self.metric),
        }
    }

    /// Builds `2^depth` new states continuing from `edge` in direction `dir`.
    fn build(&mut self, edge: &Leapfrog<T>, dir: T, depth: usize) -> Subtree<T> {
        if depth == 0 {
            let s = leapfrog_step(self.target, edge, dir * self.eps, self.inv_metric);
            let dh = s.hamiltonian(self.inv_metric).as_f64() - self.h0;
            let divergent = !dh.is_finite() || dh.abs() > DIVERGENCE_THRESHOLD;
            let accept = if dh.is_nan() { 0.0 } else { (-dh).exp().min(1.0) };
            return Subtree {
                minus: s.clone(),
                plus: s.clone(),
                p_sum: s.p.clone(),
                sample: s,
                log_w: -dh,
                accept_sum: accept,
                states: 1,
                stop: divergent,
                divergent,
            };
        }
        let first = self.build(edge, dir, depth - 1);
        if first.stop {
            return first;
        }
        let outer = if dir > T::zero() { &first.plus } else { &first.minus };
        let second = self.build(outer, dir, depth - 1);
        let accept_sum = first.accept_sum + second.accept_sum;
        let states = first.states + second.states;
        if second.stop {
            return Subtree { accept_sum, states, stop: true, divergent: second.divergent, ..first };
        }
        let log_w = log_add_exp(first.log_w, second.log_w);
        let take_second = self.rng.random::<f64>().ln() < second.log_w - log_w;
        let p_sum: Vec<T> = first.p_sum.iter().zip(&second.p_sum).map(|(&a, &b)| a + b).collect();
        let (minus, plus) = if dir > T::zero() { (first.minus, second.plus) } else { (second.minus, first.plus) };
        let stop = self.turning(&minus, &plus, &p_sum);
        Subtree {
            sample: if take_second { second.sample } else { first.sample },
            minus,
            plus,
            log_w,
            p_sum,
            accept_sum,
            states,
            stop,
            divergent: false,
        }
    }
}

struct Transition<T> {
    next: Leapfrog<T>,
    accept_stat: f64,
    depth: usize,
    states: usize,
    divergent: bool,
}

struct Kernel<'a, T, D> {
    target: &'a D,
    metric: Vec<T>,
    inv_metric: Vec<T>,
    max_depth: usize,
    rule: UTurnRule,
}

impl<T: Real, D: GradLogDensity<T>> Kernel<'_, T, D> {
    fn set_inv_metric(&mut self, inv: Vec<T>) {
        self.metric = inv.iter().map(|&v| T::one() / v).collect();
        self.inv_metric = inv;
    }

    fn momentum(&self, rng: &mut ChaCha8Rng) -> Vec<T> {
        self.metric.iter().map(|&m| m.sqrt() * T::lit(rng.sample::<f64, _>(StandardNormal))).collect()
    }

    fn transition(&self, current: &Leapfrog<T>, eps: T, rng: &mut ChaCha8Rng) -> Transition<T> {
        let start = Leapfrog { p: self.momentum(rng), ..current.clone() };
        let h0 = start.hamiltonian(&self.inv_metric).as_f64();
        let mut minus = start.clone();
        let mut plus = start.clone();
        let mut p_sum = start.p.clone();
        let mut sample = start;
        let mut log_w = 0.0;
        let (mut accept_sum, mut states, mut depth, mut divergent) = (0.0, 0, 0, false);
        let mut traj = Trajectory {
            target: self.target,
            eps,
            metric: &self.metric,
            inv_metric: &self.inv_metric,
            h0,
            rule: self.rule,
            rng,
        };
        while depth < self.max_depth {
            let forward = traj.rng.random::<bool>();
            let dir = if forward { T::one() } else { -T::one() };
            let t = traj.build(if forward { &plus } else { &minus }, dir, depth);
            depth += 1;
            accept_sum += t.accept_sum;
            states += t.states;
            divergent |= t.divergent;
            if t.stop {
                break;
            }
            let total = log_add_exp(log_w, t.log_w);
            if traj.rng.random::<f64>().ln() < t.log_w - total {
                sample = t.sample;
            }
            log_w = total;
            for (s, &v) in p_sum.iter_mut().zip(&t.p_sum) {
                *s += v;
            }
            if forward {
                plus = t.plus;
            } else {
                minus = t.minus;
            }
            if traj.turning(&minus, &plus, &p_sum) {
                break;
            }
        }
        let accept_stat = if states == 0 { 0.0 } else { accept_sum / states as f64 };
        Transition { next: sample, accept_stat, depth, states: states + 1, divergent }
    }

    /// Doubles or halves a unit step until the one-step acceptance crosses 1/2.
    fn initial_step(&self, current: &Leapfrog<T>, rng: &mut ChaCha8Rng) -> f64 {
        let start = Leapfrog { p: self.momentum(rng), ..current.clone() };
        let h0 = start.hamiltonian(&self.inv_metric).as_f64();
        let log_accept = |eps: f64| {
            let s = leapfrog_step(self.target, &start, T::lit(eps), &self.inv_metric);
            let v = h0 - s.hamiltonian(&self.inv_metric).as_f64();
            if v.is_nan() {
                f64::NEG_INFINITY
            } else {
                v
            }
        };
        let mut eps = 1.0;
        let half = 0.5f64.ln();
        let dir = if log_accept(eps) > half { 1.0 } else { -1.0 };
        for _ in 0..100 {
            if dir * log_accept(eps) <= dir * half {
                break;
            }
            eps *= 2f64.powf(dir);
        }
        eps
    }
}

/// Multinomial NUTS with a diagonal metric.
///
/// During the `n_adapt` warm-up iterations the step size follows dual averaging
/// toward `target_accept` and, if enabled, the inverse metric is set to the
/// regularized sample variance at the end of each slow window. Both are frozen
/// afterwards.
pub fn nuts_sample<T: Real, D: GradLogDensity<T>>(target: &D, u0: &[T], cfg: &SamplerConfig) -> Result<Chain<T>> {
    let dim = target.dim();
    check_start(dim, u0, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let metric: Vec<T> = match &cfg.metric {
        Some(m) => m.iter().map(|&v| T::lit(v)).collect(),
        None => vec![T::one(); dim],
    };
    let mut kernel = Kernel {
        target,
        inv_metric: metric.iter().map(|&v| T::one() / v).collect(),
        metric,
        max_depth: cfg.max_depth,
        rule: cfg.u_turn,
    };
    let mut current = Leapfrog::new(target, u0.to_vec(), vec![T::zero(); dim]);
    if !current.log_density.is_finite() || current.grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::numeric("log density or gradient not finite at the initial state"));
    }
    let mut eps = match cfg.step_size {
        Some(e) => e,
        None => kernel.initial_step(&current, &mut rng),
    };
    let mut da = DualAveraging::new(eps, cfg.target_accept);
    let windows = if cfg.adapt_metric { metric_windows(cfg.n_adapt) } else { Vec::new() };
    let mut moments = Welford::diagonal(dim);

    let mut samples = Vec::with_capacity(cfg.n_samples * dim);
    let mut meta = ChainMeta::new(Algorithm::Nuts, dim, cfg.seed, cfg.thin, cfg.n_adapt);
    let (mut accept_total, mut depth_total, mut post) = (0.0, 0usize, 0usize);
    for i in 0..cfg.total_iterations() {
        if i == cfg.n_adapt && cfg.n_adapt > 0 {
            eps = da.final_step();
        }
        let t = kernel.transition(&current, T::lit(eps), &mut rng);
        current = t.next;
        meta.max_trajectory_states = meta.max_trajectory_states.max(t.states);
        if i < cfg.n_adapt {
            eps = da.update(t.accept_stat);
            if let Some(&(_, end)) = windows.iter().find(|w| (w.0..w.1).contains(&i)) {
                moments.push(&current.u);
                if i + 1 == end {
                    let n = T::from_usize_lossy(moments.count());
                    let five = T::lit(5.0);
                    let inv = moments
                        .covariance()
                        .into_iter()
                        .map(|v| n / (n + five) * v + T::lit(1e-3) * five / (n + five))
                        .collect();
                    kernel.set_inv_metric(inv);
                    moments.reset();
                    da = DualAveraging::new(eps, cfg.target_accept);
                }
            }
        } else {
            meta.divergences += t.divergent as usize;
            accept_total += t.accept_stat;
            depth_total += t.depth;
            post += 1;
        }
        if cfg.stores(i) {
            samples.extend_from_slice(&current.u);
        }
    }
    if meta.divergences > 0 {
        log::warn!("NUTS: {} divergent transitions", meta.divergences);
    }
    meta.rows = samples.len() / dim;
    meta.acceptance_rate = vec![accept_total / post.max(1) as f64];
    meta.mean_tree_depth = Some(depth_total as f64 / post.max(1) as f64);
    meta.step_size = Some(eps);
    meta.inv_metric = Some(kernel.inv_metric.iter().map(|v| v.as_f64()).collect());
    Ok(Chain { samples, meta })
}
