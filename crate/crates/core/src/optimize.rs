//! L-BFGS with a strong-Wolfe line search, used for MAP estimation.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Field;
use crate::num::{axpy, dot, Real};
use crate::posterior::Posterior;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub memory: usize,
    pub max_iter: usize,
    /// Absolute gradient-norm tolerance; `None` means `1e-6 * (1 + |f(u0)|)`.
    pub grad_tol: Option<f64>,
    pub c1: f64,
    pub c2: f64,
    /// Function evaluations allowed per line search.
    pub max_backtracks: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig { memory: 10, max_iter: 10_000, grad_tol: None, c1: 1e-4, c2: 0.9, max_backtracks: 40 }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.memory == 0 {
            return Err(Error::config("optimizer memory must be at least 1"));
        }
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(Error::config(format!("line search needs 0 < c1 < c2 < 1, got c1={} c2={}", self.c1, self.c2)));
        }
        if self.max_backtracks == 0 {
            return Err(Error::config("max_backtracks must be at least 1"));
        }
        if let Some(t) = self.grad_tol {
            if !(t > 0.0) {
                return Err(Error::config(format!("grad_tol must be positive, got {t}")));
            }
        }
        Ok(())
    }
}

/// Result of an unconstrained minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum<T> {
    pub x: Vec<T>,
    pub value: T,
    /// Gradient 2-norm at the start and after every accepted step.
    pub grad_norm_trace: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapResult<T> {
    pub u_map: Field<T>,
    pub log_post: T,
    pub grad_norm_trace: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
}

struct Point<T> {
    alpha: T,
    f: T,
    slope: T,
    g: Vec<T>,
}

struct LineSearch<'a, T, F> {
    f: &'a mut F,
    x: &'a [T],
    d: &'a [T],
    f0: T,
    d0: T,
    c1: T,
    c2: T,
    evals_left: usize,
    evaluations: usize,
    trial: Vec<T>,
}

impl<T: Real, F: FnMut(&[T], &mut [T]) -> T> LineSearch<'_, T, F> {
    fn eval(&mut self, alpha: T) -> Option<Point<T>> {
        if self.evals_left == 0 {
            return None;
        }
        self.evals_left -= 1;
        self.evaluations += 1;
        self.trial.copy_from_slice(self.x);
        axpy(alpha, self.d, &mut self.trial);
        let mut g = vec![T::zero(); self.x.len()];
        let f = (self.f)(&self.trial, &mut g);
        let slope = dot(&g, self.d);
        Some(Point { alpha, f, slope, g })
    }

    fn armijo_fails(&self, p: &Point<T>) -> bool {
        !p.f.is_finite() || p.f > self.f0 + self.c1 * p.alpha * self.d0
    }

    fn curvature_holds(&self, p: &Point<T>) -> bool {
        p.slope.abs() <= -self.c2 * self.d0
    }

    fn run(&mut self, alpha0: T) -> Option<Point<T>> {
        let mut prev = Point { alpha: T::zero(), f: self.f0, slope: self.d0, g: Vec::new() };
        let mut alpha = alpha0;
        let mut first = true;
        loop {
            let p = self.eval(alpha)?;
            if self.armijo_fails(&p) || (!first && p.f >= prev.f) {
                return self.zoom(prev, p);
            }
            if self.curvature_holds(&p) {
                return Some(p);
            }
            if p.slope >= T::zero() {
                return self.zoom(p, prev);
            }
            alpha = p.alpha * T::lit(2.0);
            prev = p;
            first = false;
        }
    }

    fn zoom(&mut self, mut lo: Point<T>, mut hi: Point<T>) -> Option<Point<T>> {
        loop {
            let alpha = interpolate(&lo, &hi);
            if (hi.alpha - lo.alpha).abs() <= T::epsilon() * lo.alpha.abs().max(T::one()) {
                return None;
            }
            let p = self.eval(alpha)?;
            if self.armijo_fails(&p) || p.f >= lo.f {
                hi = p;
            } else {
                if self.curvature_holds(&p) {
                    return Some(p);
                }
                if p.slope * (hi.alpha - lo.alpha) >= T::zero() {
                    hi = lo;
                }
                lo = p;
            }
        }
    }
}

/// Safeguarded cubic-interpolation minimizer between two bracketing points.
fn interpolate<T: Real>(lo: &Point<T>, hi: &Point<T>) -> T {
    let (a, b) = (lo.alpha, hi.alpha);
    let (left, right) = (a.min(b), a.max(b));
    let width = right - left;
    let fallback = T::lit(0.5) * (a + b);
    if !hi.f.is_finite() || !hi.slope.is_finite() {
        return fallback;
    }
    let d1 = lo.slope + hi.slope - T::lit(3.0) * (lo.f - hi.f) / (a - b);
    let disc = d1 * d1 - lo.slope * hi.slope;
    if disc < T::zero() {
        return fallback;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let t = b - (b - a) * (hi.slope + d2 - d1) / (hi.slope - lo.slope + T::lit(2.0) * d2);
    let margin = T::lit(0.1) * width;
    if t.is_finite() && t > left + margin && t < right - margin {
        t
    } else {
        fallback
    }
}

/// Minimizes `f`, which writes the gradient into its second argument and returns the value.
pub fn minimize<T: Real>(
    mut f: impl FnMut(&[T], &mut [T]) -> T,
    x0: Vec<T>,
    cfg: &OptimizerConfig,
) -> Result<Minimum<T>> {
    cfg.validate()?;
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![T::zero(); n];
    let mut fx = f(&x, &mut g);
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("objective or gradient not finite at the starting point"));
    }
    let tol = T::lit(cfg.grad_tol.unwrap_or(1e-6 * (1.0 + fx.as_f64().abs())));
    let mut gnorm = dot(&g, &g).sqrt();
    let mut trace = vec![gnorm];
    let mut memory: VecDeque<(Vec<T>, Vec<T>, T)> = VecDeque::with_capacity(cfg.memory);
    let mut evaluations = 1;
    let mut restarted = false;
    let mut iterations = 0;

    while gnorm > tol && iterations < cfg.max_iter {
        let d = two_loop(&g, &memory);
        let mut d0 = dot(&g, &d);
        let d = if d0 < T::zero() {
            d
        } else {
            memory.clear();
            d0 = -gnorm * gnorm;
            g.iter().map(|&v| -v).collect()
        };
        let alpha0 = if memory.is_empty() { T::one().min(T::one() / gnorm) } else { T::one() };
        let mut ls = LineSearch {
            f: &mut f,
            x: &x,
            d: &d,
            f0: fx,
            d0,
            c1: T::lit(cfg.c1),
            c2: T::lit(cfg.c2),
            evals_left: cfg.max_backtracks,
            evaluations: 0,
            trial: vec![T::zero(); n],
        };
        let found = ls.run(alpha0);
        evaluations += ls.evaluations;
        let Some(p) = found else {
            if restarted || memory.is_empty() {
                log::warn!("line search failed after {iterations} iterations; returning best iterate");
                break;
            }
            log::debug!("line search failed; clearing L-BFGS memory");
            memory.clear();
            restarted = true;
            continue;
        };
        restarted = false;
        let s: Vec<T> = d.iter().map(|&v| v * p.alpha).collect();
        let y: Vec<T> = p.g.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let sy = dot(&s, &y);
        for (xi, si) in x.iter_mut().zip(&s) {
            *xi += *si;
        }
        fx = p.f;
        g = p.g;
        gnorm = dot(&g, &g).sqrt();
        trace.push(gnorm);
        iterations += 1;
        if sy > T::zero() {
            if memory.len() == cfg.memory {
                memory.pop_front();
            }
            memory.push_back((s, y, T::one() / sy));
        }
    }
    Ok(Minimum { x, value: fx, grad_norm_trace: trace, iterations, converged: gnorm <= tol, evaluations })
}

/// `-H g` for the limited-memory inverse Hessian approximation `H`.
fn two_loop<T: Real>(g: &[T], memory: &VecDeque<(Vec<T>, Vec<T>, T)>) -> Vec<T> {
    let mut q: Vec<T> = g.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let a = *rho * dot(s, &q);
        axpy(-a, y, &mut q);
        alphas.push(a);
    }
    if let Some((s, y, _)) = memory.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in memory.iter().zip(alphas.into_iter().rev()) {
        let b = *rho * dot(y, &q);
        axpy(a - b, s, &mut q);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Maximizes the posterior starting from `u0`.
pub fn lbfgs_map<T: Real>(p: &Posterior<T>, u0: &Field<T>, cfg: &OptimizerConfig) -> Result<MapResult<T>> {
    if u0.len() != p.dim() {
        return Err(Error::Dimension { expected: p.dim(), got: u0.len() });
    }
    let objective = |u: &[T], g: &mut [T]| {
        let v = p.value_and_grad(u, g).expect("dimensions checked");
        g.iter_mut().for_each(|x| *x = -*x);
        -v
    };
    let m = minimize(objective, u0.values().to_vec(), cfg)?;
    Ok(MapResult {
        u_map: Field::new(*u0.lattice(), m.x)?,
        log_post: -m.value,
        grad_norm_trace: m.grad_norm_trace,
        iterations: m.iterations,
        converged: m.converged,
    })
}
