//! Streaming moments, dual averaging and the windowed adaptation schedule.

use crate::linalg::dense_cholesky;
use crate::num::Real;

/// Streaming mean and covariance (full or diagonal) of vectors of a fixed length.
#[derive(Debug, Clone, PartialEq)]
pub struct Welford<T> {
    n: usize,
    mean: Vec<T>,
    /// Sum of centered outer products (`d x d`) or squares (`d`).
    m2: Vec<T>,
    full: bool,
}

impl<T: Real> Welford<T> {
    pub fn full(d: usize) -> Self {
        Welford { n: 0, mean: vec![T::zero(); d], m2: vec![T::zero(); d * d], full: true }
    }

    pub fn diagonal(d: usize) -> Self {
        Welford { n: 0, mean: vec![T::zero(); d], m2: vec![T::zero(); d], full: false }
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn reset(&mut self) {
        self.n = 0;
        self.mean.iter_mut().for_each(|v| *v = T::zero());
        self.m2.iter_mut().for_each(|v| *v = T::zero());
    }

    pub fn push(&mut self, x: &[T]) {
        let d = self.mean.len();
        self.n += 1;
        let inv_n = T::one() / T::from_usize_lossy(self.n);
        let before: Vec<T> = x.iter().zip(&self.mean).map(|(&a, &m)| a - m).collect();
        for (m, &dx) in self.mean.iter_mut().zip(&before) {
            *m += dx * inv_n;
        }
        if self.full {
            for i in 0..d {
                let after_i = x[i] - self.mean[i];
                for j in 0..d {
                    self.m2[i * d + j] += before[j] * after_i;
                }
            }
        } else {
            for i in 0..d {
                self.m2[i] += before[i] * (x[i] - self.mean[i]);
            }
        }
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    /// Unbiased covariance (row-major `d x d`, or the diagonal); zero before two samples.
    pub fn covariance(&self) -> Vec<T> {
        if self.n < 2 {
            return vec![T::zero(); self.m2.len()];
        }
        let c = T::one() / T::from_usize_lossy(self.n - 1);
        self.m2.iter().map(|&v| v * c).collect()
    }
}

/// Lower Cholesky factor of `scale * (cov + delta I)`, growing `delta` tenfold on failure.
pub(crate) fn regularized_factor<T: Real>(cov: &[T], d: usize, scale: T, delta: &mut T) -> Option<Vec<T>> {
    for _ in 0..20 {
        let mut a: Vec<T> = cov.iter().map(|&v| v * scale).collect();
        for i in 0..d {
            a[i * d + i] += scale * *delta;
        }
        if let Some(l) = dense_cholesky(&a, d) {
            return Some(l);
        }
        *delta *= T::lit(10.0);
        log::warn!("proposal covariance not positive definite; raising regularizer to {delta}");
    }
    None
}

/// Nesterov dual averaging of `log(step)` toward a target acceptance statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct DualAveraging {
    mu: f64,
    target: f64,
    h_bar: f64,
    log_step: f64,
    log_step_bar: f64,
    m: usize,
}

impl DualAveraging {
    pub const GAMMA: f64 = 0.05;
    pub const T0: f64 = 10.0;
    pub const KAPPA: f64 = 0.75;

    pub fn new(step: f64, target: f64) -> Self {
        DualAveraging { mu: (10.0 * step).ln(), target, h_bar: 0.0, log_step: step.ln(), log_step_bar: 0.0, m: 0 }
    }

    /// Feeds one acceptance statistic and returns the next step size.
    pub fn update(&mut self, accept_stat: f64) -> f64 {
        self.m += 1;
        let m = self.m as f64;
        let eta = 1.0 / (m + Self::T0);
        self.h_bar = (1.0 - eta) * self.h_bar + eta * (self.target - accept_stat);
        self.log_step = self.mu - m.sqrt() / Self::GAMMA * self.h_bar;
        let w = m.powf(-Self::KAPPA);
        self.log_step_bar = w * self.log_step + (1.0 - w) * self.log_step_bar;
        self.log_step.exp()
    }

    /// Averaged step size, used once adaptation stops.
    pub fn final_step(&self) -> f64 {
        if self.m == 0 {
            self.log_step.exp()
        } else {
            self.log_step_bar.exp()
        }
    }
}

/// Slow metric-estimation windows `[start, end)` within `n_adapt` adaptation iterations.
///
/// An initial buffer tunes only the step size, then windows of doubling length
/// estimate the metric, and a terminal buffer retunes the step size.
pub fn metric_windows(n_adapt: usize) -> Vec<(usize, usize)> {
    if n_adapt < 20 {
        return Vec::new();
    }
    let (mut init, mut term, mut base) = (75, 50, 25);
    if init + term + base > n_adapt {
        init = n_adapt * 15 / 100;
        term = n_adapt / 10;
        base = n_adapt - init - term;
    }
    let last = n_adapt - term;
    let mut windows = Vec::new();
    let (mut start, mut size) = (init, base);
    while start < last {
        let mut end = start + size;
        if end + 2 * size > last {
            end = last;
        }
        windows.push((start, end));
        start = end;
        size *= 2;
    }
    windows
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welford_matches_two_pass() {
        let xs = [[1.0, 2.0], [3.0, -1.0], [0.5, 0.5], [2.0, 4.0]];
        let mut w = Welford::full(2);
        let mut wd = Welford::diagonal(2);
        for x in &xs {
            w.push(x);
            wd.push(x);
        }
        let n = xs.len() as f64;
        let m: Vec<f64> = (0..2).map(|i| xs.iter().map(|x| x[i]).sum::<f64>() / n).collect();
        let c = w.covariance();
        for i in 0..2 {
            for j in 0..2 {
                let e: f64 = xs.iter().map(|x| (x[i] - m[i]) * (x[j] - m[j])).sum::<f64>() / (n - 1.0);
                assert!((c[i * 2 + j] - e).abs() < 1e-12);
            }
            assert!((wd.covariance()[i] - c[i * 2 + i]).abs() < 1e-12);
            assert!((w.mean()[i] - m[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn regularizer_grows_until_factorable() {
        let mut delta = 1e-3;
        // Indefinite: needs delta > 1.5.
        let l = regularized_factor(&[1.0, 2.5, 2.5, 1.0], 2, 1.0, &mut delta).unwrap();
        assert!(delta > 1.5 && l[0] > 0.0, "{delta} {l:?}");
    }

    #[test]
    fn dual_averaging_moves_step_toward_target() {
        let mut da = DualAveraging::new(1.0, 0.8);
        // Acceptance that decreases with step size: a(e) = exp(-e).
        let mut e: f64 = 1.0;
        for _ in 0..2000 {
            e = da.update((-e).exp());
        }
        assert!((da.final_step() - 0.8f64.ln().abs()).abs() < 0.02, "{}", da.final_step());
    }

    #[test]
    fn windows_cover_the_adaptation_span() {
        let w = metric_windows(1000);
        assert_eq!(w, vec![(75, 100), (100, 150), (150, 250), (250, 450), (450, 950)]);
        assert_eq!(metric_windows(100), vec![(15, 90)]);
        assert!(metric_windows(10).is_empty());
    }
}
