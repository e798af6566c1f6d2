//! Chain diagnostics: potential scale reduction factor, autocorrelation, effective
//! sample size and Gaussian kernel density estimates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;
use crate::samplers::Chain;

/// How the within-chain variance `W` enters the PSRF.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WithinVariance {
    /// Mean of the unbiased per-chain variances.
    #[default]
    Mean,
    /// Square of that mean; kept only for comparison, it does not tend to 1.
    SquaredMean,
}

fn mean_var<T: Real>(x: &[T]) -> (T, T) {
    let n = T::from_usize_lossy(x.len());
    let m = x.iter().copied().sum::<T>() / n;
    let ss = x.iter().map(|&v| (v - m) * (v - m)).sum::<T>();
    (m, ss / (n - T::one()))
}

/// `sqrt(((N-1)/N W + K/N) / W)` with `K = N/(C-1) sum_i (mean_i - mean)^2`, for `C`
/// chains of common length `N`.
pub fn psrf<T: Real>(traces: &[Vec<T>], within: WithinVariance) -> Result<T> {
    if traces.len() < 2 {
        return Err(Error::config("PSRF needs at least two chains"));
    }
    let n = traces[0].len();
    if n < 2 {
        return Err(Error::config("PSRF needs chains of length at least 2"));
    }
    if let Some(t) = traces.iter().find(|t| t.len() != n) {
        return Err(Error::Dimension { expected: n, got: t.len() });
    }
    let stats: Vec<(T, T)> = traces.iter().map(|t| mean_var(t)).collect();
    let c = T::from_usize_lossy(traces.len());
    let nf = T::from_usize_lossy(n);
    let mut w = stats.iter().map(|s| s.1).sum::<T>() / c;
    if within == WithinVariance::SquaredMean {
        w = w * w;
    }
    if !(w > T::zero()) {
        return Err(Error::numeric("PSRF undefined: zero within-chain variance"));
    }
    let grand = stats.iter().map(|s| s.0).sum::<T>() / c;
    let k = nf / (c - T::one()) * stats.iter().map(|s| (s.0 - grand) * (s.0 - grand)).sum::<T>();
    Ok((((nf - T::one()) / nf * w + k / nf) / w).sqrt())
}

/// PSRF of component `k` across chains.
pub fn psrf_component<T: Real>(chains: &[Chain<T>], k: usize, within: WithinVariance) -> Result<T> {
    let traces: Vec<Vec<T>> = chains.iter().map(|c| c.component(k)).collect();
    psrf(&traces, within)
}

fn centered<T: Real>(x: &[T]) -> Result<(Vec<T>, T)> {
    let n = T::from_usize_lossy(x.len());
    let m = x.iter().copied().sum::<T>() / n;
    let d: Vec<T> = x.iter().map(|&v| v - m).collect();
    let c0 = d.iter().map(|&v| v * v).sum::<T>();
    if !(c0 > T::zero()) {
        return Err(Error::numeric("autocorrelation undefined for a constant chain"));
    }
    Ok((d, c0))
}

fn lag<T: Real>(d: &[T], c0: T, k: usize) -> T {
    d.iter().zip(&d[k..]).map(|(&a, &b)| a * b).sum::<T>() / c0
}

/// Normalized sample autocorrelation (biased `1/N` estimator) for lags `0..=max_lag`.
pub fn autocorr<T: Real>(x: &[T], max_lag: usize) -> Result<Vec<T>> {
    if max_lag >= x.len() {
        return Err(Error::config(format!("max_lag {max_lag} must be below the chain length {}", x.len())));
    }
    let (d, c0) = centered(x)?;
    Ok((0..=max_lag).map(|k| lag(&d, c0, k)).collect())
}

/// `N / (1 + 2 sum rho_k)`, summing lags until the first non-positive one; capped at `10 N`.
pub fn ess<T: Real>(x: &[T]) -> Result<T> {
    let (d, c0) = centered(x)?;
    let n = T::from_usize_lossy(x.len());
    let mut sum = T::zero();
    for k in 1..x.len() {
        let r = lag(&d, c0, k);
        if r <= T::zero() {
            break;
        }
        sum += r;
    }
    Ok((n / (T::one() + T::lit(2.0) * sum)).min(T::lit(10.0) * n))
}

/// Silverman's rule `1.06 sigma N^(-1/5)`.
pub fn silverman_bandwidth<T: Real>(samples: &[T]) -> Result<T> {
    if samples.len() < 2 {
        return Err(Error::config("bandwidth needs at least two samples"));
    }
    let (_, v) = mean_var(samples);
    if !(v > T::zero()) {
        return Err(Error::numeric("bandwidth undefined: all samples are equal"));
    }
    Ok(T::lit(1.06) * v.sqrt() * T::from_usize_lossy(samples.len()).powf(T::lit(-0.2)))
}

/// Gaussian kernel density estimate at `points`.
pub fn kde<T: Real>(samples: &[T], points: &[T], bandwidth: Option<T>) -> Result<Vec<T>> {
    let b = match bandwidth {
        Some(b) if b > T::zero() => b,
        Some(b) => return Err(Error::config(format!("bandwidth must be positive, got {b}"))),
        None => silverman_bandwidth(samples)?,
    };
    if samples.is_empty() {
        return Err(Error::config("KDE needs samples"));
    }
    let norm = T::one() / (T::from_usize_lossy(samples.len()) * b * T::lit((2.0 * std::f64::consts::PI).sqrt()));
    Ok(points
        .iter()
        .map(|&x| {
            samples
                .iter()
                .map(|&s| {
                    let z = (x - s) / b;
                    (T::lit(-0.5) * z * z).exp()
                })
                .sum::<T>()
                * norm
        })
        .collect())
}

/// Per-component PSRF, pooled ESS and per-chain-averaged ACF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub psrf: Vec<f64>,
    /// Sum of per-chain ESS, capped at the total number of stored samples.
    pub ess: Vec<f64>,
    /// `acf[k][l]`: lag-`l` autocorrelation of component `k`, averaged over chains.
    pub acf: Vec<Vec<f64>>,
}

pub fn diagnose<T: Real>(chains: &[Chain<T>], max_lag: usize, within: WithinVariance) -> Result<DiagnosticsReport> {
    let first = chains.first().ok_or_else(|| Error::config("no chains to diagnose"))?;
    let dim = first.dim();
    if let Some(c) = chains.iter().find(|c| c.dim() != dim || c.rows() != first.rows()) {
        return Err(Error::Dimension { expected: dim * first.rows(), got: c.dim() * c.rows() });
    }
    let total = (first.rows() * chains.len()) as f64;
    let max_lag = max_lag.min(first.rows().saturating_sub(1));
    let per: Vec<(f64, f64, Vec<f64>)> = (0..dim)
        .into_par_iter()
        .map(|k| {
            let traces: Vec<Vec<T>> = chains.iter().map(|c| c.component(k)).collect();
            let r = psrf(&traces, within)?.as_f64();
            let mut e = 0.0;
            let mut acf = vec![0.0; max_lag + 1];
            for t in &traces {
                e += ess(t)?.as_f64();
                for (a, v) in acf.iter_mut().zip(autocorr(t, max_lag)?) {
                    *a += v.as_f64() / traces.len() as f64;
                }
            }
            Ok((r, e.min(total), acf))
        })
        .collect::<Result<_>>()?;
    let mut report = DiagnosticsReport { psrf: Vec::new(), ess: Vec::new(), acf: Vec::new() };
    for (r, e, a) in per {
        report.psrf.push(r);
        report.ess.push(e);
        report.acf.push(a);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    #[test]
    fn psrf_hand_examples() {
        let r = psrf(&[vec![0.0, 1.0, 0.0, 1.0], vec![1.0, 0.0, 1.0, 0.0]], WithinVariance::Mean).unwrap();
        assert!((r - 0.75f64.sqrt()).abs() < 1e-12);
        assert!((r - 0.8660).abs() < 5e-5);
        let r: f64 = psrf(&[vec![0.0, 0.0, 1.0, 1.0], vec![10.0, 10.0, 11.0, 11.0]], WithinVariance::Mean).unwrap();
        assert!((r - 150.75f64.sqrt()).abs() < 1e-12);
        assert!((r - 12.2780).abs() < 5e-5, "{r}");
        // K = 0 makes the result independent of the W convention.
        let r: f64 = psrf(&[vec![0.0, 1.0, 0.0, 1.0], vec![1.0, 0.0, 1.0, 0.0]], WithinVariance::SquaredMean).unwrap();
        assert!((r - 0.8660).abs() < 5e-5);
    }

    #[test]
    fn psrf_errors() {
        assert!(psrf(&[vec![1.0, 2.0]], WithinVariance::Mean).is_err());
        assert!(psrf(&[vec![1.0, 1.0], vec![2.0, 2.0]], WithinVariance::Mean).is_err());
        assert!(psrf(&[vec![1.0, 2.0], vec![2.0]], WithinVariance::Mean).is_err());
    }

    #[test]
    fn acf_examples() {
        let alt: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let a = autocorr(&alt, 2).unwrap();
        assert_eq!(a[0], 1.0);
        assert!((a[1] + 1.0).abs() < 2e-3);
        assert!(autocorr(&[1.0, 1.0, 1.0], 1).is_err());
        assert!(ess(&alt).unwrap() >= 1000.0);

        let x = normals(10_000, 1);
        let a = autocorr(&x, 1000).unwrap();
        let band = 3.0 / (x.len() as f64).sqrt();
        let inside = a[1..].iter().filter(|r| r.abs() <= band).count();
        assert!(inside as f64 >= 0.99 * 1000.0, "{inside}");
        let e = ess(&x).unwrap();
        assert!((e / 10_000.0 - 1.0).abs() < 0.15, "{e}");
    }

    #[test]
    fn ess_of_ar1() {
        let phi: f64 = 0.9;
        let z = normals(100_000, 2);
        let mut x = vec![0.0; z.len()];
        for t in 1..z.len() {
            x[t] = phi * x[t - 1] + z[t];
        }
        let expected = x.len() as f64 * (1.0 - phi) / (1.0 + phi);
        let e = ess(&x).unwrap();
        assert!((e / expected - 1.0).abs() < 0.2, "{e} vs {expected}");
    }

    #[test]
    fn kde_examples() {
        let b: f64 = 0.3;
        let d = kde(&[0.0], &[0.0], Some(b)).unwrap();
        assert!((d[0] - 1.0 / (b * (2.0 * std::f64::consts::PI).sqrt())).abs() < 1e-14);
        assert!(kde(&[1.0, 1.0], &[0.0], None).is_err());

        let x = normals(100_000, 3);
        let grid: Vec<f64> = (0..=60).map(|i| -3.0 + 0.1 * i as f64).collect();
        let d = kde(&x, &grid, None).unwrap();
        for (g, v) in grid.iter().zip(&d) {
            let phi = (-g * g / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
            assert!((v - phi).abs() <= 0.02);
        }
        let wide: Vec<f64> = (0..=2000).map(|i| -10.0 + 0.01 * i as f64).collect();
        let integral: f64 = kde(&x[..2000], &wide, None).unwrap().iter().sum::<f64>() * 0.01;
        assert!((integral - 1.0).abs() < 0.01);
    }

    #[test]
    fn psrf_invariances() {
        let a = normals(500, 4);
        let b = normals(500, 5);
        let r = psrf(&[a.clone(), b.clone()], WithinVariance::Mean).unwrap();
        let t = |x: &Vec<f64>| x.iter().map(|v| -3.0 * v + 7.0).collect::<Vec<_>>();
        let r2 = psrf(&[t(&a), t(&b)], WithinVariance::Mean).unwrap();
        assert!((r - r2).abs() < 1e-10);
        let jitter = normals(500, 6);
        let copies: Vec<Vec<f64>> =
            (0..4).map(|c| a.iter().zip(&jitter).map(|(x, j)| x + 1e-9 * j * c as f64).collect()).collect();
        let r = psrf(&copies, WithinVariance::Mean).unwrap();
        assert!((r - (499.0f64 / 500.0).sqrt()).abs() < 1e-3);
    }
}
