use super::*;
use crate::forward::ForwardOperator;
use crate::lattice::Lattice;
use crate::priors::{Prior, PriorSpec};
use std::f64::consts::PI;

/// Standard normal in `d` dimensions as a posterior: flat prior, F = I, sigma = 1, y = 0.
fn std_normal(d: usize) -> Posterior<f64> {
    let l = Lattice::line(d.max(2)).unwrap();
    assert_eq!(l.len(), d);
    Posterior::new(ForwardOperator::identity(l), vec![0.0; d], 1.0, Prior::build(&PriorSpec::flat(), l).unwrap())
        .unwrap()
}

fn moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

fn cfg(algorithm: Algorithm, n_samples: usize, n_adapt: usize, seed: u64) -> SamplerConfig {
    SamplerConfig { algorithm, n_samples, n_adapt, seed, initial_proposal_sd: 1.0, ..Default::default() }
}

#[test]
fn mwg_standard_normal_moments() {
    let p = std_normal(2);
    let c = mwg_sample(&p, &[0.0, 0.0], &cfg(Algorithm::Mwg, 50_000, 2000, 7)).unwrap();
    assert_eq!(c.rows(), 50_000);
    for k in 0..2 {
        let (m, v) = moments(&c.component(k));
        assert!(m.abs() < 0.05 && (v - 1.0).abs() < 0.1, "{m} {v}");
    }
    assert!(c.meta.acceptance_rate.iter().all(|&a| (0.2..0.7).contains(&a)));
}

fn correlated(rho: f64) -> impl Fn(&[f64]) -> f64 {
    move |u: &[f64]| -(u[0] * u[0] - 2.0 * rho * u[0] * u[1] + u[1] * u[1]) / (2.0 * (1.0 - rho * rho))
}

#[test]
fn mwg_recovers_correlation() {
    let target = FullRecompute(FnDensity::new(2, correlated(0.9)));
    for blocks in [None, Some(vec![vec![0, 1]])] {
        let c = SamplerConfig { blocks, ..cfg(Algorithm::Mwg, 100_000, 3000, 3) };
        let chain = mwg_sample(&target, &[0.0, 0.0], &c).unwrap();
        let (a, b) = (chain.component(0), chain.component(1));
        let (ma, va) = moments(&a);
        let (mb, vb) = moments(&b);
        let cov = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (a.len() as f64 - 1.0);
        let r = cov / (va * vb).sqrt();
        assert!((r - 0.9).abs() < 0.05, "{r}");
    }
}

#[test]
fn zero_delta_proposals_always_accepted() {
    let flat = FullRecompute(FnDensity::new(3, |_: &[f64]| 0.0));
    let c = mwg_sample(&flat, &[0.0; 3], &cfg(Algorithm::Mwg, 500, 0, 1)).unwrap();
    assert!(c.meta.acceptance_rate.iter().all(|&a| a == 1.0));
}

#[test]
fn mwg_stationary_distribution_matches_transition_matrix() {
    // Narrow three-component mixture, fixed random-walk proposal, three cells.
    let (w, mu, sd, step) = ([0.2, 0.5, 0.3], [-2.0, 0.0, 2.0], 0.3, 1.5);
    let dens =
        move |x: f64| -> f64 { (0..3).map(|i| w[i] * (-(x - mu[i]).powi(2) / (2.0 * sd * sd)).exp()).sum::<f64>() };
    let cell = |x: f64| {
        if x < -1.0 {
            0
        } else if x < 1.0 {
            1
        } else {
            2
        }
    };

    // Brute-force chain on a fine grid with the same proposal, power-iterated.
    let n = 281;
    let xs: Vec<f64> = (0..n).map(|i| -3.5 + 7.0 * i as f64 / (n - 1) as f64).collect();
    // Symmetric proposal weights; mass falling off the grid counts as a rejection.
    let dx = xs[1] - xs[0];
    let q = |a: f64, b: f64| (-(a - b).powi(2) / (2.0 * step * step)).exp() * dx / (step * (2.0 * PI).sqrt());
    let mut t = vec![0.0; n * n];
    for i in 0..n {
        let mut stay = 1.0;
        for j in 0..n {
            if j != i {
                let pij = q(xs[i], xs[j]) * (dens(xs[j]) / dens(xs[i])).min(1.0);
                t[i * n + j] = pij;
                stay -= pij;
            }
        }
        t[i * n + i] = stay;
    }
    let mut pi = vec![1.0 / n as f64; n];
    for _ in 0..3000 {
        let mut next = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                next[j] += pi[i] * t[i * n + j];
            }
        }
        pi = next;
    }
    let mut expected = [0.0; 3];
    for (x, p) in xs.iter().zip(&pi) {
        expected[cell(*x)] += p;
    }

    let target = FullRecompute(FnDensity::new(1, move |u: &[f64]| dens(u[0]).ln()));
    let c = SamplerConfig { initial_proposal_sd: step, ..cfg(Algorithm::Mwg, 100_000, 0, 5) };
    let chain = mwg_sample(&target, &[0.0], &c).unwrap();
    let mut counts = [0.0; 3];
    for x in chain.component(0) {
        counts[cell(x)] += 1.0 / chain.rows() as f64;
    }
    let tv: f64 = counts.iter().zip(&expected).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0;
    assert!(tv < 0.02, "{counts:?} vs {expected:?}");
}

#[test]
fn thinning_keeps_every_kth_state_of_the_unthinned_run() {
    let p = std_normal(3);
    let base = cfg(Algorithm::Mwg, 40, 50, 9);
    let full = mwg_sample(&p, &[0.0; 3], &SamplerConfig { n_samples: 400, ..base.clone() }).unwrap();
    let thin = mwg_sample(&p, &[0.0; 3], &SamplerConfig { thin: 10, ..base }).unwrap();
    assert_eq!(thin.rows(), 40);
    for t in 0..40 {
        assert_eq!(thin.row(t), full.row((t + 1) * 10 - 1));
    }
}

#[test]
fn fixed_seed_is_bit_identical() {
    let p = std_normal(4);
    for alg in [Algorithm::Mwg, Algorithm::Ram, Algorithm::Nuts] {
        let c = cfg(alg, 200, 100, 21);
        let a = run_chains(&p, &[0.5; 4], &c, 2).unwrap();
        let b = run_chains(&p, &[0.5; 4], &c, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].samples, a[1].samples);
    }
}

#[test]
fn adaptation_is_frozen_after_warmup() {
    let p = std_normal(3);
    for alg in [Algorithm::Mwg, Algorithm::Ram, Algorithm::Nuts] {
        let short = cfg(alg, 50, 300, 4);
        let long = SamplerConfig { n_samples: 500, ..short.clone() };
        let a = run_chains(&p, &[0.0; 3], &short, 1).unwrap().remove(0).meta;
        let b = run_chains(&p, &[0.0; 3], &long, 1).unwrap().remove(0).meta;
        assert_eq!(a.proposal_factors, b.proposal_factors);
        assert_eq!(a.step_size.map(f64::to_bits), b.step_size.map(f64::to_bits));
        assert_eq!(a.inv_metric, b.inv_metric);
    }
}

#[test]
fn ram_standard_normal_and_mixture() {
    let p = std_normal(2);
    let c = ram_sample(&p, &[0.0, 0.0], &cfg(Algorithm::Ram, 50_000, 2000, 8)).unwrap();
    for k in 0..2 {
        let (m, v) = moments(&c.component(k));
        assert!(m.abs() < 0.05 && (v - 1.0).abs() < 0.1, "{m} {v}");
    }
    let mix = FullRecompute(FnDensity::new(1, |u: &[f64]| {
        let a = -(u[0] + 4.0).powi(2) / 2.0;
        let b = -(u[0] - 4.0).powi(2) / 2.0;
        a.max(b) + (1.0 + (-(a - b).abs()).exp()).ln()
    }));
    let c = ram_sample(&mix, &[0.0], &cfg(Algorithm::Ram, 200_000, 2000, 2)).unwrap();
    let pos = c.component(0).iter().filter(|&&x| x > 0.0).count() as f64 / c.rows() as f64;
    assert!((pos - 0.5).abs() < 0.1, "{pos}");
}

#[test]
fn nuts_ten_dimensional_normal() {
    let p = std_normal(10);
    let c = nuts_sample(&p, &[0.0; 10], &cfg(Algorithm::Nuts, 5000, 1000, 13)).unwrap();
    for k in 0..10 {
        let (m, v) = moments(&c.component(k));
        assert!(m.abs() < 0.05 && (v - 1.0).abs() < 0.1, "component {k}: {m} {v}");
    }
    assert!(c.meta.divergences == 0);
}

#[test]
fn nuts_trajectories_respect_max_depth() {
    let p = std_normal(5);
    for depth in [1, 2, 3] {
        let c = SamplerConfig {
            max_depth: depth,
            step_size: Some(0.01),
            adapt_metric: false,
            ..cfg(Algorithm::Nuts, 20, 0, 3)
        };
        let chain = nuts_sample(&p, &[1.0; 5], &c).unwrap();
        assert_eq!(chain.meta.max_trajectory_states, 1 << depth);
    }
}

#[test]
fn leapfrog_mechanics() {
    let p = std_normal(3);
    let inv = [1.0, 0.5, 2.0];
    let s = Leapfrog::new(&p, vec![0.3, -1.0, 2.0], vec![0.7, 0.1, -0.4]);
    let f = leapfrog_step(&p, &s, 0.1, &inv);
    let back = leapfrog_step(&p, &Leapfrog { p: f.p.iter().map(|v| -v).collect(), ..f.clone() }, 0.1, &inv);
    for i in 0..3 {
        assert!((back.u[i] - s.u[i]).abs() <= 1e-12);
        assert!((back.p[i] + s.p[i]).abs() <= 1e-12);
    }

    let free = FnGradDensity::new(2, |_: &[f64], g: &mut [f64]| {
        g.iter_mut().for_each(|v| *v = 0.0);
        0.0
    });
    let s = Leapfrog::new(&free, vec![1.0, 2.0], vec![0.5, -3.0]);
    let f = leapfrog_step(&free, &s, 0.2, &[1.0, 1.0]);
    assert_eq!(f.u, vec![1.0 + 0.2 * 0.5, 2.0 + 0.2 * -3.0]);
    assert_eq!(f.p, s.p);

    let one = std_normal(2);
    let mut s = Leapfrog::new(&one, vec![1.0, 0.0], vec![0.0, 1.0]);
    let h0 = s.hamiltonian(&[1.0, 1.0]);
    for _ in 0..100 {
        s = leapfrog_step(&one, &s, 1e-3, &[1.0, 1.0]);
    }
    assert!((s.hamiltonian(&[1.0, 1.0]) - h0).abs() <= 1e-4);
}

#[test]
fn u_turn_cases() {
    let m = [1.0, 1.0];
    assert!(!u_turn_check(&[1.0, 2.0], &[1.0, 2.0], &[1.0, 2.0], &m));
    assert!(u_turn_check(&[1.0, 0.0], &[1.0, 0.0], &[-1.0, 0.0], &m));
    assert!(!u_turn_check(&[1.0, 0.0], &[0.0, 1.0], &[0.0, 0.0], &m));
    assert!(u_turn_check_original(&[0.0], &[1.0], &[-1.0], &[1.0], &[1.0]));
    assert!(!u_turn_check_original(&[0.0], &[1.0], &[1.0], &[1.0], &[1.0]));
}

#[test]
fn ram_acceptance_is_one_for_balanced_factors() {
    for aux in [-3.0, -0.2, 0.0, 1.5] {
        assert_eq!(ram::log_acceptance(0.0, aux, aux), 0.0);
    }
}

#[test]
fn config_validation() {
    let c = SamplerConfig { blocks: Some(vec![vec![0], vec![0, 1]]), ..Default::default() };
    assert!(c.validate(2).is_err());
    let c = SamplerConfig { blocks: Some(vec![vec![0]]), ..Default::default() };
    assert!(c.validate(2).is_err());
    let c = SamplerConfig { target_accept: 1.0, ..Default::default() };
    assert!(c.validate(2).is_err());
    let c = SamplerConfig { metric: Some(vec![1.0]), ..Default::default() };
    assert!(c.validate(2).is_err());
    assert!(SamplerConfig::default().validate(2).is_ok());
}

#[test]
fn chain_files_round_trip() {
    let p = std_normal(3);
    let c = mwg_sample(&p, &[0.0; 3], &cfg(Algorithm::Mwg, 10, 5, 1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    c.save(dir.path(), "chain_0").unwrap();
    assert_eq!(Chain::load(dir.path(), "chain_0").unwrap(), c);
}
