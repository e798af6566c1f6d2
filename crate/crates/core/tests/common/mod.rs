#![allow(dead_code)]

pub mod oracles;

use cmrf::{build_operator, ForwardOperator, Lattice, Posterior, Prior, PriorSpec, PriorVariant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Every parameter set, so one spec serves any variant.
pub fn spec(variant: PriorVariant) -> PriorSpec {
    PriorSpec {
        variant,
        lambda: Some(0.25),
        gamma: Some(0.9),
        gamma_prime: Some(1.3),
        ell: Some(if variant == PriorVariant::CauchyLaplaceOnly { -0.003 } else { 0.003 }),
        xi: Some(0.6),
        sigma0: Some(1.7),
        sigma1: Some(0.45),
        sigma2: Some(0.35),
        sigma_w: Some(0.8),
        zeta: Some(1.2),
        zeta_prime: Some(0.3),
        psi: Some(0.15),
        delta: Some(0.05),
        h_spde: None,
    }
}

/// The fourteen model priors on each lattice they are defined on (1D n=50, 2D 16x16).
pub fn prior_cases() -> Vec<(PriorVariant, Lattice)> {
    let line = Lattice::line(50).unwrap();
    let square = Lattice::square(16).unwrap();
    PriorVariant::ALL
        .into_iter()
        .filter(|&v| v != PriorVariant::Flat)
        .flat_map(|v| {
            let mut out = Vec::new();
            if v.supports_1d() {
                out.push((v, line));
            }
            if v.supports_2d() {
                out.push((v, square));
            }
            out
        })
        .collect()
}

pub fn random_field(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect()
}

/// Small deconvolution posterior with random data on `lattice`.
pub fn posterior(variant: PriorVariant, lattice: Lattice, sigma: f64, seed: u64) -> Posterior<f64> {
    let data = match lattice {
        Lattice::OneD { .. } => Lattice::line(30).unwrap(),
        Lattice::TwoD { .. } => Lattice::square(10).unwrap(),
    };
    let op = build_operator(data, lattice, 0.01, 1e-12).unwrap();
    let y = random_field(&mut rng(seed), data.len(), 1.0);
    Posterior::new(op, y, sigma, Prior::build(&spec(variant), lattice).unwrap()).unwrap()
}

/// Central differences with step `1e-6 (1 + |u_k|)`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, u: &[f64]) -> Vec<f64> {
    let mut v = u.to_vec();
    (0..u.len())
        .map(|k| {
            let h = 1e-6 * (1.0 + u[k].abs());
            v[k] = u[k] + h;
            let fp = f(&v);
            v[k] = u[k] - h;
            let fm = f(&v);
            v[k] = u[k];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// `max_k |a_k - b_k| / max(|b|_inf, 1)`.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

pub fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0))
}

/// `N(0, I_d)` as a posterior: identity operator, flat prior, `y = 0`, `sigma = 1`.
pub fn std_normal(d: usize) -> Posterior<f64> {
    let l = Lattice::line(d).unwrap();
    let prior = Prior::build(&PriorSpec::flat(), l).unwrap();
    Posterior::new(ForwardOperator::identity(l), vec![0.0; d], 1.0, prior).unwrap()
}

/// Small 1D experiment that runs every CLI command in well under a second.
pub fn small_config() -> serde_json::Value {
    serde_json::json!({
        "problem": "deconv1d",
        "grids": {"data": {"n": 15}, "reconstruction": {"n": 24}},
        "kernel_s": 0.002,
        "noise_sigma": 0.01,
        "prior": {"variant": "cauchy_diff1_1d", "lambda": 0.05, "gamma": 1.0},
        "optimizer": {"max_iter": 2000},
        "sampler": {"algorithm": "mwg", "n_adapt": 200, "n_samples": 40, "thin": 5, "initial_proposal_sd": 0.05},
        "n_chains": 2,
        "master_seed": 11,
        "diagnose": {"max_lag": 10, "kde_nodes": [3, 12], "kde_points": 20},
        "realize": {
            "lattice": {"n": 30},
            "normalize": true,
            "items": [
                {"name": "walk", "kind": "walk", "order": 2, "family": "cauchy", "scale": 1.0},
                {"name": "field", "kind": "spde", "ell": 0.001, "family": "gaussian", "scale": 1.0, "seed": 3}
            ]
        }
    })
}

pub fn cmrf(args: &[&str]) -> std::process::Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_cmrf"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}
