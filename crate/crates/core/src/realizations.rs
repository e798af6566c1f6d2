//! Draws from the priors viewed as stochastic processes: Cauchy and Gaussian random
//! walks, and SPDE fields `(I - ell Laplacian) u = m` with iid noise `m`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Field, Lattice};
use crate::linalg::{conjugate_gradient, BandCholesky, CsrMatrix};
use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseFamily {
    Cauchy,
    Gaussian,
}

/// Symmetric, centred noise: Cauchy with the given scale or Gaussian with the given
/// standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub family: NoiseFamily,
    pub scale: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::config(format!("noise scale must be positive, got {}", self.scale)));
        }
        Ok(())
    }

    fn draw(&self, scale: f64, rng: &mut ChaCha8Rng) -> f64 {
        match self.family {
            NoiseFamily::Cauchy => sample_cauchy(scale, rng),
            NoiseFamily::Gaussian => scale * rng.sample::<f64, _>(StandardNormal),
        }
    }
}

/// Inverse-CDF Cauchy draw `scale * tan(pi (U - 1/2))`.
pub fn sample_cauchy<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    cauchy_quantile(scale, rng.random::<f64>())
}

pub fn cauchy_quantile(scale: f64, u: f64) -> f64 {
    if u == 0.5 {
        return 0.0;
    }
    scale * (std::f64::consts::PI * (u - 0.5)).tan()
}

/// Random walk on `n` nodes with spacing `h`. Increments have scale `scale * h`
/// (Cauchy) or standard deviation `scale * sqrt(h)` (Gaussian). Order 1 starts at zero;
/// order 2 integrates an order-1 walk of slopes and starts with zero value and slope.
pub fn random_walk_1d<T: Real>(order: u8, noise: &NoiseSpec, n: usize, h: f64) -> Result<Field<T>> {
    noise.validate()?;
    let lattice = Lattice::line(n)?;
    if !(h > 0.0) {
        return Err(Error::config(format!("spacing must be positive, got {h}")));
    }
    let step = match noise.family {
        NoiseFamily::Cauchy => noise.scale * h,
        NoiseFamily::Gaussian => noise.scale * h.sqrt(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let mut u = vec![0.0; n];
    match order {
        1 => {
            for i in 1..n {
                u[i] = u[i - 1] + noise.draw(step, &mut rng);
            }
        }
        2 => {
            let mut slope = 0.0;
            for i in 1..n {
                u[i] = u[i - 1] + slope;
                slope += noise.draw(step, &mut rng);
            }
        }
        _ => return Err(Error::config(format!("walk order must be 1 or 2, got {order}"))),
    }
    Field::new(lattice, u.into_iter().map(T::lit).collect())
}

/// Sparse `I - ell Laplacian` on the lattice with zero values outside it.
pub fn spde_matrix<T: Real>(lattice: &Lattice, ell: f64) -> Result<CsrMatrix<T>> {
    lattice.validate()?;
    if !(ell > 0.0 && ell.is_finite()) {
        return Err(Error::config(format!("ell must be positive, got {ell}")));
    }
    let (nx, ny) = lattice.shape();
    let (cx, cy) = match lattice {
        Lattice::OneD { n } => (ell * sq((*n - 1) as f64), 0.0),
        Lattice::TwoD { .. } => (ell * sq((nx - 1) as f64), ell * sq((ny - 1) as f64)),
    };
    Ok(CsrMatrix::from_rows(lattice.len(), lattice.len(), |k| {
        let (i, j) = lattice.coords(k);
        let mut row = Vec::with_capacity(5);
        if i > 0 {
            row.push((lattice.index(i - 1, j), T::lit(-cx)));
        }
        if cy > 0.0 && j > 0 {
            row.push((k - 1, T::lit(-cy)));
        }
        row.push((k, T::lit(1.0 + 2.0 * cx + 2.0 * cy)));
        if cy > 0.0 && j + 1 < ny {
            row.push((k + 1, T::lit(-cy)));
        }
        if i + 1 < nx {
            row.push((lattice.index(i + 1, j), T::lit(-cx)));
        }
        row
    }))
}

fn sq(x: f64) -> f64 {
    x * x
}

/// Solves `A u = m` by banded Cholesky, falling back to conjugate gradients.
pub fn solve_spd<T: Real>(a: &CsrMatrix<T>, m: &[T]) -> Result<Vec<T>> {
    match BandCholesky::factor(a) {
        Ok(f) => Ok(f.solve(m)),
        Err(e) => {
            log::warn!("direct solve failed ({e}); using conjugate gradients");
            conjugate_gradient(a, m, T::lit(1e-10), 10 * a.rows().max(100))
        }
    }
}

/// SPDE field driven by iid noise of the given scale at every node (the scale is not
/// adjusted for the mesh, so realizations depend on the resolution).
pub fn spde_realization<T: Real>(lattice: &Lattice, ell: f64, noise: &NoiseSpec) -> Result<Field<T>> {
    noise.validate()?;
    let a = spde_matrix::<T>(lattice, ell)?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let m: Vec<T> = (0..lattice.len()).map(|_| T::lit(noise.draw(noise.scale, &mut rng))).collect();
    Field::new(*lattice, solve_spd(&a, &m)?)
}

/// Rescales to unit max-abs; the zero field is returned unchanged.
pub fn normalize_max_abs<T: Real>(values: &mut [T]) {
    let m = values.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if m > T::zero() {
        for v in values {
            *v /= m;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::norm_inf;

    fn spec(family: NoiseFamily, scale: f64, seed: u64) -> NoiseSpec {
        NoiseSpec { family, scale, seed }
    }

    #[test]
    fn cauchy_quantiles() {
        assert_eq!(cauchy_quantile(2.0, 0.5), 0.0);
        assert!((cauchy_quantile(2.0, 0.75) - 2.0).abs() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 1_000_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            let x = sample_cauchy(1.5, &mut rng);
            for (c, t) in counts.iter_mut().zip([-1.5, 0.0, 1.5]) {
                *c += (x <= t) as usize;
            }
        }
        for (c, p) in counts.iter().zip([0.25, 0.5, 0.75]) {
            assert!((*c as f64 / n as f64 - p).abs() < 0.002);
        }
    }

    #[test]
    fn walks() {
        let w: Field<f64> = random_walk_1d(1, &spec(NoiseFamily::Cauchy, 1e-300, 1), 50, 0.1).unwrap();
        assert!(w.values().iter().all(|v| v.abs() < 1e-290));
        let w: Field<f64> = random_walk_1d(2, &spec(NoiseFamily::Gaussian, 1.0, 2), 50, 0.1).unwrap();
        assert_eq!(w.values()[0], 0.0);
        assert_eq!(w.values()[1], 0.0);
        assert_ne!(w.values()[2], 0.0);
        assert!(random_walk_1d::<f64>(3, &spec(NoiseFamily::Gaussian, 1.0, 2), 50, 0.1).is_err());
        assert!(random_walk_1d::<f64>(1, &spec(NoiseFamily::Gaussian, 0.0, 2), 50, 0.1).is_err());
        let a: Field<f64> = random_walk_1d(1, &spec(NoiseFamily::Cauchy, 1.0, 5), 200, 0.01).unwrap();
        let b: Field<f64> = random_walk_1d(1, &spec(NoiseFamily::Cauchy, 1.0, 5), 200, 0.01).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gaussian_walk_variance() {
        let (n, h) = (100, 0.01);
        let reps = 10_000;
        let ends: Vec<f64> = (0..reps)
            .map(|s| {
                *random_walk_1d::<f64>(1, &spec(NoiseFamily::Gaussian, 1.0, s), n, h).unwrap().values().last().unwrap()
            })
            .collect();
        let var = ends.iter().map(|x| x * x).sum::<f64>() / reps as f64;
        // n - 1 increments of variance h.
        assert!((var / ((n - 1) as f64 * h) - 1.0).abs() < 0.1, "{var}");
    }

    #[test]
    fn spde_system() {
        for l in [Lattice::line(30).unwrap(), Lattice::grid(12, 9).unwrap()] {
            let a = spde_matrix::<f64>(&l, 0.01).unwrap();
            assert!(a.is_symmetric(0.0));
            assert!(BandCholesky::factor(&a).is_ok());
            let u = spde_realization::<f64>(&l, 0.01, &spec(NoiseFamily::Cauchy, 1.0, 3)).unwrap();
            let au = a.mul_vec(u.values());
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let m: Vec<f64> = (0..l.len()).map(|_| sample_cauchy(1.0, &mut rng)).collect();
            let r: Vec<f64> = au.iter().zip(&m).map(|(x, y)| x - y).collect();
            assert!(norm_inf(&r) <= 1e-9 * norm_inf(&m));
        }
        assert!(spde_matrix::<f64>(&Lattice::line(5).unwrap(), 0.0).is_err());
    }

    #[test]
    fn spde_constant_noise_interior() {
        let l = Lattice::square(41).unwrap();
        let a = spde_matrix::<f64>(&l, 1e-4).unwrap();
        let u = solve_spd(&a, &vec![2.0; l.len()]).unwrap();
        assert!((u[l.index(20, 20)] - 2.0).abs() < 1e-6);
        let z = solve_spd(&a, &vec![0.0; l.len()]).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn normalization() {
        let mut v = vec![1.0, -4.0, 2.0];
        normalize_max_abs(&mut v);
        assert_eq!(v, vec![0.25, -1.0, 0.5]);
        let mut z = vec![0.0; 3];
        normalize_max_abs(&mut z);
        assert_eq!(z, vec![0.0; 3]);
    }
}
