//! Posterior density `pi(u | y) ∝ exp(-||y - F u||^2 / (2 sigma^2)) pi(u)` with a residual
//! cache for single-site updates.

use crate::error::{Error, Result};
use crate::forward::ForwardOperator;
use crate::lattice::Field;
use crate::num::{dot, Real};
use crate::priors::Prior;

/// Commits between full recomputations of the cached residual.
pub const REFRESH_INTERVAL: usize = 10_000;

#[derive(Debug, Clone)]
pub struct Posterior<T> {
    op: ForwardOperator<T>,
    y: Vec<T>,
    sigma: T,
    prior: Prior<T>,
}

/// Current field together with `r = y - F u` and both log-density parts.
#[derive(Debug, Clone, PartialEq)]
pub struct CachedState<T> {
    u: Vec<T>,
    residual: Vec<T>,
    loglik: T,
    logprior: T,
    commits: usize,
}

impl<T: Real> CachedState<T> {
    pub fn u(&self) -> &[T] {
        &self.u
    }

    pub fn residual(&self) -> &[T] {
        &self.residual
    }

    pub fn loglik(&self) -> T {
        self.loglik
    }

    pub fn logprior(&self) -> T {
        self.logprior
    }

    pub fn log_post(&self) -> T {
        self.loglik + self.logprior
    }

    pub fn into_field_values(self) -> Vec<T> {
        self.u
    }
}

impl<T: Real> Posterior<T> {
    pub fn new(op: ForwardOperator<T>, y: Vec<T>, sigma: T, prior: Prior<T>) -> Result<Self> {
        if y.len() != op.rows() {
            return Err(Error::Dimension { expected: op.rows(), got: y.len() });
        }
        if prior.lattice() != op.recon_grid() {
            return Err(Error::config("prior lattice differs from the reconstruction grid"));
        }
        if !(sigma > T::zero() && sigma.is_finite()) {
            return Err(Error::config(format!("noise sigma must be positive, got {sigma}")));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("data contain non-finite values"));
        }
        Ok(Posterior { op, y, sigma, prior })
    }

    pub fn operator(&self) -> &ForwardOperator<T> {
        &self.op
    }

    pub fn prior(&self) -> &Prior<T> {
        &self.prior
    }

    pub fn data(&self) -> &[T] {
        &self.y
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    pub fn dim(&self) -> usize {
        self.op.cols()
    }

    fn check(&self, u: &[T]) -> Result<()> {
        if u.len() == self.dim() {
            Ok(())
        } else {
            Err(Error::Dimension { expected: self.dim(), got: u.len() })
        }
    }

    fn loglik_of_residual(&self, r: &[T]) -> T {
        -dot(r, r) / (T::lit(2.0) * self.sigma * self.sigma)
    }

    pub fn log_likelihood(&self, u: &[T]) -> Result<T> {
        Ok(self.loglik_of_residual(&self.op.residual(&self.y, u)?))
    }

    pub fn log_prior(&self, u: &[T]) -> Result<T> {
        self.check(u)?;
        Ok(self.prior.log_density(u))
    }

    pub fn log_post(&self, u: &[T]) -> Result<T> {
        Ok(self.log_likelihood(u)? + self.log_prior(u)?)
    }

    pub fn grad_log_post(&self, u: &[T]) -> Result<Vec<T>> {
        let mut g = vec![T::zero(); u.len()];
        self.value_and_grad(u, &mut g)?;
        Ok(g)
    }

    /// Writes the gradient into `g` and returns the log density.
    pub fn value_and_grad(&self, u: &[T], g: &mut [T]) -> Result<T> {
        let r = self.op.residual(&self.y, u)?;
        if g.len() != u.len() {
            return Err(Error::Dimension { expected: u.len(), got: g.len() });
        }
        let s2 = self.sigma * self.sigma;
        for (gi, v) in g.iter_mut().zip(self.op.apply_transpose(&r)) {
            *gi = v / s2;
        }
        let lp = self.prior.accumulate_gradient(u, g);
        Ok(self.loglik_of_residual(&r) + lp)
    }

    pub fn state(&self, u: Vec<T>) -> Result<CachedState<T>> {
        self.check(&u)?;
        let residual = self.op.residual(&self.y, &u)?;
        let loglik = self.loglik_of_residual(&residual);
        let logprior = self.prior.log_density(&u);
        Ok(CachedState { u, residual, loglik, logprior, commits: 0 })
    }

    pub fn state_from_field(&self, u: &Field<T>) -> Result<CachedState<T>> {
        self.state(u.values().to_vec())
    }

    fn delta_loglik(&self, st: &CachedState<T>, site: usize, d: T) -> T {
        let cr = self.op.column_dot(site, &st.residual);
        let cc = self.op.column_norm2(site);
        (T::lit(2.0) * d * cr - d * d * cc) / (T::lit(2.0) * self.sigma * self.sigma)
    }

    /// Change in log posterior if `u[site]` became `value`; the state is untouched.
    pub fn delta_log_post(&self, st: &CachedState<T>, site: usize, value: T) -> Result<T> {
        if site >= st.u.len() {
            return Err(Error::OutOfRange { index: site, len: st.u.len() });
        }
        Ok(self.delta_unchecked(st, site, value))
    }

    pub(crate) fn delta_unchecked(&self, st: &CachedState<T>, site: usize, value: T) -> T {
        let d = value - st.u[site];
        if d == T::zero() {
            return T::zero();
        }
        self.delta_loglik(st, site, d) + self.prior.delta(&st.u, site, value)
    }

    /// Sets `u[site] = value`, updating the residual and both cached terms.
    pub fn commit(&self, st: &mut CachedState<T>, site: usize, value: T) {
        let d = value - st.u[site];
        if d == T::zero() {
            return;
        }
        let dl = self.delta_loglik(st, site, d);
        let dp = self.prior.delta(&st.u, site, value);
        let r = &mut st.residual;
        self.op.for_each_in_column(site, |row, v| r[row] -= v * d);
        st.u[site] = value;
        st.loglik += dl;
        st.logprior += dp;
        st.commits += 1;
        if st.commits.is_multiple_of(REFRESH_INTERVAL) {
            self.refresh(st);
        }
    }

    /// Recomputes residual and cached log densities from `u`.
    pub fn refresh(&self, st: &mut CachedState<T>) {
        st.residual = self.op.residual(&self.y, &st.u).expect("state has posterior dimensions");
        st.loglik = self.loglik_of_residual(&st.residual);
        st.logprior = self.prior.log_density(&st.u);
    }
}

pub fn log_post<T: Real>(p: &Posterior<T>, u: &Field<T>) -> Result<T> {
    p.log_post(u.values())
}

pub fn grad_log_post<T: Real>(p: &Posterior<T>, u: &Field<T>) -> Result<Field<T>> {
    Field::new(*u.lattice(), p.grad_log_post(u.values())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::build_operator;
    use crate::lattice::Lattice;
    use crate::priors::tests::full_spec;
    use crate::priors::{PriorSpec, PriorVariant};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(variant: PriorVariant) -> Posterior<f64> {
        let l = if variant.supports_1d() { Lattice::line(40).unwrap() } else { Lattice::square(8).unwrap() };
        let data = if l.dims() == 1 { Lattice::line(25).unwrap() } else { Lattice::square(6).unwrap() };
        let op = build_operator(data, l, 0.01, 1e-8).unwrap();
        let y = (0..data.len()).map(|k| (k as f64 * 0.3).sin()).collect();
        Posterior::new(op, y, 0.05, Prior::build(&full_spec(variant), l).unwrap()).unwrap()
    }

    #[test]
    fn additivity() {
        let p = setup(PriorVariant::CauchyDiff1);
        let u: Vec<f64> = (0..p.dim()).map(|k| (k as f64).cos()).collect();
        assert_eq!(p.log_post(&u).unwrap() - p.log_prior(&u).unwrap(), p.log_likelihood(&u).unwrap());
    }

    #[test]
    fn deltas_match_recompute_and_compose() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for v in PriorVariant::ALL {
            let p = setup(v);
            let u: Vec<f64> = (0..p.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut st = p.state(u).unwrap();
            for _ in 0..200 {
                let k = rng.random_range(0..p.dim());
                let a = st.u()[k];
                let b = a + rng.random_range(-0.5..0.5);
                let c = b + rng.random_range(-0.5..0.5);
                let mut moved = st.u().to_vec();
                moved[k] = b;
                let full = p.log_post(&moved).unwrap() - p.log_post(st.u()).unwrap();
                let d_ab = p.delta_log_post(&st, k, b).unwrap();
                assert!((d_ab - full).abs() < 1e-9 * full.abs().max(1.0), "{v}: {d_ab} vs {full}");
                let d_ac = p.delta_log_post(&st, k, c).unwrap();
                p.commit(&mut st, k, b);
                let d_bc = p.delta_log_post(&st, k, c).unwrap();
                assert!((d_ab + d_bc - d_ac).abs() < 1e-9 * d_ac.abs().max(1.0));
            }
            assert_eq!(p.delta_log_post(&st, 3, st.u()[3]).unwrap(), 0.0);
            assert!(p.delta_log_post(&st, p.dim(), 0.0).is_err());
            let batch = p.log_post(st.u()).unwrap();
            assert!((st.log_post() - batch).abs() < 1e-8 * batch.abs().max(1.0));
            let fresh = p.op.residual(&p.y, st.u()).unwrap();
            assert!(fresh.iter().zip(st.residual()).all(|(a, b)| (a - b).abs() < 1e-9));
        }
    }

    #[test]
    fn commit_round_trip_restores_density() {
        let p = setup(PriorVariant::CauchyIso2);
        let mut st = p.state(vec![0.1; p.dim()]).unwrap();
        let before = st.log_post();
        p.commit(&mut st, 20, 3.0);
        p.commit(&mut st, 20, 0.1);
        assert!((st.log_post() - before).abs() < 1e-9);
    }

    #[test]
    fn normal_equations_stationary_point() {
        // gauss_diff1 + Gaussian likelihood is quadratic; its stationary point solves a linear system.
        let l = Lattice::line(12).unwrap();
        let op = build_operator(Lattice::line(9).unwrap(), l, 0.01, 1e-10).unwrap();
        let y: Vec<f64> = (0..9).map(|k| (k as f64).sqrt()).collect();
        let prior = Prior::build(&PriorSpec::gauss_diff1(0.7, 0.2), l).unwrap();
        let p = Posterior::new(op, y, 0.1, prior).unwrap();
        // Hessian by finite differences of the (linear) gradient, then one Newton step from 0.
        let n = l.len();
        let g0 = p.grad_log_post(&vec![0.0; n]).unwrap();
        let mut hess = vec![0.0; n * n];
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let gj = p.grad_log_post(&e).unwrap();
            for i in 0..n {
                hess[i * n + j] = -(gj[i] - g0[i]);
            }
        }
        let lch = crate::linalg::dense_cholesky(&hess, n).unwrap();
        let mut z = g0.clone();
        for i in 0..n {
            for k in 0..i {
                z[i] -= lch[i * n + k] * z[k];
            }
            z[i] /= lch[i * n + i];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                z[i] -= lch[k * n + i] * z[k];
            }
            z[i] /= lch[i * n + i];
        }
        let g = p.grad_log_post(&z).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-8), "{g:?}");
    }
}
