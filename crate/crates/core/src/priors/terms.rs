//! Every prior is a sum of local penalties. A penalty applies a scalar law to the
//! squared norm of one or two short linear combinations of field values:
//!
//! * Cauchy: `-w * ln(s^2 + r)`
//! * Gaussian: `-r / (2 sigma^2)`
//! * Charbonnier: `-rate * sqrt(r + delta^2)`
//!
//! where `r = sum_c (sum_k a_ck u_k)^2`.

use crate::num::Real;

pub(crate) const MAX_TAPS: usize = 5;

#[derive(Debug, Clone, Copy)]
pub(crate) enum Law<T> {
    Cauchy { scale2: T, weight: T },
    Gauss { half_precision: T },
    Charbonnier { rate: T, delta2: T },
}

impl<T: Real> Law<T> {
    #[inline]
    fn value(&self, r: T) -> T {
        match *self {
            Law::Cauchy { scale2, weight } => -weight * (scale2 + r).ln(),
            Law::Gauss { half_precision } => -half_precision * r,
            Law::Charbonnier { rate, delta2 } => -rate * (r + delta2).sqrt(),
        }
    }

    /// Derivative of the law with respect to `r`.
    #[inline]
    fn slope(&self, r: T) -> T {
        match *self {
            Law::Cauchy { scale2, weight } => -weight / (scale2 + r),
            Law::Gauss { half_precision } => -half_precision,
            Law::Charbonnier { rate, delta2 } => -rate / (T::lit(2.0) * (r + delta2).sqrt()),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Combo<T> {
    idx: [usize; MAX_TAPS],
    coef: [T; MAX_TAPS],
    len: usize,
}

impl<T: Real> Combo<T> {
    pub(crate) fn new() -> Self {
        Combo { idx: [0; MAX_TAPS], coef: [T::zero(); MAX_TAPS], len: 0 }
    }

    pub(crate) fn tap(mut self, k: usize, a: T) -> Self {
        debug_assert!(self.len < MAX_TAPS);
        self.idx[self.len] = k;
        self.coef[self.len] = a;
        self.len += 1;
        self
    }

    pub(crate) fn single(k: usize) -> Self {
        Self::new().tap(k, T::one())
    }

    /// `u[hi] - u[lo]`
    pub(crate) fn diff(hi: usize, lo: usize) -> Self {
        Self::new().tap(hi, T::one()).tap(lo, -T::one())
    }

    /// `u[a] - 2 u[mid] + u[b]`
    pub(crate) fn second(a: usize, mid: usize, b: usize) -> Self {
        Self::new().tap(a, T::one()).tap(mid, T::lit(-2.0)).tap(b, T::one())
    }

    #[inline]
    fn eval(&self, get: &impl Fn(usize) -> T) -> T {
        let mut s = T::zero();
        for t in 0..self.len {
            s += self.coef[t] * get(self.idx[t]);
        }
        s
    }

    pub(crate) fn taps(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        (0..self.len).map(move |t| (self.idx[t], self.coef[t]))
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Penalty<T> {
    pub(crate) law: Law<T>,
    pub(crate) boundary: bool,
    combos: [Combo<T>; 2],
    n: usize,
}

impl<T: Real> Penalty<T> {
    pub(crate) fn one(law: Law<T>, boundary: bool, c: Combo<T>) -> Self {
        Penalty { law, boundary, combos: [c, Combo::new()], n: 1 }
    }

    pub(crate) fn two(law: Law<T>, boundary: bool, a: Combo<T>, b: Combo<T>) -> Self {
        Penalty { law, boundary, combos: [a, b], n: 2 }
    }

    #[inline]
    fn squared_norm(&self, get: &impl Fn(usize) -> T) -> (T, [T; 2]) {
        let mut lin = [T::zero(); 2];
        let mut r = T::zero();
        for (c, l) in self.combos[..self.n].iter().zip(lin.iter_mut()) {
            *l = c.eval(get);
            r += *l * *l;
        }
        (r, lin)
    }

    #[inline]
    pub(crate) fn value(&self, get: &impl Fn(usize) -> T) -> T {
        let (r, _) = self.squared_norm(get);
        self.law.value(r)
    }

    /// Adds this penalty's gradient into `grad` and returns its value.
    #[inline]
    pub(crate) fn accumulate(&self, u: &[T], grad: &mut [T]) -> T {
        let get = |k: usize| u[k];
        let (r, lin) = self.squared_norm(&get);
        let slope = self.law.slope(r);
        let two = T::lit(2.0);
        for (c, &l) in self.combos[..self.n].iter().zip(lin.iter()) {
            let w = two * slope * l;
            for (k, a) in c.taps() {
                grad[k] += w * a;
            }
        }
        self.law.value(r)
    }

    pub(crate) fn touches(&self, site: usize) -> bool {
        self.combos[..self.n].iter().any(|c| c.taps().any(|(k, a)| k == site && a != T::zero()))
    }
}
