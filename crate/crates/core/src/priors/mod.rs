//! Unnormalized log prior densities, gradients and single-site increments.
//!
//! A [`PriorSpec`] is the serializable description; [`Prior::build`] validates it
//! against a lattice and resolves parameters into the scalar type used for
//! evaluation. Normalization constants are dropped everywhere.

mod spec;
mod terms;

pub use spec::{PriorSpec, PriorVariant};

use crate::error::{Error, Result};
use crate::lattice::{Field, Lattice};
use crate::num::Real;
use terms::{Combo, Law, Penalty};

#[derive(Debug, Clone, Copy)]
enum SpdeNoise<T> {
    Cauchy { xi2: T },
    Gauss { half_precision: T },
}

#[derive(Debug, Clone, Copy)]
enum Kind<T> {
    Flat,
    CauchyDiff1 {
        lambda2: T,
        gamma2: T,
    },
    CauchyDiff2 {
        lambda2: T,
        gamma2: T,
        gamma_p2: T,
    },
    CauchyIso1 {
        lambda2: T,
        gamma2: T,
    },
    CauchyAniso1 {
        lambda2: T,
        gamma2: T,
    },
    CauchyIso2 {
        lambda2: T,
        gamma2: T,
        gamma_p2: T,
    },
    CauchyAniso2 {
        lambda2: T,
        gamma2: T,
        gamma_p2: T,
    },
    CauchySheet {
        lambda2: T,
        gamma2: T,
    },
    /// `p = center * u_k + off * (sum of in-lattice neighbours)`
    Spde {
        center: T,
        off: T,
        noise: SpdeNoise<T>,
    },
    GaussDiff1 {
        hp0: T,
        hp1: T,
    },
    GaussDiff2 {
        hp0: T,
        hp1: T,
        hp2: T,
    },
    Tv1 {
        zeta: T,
        zeta_p: T,
        delta2: T,
    },
    Tv2 {
        zeta: T,
        zeta_p: T,
        psi: T,
        delta2: T,
    },
}

/// A validated prior bound to a lattice.
#[derive(Debug, Clone)]
pub struct Prior<T> {
    lattice: Lattice,
    variant: PriorVariant,
    kind: Kind<T>,
}

fn half_precision<T: Real>(sigma: f64) -> T {
    T::lit(0.5 / (sigma * sigma))
}

impl<T: Real> Prior<T> {
    pub fn build(spec: &PriorSpec, lattice: Lattice) -> Result<Self> {
        lattice.validate()?;
        let v = spec.variant;
        let dims_ok = match lattice.dims() {
            1 => v.supports_1d(),
            _ => v.supports_2d(),
        };
        if !dims_ok {
            return Err(Error::Variant {
                variant: v.name().into(),
                reason: format!("not defined on a {}D lattice", lattice.dims()),
            });
        }
        if v.needs_interior() && lattice.dims() == 2 {
            let (nx, ny) = lattice.shape();
            if nx < 3 || ny < 3 {
                return Err(Error::config(format!("{v} needs at least 3 nodes per axis")));
            }
        }
        let sq = |x: f64| T::lit(x * x);
        let kind = match v {
            PriorVariant::Flat => Kind::Flat,
            PriorVariant::CauchyDiff1 => Kind::CauchyDiff1 {
                lambda2: sq(spec.positive("lambda", spec.lambda)?),
                gamma2: sq(spec.positive("gamma", spec.gamma)?),
            },
            PriorVariant::CauchyDiff2 => Kind::CauchyDiff2 {
                lambda2: sq(spec.positive("lambda", spec.lambda)?),
                gamma2: sq(spec.positive("gamma", spec.gamma)?),
                gamma_p2: sq(spec.positive("gamma_prime", spec.gamma_prime)?),
            },
            PriorVariant::CauchyIso1 | PriorVariant::CauchyAniso1 | PriorVariant::CauchySheet => {
                let lambda2 = sq(spec.positive("lambda", spec.lambda)?);
                let gamma2 = sq(spec.positive("gamma", spec.gamma)?);
                match v {
                    PriorVariant::CauchyIso1 => Kind::CauchyIso1 { lambda2, gamma2 },
                    PriorVariant::CauchyAniso1 => Kind::CauchyAniso1 { lambda2, gamma2 },
                    _ => Kind::CauchySheet { lambda2, gamma2 },
                }
            }
            PriorVariant::CauchyIso2 | PriorVariant::CauchyAniso2 => {
                let lambda2 = sq(spec.positive("lambda", spec.lambda)?);
                let gamma2 = sq(spec.positive("gamma", spec.gamma)?);
                let gamma_p2 = sq(spec.positive("gamma_prime", spec.gamma_prime)?);
                if v == PriorVariant::CauchyIso2 {
                    Kind::CauchyIso2 { lambda2, gamma2, gamma_p2 }
                } else {
                    Kind::CauchyAniso2 { lambda2, gamma2, gamma_p2 }
                }
            }
            PriorVariant::CauchySpde | PriorVariant::CauchyLaplaceOnly | PriorVariant::GaussSpde => {
                let ell = if v == PriorVariant::CauchyLaplaceOnly {
                    spec.finite_nonzero("ell", spec.ell)?
                } else {
                    spec.positive("ell", spec.ell)?
                };
                let h = match spec.h_spde {
                    Some(_) => spec.positive("h_spde", spec.h_spde)?,
                    None => lattice.h::<f64>(),
                };
                let coupling = ell / (h * h);
                let identity = if v == PriorVariant::CauchyLaplaceOnly { 0.0 } else { 1.0 };
                let center = identity + 2.0 * lattice.dims() as f64 * coupling;
                let noise = if v == PriorVariant::GaussSpde {
                    SpdeNoise::Gauss { half_precision: half_precision(spec.positive("sigma_w", spec.sigma_w)?) }
                } else {
                    SpdeNoise::Cauchy { xi2: sq(spec.positive("xi", spec.xi)?) }
                };
                Kind::Spde { center: T::lit(center), off: T::lit(-coupling), noise }
            }
            PriorVariant::GaussDiff1 => Kind::GaussDiff1 {
                hp0: half_precision(spec.positive("sigma0", spec.sigma0)?),
                hp1: half_precision(spec.positive("sigma1", spec.sigma1)?),
            },
            PriorVariant::GaussDiff2 => Kind::GaussDiff2 {
                hp0: half_precision(spec.positive("sigma0", spec.sigma0)?),
                hp1: half_precision(spec.positive("sigma1", spec.sigma1)?),
                hp2: half_precision(spec.positive("sigma2", spec.sigma2)?),
            },
            PriorVariant::Tv1 => Kind::Tv1 {
                zeta: T::lit(spec.positive("zeta", spec.zeta)?),
                zeta_p: T::lit(spec.positive("zeta_prime", spec.zeta_prime)?),
                delta2: sq(spec.positive("delta", spec.delta)?),
            },
            PriorVariant::Tv2 => Kind::Tv2 {
                zeta: T::lit(spec.positive("zeta", spec.zeta)?),
                zeta_p: T::lit(spec.positive("zeta_prime", spec.zeta_prime)?),
                psi: T::lit(spec.positive("psi", spec.psi)?),
                delta2: sq(spec.positive("delta", spec.delta)?),
            },
        };
        Ok(Prior { lattice, variant: v, kind })
    }

    pub fn variant(&self) -> PriorVariant {
        self.variant
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn dim(&self) -> usize {
        self.lattice.len()
    }

    /// Calls `emit` for every penalty anchored at node `k`.
    fn anchor_penalties(&self, k: usize, emit: &mut impl FnMut(Penalty<T>)) {
        let l = &self.lattice;
        let one = T::one();
        match (self.kind, *l) {
            (Kind::Flat, _) => {}
            (Kind::CauchyDiff1 { lambda2, gamma2 }, Lattice::OneD { n }) => {
                if k == 0 {
                    emit(Penalty::one(cauchy(gamma2, one), true, Combo::single(0)));
                }
                if k + 1 < n {
                    emit(Penalty::one(cauchy(lambda2, one), false, Combo::diff(k + 1, k)));
                }
            }
            (Kind::CauchyDiff2 { lambda2, gamma2, gamma_p2 }, Lattice::OneD { n }) => {
                if k == 0 {
                    emit(Penalty::one(cauchy(gamma2, one), true, Combo::single(0)));
                    emit(Penalty::one(cauchy(gamma_p2, one), true, Combo::diff(1, 0)));
                }
                if k >= 1 && k + 1 < n {
                    emit(Penalty::one(cauchy(lambda2, one), false, Combo::second(k + 1, k, k - 1)));
                }
            }
            (Kind::GaussDiff1 { hp0, hp1 }, Lattice::OneD { n }) => {
                if k == 0 {
                    emit(Penalty::one(gauss(hp0), true, Combo::single(0)));
                }
                if k + 1 < n {
                    emit(Penalty::one(gauss(hp1), false, Combo::diff(k + 1, k)));
                }
            }
            (Kind::GaussDiff2 { hp0, hp1, hp2 }, Lattice::OneD { n }) => {
                if k == 0 {
                    emit(Penalty::one(gauss(hp0), true, Combo::single(0)));
                    emit(Penalty::one(gauss(hp1), true, Combo::diff(1, 0)));
                }
                if k >= 1 && k + 1 < n {
                    emit(Penalty::one(gauss(hp2), false, Combo::second(k + 1, k, k - 1)));
                }
            }
            (Kind::Spde { center, off, noise }, Lattice::OneD { n }) => {
                let mut c = Combo::new().tap(k, center);
                if k > 0 {
                    c = c.tap(k - 1, off);
                }
                if k + 1 < n {
                    c = c.tap(k + 1, off);
                }
                emit(Penalty::one(spde_law(noise), false, c));
            }
            (Kind::Spde { center, off, noise }, Lattice::TwoD { nx, ny }) => {
                let (i, j) = l.coords(k);
                let mut c = Combo::new().tap(k, center);
                if i > 0 {
                    c = c.tap(l.index(i - 1, j), off);
                }
                if i + 1 < nx {
                    c = c.tap(l.index(i + 1, j), off);
                }
                if j > 0 {
                    c = c.tap(l.index(i, j - 1), off);
                }
                if j + 1 < ny {
                    c = c.tap(l.index(i, j + 1), off);
                }
                emit(Penalty::one(spde_law(noise), false, c));
            }
            (kind, Lattice::TwoD { nx, ny }) => {
                let (i, j) = l.coords(k);
                let first = i + 1 < nx && j + 1 < ny;
                let second = i >= 1 && j >= 1 && i + 1 < nx && j + 1 < ny;
                let dh = || Combo::diff(l.index(i + 1, j), k);
                let dv = || Combo::diff(l.index(i, j + 1), k);
                let d2h = || Combo::second(l.index(i + 1, j), k, l.index(i - 1, j));
                let d2v = || Combo::second(l.index(i, j + 1), k, l.index(i, j - 1));
                let on_boundary = l.is_boundary(k);
                let to_inner = || {
                    let (a, b) = l.nearest_interior_neighbor(i, j).expect("lattice has an interior");
                    Combo::diff(k, l.index(a, b))
                };
                let three_halves = T::lit(1.5);
                match kind {
                    Kind::CauchyIso1 { lambda2, gamma2 } => {
                        if on_boundary {
                            emit(Penalty::one(cauchy(gamma2, one), true, Combo::single(k)));
                        }
                        if first {
                            emit(Penalty::two(cauchy(lambda2, three_halves), false, dh(), dv()));
                        }
                    }
                    Kind::CauchyAniso1 { lambda2, gamma2 } => {
                        if on_boundary {
                            emit(Penalty::one(cauchy(gamma2, one), true, Combo::single(k)));
                        }
                        if first {
                            emit(Penalty::one(cauchy(lambda2, one), false, dh()));
                            emit(Penalty::one(cauchy(lambda2, one), false, dv()));
                        }
                    }
                    Kind::CauchyIso2 { lambda2, gamma2, gamma_p2 } => {
                        if on_boundary {
                            emit(Penalty::one(cauchy(gamma2, one), true, to_inner()));
                            emit(Penalty::one(cauchy(gamma_p2, one), true, Combo::single(k)));
                        }
                        if second {
                            emit(Penalty::two(cauchy(lambda2, three_halves), false, d2h(), d2v()));
                        }
                    }
                    Kind::CauchyAniso2 { lambda2, gamma2, gamma_p2 } => {
                        if on_boundary {
                            emit(Penalty::one(cauchy(gamma2, one), true, to_inner()));
                            emit(Penalty::one(cauchy(gamma_p2, one), true, Combo::single(k)));
                        }
                        if second {
                            emit(Penalty::one(cauchy(lambda2, one), false, d2h()));
                            emit(Penalty::one(cauchy(lambda2, one), false, d2v()));
                        }
                    }
                    Kind::CauchySheet { lambda2, gamma2 } => {
                        // Boundary: Cauchy chains along row i = 0 and column j = 0, anchored at u(0,0).
                        if k == 0 {
                            emit(Penalty::one(cauchy(gamma2, one), true, Combo::single(0)));
                        }
                        if i == 0 && j + 1 < ny {
                            emit(Penalty::one(cauchy(gamma2, one), true, dv()));
                        }
                        if j == 0 && i + 1 < nx {
                            emit(Penalty::one(cauchy(gamma2, one), true, dh()));
                        }
                        if first {
                            let mixed = Combo::new()
                                .tap(l.index(i + 1, j + 1), one)
                                .tap(l.index(i + 1, j), -one)
                                .tap(l.index(i, j + 1), -one)
                                .tap(k, one);
                            emit(Penalty::one(cauchy(lambda2, one), false, mixed));
                        }
                    }
                    Kind::GaussDiff1 { hp0, hp1 } => {
                        if on_boundary {
                            emit(Penalty::one(gauss(hp0), true, Combo::single(k)));
                        }
                        if first {
                            emit(Penalty::two(gauss(hp1), false, dh(), dv()));
                        }
                    }
                    Kind::GaussDiff2 { hp0, hp1, hp2 } => {
                        if on_boundary {
                            emit(Penalty::one(gauss(hp0), true, Combo::single(k)));
                            emit(Penalty::one(gauss(hp1), true, to_inner()));
                        }
                        if second {
                            emit(Penalty::two(gauss(hp2), false, d2h(), d2v()));
                        }
                    }
                    Kind::Tv1 { zeta, zeta_p, delta2 } => {
                        if on_boundary {
                            emit(Penalty::one(charbonnier(zeta_p, delta2), true, Combo::single(k)));
                        }
                        if first {
                            emit(Penalty::two(charbonnier(zeta, delta2), false, dh(), dv()));
                        }
                    }
                    Kind::Tv2 { zeta, zeta_p, psi, delta2 } => {
                        if on_boundary {
                            emit(Penalty::one(charbonnier(psi, delta2), true, Combo::single(k)));
                            emit(Penalty::one(charbonnier(zeta_p, delta2), true, to_inner()));
                        }
                        if second {
                            emit(Penalty::two(charbonnier(zeta, delta2), false, d2h(), d2v()));
                        }
                    }
                    _ => unreachable!("variant/lattice combination rejected at build time"),
                }
            }
            _ => unreachable!("variant/lattice combination rejected at build time"),
        }
    }

    /// Unnormalized log density; `u` must have the lattice's node count.
    pub fn log_density(&self, u: &[T]) -> T {
        let (interior, boundary) = self.log_density_split(u);
        interior + boundary
    }

    /// Log density split into `(interior terms, boundary factor)`.
    pub fn log_density_split(&self, u: &[T]) -> (T, T) {
        debug_assert_eq!(u.len(), self.dim());
        let get = |k: usize| u[k];
        let mut interior = T::zero();
        let mut boundary = T::zero();
        for k in 0..self.dim() {
            self.anchor_penalties(k, &mut |p| {
                let v = p.value(&get);
                if p.boundary {
                    boundary += v;
                } else {
                    interior += v;
                }
            });
        }
        (interior, boundary)
    }

    /// Adds the gradient of the log density into `grad` and returns the log density.
    pub fn accumulate_gradient(&self, u: &[T], grad: &mut [T]) -> T {
        debug_assert_eq!(u.len(), self.dim());
        debug_assert_eq!(grad.len(), self.dim());
        let mut total = T::zero();
        for k in 0..self.dim() {
            self.anchor_penalties(k, &mut |p| total += p.accumulate(u, grad));
        }
        total
    }

    pub fn gradient(&self, u: &[T]) -> Vec<T> {
        let mut g = vec![T::zero(); u.len()];
        self.accumulate_gradient(u, &mut g);
        g
    }

    /// Anchors whose penalties may read `site`. Every stencil reaches at most one node
    /// away (Chebyshev distance) from its anchor.
    fn for_each_nearby_anchor(&self, site: usize, mut f: impl FnMut(usize)) {
        match self.lattice {
            Lattice::OneD { n } => {
                for k in site.saturating_sub(1)..=(site + 1).min(n - 1) {
                    f(k);
                }
            }
            Lattice::TwoD { nx, ny } => {
                let (i, j) = self.lattice.coords(site);
                for a in i.saturating_sub(1)..=(i + 1).min(nx - 1) {
                    for b in j.saturating_sub(1)..=(j + 1).min(ny - 1) {
                        f(self.lattice.index(a, b));
                    }
                }
            }
        }
    }

    /// Sum of the penalties that depend on `site`, with `u[site]` replaced by `value`.
    fn local_log_density(&self, u: &[T], site: usize, value: T) -> T {
        let get = |k: usize| if k == site { value } else { u[k] };
        let mut s = T::zero();
        self.for_each_nearby_anchor(site, |k| {
            self.anchor_penalties(k, &mut |p| {
                if p.touches(site) {
                    s += p.value(&get);
                }
            });
        });
        s
    }

    /// `log pi(u with u[site] = value) - log pi(u)`, touching only local terms.
    pub fn delta(&self, u: &[T], site: usize, value: T) -> T {
        let old = u[site];
        if value == old {
            return T::zero();
        }
        self.local_log_density(u, site, value) - self.local_log_density(u, site, old)
    }

    fn check_field(&self, u: &Field<T>) -> Result<()> {
        if *u.lattice() != self.lattice {
            return Err(Error::Dimension { expected: self.dim(), got: u.len() });
        }
        Ok(())
    }

    fn check_family(&self, allowed: &[PriorVariant], family: &str) -> Result<()> {
        if allowed.contains(&self.variant) {
            Ok(())
        } else {
            Err(Error::Variant { variant: self.variant.name().into(), reason: format!("not a {family} prior") })
        }
    }
}

#[inline]
fn cauchy<T: Real>(scale2: T, weight: T) -> Law<T> {
    Law::Cauchy { scale2, weight }
}

#[inline]
fn gauss<T: Real>(half_precision: T) -> Law<T> {
    Law::Gauss { half_precision }
}

#[inline]
fn charbonnier<T: Real>(rate: T, delta2: T) -> Law<T> {
    Law::Charbonnier { rate, delta2 }
}

fn spde_law<T: Real>(noise: SpdeNoise<T>) -> Law<T> {
    match noise {
        SpdeNoise::Cauchy { xi2 } => Law::Cauchy { scale2: xi2, weight: T::one() },
        SpdeNoise::Gauss { half_precision } => Law::Gauss { half_precision },
    }
}

/// First- and second-order 1D Cauchy difference priors.
pub fn log_prior_1d<T: Real>(prior: &Prior<T>, u: &Field<T>) -> Result<T> {
    prior.check_field(u)?;
    prior.check_family(&[PriorVariant::CauchyDiff1, PriorVariant::CauchyDiff2], "1D Cauchy difference")?;
    Ok(prior.log_density(u.values()))
}

/// 2D Cauchy difference priors (isotropic, anisotropic, both orders) and the Cauchy sheet.
pub fn log_prior_2d_difference<T: Real>(prior: &Prior<T>, u: &Field<T>) -> Result<T> {
    prior.check_field(u)?;
    prior.check_family(
        &[
            PriorVariant::CauchyIso1,
            PriorVariant::CauchyAniso1,
            PriorVariant::CauchyIso2,
            PriorVariant::CauchyAniso2,
            PriorVariant::CauchySheet,
        ],
        "2D Cauchy difference",
    )?;
    Ok(prior.log_density(u.values()))
}

/// SPDE priors: `p = (I - ell * Laplacian) u` with Cauchy or Gaussian noise.
pub fn log_prior_spde<T: Real>(prior: &Prior<T>, u: &Field<T>) -> Result<T> {
    prior.check_field(u)?;
    prior
        .check_family(&[PriorVariant::CauchySpde, PriorVariant::CauchyLaplaceOnly, PriorVariant::GaussSpde], "SPDE")?;
    Ok(prior.log_density(u.values()))
}

/// Total-variation and Gaussian difference priors.
pub fn log_prior_comparison<T: Real>(prior: &Prior<T>, u: &Field<T>) -> Result<T> {
    prior.check_field(u)?;
    prior.check_family(
        &[PriorVariant::Tv1, PriorVariant::Tv2, PriorVariant::GaussDiff1, PriorVariant::GaussDiff2],
        "comparison",
    )?;
    Ok(prior.log_density(u.values()))
}

pub fn log_prior<T: Real>(prior: &Prior<T>, u: &Field<T>) -> Result<T> {
    prior.check_field(u)?;
    Ok(prior.log_density(u.values()))
}

pub fn grad_log_prior<T: Real>(prior: &Prior<T>, u: &Field<T>) -> Result<Field<T>> {
    prior.check_field(u)?;
    Field::new(*u.lattice(), prior.gradient(u.values()))
}

pub fn delta_log_prior<T: Real>(prior: &Prior<T>, u: &Field<T>, site: usize, new_value: T) -> Result<T> {
    prior.check_field(u)?;
    if site >= u.len() {
        return Err(Error::OutOfRange { index: site, len: u.len() });
    }
    Ok(prior.delta(u.values(), site, new_value))
}
