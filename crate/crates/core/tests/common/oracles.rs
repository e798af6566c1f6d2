//! Literal term-by-term prior densities, written directly from the product formulas
//! with 2D index arithmetic and no shared code with the library.

use cmrf::{Lattice, PriorSpec, PriorVariant};

struct Grid<'a> {
    u: &'a [f64],
    nx: usize,
    ny: usize,
}

impl Grid<'_> {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.u[i * self.ny + j]
    }

    /// Zero outside the lattice.
    fn ext(&self, i: isize, j: isize) -> f64 {
        if i < 0 || j < 0 || i >= self.nx as isize || j >= self.ny as isize {
            0.0
        } else {
            self.at(i as usize, j as usize)
        }
    }

    fn on_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.nx - 1 || j == self.ny - 1
    }

    /// Closest interior pixel: clamp both indices into the interior range.
    fn inner(&self, i: usize, j: usize) -> f64 {
        self.at(i.clamp(1, self.nx - 2), j.clamp(1, self.ny - 2))
    }
}

fn p(x: Option<f64>) -> f64 {
    x.expect("parameter present")
}

fn cauchy(scale: f64, x: f64) -> f64 {
    -(scale * scale + x * x).ln()
}

pub fn oracle_log_prior(spec: &PriorSpec, lattice: Lattice, u: &[f64]) -> f64 {
    match lattice {
        Lattice::OneD { n } => oracle_1d(spec, n, u),
        Lattice::TwoD { nx, ny } => oracle_2d(spec, Grid { u, nx, ny }),
    }
}

fn oracle_1d(spec: &PriorSpec, n: usize, u: &[f64]) -> f64 {
    let mut s = 0.0;
    match spec.variant {
        PriorVariant::Flat => {}
        PriorVariant::CauchyDiff1 => {
            s += cauchy(p(spec.gamma), u[0]);
            for i in 0..n - 1 {
                s += cauchy(p(spec.lambda), u[i + 1] - u[i]);
            }
        }
        PriorVariant::CauchyDiff2 => {
            s += cauchy(p(spec.gamma), u[0]);
            s += cauchy(p(spec.gamma_prime), u[1] - u[0]);
            for i in 1..n - 1 {
                s += cauchy(p(spec.lambda), u[i + 1] - 2.0 * u[i] + u[i - 1]);
            }
        }
        PriorVariant::GaussDiff1 => {
            let (s0, s1) = (p(spec.sigma0), p(spec.sigma1));
            s -= u[0] * u[0] / (2.0 * s0 * s0);
            for i in 0..n - 1 {
                s -= (u[i + 1] - u[i]).powi(2) / (2.0 * s1 * s1);
            }
        }
        PriorVariant::GaussDiff2 => {
            let (s0, s1, s2) = (p(spec.sigma0), p(spec.sigma1), p(spec.sigma2));
            s -= u[0] * u[0] / (2.0 * s0 * s0);
            s -= (u[1] - u[0]).powi(2) / (2.0 * s1 * s1);
            for i in 1..n - 1 {
                s -= (u[i + 1] - 2.0 * u[i] + u[i - 1]).powi(2) / (2.0 * s2 * s2);
            }
        }
        PriorVariant::CauchySpde | PriorVariant::CauchyLaplaceOnly | PriorVariant::GaussSpde => {
            let h = spec.h_spde.unwrap_or(1.0 / (n - 1) as f64);
            let ell = p(spec.ell);
            let get = |i: isize| if i < 0 || i >= n as isize { 0.0 } else { u[i as usize] };
            for i in 0..n as isize {
                let lap = (get(i - 1) - 2.0 * get(i) + get(i + 1)) / (h * h);
                let id = if spec.variant == PriorVariant::CauchyLaplaceOnly { 0.0 } else { get(i) };
                s += spde_term(spec, id - ell * lap);
            }
        }
        v => panic!("{v} has no 1D form"),
    }
    s
}

fn spde_term(spec: &PriorSpec, pv: f64) -> f64 {
    if spec.variant == PriorVariant::GaussSpde {
        let w = p(spec.sigma_w);
        -pv * pv / (2.0 * w * w)
    } else {
        cauchy(p(spec.xi), pv)
    }
}

fn oracle_2d(spec: &PriorSpec, g: Grid) -> f64 {
    let (nx, ny) = (g.nx, g.ny);
    let mut s = 0.0;
    let dh = |i: usize, j: usize| g.at(i + 1, j) - g.at(i, j);
    let dv = |i: usize, j: usize| g.at(i, j + 1) - g.at(i, j);
    let d2h = |i: usize, j: usize| g.at(i + 1, j) - 2.0 * g.at(i, j) + g.at(i - 1, j);
    let d2v = |i: usize, j: usize| g.at(i, j + 1) - 2.0 * g.at(i, j) + g.at(i, j - 1);
    let boundary: Vec<(usize, usize)> =
        (0..nx).flat_map(|i| (0..ny).map(move |j| (i, j))).filter(|&(i, j)| g.on_boundary(i, j)).collect();
    let first: Vec<(usize, usize)> = (0..nx - 1).flat_map(|i| (0..ny - 1).map(move |j| (i, j))).collect();
    let second: Vec<(usize, usize)> = (1..nx - 1).flat_map(|i| (1..ny - 1).map(move |j| (i, j))).collect();
    let charb = |x2: f64| (x2 + p(spec.delta).powi(2)).sqrt();
    match spec.variant {
        PriorVariant::Flat => {}
        PriorVariant::CauchyIso1 => {
            let l2 = p(spec.lambda).powi(2);
            for &(i, j) in &boundary {
                s += cauchy(p(spec.gamma), g.at(i, j));
            }
            for &(i, j) in &first {
                s -= 1.5 * (l2 + dh(i, j).powi(2) + dv(i, j).powi(2)).ln();
            }
        }
        PriorVariant::CauchyAniso1 => {
            for &(i, j) in &boundary {
                s += cauchy(p(spec.gamma), g.at(i, j));
            }
            for &(i, j) in &first {
                s += cauchy(p(spec.lambda), dh(i, j)) + cauchy(p(spec.lambda), dv(i, j));
            }
        }
        PriorVariant::CauchyIso2 | PriorVariant::CauchyAniso2 => {
            for &(i, j) in &boundary {
                s += cauchy(p(spec.gamma), g.at(i, j) - g.inner(i, j));
                s += cauchy(p(spec.gamma_prime), g.at(i, j));
            }
            let l2 = p(spec.lambda).powi(2);
            for &(i, j) in &second {
                if spec.variant == PriorVariant::CauchyIso2 {
                    s -= 1.5 * (l2 + d2h(i, j).powi(2) + d2v(i, j).powi(2)).ln();
                } else {
                    s += cauchy(p(spec.lambda), d2h(i, j)) + cauchy(p(spec.lambda), d2v(i, j));
                }
            }
        }
        PriorVariant::CauchySheet => {
            let gm = p(spec.gamma);
            s += cauchy(gm, g.at(0, 0));
            for j in 0..ny - 1 {
                s += cauchy(gm, g.at(0, j + 1) - g.at(0, j));
            }
            for i in 0..nx - 1 {
                s += cauchy(gm, g.at(i + 1, 0) - g.at(i, 0));
            }
            for &(i, j) in &first {
                s += cauchy(p(spec.lambda), g.at(i + 1, j + 1) - g.at(i + 1, j) - g.at(i, j + 1) + g.at(i, j));
            }
        }
        PriorVariant::CauchySpde | PriorVariant::CauchyLaplaceOnly | PriorVariant::GaussSpde => {
            let h = spec.h_spde.unwrap_or(1.0 / (nx - 1) as f64);
            let ell = p(spec.ell);
            for i in 0..nx as isize {
                for j in 0..ny as isize {
                    let c = g.ext(i, j);
                    let lap =
                        (g.ext(i + 1, j) + g.ext(i - 1, j) + g.ext(i, j + 1) + g.ext(i, j - 1) - 4.0 * c) / (h * h);
                    let id = if spec.variant == PriorVariant::CauchyLaplaceOnly { 0.0 } else { c };
                    s += spde_term(spec, id - ell * lap);
                }
            }
        }
        PriorVariant::GaussDiff1 => {
            let (s0, s1) = (p(spec.sigma0), p(spec.sigma1));
            for &(i, j) in &boundary {
                s -= g.at(i, j).powi(2) / (2.0 * s0 * s0);
            }
            for &(i, j) in &first {
                s -= (dh(i, j).powi(2) + dv(i, j).powi(2)) / (2.0 * s1 * s1);
            }
        }
        PriorVariant::GaussDiff2 => {
            let (s0, s1, s2) = (p(spec.sigma0), p(spec.sigma1), p(spec.sigma2));
            for &(i, j) in &boundary {
                s -= g.at(i, j).powi(2) / (2.0 * s0 * s0) + (g.at(i, j) - g.inner(i, j)).powi(2) / (2.0 * s1 * s1);
            }
            for &(i, j) in &second {
                s -= (d2h(i, j).powi(2) + d2v(i, j).powi(2)) / (2.0 * s2 * s2);
            }
        }
        PriorVariant::Tv1 => {
            for &(i, j) in &boundary {
                s -= p(spec.zeta_prime) * charb(g.at(i, j).powi(2));
            }
            for &(i, j) in &first {
                s -= p(spec.zeta) * charb(dh(i, j).powi(2) + dv(i, j).powi(2));
            }
        }
        PriorVariant::Tv2 => {
            for &(i, j) in &boundary {
                s -= p(spec.psi) * charb(g.at(i, j).powi(2));
                s -= p(spec.zeta_prime) * charb((g.at(i, j) - g.inner(i, j)).powi(2));
            }
            for &(i, j) in &second {
                s -= p(spec.zeta) * charb(d2h(i, j).powi(2) + d2v(i, j).powi(2));
            }
        }
        v => panic!("{v} has no 2D form"),
    }
    s
}
