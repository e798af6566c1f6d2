//! Gaussian convolution forward model.
//!
//! Operators are built on the reconstruction lattice with midpoint weights. In 2D the
//! kernel is a product of two 1D Gaussians, so the operator is stored as the
//! Kronecker product of two 1D sparse matrices and never materialized.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Field, Lattice};
use crate::linalg::CsrMatrix;
use crate::num::Real;
use crate::quadrature;

/// Gaussian kernel `k(r) = (pi s)^(-d/2) exp(-|r|^2 / s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvolutionKernel {
    pub s: f64,
}

impl ConvolutionKernel {
    pub fn new(s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::config(format!("kernel width s must be positive, got {s}")));
        }
        Ok(ConvolutionKernel { s })
    }

    pub fn eval_1d<T: Real>(&self, r: T) -> T {
        kernel_1d(r, T::lit(self.s))
    }

    pub fn eval_2d<T: Real>(&self, rx: T, ry: T) -> T {
        kernel_1d(rx, T::lit(self.s)) * kernel_1d(ry, T::lit(self.s))
    }
}

fn kernel_1d<T: Real>(r: T, s: T) -> T {
    (-(r * r) / s).exp() / (T::lit(std::f64::consts::PI) * s).sqrt()
}

/// Kernel value at displacement `r` (length 1 or 2).
pub fn kernel_eval<T: Real>(r: &[T], s: T) -> T {
    r.iter().fold(T::one(), |acc, &ri| acc * kernel_1d(ri, s))
}

#[derive(Debug, Clone)]
enum Repr<T> {
    General {
        f: CsrMatrix<T>,
        ft: CsrMatrix<T>,
    },
    /// `F[(a, b), (c, d)] = fx[a, c] * fy[b, d]`.
    Kron {
        fx: CsrMatrix<T>,
        fxt: CsrMatrix<T>,
        fy: CsrMatrix<T>,
        fyt: CsrMatrix<T>,
    },
}

/// Linear map from fields on `recon_grid` to data on `data_grid`.
#[derive(Debug, Clone)]
pub struct ForwardOperator<T> {
    data_grid: Lattice,
    recon_grid: Lattice,
    repr: Repr<T>,
    col_norm2: Vec<T>,
}

impl<T: Real> ForwardOperator<T> {
    /// Wraps an explicit matrix with `data_grid.len()` rows and `recon_grid.len()` columns.
    pub fn from_matrix(data_grid: Lattice, recon_grid: Lattice, f: CsrMatrix<T>) -> Result<Self> {
        if f.rows() != data_grid.len() {
            return Err(Error::Dimension { expected: data_grid.len(), got: f.rows() });
        }
        if f.cols() != recon_grid.len() {
            return Err(Error::Dimension { expected: recon_grid.len(), got: f.cols() });
        }
        let ft = f.transpose();
        Ok(Self::finish(data_grid, recon_grid, Repr::General { f, ft }))
    }

    pub fn identity(lattice: Lattice) -> Self {
        Self::from_matrix(lattice, lattice, CsrMatrix::identity(lattice.len())).expect("square identity")
    }

    fn finish(data_grid: Lattice, recon_grid: Lattice, repr: Repr<T>) -> Self {
        let mut op = ForwardOperator { data_grid, recon_grid, repr, col_norm2: Vec::new() };
        op.col_norm2 = (0..recon_grid.len())
            .map(|k| {
                let mut s = T::zero();
                op.for_each_in_column(k, |_, v| s += v * v);
                s
            })
            .collect();
        op
    }

    pub fn data_grid(&self) -> &Lattice {
        &self.data_grid
    }

    pub fn recon_grid(&self) -> &Lattice {
        &self.recon_grid
    }

    pub fn rows(&self) -> usize {
        self.data_grid.len()
    }

    pub fn cols(&self) -> usize {
        self.recon_grid.len()
    }

    /// Number of stored nonzeros (in the factors, for the Kronecker form).
    pub fn nnz(&self) -> usize {
        match &self.repr {
            Repr::General { f, .. } => f.nnz(),
            Repr::Kron { fx, fy, .. } => fx.nnz() + fy.nnz(),
        }
    }

    /// `F u`
    pub fn apply(&self, u: &[T]) -> Vec<T> {
        debug_assert_eq!(u.len(), self.cols());
        match &self.repr {
            Repr::General { f, .. } => f.mul_vec(u),
            Repr::Kron { fx, fy, .. } => kron_apply(fx, fy, u, self.recon_grid.shape()),
        }
    }

    /// `F^T r`
    pub fn apply_transpose(&self, r: &[T]) -> Vec<T> {
        debug_assert_eq!(r.len(), self.rows());
        match &self.repr {
            Repr::General { ft, .. } => ft.mul_vec(r),
            Repr::Kron { fxt, fyt, .. } => kron_apply(fxt, fyt, r, self.data_grid.shape()),
        }
    }

    /// Visits the nonzeros `(row, value)` of column `k`.
    pub fn for_each_in_column(&self, k: usize, mut f: impl FnMut(usize, T)) {
        match &self.repr {
            Repr::General { ft, .. } => ft.row(k).for_each(|(r, v)| f(r, v)),
            Repr::Kron { fxt, fyt, .. } => {
                let (c, d) = self.recon_grid.coords(k);
                for (a, vx) in fxt.row(c) {
                    for (b, vy) in fyt.row(d) {
                        f(self.data_grid.index(a, b), vx * vy);
                    }
                }
            }
        }
    }

    /// `F[:, k] . r`
    pub fn column_dot(&self, k: usize, r: &[T]) -> T {
        let mut s = T::zero();
        self.for_each_in_column(k, |row, v| s += v * r[row]);
        s
    }

    /// `||F[:, k]||^2`, precomputed.
    pub fn column_norm2(&self, k: usize) -> T {
        self.col_norm2[k]
    }

    /// Dense copy, one `Vec` per row.
    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut d = vec![vec![T::zero(); self.cols()]; self.rows()];
        for k in 0..self.cols() {
            self.for_each_in_column(k, |r, v| d[r][k] = v);
        }
        d
    }

    fn check_len(expected: usize, got: usize) -> Result<()> {
        if expected == got {
            Ok(())
        } else {
            Err(Error::Dimension { expected, got })
        }
    }

    /// `y - F u`
    pub fn residual(&self, y: &[T], u: &[T]) -> Result<Vec<T>> {
        Self::check_len(self.rows(), y.len())?;
        Self::check_len(self.cols(), u.len())?;
        let fu = self.apply(u);
        Ok(y.iter().zip(fu).map(|(&a, b)| a - b).collect())
    }
}

/// Applies `A U B^T` to a row-major `U` of shape `shape`, where the left factor acts on
/// the first axis and the right factor on the second.
fn kron_apply<T: Real>(a: &CsrMatrix<T>, b: &CsrMatrix<T>, u: &[T], shape: (usize, usize)) -> Vec<T> {
    let (n1, n2) = shape;
    let (m1, m2) = (a.rows(), b.rows());
    // tmp[c][q] = sum_d U[c][d] B[q][d]
    let mut tmp = vec![T::zero(); n1 * m2];
    for c in 0..n1 {
        let urow = &u[c * n2..(c + 1) * n2];
        for q in 0..m2 {
            tmp[c * m2 + q] = b.row(q).fold(T::zero(), |s, (d, v)| s + v * urow[d]);
        }
    }
    let mut out = vec![T::zero(); m1 * m2];
    for p in 0..m1 {
        let orow = &mut out[p * m2..(p + 1) * m2];
        for (c, v) in a.row(p) {
            for (o, &t) in orow.iter_mut().zip(&tmp[c * m2..(c + 1) * m2]) {
                *o += v * t;
            }
        }
    }
    out
}

fn axis_matrix<T: Real>(data_x: &[T], recon_x: &[T], w: T, s: T, eps_trunc: T) -> CsrMatrix<T> {
    let cut = eps_trunc * kernel_1d(T::zero(), s);
    CsrMatrix::from_rows(data_x.len(), recon_x.len(), |a| {
        let xa = data_x[a];
        recon_x
            .iter()
            .enumerate()
            .filter_map(|(b, &xb)| {
                let k = kernel_1d(xa - xb, s);
                (k >= cut).then_some((b, w * k))
            })
            .collect::<Vec<_>>()
    })
}

/// Midpoint-rule convolution matrix from `recon_grid` to `data_grid`.
///
/// In 2D the truncation is applied per axis; every dropped entry is below
/// `eps_trunc * k(0)` and a few entries slightly below the threshold are kept.
pub fn build_operator<T: Real>(
    data_grid: Lattice,
    recon_grid: Lattice,
    s: f64,
    eps_trunc: f64,
) -> Result<ForwardOperator<T>> {
    data_grid.validate()?;
    recon_grid.validate()?;
    ConvolutionKernel::new(s)?;
    if !(eps_trunc > 0.0 && eps_trunc < 1.0) {
        return Err(Error::config(format!("eps_trunc must lie in (0, 1), got {eps_trunc}")));
    }
    if data_grid.dims() != recon_grid.dims() {
        return Err(Error::config("data and reconstruction grids differ in dimension"));
    }
    let (s, eps) = (T::lit(s), T::lit(eps_trunc));
    let fx = axis_matrix(&data_grid.axis_x(), &recon_grid.axis_x(), recon_grid.h(), s, eps);
    match recon_grid {
        Lattice::OneD { .. } => ForwardOperator::from_matrix(data_grid, recon_grid, fx),
        Lattice::TwoD { .. } => {
            let fy = axis_matrix(&data_grid.axis_y(), &recon_grid.axis_y(), recon_grid.h_second(), s, eps);
            let (fxt, fyt) = (fx.transpose(), fy.transpose());
            Ok(ForwardOperator::finish(data_grid, recon_grid, Repr::Kron { fx, fxt, fy, fyt }))
        }
    }
}

/// `H(x - 0.75) H(0.9 - x) + L(10(x - 0.15)) + L(10(x - 0.55)) H(x - 0.55) + exp(-70 |x - 0.4|)`
/// with `L(x) = max(0, 1 - |x|)` and `H(0) = 1`.
pub fn test_function_1d(x: f64) -> f64 {
    let heaviside = |t: f64| if t >= 0.0 { 1.0 } else { 0.0 };
    let hat = |t: f64| (1.0 - t.abs()).max(0.0);
    heaviside(x - 0.75) * heaviside(0.9 - x)
        + hat(10.0 * (x - 0.15))
        + hat(10.0 * (x - 0.55)) * heaviside(x - 0.55)
        + (-70.0 * (x - 0.4).abs()).exp()
}

/// Points where [`test_function_1d`] or its derivative jumps.
pub const TEST_FUNCTION_1D_BREAKS: [f64; 8] = [0.05, 0.15, 0.25, 0.4, 0.55, 0.65, 0.75, 0.9];

/// Analytic 2D phantom: a constant diagonal strip across the lower-left corner, a
/// rectangle whose value decays along its diagonal, an exponential peak and a cone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Shapes2d {
    /// Strip is `lo < x + y < hi`.
    pub strip_lo: f64,
    pub strip_hi: f64,
    pub strip_value: f64,
    /// `[x0, x1, y0, y1]`
    pub rect: [f64; 4],
    pub rect_value: f64,
    /// Fraction of `rect_value` lost from the lower-left to the upper-right corner.
    pub rect_decay: f64,
    pub peak_center: [f64; 2],
    pub peak_rate: f64,
    pub peak_height: f64,
    pub cone_center: [f64; 2],
    pub cone_radius: f64,
    pub cone_height: f64,
}

impl Default for Shapes2d {
    fn default() -> Self {
        Shapes2d {
            strip_lo: 0.15,
            strip_hi: 0.35,
            strip_value: 0.6,
            rect: [0.55, 0.9, 0.1, 0.45],
            rect_value: 1.0,
            rect_decay: 0.6,
            peak_center: [0.3, 0.7],
            peak_rate: 25.0,
            peak_height: 1.0,
            cone_center: [0.72, 0.72],
            cone_radius: 0.15,
            cone_height: 0.8,
        }
    }
}

impl Shapes2d {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let mut v = 0.0;
        let d = x + y;
        if d > self.strip_lo && d < self.strip_hi {
            v += self.strip_value;
        }
        let [x0, x1, y0, y1] = self.rect;
        if (x0..=x1).contains(&x) && (y0..=y1).contains(&y) {
            let t = ((x - x0) + (y - y0)) / ((x1 - x0) + (y1 - y0));
            v += self.rect_value * (1.0 - self.rect_decay * t);
        }
        let r = (x - self.peak_center[0]).hypot(y - self.peak_center[1]);
        v += self.peak_height * (-self.peak_rate * r).exp();
        let r = (x - self.cone_center[0]).hypot(y - self.cone_center[1]);
        v += self.cone_height * (1.0 - r / self.cone_radius).max(0.0);
        v
    }
}

/// Ground truth used to simulate measurements.
#[derive(Debug, Clone, PartialEq)]
pub enum Phantom {
    TestFunction1d,
    Shapes2d(Shapes2d),
    /// Constant function on `[0, 1]^dims`.
    Constant {
        dims: usize,
        value: f64,
    },
    /// Values on a (fine) lattice.
    Sampled(Field<f64>),
}

impl Phantom {
    pub fn dims(&self) -> usize {
        match self {
            Phantom::TestFunction1d => 1,
            Phantom::Shapes2d(_) => 2,
            Phantom::Constant { dims, .. } => *dims,
            Phantom::Sampled(f) => f.lattice().dims(),
        }
    }

    /// Point evaluation; `None` for sampled phantoms.
    pub fn eval(&self, x: f64, y: f64) -> Option<f64> {
        match self {
            Phantom::TestFunction1d => Some(test_function_1d(x)),
            Phantom::Shapes2d(s) => Some(s.eval(x, y)),
            Phantom::Constant { value, .. } => Some(*value),
            Phantom::Sampled(_) => None,
        }
    }

    /// Samples the phantom on `lattice` (sampled phantoms must already live there).
    pub fn on_lattice(&self, lattice: Lattice) -> Result<Field<f64>> {
        if self.dims() != lattice.dims() {
            return Err(Error::config("phantom and lattice differ in dimension"));
        }
        match self {
            Phantom::Sampled(f) if *f.lattice() == lattice => Ok(f.clone()),
            Phantom::Sampled(_) => Err(Error::config("sampled phantom lives on a different lattice")),
            _ => Ok(Field::from_fn(lattice, |x, y| self.eval(x, y).expect("analytic"))),
        }
    }
}

/// Noisy data together with how they were produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub y: Vec<f64>,
    pub sigma: f64,
    pub seed: u64,
    pub grid: Lattice,
    /// Kernel width used to simulate the data.
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOptions {
    /// Lattice on which analytic 2D phantoms are sampled (default 300 x 300).
    pub fine_grid: Option<Lattice>,
    /// Relative tolerance of the adaptive 1D quadrature.
    pub rel_tol: f64,
    pub eps_trunc: f64,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        SimulationOptions { fine_grid: None, rel_tol: 1e-8, eps_trunc: 1e-12 }
    }
}

/// Convolves `phantom` with the kernel at the nodes of `data_grid` and adds
/// `N(0, sigma^2)` noise drawn from a ChaCha8 stream seeded with `seed`.
///
/// Analytic 1D phantoms are integrated with adaptive Gauss–Kronrod quadrature; 2D
/// and sampled phantoms go through a fine-grid operator. `sigma = 0` gives noiseless data.
pub fn simulate_data(
    phantom: &Phantom,
    data_grid: Lattice,
    s: f64,
    sigma: f64,
    seed: u64,
    opts: &SimulationOptions,
) -> Result<Measurement> {
    data_grid.validate()?;
    let kernel = ConvolutionKernel::new(s)?;
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::config(format!("noise sigma must be non-negative, got {sigma}")));
    }
    if phantom.dims() != data_grid.dims() {
        return Err(Error::config("phantom and data grid differ in dimension"));
    }
    let mut y = match (phantom, data_grid) {
        (Phantom::Sampled(f), _) => {
            let op = build_operator::<f64>(data_grid, *f.lattice(), s, opts.eps_trunc)?;
            op.apply(f.values())
        }
        (_, Lattice::OneD { .. }) => {
            let mut breaks: Vec<f64> = match phantom {
                Phantom::TestFunction1d => TEST_FUNCTION_1D_BREAKS.to_vec(),
                _ => Vec::new(),
            };
            breaks.push(0.0);
            data_grid
                .axis_x::<f64>()
                .into_iter()
                .map(|xa| {
                    breaks.pop();
                    breaks.push(xa);
                    let f = |t: f64| kernel.eval_1d(xa - t) * phantom.eval(t, 0.0).expect("analytic");
                    quadrature::integrate_with_breaks(f, 0.0, 1.0, &breaks, opts.rel_tol, 1e-14)
                })
                .collect()
        }
        (_, Lattice::TwoD { .. }) => {
            let fine = opts.fine_grid.unwrap_or(Lattice::TwoD { nx: 300, ny: 300 });
            let field = phantom.on_lattice(fine)?;
            let op = build_operator::<f64>(data_grid, fine, s, opts.eps_trunc)?;
            op.apply(field.values())
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in &mut y {
        let z: f64 = StandardNormal.sample(&mut rng);
        *v += sigma * z;
    }
    Ok(Measurement { y, sigma, seed, grid: data_grid, s })
}

/// `-||y - F u||^2 / (2 sigma^2)`
pub fn log_likelihood<T: Real>(op: &ForwardOperator<T>, y: &[T], u: &Field<T>, sigma: T) -> Result<T> {
    let r = op.residual(y, u.values())?;
    Ok(-crate::num::dot(&r, &r) / (T::lit(2.0) * sigma * sigma))
}

/// `F^T (y - F u) / sigma^2`
pub fn grad_log_likelihood<T: Real>(op: &ForwardOperator<T>, y: &[T], u: &Field<T>, sigma: T) -> Result<Vec<T>> {
    let r = op.residual(y, u.values())?;
    let s2 = sigma * sigma;
    Ok(op.apply_transpose(&r).into_iter().map(|g| g / s2).collect())
}
