//! Equispaced lattices on the unit interval / unit square and fields living on them.
//!
//! 2D storage is row-major: pixel `(i, j)` has linear index `i * ny + j`, with `i`
//! running along the first axis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Lattice {
    OneD { n: usize },
    TwoD { nx: usize, ny: usize },
}

impl Lattice {
    pub fn line(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::config(format!("1D lattice needs n >= 2, got {n}")));
        }
        Ok(Lattice::OneD { n })
    }

    pub fn grid(nx: usize, ny: usize) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::config(format!("2D lattice needs at least 2 nodes per axis, got {nx}x{ny}")));
        }
        Ok(Lattice::TwoD { nx, ny })
    }

    pub fn square(n: usize) -> Result<Self> {
        Self::grid(n, n)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Lattice::OneD { n } => Self::line(n).map(|_| ()),
            Lattice::TwoD { nx, ny } => Self::grid(nx, ny).map(|_| ()),
        }
    }

    pub fn dims(&self) -> usize {
        match self {
            Lattice::OneD { .. } => 1,
            Lattice::TwoD { .. } => 2,
        }
    }

    pub fn len(&self) -> usize {
        match *self {
            Lattice::OneD { n } => n,
            Lattice::TwoD { nx, ny } => nx * ny,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Node counts along each axis; a 1D lattice reports `(n, 1)`.
    pub fn shape(&self) -> (usize, usize) {
        match *self {
            Lattice::OneD { n } => (n, 1),
            Lattice::TwoD { nx, ny } => (nx, ny),
        }
    }

    /// Node spacing along the first axis.
    pub fn h<T: Real>(&self) -> T {
        T::one() / T::from_usize_lossy(self.shape().0 - 1)
    }

    /// Node spacing along the second axis (equal to `h` in 1D).
    pub fn h_second<T: Real>(&self) -> T {
        match *self {
            Lattice::OneD { .. } => self.h(),
            Lattice::TwoD { ny, .. } => T::one() / T::from_usize_lossy(ny - 1),
        }
    }

    /// Area (or length) element of one node, used as a midpoint quadrature weight.
    pub fn cell_volume<T: Real>(&self) -> T {
        match self {
            Lattice::OneD { .. } => self.h(),
            Lattice::TwoD { .. } => self.h::<T>() * self.h_second::<T>(),
        }
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        match *self {
            Lattice::OneD { .. } => i,
            Lattice::TwoD { ny, .. } => i * ny + j,
        }
    }

    pub fn coords(&self, k: usize) -> (usize, usize) {
        match *self {
            Lattice::OneD { .. } => (k, 0),
            Lattice::TwoD { ny, .. } => (k / ny, k % ny),
        }
    }

    /// Physical coordinate of node `k` along the first axis (and second axis in 2D).
    pub fn position<T: Real>(&self, k: usize) -> (T, T) {
        let (i, j) = self.coords(k);
        match self {
            Lattice::OneD { .. } => (T::from_usize_lossy(i) * self.h::<T>(), T::zero()),
            Lattice::TwoD { .. } => {
                (T::from_usize_lossy(i) * self.h::<T>(), T::from_usize_lossy(j) * self.h_second::<T>())
            }
        }
    }

    /// Coordinates of every node along the first axis.
    pub fn axis_x<T: Real>(&self) -> Vec<T> {
        let (nx, _) = self.shape();
        let h = self.h::<T>();
        (0..nx).map(|i| T::from_usize_lossy(i) * h).collect()
    }

    pub fn axis_y<T: Real>(&self) -> Vec<T> {
        let (_, ny) = self.shape();
        if ny == 1 {
            return vec![T::zero()];
        }
        let h = self.h_second::<T>();
        (0..ny).map(|j| T::from_usize_lossy(j) * h).collect()
    }

    pub fn is_boundary(&self, k: usize) -> bool {
        match *self {
            Lattice::OneD { n } => k == 0 || k == n - 1,
            Lattice::TwoD { nx, ny } => {
                let (i, j) = self.coords(k);
                i == 0 || j == 0 || i == nx - 1 || j == ny - 1
            }
        }
    }

    /// All boundary nodes: the endpoints in 1D, the outer ring in 2D.
    pub fn boundary_indices(&self) -> IndexSet {
        IndexSet((0..self.len()).filter(|&k| self.is_boundary(k)).collect())
    }

    pub fn interior_indices(&self) -> IndexSet {
        IndexSet((0..self.len()).filter(|&k| !self.is_boundary(k)).collect())
    }

    /// Closest interior node of a boundary pixel: corners step diagonally, edge pixels
    /// step along the inward normal.
    pub fn nearest_interior_neighbor(&self, i: usize, j: usize) -> Result<(usize, usize)> {
        let (nx, ny) = match *self {
            Lattice::TwoD { nx, ny } => (nx, ny),
            Lattice::OneD { n } => {
                if i >= n {
                    return Err(Error::OutOfRange { index: i, len: n });
                }
                if n < 3 {
                    return Err(Error::config("1D lattice has no interior nodes"));
                }
                return match i {
                    0 => Ok((1, 0)),
                    k if k == n - 1 => Ok((n - 2, 0)),
                    _ => Err(Error::config(format!("node {i} is interior"))),
                };
            }
        };
        if i >= nx || j >= ny {
            return Err(Error::OutOfRange { index: self.index(i.min(nx - 1), j.min(ny - 1)), len: self.len() });
        }
        if nx < 3 || ny < 3 {
            return Err(Error::config(format!("{nx}x{ny} lattice has no interior nodes")));
        }
        let inward = |c: usize, n: usize| -> usize {
            if c == 0 {
                1
            } else if c == n - 1 {
                n - 2
            } else {
                c
            }
        };
        if !self.is_boundary(self.index(i, j)) {
            return Err(Error::config(format!("pixel ({i},{j}) is interior")));
        }
        Ok((inward(i, nx), inward(j, ny)))
    }
}

/// Sorted, duplicate-free list of linear node indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    pub fn new(mut indices: Vec<usize>, len: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&last) = indices.last() {
            if last >= len {
                return Err(Error::OutOfRange { index: last, len });
            }
        }
        Ok(IndexSet(indices))
    }

    pub fn singleton(k: usize) -> Self {
        IndexSet(vec![k])
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, k: usize) -> bool {
        self.0.binary_search(&k).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }
}

/// Real-valued field on a lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T> {
    lattice: Lattice,
    values: Vec<T>,
}

impl<T: Real> Field<T> {
    pub fn new(lattice: Lattice, values: Vec<T>) -> Result<Self> {
        if values.len() != lattice.len() {
            return Err(Error::Dimension { expected: lattice.len(), got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("field contains non-finite values"));
        }
        Ok(Field { lattice, values })
    }

    pub fn zeros(lattice: Lattice) -> Self {
        Field { lattice, values: vec![T::zero(); lattice.len()] }
    }

    pub fn constant(lattice: Lattice, c: T) -> Self {
        Field { lattice, values: vec![c; lattice.len()] }
    }

    /// Samples `f(x, y)` at every node (`y = 0` in 1D).
    pub fn from_fn(lattice: Lattice, f: impl Fn(T, T) -> T) -> Self {
        let values = (0..lattice.len())
            .map(|k| {
                let (x, y) = lattice.position::<T>(k);
                f(x, y)
            })
            .collect();
        Field { lattice, values }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
