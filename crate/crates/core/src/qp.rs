//! Quadratic programs of the form `min 1/2 x'Qx + f'x  s.t.  Cx = D`, with a
//! nonnegativity bound on a subset of the coordinates.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Where each multiplier block lives, used for feasible initialization and
/// block-aware working-set selection.
#[derive(Clone, Debug, PartialEq)]
pub enum BlockLayout<T> {
    /// Blocks of sizes `(m1, m1, m2, m2)`; the first two are free, the last two nonnegative.
    /// Constraints: `e'a1 + e'a3 - e'a4 = 0` and `e'a2 - e'a3 - e'a4 / tau = -c m2`.
    PrivilegedDual { m1: usize, m2: usize, c: T, tau: T },
    /// Two nonnegative blocks of size `m2` coupled row-wise: `a_i + b_i / tau = c`.
    BaselineDual { m2: usize, c: T, tau: T },
    /// Primal pinball problem over `(w, b)` of size `p`, slacks `xi`, and pinball
    /// surplus variables `s1`, `s2` (each of size `m2`).
    PrimalPinball { p: usize, m2: usize, tau: T },
}

impl<T: Scalar> BlockLayout<T> {
    pub fn blocks(&self) -> Vec<Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for size in self.block_sizes() {
            out.push(start..start + size);
            start += size;
        }
        out
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        match *self {
            BlockLayout::PrivilegedDual { m1, m2, .. } => vec![m1, m1, m2, m2],
            BlockLayout::BaselineDual { m2, .. } => vec![m2, m2],
            BlockLayout::PrimalPinball { p, m2, .. } => vec![p, m2, m2, m2],
        }
    }

    pub fn len(&self) -> usize {
        self.block_sizes().iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneralQP<T> {
    pub q: DMatrix<T>,
    pub f: DVector<T>,
    pub c: DMatrix<T>,
    pub d: DVector<T>,
    /// `true` where `x_i >= 0` is imposed; other coordinates are free.
    pub bounded: Vec<bool>,
    /// Term dropped from the objective during assembly; added back for duality-gap checks.
    pub constant: T,
    pub layout: Option<BlockLayout<T>>,
}

impl<T: Scalar> GeneralQP<T> {
    /// QP with every coordinate nonnegative.
    pub fn nonnegative(q: DMatrix<T>, f: DVector<T>, c: DMatrix<T>, d: DVector<T>) -> Result<Self> {
        let n = f.len();
        let qp = GeneralQP { q, f, c, d, bounded: vec![true; n], constant: T::zero(), layout: None };
        qp.validate()?;
        Ok(qp)
    }

    pub fn n(&self) -> usize {
        self.f.len()
    }

    pub fn n_constraints(&self) -> usize {
        self.c.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.q.nrows() != n || self.q.ncols() != n {
            return Err(Error::dims(n, self.q.nrows()));
        }
        if self.c.ncols() != n {
            return Err(Error::dims(n, self.c.ncols()));
        }
        if self.d.len() != self.c.nrows() {
            return Err(Error::dims(self.c.nrows(), self.d.len()));
        }
        if self.bounded.len() != n {
            return Err(Error::dims(n, self.bounded.len()));
        }
        if let Some(layout) = &self.layout {
            if layout.len() != n {
                return Err(Error::dims(n, layout.len()));
            }
        }
        Ok(())
    }

    /// `1/2 x'Qx + f'x` (without the constant).
    pub fn objective(&self, x: &DVector<T>) -> T {
        let qx = &self.q * x;
        T::lit(0.5) * x.dot(&qx) + self.f.dot(x)
    }

    pub fn gradient(&self, x: &DVector<T>) -> DVector<T> {
        &self.q * x + &self.f
    }

    /// Largest absolute asymmetry `|Q_ij - Q_ji|`.
    pub fn asymmetry(&self) -> T {
        let n = self.n();
        let mut worst = T::zero();
        for j in 0..n {
            for i in 0..j {
                worst = worst.max((self.q[(i, j)] - self.q[(j, i)]).abs());
            }
        }
        worst
    }

    pub(crate) fn symmetrize(&mut self) {
        let half = T::lit(0.5);
        let n = self.n();
        for j in 0..n {
            for i in 0..j {
                let v = half * (self.q[(i, j)] + self.q[(j, i)]);
                self.q[(i, j)] = v;
                self.q[(j, i)] = v;
            }
        }
    }

    pub fn equality_residual(&self, x: &DVector<T>) -> T {
        (&self.c * x - &self.d).amax()
    }
}

/// Solution of a [`GeneralQP`] plus convergence diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct DualSolution<T> {
    pub x: DVector<T>,
    pub objective: T,
    pub kkt_residual: T,
    pub iterations: usize,
    pub converged: bool,
}

impl<T: Scalar> DualSolution<T> {
    /// Slices `x` by the QP's block layout.
    pub fn blocks<'a>(&'a self, layout: &BlockLayout<T>) -> Vec<&'a [T]> {
        layout.blocks().into_iter().map(|r| &self.x.as_slice()[r]).collect()
    }
}
