//! Gauss-Jordan elimination of the equality constraints restricted to a column
//! subset, giving an explicit null-space parametrization `x_P = -M x_N`.

use nalgebra::{DMatrix, DVector};

use crate::scalar::{from_usize, Scalar};

pub(crate) struct Elimination<T> {
    /// Positions (into the column subset) of the basic variables, one per independent row.
    pub pivots: Vec<usize>,
    /// Remaining positions, in increasing order.
    pub nonpivots: Vec<usize>,
    /// `rank x |nonpivots|`: movement along the null space satisfies `p_P = -M p_N`.
    pub m: DMatrix<T>,
    /// Accumulated row operations, `E C_F = reduced rows`.
    e: DMatrix<T>,
}

impl<T: Scalar> Elimination<T> {
    pub fn new(c: &DMatrix<T>, cols: &[usize]) -> Self {
        let r = c.nrows();
        let k = cols.len();
        let mut w = DMatrix::from_fn(r, k, |i, j| c[(i, cols[j])]);
        let mut e = DMatrix::<T>::identity(r, r);
        let scale = w.amax().max(T::one());
        let tiny = T::eps() * from_usize::<T>(r.max(k).max(1)) * scale * T::lit(10.0);
        let mut is_pivot = vec![false; k];
        let mut pivots = Vec::new();
        for s in 0..r {
            let mut best = (T::zero(), usize::MAX, usize::MAX);
            for j in (0..k).filter(|&j| !is_pivot[j]) {
                for i in s..r {
                    let v = w[(i, j)].abs();
                    if v > best.0 {
                        best = (v, i, j);
                    }
                }
            }
            if best.0 <= tiny {
                break;
            }
            let (_, i, j) = best;
            w.swap_rows(s, i);
            e.swap_rows(s, i);
            let inv = T::one() / w[(s, j)];
            w.row_mut(s).scale_mut(inv);
            e.row_mut(s).scale_mut(inv);
            for t in (0..r).filter(|&t| t != s) {
                let factor = w[(t, j)];
                if factor != T::zero() {
                    for col in 0..k {
                        let v = w[(s, col)];
                        w[(t, col)] -= factor * v;
                    }
                    for col in 0..r {
                        let v = e[(s, col)];
                        e[(t, col)] -= factor * v;
                    }
                }
            }
            w[(s, j)] = T::one();
            is_pivot[j] = true;
            pivots.push(j);
        }
        let rank = pivots.len();
        let nonpivots: Vec<usize> = (0..k).filter(|&j| !is_pivot[j]).collect();
        let m = DMatrix::from_fn(rank, nonpivots.len(), |s, jj| w[(s, nonpivots[jj])]);
        Elimination { pivots, nonpivots, m, e }
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    /// Multipliers `lambda` solving `g_F + C_F' lambda = 0` on the pivot coordinates.
    pub fn multipliers(&self, g_pivots: &[T]) -> DVector<T> {
        let r = self.e.nrows();
        let mut mu = DVector::zeros(r);
        for (s, &g) in g_pivots.iter().enumerate() {
            mu[s] = -g;
        }
        self.e.tr_mul(&mu)
    }
}
