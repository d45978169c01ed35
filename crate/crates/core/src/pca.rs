//! Principal components used as synthetic privileged features.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{from_usize, Scalar};

/// How many components to keep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Components<T> {
    Count(usize),
    /// Smallest count whose cumulative explained variance reaches the fraction.
    Fraction(T),
}

impl<T: Scalar> Default for Components<T> {
    fn default() -> Self {
        Components::Fraction(T::lit(0.95))
    }
}

impl<T: Scalar> std::str::FromStr for Components<T> {
    type Err = Error;

    /// Integers are counts, anything with a decimal point is a fraction.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Ok(k) = s.parse::<usize>() {
            return Ok(Components::Count(k));
        }
        match s.parse::<f64>() {
            Ok(f) if f > 0.0 && f <= 1.0 => Ok(Components::Fraction(T::lit(f))),
            _ => Err(Error::invalid(format!("pca components must be a count or a fraction in (0, 1], got `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PcaBasis<T> {
    pub mean: Vec<T>,
    /// One orthonormal component per row, by decreasing variance.
    pub components: Vec<Vec<T>>,
    pub explained_variance: Vec<T>,
}

impl<T: Scalar> PcaBasis<T> {
    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn component_matrix(&self) -> DMatrix<T> {
        DMatrix::from_fn(self.k(), self.dim(), |i, j| self.components[i][j])
    }

    /// Maps scores back to the input space.
    pub fn reconstruct(&self, scores: &DMatrix<T>) -> Result<DMatrix<T>> {
        if scores.ncols() != self.k() {
            return Err(Error::dims(self.k(), scores.ncols()));
        }
        let mut out = scores * self.component_matrix();
        for mut row in out.row_iter_mut() {
            for (v, &m) in row.iter_mut().zip(&self.mean) {
                *v += m;
            }
        }
        Ok(out)
    }
}

/// Eigendecomposition of the sample covariance (divisor `l - 1`).
pub fn fit_pca<T: Scalar>(x: &DMatrix<T>, k: Components<T>) -> Result<PcaBasis<T>> {
    let (l, d) = x.shape();
    if l < 2 {
        return Err(Error::DegenerateDataset("pca needs at least two rows".into()));
    }
    let cap = (l - 1).min(d);
    if let Components::Count(c) = k {
        if c == 0 || c > cap {
            return Err(Error::invalid(format!("pca component count must lie in 1..={cap}, got {c}")));
        }
    }
    if let Components::Fraction(f) = k {
        if !(f > T::zero() && f <= T::one()) {
            return Err(Error::invalid(format!("pca variance fraction must lie in (0, 1], got {f}")));
        }
    }

    let n = from_usize::<T>(l);
    let mean: Vec<T> = x.column_iter().map(|c| c.sum() / n).collect();
    let centered = DMatrix::from_fn(l, d, |i, j| x[(i, j)] - mean[j]);
    let cov = (centered.transpose() * &centered) / from_usize::<T>(l - 1);
    let total = cov.trace();
    let scale = cov.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if !(total > T::eps() * from_usize::<T>(d) * (T::one() + scale)) {
        return Err(Error::DegenerateDataset("all rows are identical; covariance is zero".into()));
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    let variances: Vec<T> = order.iter().map(|&i| eig.eigenvalues[i].max(T::zero())).collect();

    let keep = match k {
        Components::Count(c) => c,
        Components::Fraction(f) => {
            let target = f * total;
            let tol = T::eps() * T::lit(64.0) * total;
            let mut acc = T::zero();
            let mut c = 0;
            while c < cap {
                acc += variances[c];
                c += 1;
                if acc + tol >= target {
                    break;
                }
            }
            c
        }
    };

    let components = order[..keep]
        .iter()
        .map(|&i| {
            let col = eig.eigenvectors.column(i);
            let pivot = col.iter().fold(T::zero(), |best, &v| if v.abs() > best.abs() { v } else { best });
            let sign = if pivot < T::zero() { -T::one() } else { T::one() };
            col.iter().map(|&v| v * sign).collect()
        })
        .collect();
    Ok(PcaBasis { mean, components, explained_variance: variances[..keep].to_vec() })
}

/// Projects rows onto a fitted basis: `(X - mean) * components^T`.
pub fn extract_privileged<T: Scalar>(x: &DMatrix<T>, basis: &PcaBasis<T>) -> Result<DMatrix<T>> {
    if x.ncols() != basis.dim() {
        return Err(Error::dims(basis.dim(), x.ncols()));
    }
    let centered = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] - basis.mean[j]);
    Ok(centered * basis.component_matrix().transpose())
}
