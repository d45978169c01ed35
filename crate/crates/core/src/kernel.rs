//! Kernel evaluation and Gram matrices for the nonlinear path.

use nalgebra::{DMatrix, DVectorView, RowDVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Kernel choice. The RBF convention is `exp(-|x - z|^2 / (2 sigma^2))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec<T> {
    Linear,
    Rbf { sigma: T },
}

impl<T: Scalar> KernelSpec<T> {
    pub fn rbf(sigma: T) -> Result<Self> {
        let spec = KernelSpec::Rbf { sigma };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Rbf { sigma } if sigma > T::zero() && sigma.is_finite_value() => Ok(()),
            KernelSpec::Rbf { sigma } => Err(Error::invalid(format!("rbf sigma must be > 0, got {sigma}"))),
        }
    }

    pub fn sigma(&self) -> Option<T> {
        match *self {
            KernelSpec::Linear => None,
            KernelSpec::Rbf { sigma } => Some(sigma),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::Linear => "linear",
            KernelSpec::Rbf { .. } => "rbf",
        }
    }

    /// Evaluates the kernel without checking dimensions; callers guarantee equal lengths.
    fn eval_unchecked<'a, I>(&self, pairs: I) -> T
    where
        I: Iterator<Item = (&'a T, &'a T)>,
    {
        match *self {
            KernelSpec::Linear => pairs.fold(T::zero(), |acc, (a, b)| acc + *a * *b),
            KernelSpec::Rbf { sigma } => {
                let sq = pairs.fold(T::zero(), |acc, (a, b)| {
                    let diff = *a - *b;
                    acc + diff * diff
                });
                (-sq / (T::lit(2.0) * sigma * sigma)).exp()
            }
        }
    }
}

/// `K(x, z)` for two vectors of equal length.
pub fn kernel_eval<T: Scalar>(spec: &KernelSpec<T>, x: &[T], z: &[T]) -> Result<T> {
    if x.len() != z.len() {
        return Err(Error::dims(x.len(), z.len()));
    }
    Ok(spec.eval_unchecked(x.iter().zip(z.iter())))
}

pub(crate) fn kernel_eval_views<T: Scalar>(spec: &KernelSpec<T>, x: DVectorView<'_, T>, z: DVectorView<'_, T>) -> T {
    spec.eval_unchecked(x.iter().zip(z.iter()))
}

/// Gram matrix with entry `(i, j) = K(row_i(xa), row_j(xb))`. Rows are computed in parallel.
pub fn gram<T: Scalar>(spec: &KernelSpec<T>, xa: &DMatrix<T>, xb: &DMatrix<T>) -> Result<DMatrix<T>> {
    if xa.ncols() != xb.ncols() {
        return Err(Error::dims(xa.ncols(), xb.ncols()));
    }
    let xa_t = xa.transpose();
    let xb_t = xb.transpose();
    let rows: Vec<RowDVector<T>> = (0..xa.nrows())
        .into_par_iter()
        .map(|i| {
            let xi = xa_t.column(i);
            RowDVector::from_iterator(
                xb.nrows(),
                (0..xb.nrows()).map(|j| kernel_eval_views(spec, xi.as_view(), xb_t.column(j).as_view())),
            )
        })
        .collect();
    if rows.is_empty() {
        return Ok(DMatrix::zeros(0, xb.nrows()));
    }
    Ok(DMatrix::from_rows(&rows))
}

/// Kernel row `K(x, rows of support)` for a single query point.
pub(crate) fn kernel_row<T: Scalar>(spec: &KernelSpec<T>, x: &[T], support: &DMatrix<T>) -> Result<Vec<T>> {
    if x.len() != support.ncols() {
        return Err(Error::dims(support.ncols(), x.len()));
    }
    let xv = DVectorView::from_slice(x, x.len());
    Ok((0..support.nrows())
        .map(|j| {
            let row = support.row(j).transpose();
            kernel_eval_views(spec, xv, row.column(0))
        })
        .collect())
}
