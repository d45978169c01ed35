//! Assembly of the twin dual problems as [`GeneralQP`] instances.
//!
//! For class 1 with own rows `A`, other rows `B` (and privileged `A*`, `B*`)
//! the dual in the multipliers `(a1, a2, a3, a4)` is
//!
//! ```text
//! min 1/2 |B'r - A'a1|^2 + 1/2 |a1|^2
//!   + 1/(2g) |B*'s - A*'a2|^2 + 1/(2g) |a2|^2 + e'(a4 - a3)
//! r = a4 - a3,  s = a3 + a4/tau - c e
//! ```
//!
//! with `a1`, `a2` free, `a3`, `a4 >= 0`, and the two stationarity rows for the
//! intercepts as equality constraints. Class 2 is the same problem on the
//! swapped partition.

use nalgebra::{DMatrix, DVector};

use crate::data::{ClassPartition, Hyperparams};
use crate::error::{Error, Result};
use crate::kernel::{gram, KernelSpec};
use crate::qp::{BlockLayout, GeneralQP};
use crate::scalar::{from_usize, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Which {
    Class1,
    Class2,
}

impl Which {
    pub fn class_label(self) -> i64 {
        match self {
            Which::Class1 => 1,
            Which::Class2 => -1,
        }
    }
}

fn check_tau<T: Scalar>(hp: &Hyperparams<T>) -> Result<()> {
    hp.validate(false)?;
    if !(hp.tau > T::zero()) {
        return Err(Error::invalid("tau = 0 has no dual; use the primal path"));
    }
    Ok(())
}

fn check_nonempty<T: Scalar>(part: &ClassPartition<T>) -> Result<()> {
    if part.m1() == 0 || part.m2() == 0 {
        return Err(Error::DegenerateDataset("both classes need at least one sample".into()));
    }
    Ok(())
}

/// The four data blocks of one side, already oriented as (own, other).
pub(crate) struct Blocks<T> {
    pub own: DMatrix<T>,
    pub other: DMatrix<T>,
    pub own_star: DMatrix<T>,
    pub other_star: DMatrix<T>,
}

/// Builds the privileged dual from oriented blocks; `c` is the trade-off of this side.
pub(crate) fn privileged_dual<T: Scalar>(blk: &Blocks<T>, c: T, gamma: T, tau: T) -> GeneralQP<T> {
    let m1 = blk.own.nrows();
    let m2 = blk.other.nrows();
    let n = 2 * m1 + 2 * m2;
    let d = blk.own.ncols();
    let ds = blk.own_star.ncols();
    let inv_g = T::one() / gamma;
    let inv_tau = T::one() / tau;

    // L1 x = B'(a4 - a3) - A'a1
    let mut l1 = DMatrix::<T>::zeros(d, n);
    l1.columns_mut(0, m1).copy_from(&(-blk.own.transpose()));
    l1.columns_mut(2 * m1, m2).copy_from(&(-blk.other.transpose()));
    l1.columns_mut(2 * m1 + m2, m2).copy_from(&blk.other.transpose());
    // L3 x + v3 = B*'s - A*'a2
    let mut l3 = DMatrix::<T>::zeros(ds, n);
    let bst = blk.other_star.transpose();
    l3.columns_mut(m1, m1).copy_from(&(-blk.own_star.transpose()));
    l3.columns_mut(2 * m1, m2).copy_from(&bst);
    l3.columns_mut(2 * m1 + m2, m2).copy_from(&(&bst * inv_tau));
    let v3: DVector<T> = bst.column_sum() * (-c);

    let mut q = l1.tr_mul(&l1) + l3.tr_mul(&l3) * inv_g;
    for i in 0..m1 {
        q[(i, i)] += T::one();
        q[(m1 + i, m1 + i)] += inv_g;
    }
    let mut f = l3.tr_mul(&v3) * inv_g;
    for i in 0..m2 {
        f[2 * m1 + i] -= T::one();
        f[2 * m1 + m2 + i] += T::one();
    }

    let mut cm = DMatrix::<T>::zeros(2, n);
    for i in 0..m1 {
        cm[(0, i)] = T::one();
        cm[(1, m1 + i)] = T::one();
    }
    for i in 0..m2 {
        cm[(0, 2 * m1 + i)] = T::one();
        cm[(0, 2 * m1 + m2 + i)] = -T::one();
        cm[(1, 2 * m1 + i)] = -T::one();
        cm[(1, 2 * m1 + m2 + i)] = -inv_tau;
    }
    let dv = DVector::from_vec(vec![T::zero(), -c * from_usize::<T>(m2)]);
    let mut bounded = vec![false; 2 * m1];
    bounded.extend(std::iter::repeat_n(true, 2 * m2));

    let mut qp = GeneralQP {
        q,
        f,
        c: cm,
        d: dv,
        bounded,
        constant: v3.norm_squared() * inv_g * T::lit(0.5),
        layout: Some(BlockLayout::PrivilegedDual { m1, m2, c, tau }),
    };
    qp.symmetrize();
    qp
}

fn side<T: Scalar>(which: Which, hp: &Hyperparams<T>) -> T {
    match which {
        Which::Class1 => hp.c1,
        Which::Class2 => hp.c2,
    }
}

pub(crate) fn linear_blocks<T: Scalar>(which: Which, part: &ClassPartition<T>) -> Result<Blocks<T>> {
    let (a_star, b_star) = part.privileged()?;
    let (own, other, own_star, other_star) = match which {
        Which::Class1 => (&part.a, &part.b, a_star, b_star),
        Which::Class2 => (&part.b, &part.a, b_star, a_star),
    };
    Ok(Blocks { own: own.clone(), other: other.clone(), own_star: own_star.clone(), other_star: other_star.clone() })
}

fn augment<T: Scalar>(k: DMatrix<T>) -> DMatrix<T> {
    let cols = k.ncols();
    k.insert_column(cols, T::one())
}

/// Kernel blocks `[K(., X) e]` against the stacked training rows `X = A u B`.
pub(crate) fn kernel_blocks<T: Scalar>(
    which: Which,
    part: &ClassPartition<T>,
    spec: &KernelSpec<T>,
) -> Result<Blocks<T>> {
    let (a_star, b_star) = part.privileged()?;
    let x = part.stacked();
    let xs = part.stacked_privileged()?;
    let m = augment(gram(spec, &part.a, &x)?);
    let nn = augment(gram(spec, &part.b, &x)?);
    let ms = augment(gram(spec, a_star, &xs)?);
    let ns = augment(gram(spec, b_star, &xs)?);
    Ok(match which {
        Which::Class1 => Blocks { own: m, other: nn, own_star: ms, other_star: ns },
        Which::Class2 => Blocks { own: nn, other: m, own_star: ns, other_star: ms },
    })
}

pub fn assemble_pin_twsvmpi_dual<T: Scalar>(
    which: Which,
    part: &ClassPartition<T>,
    hp: &Hyperparams<T>,
) -> Result<GeneralQP<T>> {
    check_tau(hp)?;
    check_nonempty(part)?;
    let blk = linear_blocks(which, part)?;
    Ok(privileged_dual(&blk, side(which, hp), hp.gamma, hp.tau))
}

/// Kernel dual. The appended unit column of each block contributes
/// `(e'a1 + e'a3 - e'a4)^2`-type terms that vanish on the feasible set, so the
/// free intercepts are still carried by the equality rows.
pub fn assemble_pin_twsvmpi_kernel_dual<T: Scalar>(
    which: Which,
    part: &ClassPartition<T>,
    hp: &Hyperparams<T>,
) -> Result<GeneralQP<T>> {
    check_tau(hp)?;
    check_nonempty(part)?;
    let blk = kernel_blocks(which, part, &hp.kernel)?;
    Ok(privileged_dual(&blk, side(which, hp), hp.gamma, hp.tau))
}

/// `ridge * trace(H'H) / (d + 1)` with `H = [A e]`, the default stabilizer of the baseline inverse.
pub fn default_ridge<T: Scalar>(own: &DMatrix<T>) -> T {
    let h = augment(own.clone());
    let p = h.ncols();
    T::lit(1e-7) * h.norm_squared() / from_usize::<T>(p)
}

/// Inverse of `H'H + ridge I` for `H = [own e]`.
pub(crate) fn regularized_inverse<T: Scalar>(own: &DMatrix<T>, ridge: T) -> Result<DMatrix<T>> {
    let h = augment(own.clone());
    let p = h.ncols();
    let hth = h.tr_mul(&h) + DMatrix::identity(p, p) * ridge;
    if let Some(ch) = hth.clone().cholesky() {
        return Ok(ch.inverse());
    }
    hth.try_inverse().ok_or_else(|| Error::Singular("H'H is singular; use a positive ridge".into()))
}

/// Baseline pinball twin dual over `(alpha, beta)`, both nonnegative, with
/// one coupling row `alpha_i + beta_i / tau = c` per other-class sample.
pub fn assemble_pin_twsvm_dual<T: Scalar>(
    which: Which,
    part: &ClassPartition<T>,
    hp: &Hyperparams<T>,
    ridge: T,
) -> Result<GeneralQP<T>> {
    check_tau(hp)?;
    check_nonempty(part)?;
    if ridge < T::zero() {
        return Err(Error::invalid("ridge must be >= 0"));
    }
    let (own, other) = match which {
        Which::Class1 => (&part.a, &part.b),
        Which::Class2 => (&part.b, &part.a),
    };
    baseline_dual(own, other, side(which, hp), hp.tau, ridge)
}

pub(crate) fn baseline_dual<T: Scalar>(
    own: &DMatrix<T>,
    other: &DMatrix<T>,
    c: T,
    tau: T,
    ridge: T,
) -> Result<GeneralQP<T>> {
    let m2 = other.nrows();
    let inv = regularized_inverse(own, ridge)?;
    let g = augment(other.clone());
    let k = &g * &inv * g.transpose();
    let mut q = DMatrix::<T>::zeros(2 * m2, 2 * m2);
    q.view_mut((0, 0), (m2, m2)).copy_from(&k);
    q.view_mut((m2, m2), (m2, m2)).copy_from(&k);
    q.view_mut((0, m2), (m2, m2)).copy_from(&(-&k));
    q.view_mut((m2, 0), (m2, m2)).copy_from(&(-&k));
    let mut f = DVector::<T>::from_element(2 * m2, T::one());
    f.rows_mut(0, m2).fill(-T::one());
    let mut cm = DMatrix::<T>::zeros(m2, 2 * m2);
    for i in 0..m2 {
        cm[(i, i)] = T::one();
        cm[(i, m2 + i)] = T::one() / tau;
    }
    let mut qp = GeneralQP {
        q,
        f,
        c: cm,
        d: DVector::from_element(m2, c),
        bounded: vec![true; 2 * m2],
        constant: T::zero(),
        layout: Some(BlockLayout::BaselineDual { m2, c, tau }),
    };
    qp.symmetrize();
    Ok(qp)
}

/// Primal pinball twin problem for one side, valid for every `tau >= 0`:
///
/// ```text
/// min 1/2 |H z|^2 + c e'xi
/// xi - G z - s1 = e,  xi + tau G z - s2 = -tau e,  s1, s2 >= 0
/// ```
///
/// over `z = (w, b)` and `xi` free, where `H = [own e]` and `G = [other e]`.
pub fn assemble_pin_twsvm_primal<T: Scalar>(
    own: &DMatrix<T>,
    other: &DMatrix<T>,
    c: T,
    tau: T,
) -> Result<GeneralQP<T>> {
    if own.nrows() == 0 || other.nrows() == 0 {
        return Err(Error::DegenerateDataset("both classes need at least one sample".into()));
    }
    if tau < T::zero() {
        return Err(Error::invalid("tau must be >= 0"));
    }
    let h = augment(own.clone());
    let g = augment(other.clone());
    let p = h.ncols();
    let m2 = g.nrows();
    let n = p + 3 * m2;
    let mut q = DMatrix::<T>::zeros(n, n);
    q.view_mut((0, 0), (p, p)).copy_from(&h.tr_mul(&h));
    let mut f = DVector::<T>::zeros(n);
    f.rows_mut(p, m2).fill(c);
    let mut cm = DMatrix::<T>::zeros(2 * m2, n);
    let mut dv = DVector::<T>::zeros(2 * m2);
    for i in 0..m2 {
        for j in 0..p {
            cm[(i, j)] = -g[(i, j)];
            cm[(m2 + i, j)] = tau * g[(i, j)];
        }
        cm[(i, p + i)] = T::one();
        cm[(m2 + i, p + i)] = T::one();
        cm[(i, p + m2 + i)] = -T::one();
        cm[(m2 + i, p + 2 * m2 + i)] = -T::one();
        dv[i] = T::one();
        dv[m2 + i] = -tau;
    }
    let mut bounded = vec![false; p + m2];
    bounded.extend(std::iter::repeat_n(true, 2 * m2));
    let mut qp = GeneralQP {
        q,
        f,
        c: cm,
        d: dv,
        bounded,
        constant: T::zero(),
        layout: Some(BlockLayout::PrimalPinball { p, m2, tau }),
    };
    qp.symmetrize();
    Ok(qp)
}
