//! Elimination of the free coordinates. When the free block determines every
//! equality row and `Q` is positive definite on its null space, the optimal
//! free part is an affine function of the bounded part, `x_F = P x_B + p0`,
//! leaving a bound-constrained problem in `x_B` alone.

use nalgebra::{DMatrix, DVector};

use super::oracle::active_set;
use crate::error::{Error, Result};
use crate::qp::GeneralQP;
use crate::scalar::Scalar;

pub(crate) struct Reduction<T> {
    pub free: Vec<usize>,
    pub bounded: Vec<usize>,
    p: DMatrix<T>,
    p0: DVector<T>,
    pub q: DMatrix<T>,
    pub f: DVector<T>,
}

impl<T: Scalar> Reduction<T> {
    pub fn new(qp: &GeneralQP<T>) -> Option<Self> {
        let n = qp.n();
        let r = qp.n_constraints();
        let free: Vec<usize> = (0..n).filter(|&i| !qp.bounded[i]).collect();
        let bounded: Vec<usize> = (0..n).filter(|&i| qp.bounded[i]).collect();
        if free.len() < r || bounded.is_empty() {
            return None;
        }
        let (nf, nb) = (free.len(), bounded.len());
        let mut kf = DMatrix::<T>::zeros(nf + r, nf + r);
        for (a, &i) in free.iter().enumerate() {
            for (b, &j) in free.iter().enumerate() {
                kf[(a, b)] = qp.q[(i, j)];
            }
            for k in 0..r {
                kf[(a, nf + k)] = qp.c[(k, i)];
                kf[(nf + k, a)] = qp.c[(k, i)];
            }
        }
        let mut rhs = DMatrix::<T>::zeros(nf + r, nb + 1);
        for (b, &j) in bounded.iter().enumerate() {
            for (a, &i) in free.iter().enumerate() {
                rhs[(a, b)] = -qp.q[(i, j)];
            }
            for k in 0..r {
                rhs[(nf + k, b)] = -qp.c[(k, j)];
            }
        }
        for (a, &i) in free.iter().enumerate() {
            rhs[(a, nb)] = -qp.f[i];
        }
        for k in 0..r {
            rhs[(nf + k, nb)] = qp.d[k];
        }
        // nonsingular exactly when C_F has full row rank and Q_FF is definite on its null space
        let sv = kf.clone().singular_values();
        if !(sv.min() > T::lit(1e-12) * sv.max()) {
            return None;
        }
        let lu = kf.clone().lu();
        let sol = lu.solve(&rhs)?;
        if !sol.iter().all(|v| v.is_finite_value()) {
            return None;
        }
        // a singular saddle-point matrix shows up as a large solve residual
        let resid = (&kf * &sol - &rhs).amax();
        let scale = (T::one() + kf.amax()) * (T::one() + sol.amax());
        if resid > T::lit(1e-8) * scale {
            return None;
        }
        let p = sol.view((0, 0), (nf, nb)).clone_owned();
        let p0 = sol.view((0, nb), (nf, 1)).column(0).clone_owned();

        let q_ff = DMatrix::from_fn(nf, nf, |a, b| qp.q[(free[a], free[b])]);
        let q_fb = DMatrix::from_fn(nf, nb, |a, b| qp.q[(free[a], bounded[b])]);
        let q_bb = DMatrix::from_fn(nb, nb, |a, b| qp.q[(bounded[a], bounded[b])]);
        let f_f = DVector::from_iterator(nf, free.iter().map(|&i| qp.f[i]));
        let f_b = DVector::from_iterator(nb, bounded.iter().map(|&i| qp.f[i]));
        let w = &q_ff * &p + &q_fb;
        let mut q = &q_bb + q_fb.tr_mul(&p) + p.tr_mul(&w);
        let half = T::lit(0.5);
        for j in 0..nb {
            for i in 0..j {
                let v = half * (q[(i, j)] + q[(j, i)]);
                q[(i, j)] = v;
                q[(j, i)] = v;
            }
        }
        let f = &f_b + p.tr_mul(&(&q_ff * &p0)) + q_fb.tr_mul(&p0) + p.tr_mul(&f_f);
        Some(Reduction { free, bounded, p, p0, q, f })
    }

    pub fn lift(&self, qp: &GeneralQP<T>, xb: &DVector<T>) -> DVector<T> {
        let mut x = DVector::zeros(qp.n());
        let xf = &self.p * xb + &self.p0;
        for (a, &i) in self.free.iter().enumerate() {
            x[i] = xf[a];
        }
        for (b, &j) in self.bounded.iter().enumerate() {
            x[j] = xb[b];
        }
        restore_feasibility(qp, &mut x, &self.free);
        x
    }
}

/// Least-norm correction of the free coordinates so that `Cx = D` holds to rounding.
fn restore_feasibility<T: Scalar>(qp: &GeneralQP<T>, x: &mut DVector<T>, free: &[usize]) {
    let r = qp.n_constraints();
    if r == 0 {
        return;
    }
    let res = &qp.d - &qp.c * &*x;
    let cf = DMatrix::from_fn(r, free.len(), |k, a| qp.c[(k, free[a])]);
    let normal = &cf * cf.transpose();
    if let Some(ch) = normal.cholesky() {
        let delta = cf.tr_mul(&ch.solve(&res));
        for (a, &i) in free.iter().enumerate() {
            x[i] += delta[a];
        }
    }
}

/// Greedy exact coordinate descent on `min 1/2 x'Qx + f'x, x >= 0`, finished by
/// an active-set polish when the coordinate phase stops short of `tol`.
pub(crate) fn solve_bounded<T: Scalar>(
    q: &DMatrix<T>,
    f: &DVector<T>,
    x0: DVector<T>,
    tol: T,
    max_iter: usize,
    total_budget: usize,
) -> Result<(DVector<T>, usize)> {
    let n = f.len();
    let mut x = x0;
    let mut g = q * &x + f;
    let flat = T::eps() * T::lit(100.0) * (T::one() + q.amax());
    let mut it = 0;
    while it < max_iter {
        if it > 0 && it % 1000 == 0 {
            g = q * &x + f;
        }
        let mut best = (T::zero(), usize::MAX, T::zero());
        let mut worst_violation = T::zero();
        for j in 0..n {
            let gj = g[j];
            let v = if x[j] > T::zero() { gj.abs() } else { (-gj).max(T::zero()) };
            if v > worst_violation {
                worst_violation = v;
            }
            if v == T::zero() {
                continue;
            }
            let qjj = q[(j, j)];
            let target = if qjj > flat {
                (x[j] - gj / qjj).max(T::zero())
            } else if gj > T::zero() {
                T::zero()
            } else {
                return Err(Error::Unbounded);
            };
            let delta = target - x[j];
            let gain = -(delta * gj + T::lit(0.5) * delta * delta * qjj);
            if gain > best.0 {
                best = (gain, j, delta);
            }
        }
        if worst_violation <= tol || best.1 == usize::MAX {
            break;
        }
        let (_, j, delta) = best;
        x[j] += delta;
        if x[j] < T::zero() {
            x[j] = T::zero();
        }
        g.axpy(delta, &q.column(j), T::one());
        it += 1;
    }
    let g = q * &x + f;
    let worst = (0..n).fold(T::zero(), |m, j| {
        let v = if x[j] > T::zero() { g[j].abs() } else { (-g[j]).max(T::zero()) };
        m.max(v)
    });
    if worst > tol {
        let aux = GeneralQP {
            q: q.clone(),
            f: f.clone(),
            c: DMatrix::zeros(0, n),
            d: DVector::zeros(0),
            bounded: vec![true; n],
            constant: T::zero(),
            layout: None,
        };
        let polish = (50 * n + 1000).min(total_budget.saturating_sub(it));
        if polish == 0 {
            return Ok((x, it));
        }
        let (y, extra, _) = active_set(&aux, x, tol * T::lit(0.1), polish)?;
        return Ok((y, it + extra));
    }
    Ok((x, it))
}
