//! Dense primal active-set method. Exact up to rounding on small problems and
//! used as the reference solver in tests.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::elimination::Elimination;
use super::{finish, initial_feasible_point, solve_small_symmetric};
use crate::error::{Error, Result};
use crate::qp::{DualSolution, GeneralQP};
use crate::scalar::{from_usize, Scalar};

pub fn solve_dense_oracle<T: Scalar>(qp: &GeneralQP<T>, tol: T) -> Result<DualSolution<T>> {
    qp.validate()?;
    check_psd(&qp.q)?;
    let x0 = initial_feasible_point(qp)?;
    let max_iter = 50 * qp.n() + 1000;
    let (x, iterations, ok) = active_set(qp, x0, tol, max_iter)?;
    let mut sol = finish(qp, x, iterations, tol);
    sol.converged = ok;
    Ok(sol)
}

/// Fails when `q` has an eigenvalue below `-1e-8 * max(1, |q|_max)`.
pub(crate) fn check_psd<T: Scalar>(q: &DMatrix<T>) -> Result<()> {
    let n = q.nrows();
    if n == 0 {
        return Ok(());
    }
    let scale = q.amax().max(T::one());
    let psd_tol = scale * T::lit(1e-8).max(from_usize::<T>(n) * T::eps() * T::lit(1e3));
    let shifted = q + DMatrix::identity(n, n) * psd_tol;
    if shifted.cholesky().is_some() {
        return Ok(());
    }
    let low = SymmetricEigen::new(q.clone()).eigenvalues.min();
    if low < -psd_tol {
        return Err(Error::NotPositiveSemidefinite { curvature: low.to_f64_lossy() });
    }
    Ok(())
}

/// Bound-constrained least squares `min 1/2 |Cx - D|^2`, started from zero.
pub(crate) fn phase_one<T: Scalar>(qp: &GeneralQP<T>) -> Result<DVector<T>> {
    let n = qp.n();
    let r = qp.n_constraints();
    let aux = GeneralQP {
        q: qp.c.tr_mul(&qp.c),
        f: -qp.c.tr_mul(&qp.d),
        c: DMatrix::zeros(0, n),
        d: DVector::zeros(0),
        bounded: qp.bounded.clone(),
        constant: T::zero(),
        layout: None,
    };
    let (x, _, _) = active_set(&aux, DVector::zeros(n), T::eps() * T::lit(100.0), 50 * n + 1000)?;
    let res = qp.equality_residual(&x);
    let scale = T::one() + qp.d.amax() + qp.c.amax();
    if r > 0 && res > T::eps().sqrt() * scale {
        return Err(Error::Infeasible(format!("no point satisfies the equality constraints (residual {res:e})")));
    }
    Ok(x)
}

enum Direction<T> {
    Newton(DVector<T>),
    Ray(DVector<T>),
}

/// Active-set iterations from a feasible `x0`. Returns the final point, the
/// iteration count and whether the multiplier test passed.
pub(crate) fn active_set<T: Scalar>(
    qp: &GeneralQP<T>,
    x0: DVector<T>,
    tol: T,
    max_iter: usize,
) -> Result<(DVector<T>, usize, bool)> {
    let n = qp.n();
    let mut x = x0;
    for i in 0..n {
        if qp.bounded[i] && x[i] < T::zero() {
            x[i] = T::zero();
        }
    }
    let mut active: Vec<bool> = (0..n).map(|i| qp.bounded[i] && x[i] <= T::zero()).collect();
    let all: Vec<usize> = (0..n).collect();
    let full_rank = Elimination::new(&qp.c, &all).rank();
    let free_idx = |active: &[bool]| (0..n).filter(|&i| !active[i]).collect::<Vec<_>>();
    if Elimination::new(&qp.c, &free_idx(&active)).rank() < full_rank {
        for i in 0..n {
            if active[i] {
                active[i] = false;
                if Elimination::new(&qp.c, &free_idx(&active)).rank() == full_rank {
                    break;
                }
            }
        }
    }

    let mut g = qp.gradient(&x);
    let gscale = T::one() + qp.q.amax() + qp.f.amax();
    // absolute tolerance, floored at the rounding level of the gradient
    let noise = T::eps() * T::lit(1e3) * gscale * (T::one() + x.amax());
    let grad_tol = tol.max(noise);
    let mut at_min = false;

    for it in 0..max_iter {
        let free = free_idx(&active);
        let el = Elimination::new(&qp.c, &free);
        let piv: Vec<usize> = el.pivots.iter().map(|&p| free[p]).collect();
        let non: Vec<usize> = el.nonpivots.iter().map(|&p| free[p]).collect();

        if !at_min {
            let g_r = reduced_grad(&el, &g, &piv, &non);
            if g_r.amax() <= grad_tol {
                at_min = true;
                continue;
            }
            let dir = direction(qp, &el, &piv, &non, &g_r, grad_tol)?;
            let (y, newton) = match dir {
                Direction::Newton(y) => (y, true),
                Direction::Ray(y) => (y, false),
            };
            let mut p = DVector::<T>::zeros(n);
            for (jj, &j) in non.iter().enumerate() {
                p[j] = y[jj];
            }
            let mp = &el.m * &y;
            for (s, &i) in piv.iter().enumerate() {
                p[i] = -mp[s];
            }
            let mut t_max = T::max_value().unwrap_or_else(|| T::lit(f64::MAX));
            let mut blocking = None;
            for &i in &free {
                if qp.bounded[i] && p[i] < T::zero() {
                    let t = x[i] / -p[i];
                    if t < t_max {
                        t_max = t;
                        blocking = Some(i);
                    }
                }
            }
            let step = if newton {
                if t_max < T::one() {
                    t_max
                } else {
                    T::one()
                }
            } else {
                match blocking {
                    Some(_) => t_max,
                    None => return Err(Error::Unbounded),
                }
            };
            let blocked = blocking.is_some() && step >= t_max;
            x.axpy(step, &p, T::one());
            let qp_dir = &qp.q * &p;
            g.axpy(step, &qp_dir, T::one());
            if blocked {
                let b = blocking.unwrap_or(0);
                x[b] = T::zero();
                active[b] = true;
            }
            for &i in &free {
                if qp.bounded[i] && x[i] < T::zero() {
                    x[i] = T::zero();
                }
            }
            if !blocked && newton {
                let g_r = reduced_grad(&el, &g, &piv, &non);
                if g_r.amax() <= grad_tol {
                    at_min = true;
                }
            }
            continue;
        }

        let lambda = if el.rank() == full_rank {
            let gp: Vec<T> = piv.iter().map(|&i| g[i]).collect();
            el.multipliers(&gp)
        } else {
            least_squares_multipliers(&qp.c, &g, &free)
        };
        let mut worst = (-grad_tol, None);
        for i in (0..n).filter(|&i| active[i]) {
            let nu = g[i] + qp.c.column(i).dot(&lambda);
            if nu < worst.0 {
                worst = (nu, Some(i));
            }
        }
        match worst.1 {
            None => return Ok((x, it, true)),
            Some(i) => {
                active[i] = false;
                at_min = false;
            }
        }
    }
    Ok((x, max_iter, false))
}

fn reduced_grad<T: Scalar>(el: &Elimination<T>, g: &DVector<T>, piv: &[usize], non: &[usize]) -> DVector<T> {
    let gn = DVector::from_iterator(non.len(), non.iter().map(|&i| g[i]));
    if piv.is_empty() {
        return gn;
    }
    let gp = DVector::from_iterator(piv.len(), piv.iter().map(|&i| g[i]));
    gn - el.m.tr_mul(&gp)
}

fn direction<T: Scalar>(
    qp: &GeneralQP<T>,
    el: &Elimination<T>,
    piv: &[usize],
    non: &[usize],
    g_r: &DVector<T>,
    grad_tol: T,
) -> Result<Direction<T>> {
    let k = non.len();
    let mut h = DMatrix::from_fn(k, k, |a, b| qp.q[(non[a], non[b])]);
    if !piv.is_empty() {
        let q_np = DMatrix::from_fn(k, piv.len(), |a, s| qp.q[(non[a], piv[s])]);
        let q_pp = DMatrix::from_fn(piv.len(), piv.len(), |s, u| qp.q[(piv[s], piv[u])]);
        let t1 = &q_np * &el.m;
        h -= &t1;
        h -= t1.transpose();
        h += el.m.tr_mul(&(&q_pp * &el.m));
    }
    if let Some(ch) = h.clone().cholesky() {
        let y = -ch.solve(g_r);
        if y.iter().all(|v| v.is_finite_value()) {
            return Ok(Direction::Newton(y));
        }
    }
    let eig = SymmetricEigen::new(h);
    let top = eig.eigenvalues.amax().max(T::one());
    let kk = from_usize::<T>(k.max(1));
    let zero_tol = top * kk * T::eps() * T::lit(100.0);
    let psd_tol = top * (T::lit(1e-8)).max(kk * T::eps() * T::lit(1e3));
    let mut newton = DVector::<T>::zeros(k);
    let mut null = DVector::<T>::zeros(k);
    for (idx, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam < -psd_tol {
            return Err(Error::NotPositiveSemidefinite { curvature: lam.to_f64_lossy() });
        }
        let u = eig.eigenvectors.column(idx);
        let proj = u.dot(g_r);
        if lam > zero_tol {
            newton.axpy(-proj / lam, &u, T::one());
        } else {
            null.axpy(proj, &u, T::one());
        }
    }
    if null.amax() > grad_tol {
        Ok(Direction::Ray(-null))
    } else {
        Ok(Direction::Newton(newton))
    }
}

fn least_squares_multipliers<T: Scalar>(c: &DMatrix<T>, g: &DVector<T>, free: &[usize]) -> DVector<T> {
    let r = c.nrows();
    let mut normal = DMatrix::<T>::zeros(r, r);
    let mut rhs = DVector::<T>::zeros(r);
    for &i in free {
        let col = c.column(i);
        normal.ger(T::one(), &col, &col, T::one());
        rhs.axpy(-g[i], &col, T::one());
    }
    solve_small_symmetric(normal, rhs)
}
