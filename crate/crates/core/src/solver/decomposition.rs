//! Working-set decomposition. Each step moves `r + 1` coordinates along the
//! one-dimensional null space of their constraint columns, picking the subset
//! with the largest exact decrease from a short list of KKT violators.

use nalgebra::{DMatrix, DVector};

use super::oracle::active_set;
use super::reduced::{solve_bounded, Reduction};
use super::{
    estimate_multipliers, finish, initial_feasible_point, kkt_report_with_gradient, reduced_gradient, violation,
    SolverConfig,
};
use crate::error::{Error, Result};
use crate::qp::{DualSolution, GeneralQP};
use crate::scalar::Scalar;

const POOL: usize = 8;
const POOL_MAX: usize = 64;
const REFRESH: usize = 500;

pub fn solve_decomposition<T: Scalar>(qp: &GeneralQP<T>, cfg: &SolverConfig<T>) -> Result<DualSolution<T>> {
    cfg.validate()?;
    qp.validate()?;
    let r = qp.n_constraints();
    if r + 1 > cfg.working_set_size {
        return Err(Error::invalid(format!(
            "working set of {} cannot carry {} equality constraints",
            cfg.working_set_size, r
        )));
    }
    if let Some(red) = Reduction::new(qp) {
        let x0 = initial_feasible_point(qp)?;
        let xb = DVector::from_iterator(red.bounded.len(), red.bounded.iter().map(|&j| x0[j]));
        let budget = cfg.max_iter.min(20 * red.bounded.len() + 1000);
        let (xb, iterations) = solve_bounded(&red.q, &red.f, xb, cfg.tol * T::lit(0.5), budget, cfg.max_iter)?;
        return Ok(finish(qp, red.lift(qp, &xb), iterations, cfg.tol));
    }
    let closed_form = r <= 2 && cfg.working_set_size <= 3;
    let n = qp.n();
    let mut x = initial_feasible_point(qp)?;
    let mut g = qp.gradient(&x);
    let blocks = qp.layout.as_ref().map(|l| l.blocks()).unwrap_or_else(|| std::iter::once(0..n).collect());
    let qscale = T::one() + qp.q.amax();
    let free: Vec<usize> = (0..n).filter(|&i| !qp.bounded[i]).collect();

    let mut iterations = 0;
    while iterations < cfg.max_iter {
        if iterations > 0 && iterations % REFRESH == 0 {
            g = qp.gradient(&x);
        }
        let rep = kkt_report_with_gradient(qp, &x, &g);
        if rep.residual() <= cfg.tol {
            break;
        }
        if cfg.verbose && iterations % 1000 == 0 {
            log::debug!("decomposition iter {iterations}: kkt {:e}", rep.residual().to_f64_lossy());
        }
        let lambda = selection_multipliers(qp, &x, &g, &free);
        let rho = reduced_gradient(qp, &g, &lambda);
        let order = violators(qp, &x, &rho);
        if order.is_empty() {
            break;
        }

        let before = if cfg!(debug_assertions) { tracked_objective(qp, &x, &g) } else { T::zero() };
        let moved = if closed_form {
            let mut k = POOL;
            loop {
                let mut pool = build_pool(&order, &blocks, &x, &rho, qp, k);
                pad_mobile(qp, &x, &mut pool, (2 * (r + 1)).min(n));
                let floor = T::eps() * T::lit(16.0) * (T::one() + qp.objective(&x).abs());
                if let Some(step) = best_step(qp, &x, &g, &pool, qscale, floor)? {
                    apply(qp, &mut x, &mut g, &step.0, &step.1, step.2, step.3);
                    break true;
                }
                if k >= POOL_MAX || k >= order.len() {
                    break false;
                }
                k *= 2;
            }
        } else {
            false
        };
        if !moved {
            let q = if closed_form { (4 * (r + 1)).max(16) } else { cfg.working_set_size };
            let mut set: Vec<usize> = order.iter().copied().take(q.min(n)).collect();
            pad_mobile(qp, &x, &mut set, q.min(n));
            if !subproblem_step(qp, &mut x, &mut g, &set, cfg.tol)? {
                log::warn!("decomposition stalled after {iterations} iterations");
                break;
            }
        }
        debug_assert!(x.iter().zip(&qp.bounded).all(|(v, &b)| !b || *v >= T::zero()));
        debug_assert!({
            let after = tracked_objective(qp, &x, &g);
            after <= before + T::lit(1e-10) * (T::one() + before.abs())
        });
        iterations += 1;
    }
    Ok(finish(qp, x, iterations, cfg.tol))
}

/// `1/2 x'Qx + f'x` from the maintained gradient `g = Qx + f`.
fn tracked_objective<T: Scalar>(qp: &GeneralQP<T>, x: &DVector<T>, g: &DVector<T>) -> T {
    T::lit(0.5) * x.dot(&(g + &qp.f))
}

/// Multipliers anchored on the free coordinates, where stationarity must hold
/// exactly; falls back to the general estimate when they do not determine all rows.
fn selection_multipliers<T: Scalar>(qp: &GeneralQP<T>, x: &DVector<T>, g: &DVector<T>, free: &[usize]) -> DVector<T> {
    let r = qp.n_constraints();
    if r == 0 || free.is_empty() {
        return estimate_multipliers(qp, x, g);
    }
    let mut normal = DMatrix::<T>::zeros(r, r);
    let mut rhs = DVector::<T>::zeros(r);
    for &i in free {
        let col = qp.c.column(i);
        normal.ger(T::one(), &col, &col, T::one());
        rhs.axpy(-g[i], &col, T::one());
    }
    match normal.cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => estimate_multipliers(qp, x, g),
    }
}

/// Coordinates with a positive projected-gradient violation, worst first.
fn violators<T: Scalar>(qp: &GeneralQP<T>, x: &DVector<T>, rho: &DVector<T>) -> Vec<usize> {
    let mut v: Vec<(T, usize)> =
        (0..qp.n()).map(|i| (violation(qp.bounded[i], x[i], rho[i]), i)).filter(|(v, _)| *v > T::zero()).collect();
    v.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
    v.into_iter().map(|(_, i)| i).collect()
}

fn build_pool<T: Scalar>(
    order: &[usize],
    blocks: &[std::ops::Range<usize>],
    x: &DVector<T>,
    rho: &DVector<T>,
    qp: &GeneralQP<T>,
    k: usize,
) -> Vec<usize> {
    let mut pool: Vec<usize> = order.iter().copied().take(k).collect();
    for b in blocks {
        let top = b.clone().map(|i| (violation(qp.bounded[i], x[i], rho[i]), i)).filter(|(v, _)| *v > T::zero()).fold(
            None,
            |acc: Option<(T, usize)>, cur| match acc {
                Some(a) if a.0 >= cur.0 => Some(a),
                _ => Some(cur),
            },
        );
        if let Some((_, i)) = top {
            if !pool.contains(&i) {
                pool.push(i);
            }
        }
    }
    pool
}

/// Tops `set` up to `target` with coordinates that can move both ways (free or
/// strictly positive), largest first. Interior coordinates have no violation of
/// their own, yet a feasible direction may need them to absorb a bound variable's move.
fn pad_mobile<T: Scalar>(qp: &GeneralQP<T>, x: &DVector<T>, set: &mut Vec<usize>, target: usize) {
    if set.len() >= target {
        return;
    }
    let mut extra: Vec<usize> =
        (0..qp.n()).filter(|&i| (!qp.bounded[i] || x[i] > T::zero()) && !set.contains(&i)).collect();
    extra.sort_by(|&a, &b| {
        let key = |i: usize| {
            if qp.bounded[i] {
                x[i]
            } else {
                T::max_value().unwrap_or(T::one())
            }
        };
        key(b).partial_cmp(&key(a)).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    set.extend(extra.into_iter().take(target - set.len()));
}

/// Null vector of the constraint columns of `set`, when that null space is one-dimensional.
fn null_vector<T: Scalar>(c: &DMatrix<T>, set: &[usize]) -> Option<Vec<T>> {
    let r = c.nrows();
    let col = |i: usize| -> Vec<T> { (0..r).map(|k| c[(k, i)]).collect() };
    let cols: Vec<Vec<T>> = set.iter().map(|&i| col(i)).collect();
    let norm = |v: &[T]| v.iter().fold(T::zero(), |m, a| m.max(a.abs()));
    let tiny = T::eps() * T::lit(1e3);
    match set.len() {
        1 => (norm(&cols[0]) == T::zero()).then(|| vec![T::one()]),
        2 => {
            let (a, b) = (&cols[0], &cols[1]);
            let (na, nb) = (norm(a), norm(b));
            if na == T::zero() || nb == T::zero() {
                return None;
            }
            for p in 0..r {
                for q in p + 1..r {
                    if (a[p] * b[q] - a[q] * b[p]).abs() > tiny * na * nb {
                        return None;
                    }
                }
            }
            let s = (0..r).max_by(|&p, &q| {
                (a[p].abs() + b[p].abs()).partial_cmp(&(a[q].abs() + b[q].abs())).unwrap_or(std::cmp::Ordering::Equal)
            })?;
            Some(vec![b[s], -a[s]])
        }
        3 if r == 2 => {
            let (u, v) =
                ((0..3).map(|j| cols[j][0]).collect::<Vec<_>>(), (0..3).map(|j| cols[j][1]).collect::<Vec<_>>());
            let d = vec![u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
            let scale = norm(&u) * norm(&v);
            // a rank-one triple has a two-dimensional null space; its pairs cover it
            (norm(&d) > tiny * scale).then_some(d)
        }
        _ => None,
    }
}

type Step<T> = (Vec<usize>, Vec<T>, T, Option<usize>);
/// `(gain, step length, blocking coordinate, oriented direction)`
type LineStep<T> = (T, T, Option<usize>, Vec<T>);

fn best_step<T: Scalar>(
    qp: &GeneralQP<T>,
    x: &DVector<T>,
    g: &DVector<T>,
    pool: &[usize],
    qscale: T,
    floor: T,
) -> Result<Option<Step<T>>> {
    let r = qp.n_constraints();
    let mut best: Option<(T, Step<T>)> = None;
    let mut consider = |set: Vec<usize>| -> Result<()> {
        let Some(d) = null_vector(&qp.c, &set) else {
            return Ok(());
        };
        if let Some((gain, t, block, d)) = line_gain(qp, x, g, &set, d, qscale)? {
            if gain > floor && best.as_ref().is_none_or(|b| gain > b.0) {
                best = Some((gain, (set, d, t, block)));
            }
        }
        Ok(())
    };
    let m = pool.len();
    for a in 0..m {
        consider(vec![pool[a]])?;
        for b in a + 1..m {
            consider(vec![pool[a], pool[b]])?;
            if r == 2 {
                for c in b + 1..m {
                    consider(vec![pool[a], pool[b], pool[c]])?;
                }
            }
        }
    }
    Ok(best.map(|(_, s)| s))
}

/// Exact decrease along `d` on coordinates `set`, with the step clipped at the first bound.
fn line_gain<T: Scalar>(
    qp: &GeneralQP<T>,
    x: &DVector<T>,
    g: &DVector<T>,
    set: &[usize],
    mut d: Vec<T>,
    qscale: T,
) -> Result<Option<LineStep<T>>> {
    let mut gd = set.iter().zip(&d).fold(T::zero(), |s, (&i, &di)| s + g[i] * di);
    if gd == T::zero() {
        return Ok(None);
    }
    if gd > T::zero() {
        d.iter_mut().for_each(|v| *v = -*v);
        gd = -gd;
    }
    let mut kappa = T::zero();
    for (a, &i) in set.iter().enumerate() {
        for (b, &j) in set.iter().enumerate() {
            kappa += d[a] * qp.q[(i, j)] * d[b];
        }
    }
    let dnorm2 = d.iter().fold(T::zero(), |s, v| s + *v * *v);
    let flat = T::eps() * T::lit(100.0) * qscale * dnorm2;
    if kappa < -T::lit(1e-8) * qscale * dnorm2 {
        return Err(Error::NotPositiveSemidefinite { curvature: (kappa / dnorm2).to_f64_lossy() });
    }
    let mut t_hi: Option<(T, usize)> = None;
    for (a, &i) in set.iter().enumerate() {
        if qp.bounded[i] && d[a] < T::zero() {
            let t = x[i] / -d[a];
            if t_hi.is_none_or(|(h, _)| t < h) {
                t_hi = Some((t, i));
            }
        }
    }
    let (t, block) = if kappa > flat {
        let t_star = -gd / kappa;
        match t_hi {
            Some((h, i)) if h <= t_star => (h, Some(i)),
            _ => (t_star, None),
        }
    } else {
        match t_hi {
            Some((h, i)) => (h, Some(i)),
            None => return Err(Error::Unbounded),
        }
    };
    if !(t > T::zero()) {
        return Ok(None);
    }
    let gain = -(t * gd + T::lit(0.5) * t * t * kappa);
    if !(gain > T::zero()) {
        return Ok(None);
    }
    Ok(Some((gain, t, block, d)))
}

fn apply<T: Scalar>(
    qp: &GeneralQP<T>,
    x: &mut DVector<T>,
    g: &mut DVector<T>,
    set: &[usize],
    d: &[T],
    t: T,
    block: Option<usize>,
) {
    let mut delta = Vec::with_capacity(set.len());
    for (a, &i) in set.iter().enumerate() {
        let old = x[i];
        let mut new = old + t * d[a];
        if Some(i) == block || (qp.bounded[i] && new < T::zero()) {
            new = T::zero();
        }
        x[i] = new;
        delta.push(new - old);
    }
    for (a, &i) in set.iter().enumerate() {
        if delta[a] != T::zero() {
            g.axpy(delta[a], &qp.q.column(i), T::one());
        }
    }
}

/// Solve the sub-QP over `set` with the remaining coordinates held fixed.
/// Returns whether the point moved.
fn subproblem_step<T: Scalar>(
    qp: &GeneralQP<T>,
    x: &mut DVector<T>,
    g: &mut DVector<T>,
    set: &[usize],
    tol: T,
) -> Result<bool> {
    let k = set.len();
    let x_w = DVector::from_iterator(k, set.iter().map(|&i| x[i]));
    let q_ww = DMatrix::from_fn(k, k, |a, b| qp.q[(set[a], set[b])]);
    let g_w = DVector::from_iterator(k, set.iter().map(|&i| g[i]));
    let c_w = DMatrix::from_fn(qp.n_constraints(), k, |row, a| qp.c[(row, set[a])]);
    let sub = GeneralQP {
        f: &g_w - &q_ww * &x_w,
        d: &c_w * &x_w,
        q: q_ww,
        c: c_w,
        bounded: set.iter().map(|&i| qp.bounded[i]).collect(),
        constant: T::zero(),
        layout: None,
    };
    let before = sub.objective(&x_w);
    let (y, _, _) = active_set(&sub, x_w.clone(), tol.min(T::lit(1e-10)).max(T::eps() * T::lit(1e3)), 50 * k + 200)?;
    let after = sub.objective(&y);
    // near the optimum the decrease drops below objective round-off; accept an
    // exact sub-solve that still sharpens stationarity
    let sharper = || super::kkt_report(&sub, &y).residual() < T::lit(0.5) * super::kkt_report(&sub, &x_w).residual();
    let roundoff = T::eps() * T::lit(16.0) * (T::one() + before.abs());
    if !(after < before) && (y == x_w || !(after <= before + roundoff) || !sharper()) {
        return Ok(false);
    }
    for (a, &i) in set.iter().enumerate() {
        let delta = y[a] - x_w[a];
        if delta != T::zero() {
            x[i] = y[a];
            g.axpy(delta, &qp.q.column(i), T::one());
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::solve_dense_oracle;

    #[test]
    fn null_vectors_annihilate_columns() {
        let c = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 1.0, -1.0, 0.0, 1.0, -1.0, -2.0]);
        for set in [vec![0, 1, 2], vec![1, 2, 3], vec![0, 2, 3]] {
            let d = null_vector(&c, &set).unwrap();
            for row in 0..2 {
                let s: f64 = set.iter().zip(&d).map(|(&i, &v)| c[(row, i)] * v).sum();
                assert!(s.abs() < 1e-14);
            }
        }
        let c = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(null_vector(&c, &[0, 1]).unwrap(), vec![2.0, -1.0]);
        assert!(null_vector(&c, &[0, 1, 2]).is_none());
        assert!(null_vector(&c, &[2]).is_some());
    }

    #[test]
    fn matches_oracle_on_simplex_problem() {
        let n = 80;
        let q = DMatrix::from_fn(n, n, |i, j| if i == j { 2.0 } else { 1.0 / (1.0 + (i as f64 - j as f64).abs()) });
        let f = DVector::from_fn(n, |i, _| ((i * 7) % 11) as f64 / 11.0 - 0.5);
        let qp = GeneralQP::nonnegative(q, f, DMatrix::from_element(1, n, 1.0), DVector::from_element(1, 1.0)).unwrap();
        let cfg = SolverConfig { tol: 1e-9, working_set_size: 3, ..SolverConfig::default() };
        let a = solve_decomposition(&qp, &cfg).unwrap();
        let b = solve_dense_oracle(&qp, 1e-12).unwrap();
        assert!(a.converged);
        assert!((a.objective - b.objective).abs() < 1e-9, "{} vs {}", a.objective, b.objective);
    }
}
