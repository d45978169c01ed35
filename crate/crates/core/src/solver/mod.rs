//! Solvers for [`GeneralQP`]: a working-set decomposition method and a dense
//! active-set oracle, sharing one KKT measure.

mod decomposition;
mod elimination;
mod oracle;
mod reduced;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qp::{BlockLayout, DualSolution, GeneralQP};
use crate::scalar::{from_usize, Scalar};

pub use decomposition::solve_decomposition;
pub use oracle::solve_dense_oracle;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig<T> {
    /// Projected-KKT tolerance.
    pub tol: T,
    /// Working-set steps for the decomposition solver.
    pub max_iter: usize,
    pub working_set_size: usize,
    /// Problems with fewer variables than this go straight to the dense oracle.
    pub oracle_threshold: usize,
    /// Emit per-iteration diagnostics through `log`.
    pub verbose: bool,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        SolverConfig { tol: T::lit(1e-6), max_iter: 100_000, working_set_size: 3, oracle_threshold: 64, verbose: false }
    }
}

impl<T: Scalar> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > T::zero()) {
            return Err(Error::invalid("solver tolerance must be > 0"));
        }
        if self.working_set_size < 3 {
            return Err(Error::invalid("working set size must be at least 3"));
        }
        Ok(())
    }
}

/// Residuals of the KKT system at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct KktReport<T> {
    /// `|Cx - D|_inf`
    pub equality: T,
    /// Smallest bounded coordinate (zero when none are bounded).
    pub min_bounded: T,
    /// Infinity norm of the projected reduced gradient.
    pub stationarity: T,
    /// `max_i x_i * max(0, reduced_gradient_i)` over bounded coordinates.
    pub complementarity: T,
    /// Equality multiplier estimate.
    pub multipliers: DVector<T>,
}

impl<T: Scalar> KktReport<T> {
    /// Single scalar summary used as `DualSolution::kkt_residual`.
    pub fn residual(&self) -> T {
        self.equality.max(self.stationarity).max(-self.min_bounded)
    }
}

/// Least-squares multiplier estimate over the free and strictly positive
/// coordinates, refined by also fitting bound coordinates whose reduced gradient is negative.
pub(crate) fn estimate_multipliers<T: Scalar>(qp: &GeneralQP<T>, x: &DVector<T>, g: &DVector<T>) -> DVector<T> {
    let r = qp.n_constraints();
    if r == 0 {
        return DVector::zeros(0);
    }
    let n = qp.n();
    let mut member: Vec<bool> = (0..n).map(|i| !qp.bounded[i] || x[i] > T::zero()).collect();
    let mut lambda = DVector::zeros(r);
    for _ in 0..8 {
        let mut normal = DMatrix::<T>::zeros(r, r);
        let mut rhs = DVector::<T>::zeros(r);
        for i in (0..n).filter(|&i| member[i]) {
            let col = qp.c.column(i);
            normal.ger(T::one(), &col, &col, T::one());
            rhs.axpy(-g[i], &col, T::one());
        }
        lambda = solve_small_symmetric(normal, rhs);
        let rho = reduced_gradient(qp, g, &lambda);
        let mut changed = false;
        for i in 0..n {
            if !member[i] && rho[i] < T::zero() {
                member[i] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    lambda
}

fn solve_small_symmetric<T: Scalar>(normal: DMatrix<T>, rhs: DVector<T>) -> DVector<T> {
    let r = rhs.len();
    let scale = normal.amax().max(T::one());
    if let Some(ch) = nalgebra::Cholesky::new(normal.clone()) {
        let sol = ch.solve(&rhs);
        if sol.iter().all(|v| v.is_finite_value()) {
            return sol;
        }
    }
    let svd = normal.svd(true, true);
    svd.solve(&rhs, T::eps() * from_usize::<T>(r.max(1)) * scale * T::lit(100.0)).unwrap_or_else(|_| DVector::zeros(r))
}

pub(crate) fn reduced_gradient<T: Scalar>(qp: &GeneralQP<T>, g: &DVector<T>, lambda: &DVector<T>) -> DVector<T> {
    if lambda.is_empty() {
        g.clone()
    } else {
        g + qp.c.tr_mul(lambda)
    }
}

/// Per-coordinate projected-gradient violation: `|rho_i|` for free coordinates,
/// `|x_i - max(0, x_i - rho_i)|` for bounded ones.
pub(crate) fn violation<T: Scalar>(bounded: bool, x: T, rho: T) -> T {
    if !bounded || rho <= x {
        rho.abs()
    } else {
        x.abs()
    }
}

pub fn kkt_report<T: Scalar>(qp: &GeneralQP<T>, x: &DVector<T>) -> KktReport<T> {
    let g = qp.gradient(x);
    kkt_report_with_gradient(qp, x, &g)
}

pub(crate) fn kkt_report_with_gradient<T: Scalar>(qp: &GeneralQP<T>, x: &DVector<T>, g: &DVector<T>) -> KktReport<T> {
    let lambda = estimate_multipliers(qp, x, g);
    let rho = reduced_gradient(qp, g, &lambda);
    let mut stationarity = T::zero();
    let mut complementarity = T::zero();
    let mut min_bounded: Option<T> = None;
    for i in 0..qp.n() {
        stationarity = stationarity.max(violation(qp.bounded[i], x[i], rho[i]));
        if qp.bounded[i] {
            complementarity = complementarity.max(x[i].max(T::zero()) * rho[i].max(T::zero()));
            min_bounded = Some(min_bounded.map_or(x[i], |m: T| m.min(x[i])));
        }
    }
    KktReport {
        equality: qp.equality_residual(x),
        min_bounded: min_bounded.unwrap_or_else(T::zero),
        stationarity,
        complementarity,
        multipliers: lambda,
    }
}

/// Feasible starting point. Uses the block layout when present, otherwise a
/// phase-1 bound-constrained least-squares solve.
pub fn initial_feasible_point<T: Scalar>(qp: &GeneralQP<T>) -> Result<DVector<T>> {
    qp.validate()?;
    if let Some(layout) = &qp.layout {
        let x = layout_start(layout);
        let scale = T::one() + qp.d.amax();
        if qp.equality_residual(&x) <= T::lit(1e-9) * scale {
            return Ok(x);
        }
    }
    oracle::phase_one(qp)
}

fn layout_start<T: Scalar>(layout: &BlockLayout<T>) -> DVector<T> {
    match *layout {
        BlockLayout::PrivilegedDual { m1, m2, c, tau } => {
            let mut x = DVector::zeros(2 * m1 + 2 * m2);
            let a1 = from_usize::<T>(m2) * c * tau / from_usize::<T>(m1);
            x.rows_mut(0, m1).fill(a1);
            x.rows_mut(2 * m1 + m2, m2).fill(c * tau);
            x
        }
        BlockLayout::BaselineDual { m2, c, .. } => {
            let mut x = DVector::zeros(2 * m2);
            x.rows_mut(0, m2).fill(c);
            x
        }
        BlockLayout::PrimalPinball { p, m2, tau } => {
            // w = 0, b = 0 gives u = 1, so xi = 1, s1 = xi - u = 0, s2 = xi + tau u
            let mut x = DVector::zeros(p + 3 * m2);
            x.rows_mut(p, m2).fill(T::one());
            x.rows_mut(p + 2 * m2, m2).fill(T::one() + tau);
            x
        }
    }
}

/// Decomposition for large problems, dense oracle below `cfg.oracle_threshold`
/// or when the constraint count exceeds what the working set can carry.
pub fn solve<T: Scalar>(qp: &GeneralQP<T>, cfg: &SolverConfig<T>) -> Result<DualSolution<T>> {
    cfg.validate()?;
    if qp.n() < cfg.oracle_threshold || qp.n_constraints() + 1 > cfg.working_set_size {
        solve_dense_oracle(qp, cfg.tol.min(T::lit(1e-9)).max(T::eps() * T::lit(1e3)))
    } else {
        solve_decomposition(qp, cfg)
    }
}

pub(crate) fn finish<T: Scalar>(qp: &GeneralQP<T>, x: DVector<T>, iterations: usize, tol: T) -> DualSolution<T> {
    let report = kkt_report(qp, &x);
    let residual = report.residual();
    DualSolution { objective: qp.objective(&x), kkt_residual: residual, iterations, converged: residual <= tol, x }
}
