//! Training of the privileged pinball twin SVM and of the plain pinball twin
//! SVM baseline, with primal recovery from the dual multipliers.

mod classifier;
mod loss;
mod model;
mod multiclass;

pub use classifier::{Classifier, FitOptions};
pub use loss::pinball_loss;
pub use model::{DistanceRule, Family, Model, Plane, TrainDiagnostics, Variant, MODEL_FORMAT, MODEL_VERSION};
pub use multiclass::{train_multiclass, train_multiclass_with, MulticlassModel};

use nalgebra::{DMatrix, DVector};

use crate::data::{ClassPartition, Hyperparams};
use crate::dual::{
    assemble_pin_twsvm_primal, baseline_dual, default_ridge, kernel_blocks, linear_blocks, privileged_dual,
    regularized_inverse, Blocks, Which,
};
use crate::error::{Error, Result};
use crate::kernel::{gram, KernelSpec};
use crate::qp::{DualSolution, GeneralQP};
use crate::scalar::{from_usize, Scalar};
use crate::solver::{solve, SolverConfig};

/// One side of a trained privileged model, oriented so that the side's own class is `A`.
#[derive(Clone, Debug)]
pub struct SideSolution<T> {
    pub plane: Plane<T>,
    pub correcting: Plane<T>,
    pub dual: DualSolution<T>,
    /// Primal objective at the recovered variables.
    pub primal_objective: T,
    /// Negated minimization objective plus the dropped constant.
    pub dual_objective: T,
}

impl<T: Scalar> SideSolution<T> {
    pub fn duality_gap(&self) -> T {
        self.primal_objective - self.dual_objective
    }
}

fn converged<T: Scalar>(sol: DualSolution<T>) -> Result<DualSolution<T>> {
    if sol.converged {
        Ok(sol)
    } else {
        Err(Error::NotConverged { iterations: sol.iterations, residual: sol.kkt_residual.to_f64_lossy() })
    }
}

fn mean<T: Scalar>(v: &DVector<T>) -> T {
    v.sum() / from_usize::<T>(v.len().max(1))
}

/// Primal variables from the multipliers of one privileged dual. With
/// `augmented`, the last column of every block is the unit column of the
/// kernel path and is dropped from the normals.
pub(crate) fn recover_side<T: Scalar>(
    blk: &Blocks<T>,
    qp: &GeneralQP<T>,
    sol: DualSolution<T>,
    c: T,
    gamma: T,
    tau: T,
    augmented: bool,
) -> SideSolution<T> {
    let m1 = blk.own.nrows();
    let m2 = blk.other.nrows();
    let x = &sol.x;
    let a1 = x.rows(0, m1).clone_owned();
    let a2 = x.rows(m1, m1).clone_owned();
    let a3 = x.rows(2 * m1, m2).clone_owned();
    let a4 = x.rows(2 * m1 + m2, m2).clone_owned();
    let r = &a4 - &a3;
    let s = &a3 + &a4 / tau - DVector::from_element(m2, c);

    let trim = |m: &DMatrix<T>| {
        if augmented {
            m.columns(0, m.ncols() - 1).clone_owned()
        } else {
            m.clone()
        }
    };
    let (own, other, own_s, other_s) = (trim(&blk.own), trim(&blk.other), trim(&blk.own_star), trim(&blk.other_star));

    let w = other.tr_mul(&r) - own.tr_mul(&a1);
    let ws = (other_s.tr_mul(&s) - own_s.tr_mul(&a2)) / gamma;
    let b = mean(&(&a1 - &own * &w));
    let bs = mean(&(&a2 / gamma - &own_s * &ws));

    let half = T::lit(0.5);
    let eta = &own * &w + DVector::from_element(m1, b);
    let eta_s = &own_s * &ws + DVector::from_element(m1, bs);
    let xi = &other_s * &ws + DVector::from_element(m2, bs);
    let primal = half * w.norm_squared()
        + half * gamma * ws.norm_squared()
        + half * eta.norm_squared()
        + half * gamma * eta_s.norm_squared()
        + c * xi.sum();
    let dual_objective = -(sol.objective + qp.constant);
    SideSolution {
        plane: Plane { w: w.iter().copied().collect(), b },
        correcting: Plane { w: ws.iter().copied().collect(), b: bs },
        dual: sol,
        primal_objective: primal,
        dual_objective,
    }
}

/// Assembles, solves and recovers one side of the privileged model.
pub fn solve_privileged_side<T: Scalar>(
    which: Which,
    part: &ClassPartition<T>,
    hp: &Hyperparams<T>,
    cfg: &SolverConfig<T>,
    kernel_path: bool,
) -> Result<SideSolution<T>> {
    hp.validate(true)?;
    let blk = if kernel_path { kernel_blocks(which, part, &hp.kernel)? } else { linear_blocks(which, part)? };
    let c = match which {
        Which::Class1 => hp.c1,
        Which::Class2 => hp.c2,
    };
    let qp = privileged_dual(&blk, c, hp.gamma, hp.tau);
    let sol = converged(solve(&qp, cfg)?)?;
    Ok(recover_side(&blk, &qp, sol, c, hp.gamma, hp.tau, kernel_path))
}

/// Rejects normals at round-off level relative to the intercept; such planes
/// are the constant solution `w = 0` and leave distances undefined.
fn check_planes<T: Scalar>(planes: &[Plane<T>; 2]) -> Result<()> {
    for (k, p) in planes.iter().enumerate() {
        let sq = p.norm_squared();
        let floor = T::eps() * (T::one() + p.b.abs()).powi(2);
        if !(sq > floor) || !sq.is_finite_value() {
            return Err(Error::DegenerateModel(format!("plane {} has a vanishing normal", k + 1)));
        }
    }
    Ok(())
}

fn check_partition<T: Scalar>(part: &ClassPartition<T>) -> Result<()> {
    if part.m1() == 0 || part.m2() == 0 {
        return Err(Error::DegenerateDataset("both classes need at least one sample".into()));
    }
    Ok(())
}

fn train_privileged<T: Scalar>(
    part: &ClassPartition<T>,
    hp: &Hyperparams<T>,
    cfg: &SolverConfig<T>,
    kernel_path: bool,
) -> Result<Model<T>> {
    hp.validate(true)?;
    cfg.validate()?;
    check_partition(part)?;
    part.privileged()?;
    let (s1, s2) = rayon::join(
        || solve_privileged_side(Which::Class1, part, hp, cfg, kernel_path),
        || solve_privileged_side(Which::Class2, part, hp, cfg, kernel_path),
    );
    let (s1, s2) = (s1?, s2?);
    let planes = [s1.plane.clone(), s2.plane.negated()];
    check_planes(&planes)?;
    let (variant, support, support_star) = if kernel_path {
        (Variant::Kernel, Some(part.stacked()), Some(part.stacked_privileged()?))
    } else {
        (Variant::Linear, None, None)
    };
    Ok(Model {
        family: Family::PinTwsvmpi,
        variant,
        kernel: hp.kernel,
        support,
        support_star,
        planes,
        correcting: Some([s1.correcting.clone(), s2.correcting.clone()]),
        hyperparams: *hp,
        distance_rule: DistanceRule::default(),
        scaling: None,
        feature_dim: part.a.ncols(),
        diagnostics: TrainDiagnostics {
            iterations: [s1.dual.iterations, s2.dual.iterations],
            kkt_residual: [s1.dual.kkt_residual.to_f64_lossy(), s2.dual.kkt_residual.to_f64_lossy()],
            duality_gap: Some([s1.duality_gap().to_f64_lossy(), s2.duality_gap().to_f64_lossy()]),
        },
    })
}

/// Trains the privileged model. A linear kernel selects the primal-weight
/// path; any other kernel the Gram-matrix path.
pub fn train_pin_twsvmpi<T: Scalar>(
    part: &ClassPartition<T>,
    hp: &Hyperparams<T>,
    cfg: &SolverConfig<T>,
) -> Result<Model<T>> {
    let kernel_path = !matches!(hp.kernel, KernelSpec::Linear);
    train_privileged(part, hp, cfg, kernel_path)
}

/// Gram-matrix path regardless of the kernel, including the linear kernel.
pub fn train_pin_twsvmpi_kernel<T: Scalar>(
    part: &ClassPartition<T>,
    hp: &Hyperparams<T>,
    cfg: &SolverConfig<T>,
) -> Result<Model<T>> {
    train_privileged(part, hp, cfg, true)
}

/// `(w, b)` of the class-1 baseline plane from the dual multipliers.
fn baseline_plane_from_dual<T: Scalar>(
    own: &DMatrix<T>,
    other: &DMatrix<T>,
    x: &DVector<T>,
    ridge: T,
) -> Result<Plane<T>> {
    let m2 = other.nrows();
    let inv = regularized_inverse(own, ridge)?;
    let g = other.clone().insert_column(other.ncols(), T::one());
    let diff = x.rows(0, m2) - x.rows(m2, m2);
    let z = -(inv * g.tr_mul(&diff));
    let p = z.len();
    Ok(Plane { w: z.rows(0, p - 1).iter().copied().collect(), b: z[p - 1] })
}

struct BaselineSide<T> {
    plane: Plane<T>,
    iterations: usize,
    kkt: T,
}

fn baseline_side<T: Scalar>(
    own: &DMatrix<T>,
    other: &DMatrix<T>,
    c: T,
    hp: &Hyperparams<T>,
    cfg: &SolverConfig<T>,
    ridge: Option<T>,
    force_primal: bool,
) -> Result<BaselineSide<T>> {
    if force_primal || hp.tau <= T::zero() {
        let qp = assemble_pin_twsvm_primal(own, other, c, hp.tau)?;
        let sol = converged(solve(&qp, cfg)?)?;
        let p = own.ncols() + 1;
        let plane = Plane { w: sol.x.rows(0, p - 1).iter().copied().collect(), b: sol.x[p - 1] };
        return Ok(BaselineSide { plane, iterations: sol.iterations, kkt: sol.kkt_residual });
    }
    let ridge = ridge.unwrap_or_else(|| default_ridge(own));
    let qp = baseline_dual(own, other, c, hp.tau, ridge)?;
    let sol = converged(solve(&qp, cfg)?)?;
    let plane = baseline_plane_from_dual(own, other, &sol.x, ridge)?;
    Ok(BaselineSide { plane, iterations: sol.iterations, kkt: sol.kkt_residual })
}

/// Options for the baseline trainer.
#[derive(Clone, Copy, Debug, Default)]
pub struct BaselineOptions<T> {
    /// Ridge added to `H'H`; defaults to `1e-7 trace(H'H) / (d + 1)` per side.
    pub ridge: Option<T>,
    /// Solve the primal problem even when `tau > 0`.
    pub force_primal: bool,
}

/// Baseline pinball twin SVM. `tau = 0` has no dual and is solved in the primal.
pub fn train_pin_twsvm<T: Scalar>(
    part: &ClassPartition<T>,
    hp: &Hyperparams<T>,
    cfg: &SolverConfig<T>,
) -> Result<Model<T>> {
    train_pin_twsvm_with(part, hp, cfg, BaselineOptions::default())
}

pub fn train_pin_twsvm_with<T: Scalar>(
    part: &ClassPartition<T>,
    hp: &Hyperparams<T>,
    cfg: &SolverConfig<T>,
    opts: BaselineOptions<T>,
) -> Result<Model<T>> {
    hp.validate(false)?;
    cfg.validate()?;
    check_partition(part)?;
    let kernel_path = !matches!(hp.kernel, KernelSpec::Linear);
    let (own_a, own_b, support) = if kernel_path {
        let x = part.stacked();
        (gram(&hp.kernel, &part.a, &x)?, gram(&hp.kernel, &part.b, &x)?, Some(x))
    } else {
        (part.a.clone(), part.b.clone(), None)
    };
    let (s1, s2) = rayon::join(
        || baseline_side(&own_a, &own_b, hp.c1, hp, cfg, opts.ridge, opts.force_primal),
        || baseline_side(&own_b, &own_a, hp.c2, hp, cfg, opts.ridge, opts.force_primal),
    );
    let (s1, s2) = (s1?, s2?);
    let planes = [s1.plane, s2.plane.negated()];
    check_planes(&planes)?;
    Ok(Model {
        family: Family::PinTwsvm,
        variant: if kernel_path { Variant::Kernel } else { Variant::Linear },
        kernel: hp.kernel,
        support,
        support_star: None,
        planes,
        correcting: None,
        hyperparams: *hp,
        distance_rule: DistanceRule::default(),
        scaling: None,
        feature_dim: part.a.ncols(),
        diagnostics: TrainDiagnostics {
            iterations: [s1.iterations, s2.iterations],
            kkt_residual: [s1.kkt.to_f64_lossy(), s2.kkt.to_f64_lossy()],
            duality_gap: None,
        },
    })
}
