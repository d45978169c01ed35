use nalgebra::{DMatrix, DVector};
use pin_twsvm::data::{ClassPartition, Hyperparams};
use pin_twsvm::dual::{assemble_pin_twsvm_dual, assemble_pin_twsvmpi_dual, assemble_pin_twsvmpi_kernel_dual, Which};
use pin_twsvm::kernel::{gram, KernelSpec};
use pin_twsvm::qp::GeneralQP;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-2.0..2.0))
}

fn random_partition(rng: &mut ChaCha8Rng, m1: usize, m2: usize, d: usize, ds: usize) -> ClassPartition<f64> {
    ClassPartition {
        a: random_matrix(rng, m1, d),
        b: random_matrix(rng, m2, d),
        a_star: Some(random_matrix(rng, m1, ds)),
        b_star: Some(random_matrix(rng, m2, ds)),
        a_index: (0..m1).collect(),
        b_index: (m1..m1 + m2).collect(),
    }
}

/// Written dual objective evaluated term by term from the data blocks,
/// with the constant `c^2/(2g) e'N*N*'e` removed.
#[allow(clippy::too_many_arguments)]
fn direct_dual(
    own: &DMatrix<f64>,
    other: &DMatrix<f64>,
    own_s: &DMatrix<f64>,
    other_s: &DMatrix<f64>,
    c: f64,
    g: f64,
    tau: f64,
    x: &DVector<f64>,
) -> f64 {
    let m1 = own.nrows();
    let m2 = other.nrows();
    let a1 = x.rows(0, m1).clone_owned();
    let a2 = x.rows(m1, m1).clone_owned();
    let a3 = x.rows(2 * m1, m2).clone_owned();
    let a4 = x.rows(2 * m1 + m2, m2).clone_owned();
    let r = &a4 - &a3;
    let s = &a3 + &a4 / tau - DVector::from_element(m2, c);
    let bb = other * other.transpose();
    let aa = own * own.transpose();
    let ba = other * own.transpose();
    let bsbs = other_s * other_s.transpose();
    let asas = own_s * own_s.transpose();
    let bsas = other_s * own_s.transpose();
    let e2 = DVector::from_element(m2, 1.0);
    let constant = c * c / (2.0 * g) * e2.dot(&(&bsbs * &e2));
    0.5 * r.dot(&(&bb * &r)) + 0.5 * a1.dot(&(&aa * &a1)) - r.dot(&(&ba * &a1))
        + 0.5 * a1.norm_squared()
        + s.dot(&(&bsbs * &s)) / (2.0 * g)
        + a2.dot(&(&asas * &a2)) / (2.0 * g)
        - s.dot(&(&bsas * &a2)) / g
        + a2.norm_squared() / (2.0 * g)
        + e2.dot(&r)
        - constant
}

fn random_feasible(rng: &mut ChaCha8Rng, m1: usize, m2: usize, c: f64, tau: f64) -> DVector<f64> {
    let mut x = DVector::from_fn(2 * m1 + 2 * m2, |i, _| {
        if i < 2 * m1 {
            rng.random_range(-3.0..3.0)
        } else {
            rng.random_range(0.0..3.0)
        }
    });
    let s3: f64 = x.rows(2 * m1, m2).sum();
    let s4: f64 = x.rows(2 * m1 + m2, m2).sum();
    let rest1: f64 = x.rows(1, m1 - 1).sum();
    let rest2: f64 = x.rows(m1 + 1, m1 - 1).sum();
    x[0] = s4 - s3 - rest1;
    x[m1] = -c * m2 as f64 + s3 + s4 / tau - rest2;
    x
}

fn assert_equivalent(
    qp: &GeneralQP<f64>,
    blocks: [&DMatrix<f64>; 4],
    c: f64,
    hp: &Hyperparams<f64>,
    rng: &mut ChaCha8Rng,
) {
    let layout = qp.layout.clone().unwrap();
    let sizes = layout.block_sizes();
    let (m1, m2) = (sizes[0], sizes[2]);
    for _ in 0..1000 {
        let x = random_feasible(rng, m1, m2, c, hp.tau);
        assert!(qp.equality_residual(&x) < 1e-10);
        let got = qp.objective(&x);
        let want = direct_dual(blocks[0], blocks[1], blocks[2], blocks[3], c, hp.gamma, hp.tau, &x);
        assert!((got - want).abs() <= 1e-9 * (1.0 + want.abs()), "{got} vs {want}");
    }
}

fn augmented(k: DMatrix<f64>) -> DMatrix<f64> {
    let n = k.ncols();
    k.insert_column(n, 1.0)
}

#[test]
fn linear_dual_matches_direct_objective_both_classes() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..5 {
        let part = random_partition(&mut rng, 3 + trial, 4, 3, 2);
        let hp = Hyperparams { c1: 0.7, c2: 1.9, gamma: 0.4 + trial as f64, tau: 0.3, ..Hyperparams::default() };
        let (a_s, b_s) = part.privileged().unwrap();
        let q1 = assemble_pin_twsvmpi_dual(Which::Class1, &part, &hp).unwrap();
        assert_equivalent(&q1, [&part.a, &part.b, a_s, b_s], hp.c1, &hp, &mut rng);
        let q2 = assemble_pin_twsvmpi_dual(Which::Class2, &part, &hp).unwrap();
        assert_equivalent(&q2, [&part.b, &part.a, b_s, a_s], hp.c2, &hp, &mut rng);
    }
}

#[test]
fn kernel_dual_matches_direct_objective_both_classes() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for spec in [KernelSpec::Linear, KernelSpec::Rbf { sigma: 1.3 }] {
        let part = random_partition(&mut rng, 4, 5, 2, 3);
        let hp = Hyperparams { c1: 1.2, c2: 0.5, gamma: 2.0, tau: 0.8, kernel: spec, ..Hyperparams::default() };
        let x = part.stacked();
        let xs = part.stacked_privileged().unwrap();
        let (a_s, b_s) = part.privileged().unwrap();
        let m = augmented(gram(&spec, &part.a, &x).unwrap());
        let n = augmented(gram(&spec, &part.b, &x).unwrap());
        let ms = augmented(gram(&spec, a_s, &xs).unwrap());
        let ns = augmented(gram(&spec, b_s, &xs).unwrap());
        let q1 = assemble_pin_twsvmpi_kernel_dual(Which::Class1, &part, &hp).unwrap();
        assert_equivalent(&q1, [&m, &n, &ms, &ns], hp.c1, &hp, &mut rng);
        let q2 = assemble_pin_twsvmpi_kernel_dual(Which::Class2, &part, &hp).unwrap();
        assert_equivalent(&q2, [&n, &m, &ns, &ms], hp.c2, &hp, &mut rng);
    }
}

#[test]
fn tiny_instance_constraints_and_constant() {
    let part: ClassPartition<f64> = ClassPartition {
        a: DMatrix::from_element(1, 1, 1.0),
        b: DMatrix::from_element(1, 1, -1.0),
        a_star: Some(DMatrix::from_element(1, 1, 0.5)),
        b_star: Some(DMatrix::from_element(1, 1, 0.2)),
        a_index: vec![0],
        b_index: vec![1],
    };
    let hp = Hyperparams { c1: 1.0, gamma: 1.0, tau: 0.5, ..Hyperparams::default() };
    let qp = assemble_pin_twsvmpi_dual(Which::Class1, &part, &hp).unwrap();
    assert_eq!(qp.c, DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 1.0, -1.0, 0.0, 1.0, -1.0, -2.0]));
    assert_eq!(qp.d.as_slice(), &[0.0, -1.0]);
    // constant c^2/(2g) |B*'e|^2 = 0.02
    assert!((qp.constant - 0.02).abs() < 1e-15);
    assert!(qp.asymmetry() <= 1e-10);

    // B* = 0 annihilates every privileged block: only the identity blocks and the
    // linear term survive
    let zero = ClassPartition {
        a: DMatrix::zeros(1, 1),
        b: DMatrix::zeros(1, 1),
        a_star: Some(DMatrix::zeros(1, 1)),
        b_star: Some(DMatrix::zeros(1, 1)),
        a_index: vec![0],
        b_index: vec![1],
    };
    let qp = assemble_pin_twsvmpi_dual(Which::Class1, &zero, &hp).unwrap();
    assert_eq!(qp.q, DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 0.0, 0.0])));
    assert_eq!(qp.f.as_slice(), &[0.0, 0.0, -1.0, 1.0]);
    assert_eq!(qp.constant, 0.0);
}

#[test]
fn second_rhs_entry_is_minus_c_m2() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for m2 in 1..6 {
        let part = random_partition(&mut rng, 2, m2, 2, 2);
        let hp = Hyperparams { c1: 0.3, c2: 4.0, ..Hyperparams::default() };
        let q1 = assemble_pin_twsvmpi_dual(Which::Class1, &part, &hp).unwrap();
        assert_eq!(q1.d[1], -0.3 * m2 as f64);
        let q2 = assemble_pin_twsvmpi_dual(Which::Class2, &part, &hp).unwrap();
        assert_eq!(q2.d[1], -4.0 * 2.0);
    }
}

#[test]
fn assembled_q_is_symmetric_and_psd() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let part = random_partition(&mut rng, 6, 5, 3, 2);
    let hp = Hyperparams { gamma: 0.05, tau: 0.1, kernel: KernelSpec::Rbf { sigma: 0.7 }, ..Hyperparams::default() };
    for qp in [
        assemble_pin_twsvmpi_dual(Which::Class1, &part, &hp).unwrap(),
        assemble_pin_twsvmpi_kernel_dual(Which::Class2, &part, &hp).unwrap(),
        assemble_pin_twsvm_dual(Which::Class1, &part, &hp, 1e-8).unwrap(),
    ] {
        assert!(qp.asymmetry() <= 1e-10);
        let n = qp.n();
        for _ in 0..100 {
            let v = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)).normalize();
            assert!(v.dot(&(&qp.q * &v)) >= -1e-8);
        }
    }
}

#[test]
fn swapping_roles_maps_class1_onto_class2() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let part = random_partition(&mut rng, 3, 4, 2, 2);
    let hp = Hyperparams { c1: 0.5, c2: 2.5, ..Hyperparams::default() };
    let swapped_hp = Hyperparams { c1: hp.c2, c2: hp.c1, ..hp };
    let q2 = assemble_pin_twsvmpi_dual(Which::Class2, &part, &hp).unwrap();
    let q1s = assemble_pin_twsvmpi_dual(Which::Class1, &part.swapped(), &swapped_hp).unwrap();
    assert_eq!(q2, q1s);
}

#[test]
fn duplicate_rows_are_tolerated() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut part = random_partition(&mut rng, 3, 3, 2, 2);
    let row = part.b.row(0).clone_owned();
    part.b.row_mut(1).copy_from(&row);
    let hp = Hyperparams { kernel: KernelSpec::Rbf { sigma: 1.0 }, ..Hyperparams::default() };
    let qp = assemble_pin_twsvmpi_kernel_dual(Which::Class1, &part, &hp).unwrap();
    assert_eq!(qp.layout.unwrap().block_sizes(), vec![3, 3, 3, 3]);
    assert!(qp.q.iter().all(|v| v.is_finite()));
}

#[test]
fn zero_tau_and_empty_class_are_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let part = random_partition(&mut rng, 2, 2, 2, 2);
    let hp = Hyperparams { tau: 0.0, ..Hyperparams::default() };
    assert!(assemble_pin_twsvmpi_dual(Which::Class1, &part, &hp).is_err());
    assert!(assemble_pin_twsvm_dual(Which::Class1, &part, &hp, 1e-6).is_err());
    let mut empty = part.clone();
    empty.b = DMatrix::zeros(0, 2);
    empty.b_star = Some(DMatrix::zeros(0, 2));
    assert!(assemble_pin_twsvmpi_dual(Which::Class1, &empty, &Hyperparams::default()).is_err());
}

#[test]
fn baseline_identity_inverse_and_ridge() {
    // A is orthogonal to e, so H'H = diag(1, 2)
    let s: f64 = std::f64::consts::FRAC_1_SQRT_2;
    let part = ClassPartition {
        a: DMatrix::from_row_slice(2, 1, &[s, -s]),
        b: DMatrix::from_row_slice(2, 1, &[1.0, 2.0]),
        a_star: None,
        b_star: None,
        a_index: vec![0, 1],
        b_index: vec![2, 3],
    };
    let hp = Hyperparams { c1: 1.0, tau: 0.5, ..Hyperparams::default() };
    let qp = assemble_pin_twsvm_dual(Which::Class1, &part, &hp, 0.0).unwrap();
    let g = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 1.0]);
    let inv = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.5]);
    let k = &g * inv * g.transpose();
    assert!((qp.q.view((0, 0), (2, 2)) - &k).amax() < 1e-12);
    assert!((qp.q.view((0, 2), (2, 2)) + &k).amax() < 1e-12);
    assert_eq!(qp.n_constraints(), 2);
    assert_eq!(qp.c[(0, 2)], 2.0);

    let flat = ClassPartition {
        a: DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]),
        b: DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
        ..part
    };
    let qp = assemble_pin_twsvm_dual(Which::Class1, &flat, &hp, 1e-6).unwrap();
    assert!(qp.q.iter().all(|v| v.is_finite()));
}
