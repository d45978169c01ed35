use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pin_twsvm::kernel::{gram, kernel_eval, KernelSpec};

fn points(seed: u64, n: usize, d: usize) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, d, |_, _| rng.random_range(-3.0..3.0))
}

#[test]
fn documented_values() {
    assert_eq!(kernel_eval(&KernelSpec::Linear, &[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
    for sigma in [0.1, 1.0, 7.5] {
        assert_eq!(kernel_eval(&KernelSpec::Rbf { sigma }, &[0.3, -2.0], &[0.3, -2.0]).unwrap(), 1.0);
    }
    // |x - z| = 2 at sigma 1
    let v = kernel_eval(&KernelSpec::Rbf { sigma: 1.0 }, &[0.0, 0.0], &[2.0, 0.0]).unwrap();
    assert!((v - (-2.0f64).exp()).abs() < 1e-15);
    assert!((v - 0.135335).abs() < 1e-6);
    assert!(kernel_eval(&KernelSpec::Linear, &[1.0], &[1.0, 2.0]).is_err());
    assert!(KernelSpec::<f64>::rbf(0.0).is_err());
}

#[test]
fn gram_of_identity_and_mismatch() {
    let eye = DMatrix::<f64>::identity(3, 3);
    assert_eq!(gram(&KernelSpec::Linear, &eye, &eye).unwrap(), eye);
    assert!(gram(&KernelSpec::Linear, &eye, &DMatrix::zeros(2, 2)).is_err());
}

#[test]
fn rbf_gram_is_psd() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (seed, sigma) in [(1, 0.3), (2, 1.0), (3, 4.0)] {
        let x = points(seed, 40, 3);
        let g = gram(&KernelSpec::Rbf { sigma }, &x, &x).unwrap();
        let n = g.nrows();
        for _ in 0..200 {
            let v = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)).normalize();
            assert!(v.dot(&(&g * &v)) >= -1e-8 * n as f64);
        }
    }
}

#[test]
fn f32_matches_f64() {
    let x = points(4, 10, 2);
    let g64 = gram(&KernelSpec::Rbf { sigma: 1.5 }, &x, &x).unwrap();
    let g32 = gram(&KernelSpec::Rbf { sigma: 1.5f32 }, &x.map(|v| v as f32), &x.map(|v| v as f32)).unwrap();
    assert!(g64.iter().zip(g32.iter()).all(|(a, b)| (a - *b as f64).abs() < 1e-5));
}

proptest! {
    #[test]
    fn gram_properties(seed in 0u64..10_000, p in 1usize..8, q in 1usize..8, sigma in 0.1f64..5.0) {
        let xa = points(seed, p, 3);
        let xb = points(seed + 1, q, 3);
        for spec in [KernelSpec::Linear, KernelSpec::Rbf { sigma }] {
            let ab = gram(&spec, &xa, &xb).unwrap();
            let ba = gram(&spec, &xb, &xa).unwrap();
            prop_assert_eq!(&ab, &ba.transpose());
            for i in 0..p {
                let one = gram(&spec, &xa.rows(i, 1).clone_owned(), &xb).unwrap();
                for j in 0..q {
                    let direct = kernel_eval(&spec, xa.row(i).transpose().as_slice(), xb.row(j).transpose().as_slice()).unwrap();
                    prop_assert_eq!(one[(0, j)], direct);
                    prop_assert_eq!(ab[(i, j)], direct);
                }
            }
        }
        let aa = gram(&KernelSpec::Rbf { sigma }, &xa, &xa).unwrap();
        for i in 0..p {
            prop_assert_eq!(aa[(i, i)], 1.0);
        }
    }
}
