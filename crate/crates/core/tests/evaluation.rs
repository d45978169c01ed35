use std::collections::BTreeSet;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pin_twsvm::data::{Dataset, Hyperparams};
use pin_twsvm::eval::cv::{kfold_cv, stratified_folds, CvOptions, Grid, PrivilegedSource};
use pin_twsvm::eval::detection::{bbox_overlap, match_detections, missrate_fppi_curve, BBox, ImageBoxes};
use pin_twsvm::eval::metrics::{accuracy, f1_score};
use pin_twsvm::pca::Components;
use pin_twsvm::solver::SolverConfig;
use pin_twsvm::synth::two_blobs;
use pin_twsvm::Error;

fn bx(x0: f64, y0: f64, x1: f64, y1: f64) -> BBox {
    BBox::new(x0, y0, x1, y1).unwrap()
}

#[test]
fn overlap_examples() {
    let a = bx(0.0, 0.0, 2.0, 2.0);
    assert_eq!(bbox_overlap(&a, &a), 1.0);
    assert_eq!(bbox_overlap(&a, &bx(5.0, 5.0, 6.0, 6.0)), 0.0);
    assert_eq!(bbox_overlap(&a, &bx(2.0, 0.0, 3.0, 2.0)), 0.0);
    assert_eq!(bbox_overlap(&a, &bx(1.0, 0.0, 3.0, 2.0)), 2.0 / 6.0);
}

#[test]
fn matching_examples() {
    let g = bx(0.0, 0.0, 2.0, 2.0);
    let m = match_detections(&[g.scored(0.9)], &[g], 0.5);
    assert_eq!((m.tp, m.fp, m.fn_), (1, 0, 0));
    assert_eq!(m.pairs, vec![(0, 0)]);

    let m = match_detections(&[g.scored(0.9), bx(0.0, 0.0, 2.0, 2.1).scored(0.8)], &[g], 0.5);
    assert_eq!((m.tp, m.fp, m.fn_), (1, 1, 0));

    // 2 x 2 gt against a 2 x 1.6 det inside it: overlap 0.8; shifted det below gives 0.4
    let low = bx(0.0, 0.0, 2.0, 0.8);
    assert!((bbox_overlap(&low, &g) - 0.4).abs() < 1e-15);
    let m = match_detections(&[low.scored(1.0)], &[g], 0.5);
    assert_eq!((m.tp, m.fp, m.fn_), (0, 1, 1));
}

#[test]
fn higher_score_claims_the_ground_truth_first() {
    let g = bx(0.0, 0.0, 2.0, 2.0);
    let weak = bx(0.0, 0.0, 2.0, 1.8).scored(0.3);
    let strong = bx(0.1, 0.0, 2.0, 2.0).scored(0.9);
    let m = match_detections(&[weak, strong], &[g], 0.5);
    assert_eq!(m.pairs, vec![(1, 0)]);
}

#[test]
fn curve_examples() {
    let g = bx(0.0, 0.0, 2.0, 2.0);
    let perfect = vec![
        ImageBoxes { detections: vec![g.scored(0.9)], ground_truth: vec![g] },
        ImageBoxes { detections: vec![bx(5.0, 5.0, 7.0, 7.0).scored(0.8)], ground_truth: vec![bx(5.0, 5.0, 7.0, 7.0)] },
    ];
    for p in missrate_fppi_curve(&perfect, &[0.1, 0.5, 0.8], 0.5).unwrap() {
        assert_eq!((p.miss_rate, p.fppi), (0.0, 0.0));
    }
    let silent = vec![ImageBoxes { detections: vec![], ground_truth: vec![g, bx(3.0, 3.0, 4.0, 4.0)] }];
    for p in missrate_fppi_curve(&silent, &[0.0, 0.5], 0.5).unwrap() {
        assert_eq!((p.miss_rate, p.fppi), (1.0, 0.0));
    }
}

fn random_box(rng: &mut ChaCha8Rng) -> BBox {
    let x0 = rng.random_range(0.0..10.0);
    let y0 = rng.random_range(0.0..10.0);
    bx(x0, y0, x0 + rng.random_range(0.5..4.0), y0 + rng.random_range(0.5..4.0))
}

fn random_images(seed: u64) -> Vec<ImageBoxes> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..rng.random_range(1..5))
        .map(|_| {
            let gts: Vec<BBox> = (0..rng.random_range(1..5)).map(|_| random_box(&mut rng)).collect();
            let mut dets: Vec<BBox> =
                (0..rng.random_range(0..8)).map(|_| random_box(&mut rng).scored(rng.random())).collect();
            for g in &gts {
                if rng.random_bool(0.6) {
                    dets.push(BBox { x_min: g.x_min + 0.1, ..*g }.scored(rng.random()));
                }
            }
            ImageBoxes { detections: dets, ground_truth: gts }
        })
        .collect()
}

#[test]
fn lowering_threshold_never_decreases_fppi() {
    for seed in 0..100 {
        let images = random_images(seed);
        let thresholds: Vec<f64> = (0..=20).map(|i| 1.0 - i as f64 / 20.0).collect();
        let curve = missrate_fppi_curve(&images, &thresholds, 0.5).unwrap();
        let mut by_threshold = curve.clone();
        by_threshold.sort_by(|a, b| b.threshold.total_cmp(&a.threshold));
        for w in by_threshold.windows(2) {
            assert!(w[1].fppi >= w[0].fppi, "seed {seed}: {:?} then {:?}", w[0], w[1]);
            assert!(w[1].miss_rate <= w[0].miss_rate, "seed {seed}");
        }
        assert!(curve.windows(2).all(|w| w[0].fppi <= w[1].fppi));
    }
}

#[test]
fn curve_without_ground_truth_is_an_error() {
    let im = ImageBoxes { detections: vec![bx(0.0, 0.0, 1.0, 1.0).scored(0.5)], ground_truth: vec![] };
    assert!(missrate_fppi_curve(&[im], &[0.1], 0.5).is_err());
}

proptest! {
    #[test]
    fn overlap_is_symmetric(seed in 0u64..100_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = (random_box(&mut rng), random_box(&mut rng));
        let ab = bbox_overlap(&a, &b);
        prop_assert_eq!(ab, bbox_overlap(&b, &a));
        prop_assert!((0.0..=1.0).contains(&ab));
    }

    #[test]
    fn matching_counts_balance(seed in 0u64..100_000) {
        for im in random_images(seed) {
            let m = match_detections(&im.detections, &im.ground_truth, 0.5);
            prop_assert_eq!(m.tp + m.fn_, im.ground_truth.len());
            prop_assert_eq!(m.tp + m.fp, im.detections.len());
            let gts: BTreeSet<usize> = m.pairs.iter().map(|p| p.1).collect();
            prop_assert_eq!(gts.len(), m.pairs.len());
        }
    }
}

#[test]
fn f1_with_equal_precision_and_recall() {
    let preds = [1, 1, -1, -1, 1, -1];
    let truth = [1, -1, 1, -1, 1, 1];
    // tp 2, fp 1, fn 2 -> P = 2/3, R = 1/2
    let p: f64 = 2.0 / 3.0;
    let r: f64 = 0.5;
    assert!((f1_score(&preds, &truth, 1).unwrap() - 2.0 * p * r / (p + r)).abs() < 1e-15);
    assert_eq!(f1_score(&[1, -1, 1, -1], &[1, 1, -1, -1], 1).unwrap(), 0.5);
    assert!(matches!(accuracy(&[1], &[1, 1]), Err(Error::DimensionMismatch { .. })));
}

proptest! {
    #[test]
    fn folds_partition_the_indices(labels in prop::collection::vec(prop::sample::select(vec![1i64, -1, 2]), 10..80), k in 2usize..8, seed in 0u64..1000) {
        let folds = stratified_folds(&labels, k, seed).unwrap();
        let mut seen = BTreeSet::new();
        for f in 0..k {
            for i in (0..labels.len()).filter(|&i| folds[i] == f) {
                prop_assert!(seen.insert(i));
            }
        }
        prop_assert_eq!(seen.len(), labels.len());
        let sizes: Vec<usize> = (0..k).map(|f| folds.iter().filter(|&&x| x == f).count()).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        prop_assert_eq!(folds, stratified_folds(&labels, k, seed).unwrap());
    }
}

fn blobs_cv(seed: u64, grid: &Grid<f64>) -> pin_twsvm::eval::cv::CvReport {
    let ds: Dataset<f64> = two_blobs(200, 8.0, seed).unwrap();
    let opts = CvOptions { standardize: false, seed, ..CvOptions::default() };
    kfold_cv(&ds, grid, &SolverConfig::default(), &opts).unwrap()
}

#[test]
fn blobs_cross_validate_cleanly() {
    let grid = Grid { c1: vec![0.5, 1.0], tau: vec![0.5], ..Grid::single(&Hyperparams::default()) };
    let r = blobs_cv(3, &grid);
    assert_eq!(r.folds.len(), 5);
    assert!(r.mean_accuracy >= 0.99, "{}", r.mean_accuracy);
    let acc: Vec<f64> = r.folds.iter().map(|f| f.accuracy).collect();
    assert!((r.mean_accuracy - acc.iter().sum::<f64>() / 5.0).abs() <= 1e-12);
    let var = acc.iter().map(|a| (a - r.mean_accuracy).powi(2)).sum::<f64>() / 4.0;
    assert!((r.std_accuracy - var.sqrt()).abs() <= 1e-12);
    assert!(r.folds.iter().all(|f| f.n_test == 40 && f.n_train == 160));
    assert!(r.folds.iter().all(|f| f.tuning_accuracy.is_some()));
    assert_eq!(r.to_csv(false), blobs_cv(3, &grid).to_csv(false));
}

#[test]
fn fold_missing_a_class_is_rejected() {
    let x = DMatrix::from_fn(12, 2, |i, j| (i * 2 + j) as f64);
    let mut labels = vec![1; 6];
    labels.extend([-1; 6]);
    labels[0] = 2;
    let ds = Dataset::new(x, labels).unwrap();
    let opts = CvOptions { privileged: PrivilegedSource::Pca(Components::Count(1)), ..CvOptions::default() };
    let err = kfold_cv(&ds, &Grid::single(&Hyperparams::default()), &SolverConfig::default(), &opts).unwrap_err();
    assert!(matches!(err, Error::DegenerateDataset(_)), "{err:?}");
    assert!(kfold_cv(
        &ds,
        &Grid::single(&Hyperparams::default()),
        &SolverConfig::default(),
        &CvOptions { folds: 1, ..opts }
    )
    .is_err());
}
