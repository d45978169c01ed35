//! Stratified k-fold cross-validation with per-fold grid tuning.

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::metrics::{accuracy, f1_score, macro_f1, mean, std_dev};
use crate::data::{Dataset, Hyperparams, Scaling};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::pca::{extract_privileged, fit_pca, Components};
use crate::scalar::Scalar;
use crate::solver::SolverConfig;
use crate::trainer::{Classifier, DistanceRule, Family, FitOptions};

/// Cartesian hyperparameter grid. `sigma` is ignored for the linear kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    pub c1: Vec<T>,
    pub c2: Vec<T>,
    pub gamma: Vec<T>,
    pub tau: Vec<T>,
    pub rbf: bool,
    pub sigma: Vec<T>,
}

impl<T: Scalar> Grid<T> {
    pub fn single(hp: &Hyperparams<T>) -> Self {
        Grid {
            c1: vec![hp.c1],
            c2: vec![hp.c2],
            gamma: vec![hp.gamma],
            tau: vec![hp.tau],
            rbf: hp.kernel.sigma().is_some(),
            sigma: hp.kernel.sigma().into_iter().collect(),
        }
    }

    /// `c1, c2` in `{0.1, 1, 10}`, `gamma = 1`, `tau` in `{0.1, 0.25, 0.5, 0.75, 1}`,
    /// and for rbf `sigma` in `{0.5, 1, 2, 4}`.
    pub fn default_for(rbf: bool) -> Self {
        let v = |xs: &[f64]| xs.iter().map(|&x| T::lit(x)).collect::<Vec<T>>();
        Grid {
            c1: v(&[0.1, 1.0, 10.0]),
            c2: v(&[0.1, 1.0, 10.0]),
            gamma: v(&[1.0]),
            tau: v(&[0.1, 0.25, 0.5, 0.75, 1.0]),
            rbf,
            sigma: if rbf { v(&[0.5, 1.0, 2.0, 4.0]) } else { Vec::new() },
        }
    }

    /// Points in `c1, c2, gamma, tau, sigma` order, the last varying fastest.
    pub fn points(&self, seed: u64) -> Result<Vec<Hyperparams<T>>> {
        let kernels: Vec<KernelSpec<T>> = if self.rbf {
            self.sigma.iter().map(|&s| KernelSpec::rbf(s)).collect::<Result<_>>()?
        } else {
            vec![KernelSpec::Linear]
        };
        let mut out = Vec::new();
        for &c1 in &self.c1 {
            for &c2 in &self.c2 {
                for &gamma in &self.gamma {
                    for &tau in &self.tau {
                        for &kernel in &kernels {
                            out.push(Hyperparams { c1, c2, gamma, tau, kernel, seed });
                        }
                    }
                }
            }
        }
        if out.is_empty() {
            return Err(Error::invalid("hyperparameter grid is empty"));
        }
        Ok(out)
    }
}

/// Where training rows get their privileged features from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PrivilegedSource<T> {
    None,
    /// `Dataset::privileged` as loaded.
    Given,
    /// Principal components fitted on each training portion.
    Pca(Components<T>),
}

#[derive(Clone, Copy, Debug)]
pub struct CvOptions<T> {
    pub folds: usize,
    pub family: Family,
    pub privileged: PrivilegedSource<T>,
    pub standardize: bool,
    pub distance_rule: DistanceRule,
    pub tuning_fraction: f64,
    pub seed: u64,
}

impl<T: Scalar> Default for CvOptions<T> {
    fn default() -> Self {
        CvOptions {
            folds: 5,
            family: Family::PinTwsvmpi,
            privileged: PrivilegedSource::Pca(Components::default()),
            standardize: true,
            distance_rule: DistanceRule::default(),
            tuning_fraction: 0.1,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub accuracy: f64,
    pub f1: f64,
    pub c1: f64,
    pub c2: f64,
    pub gamma: f64,
    pub tau: f64,
    pub sigma: Option<f64>,
    /// Accuracy of the chosen point on the tuning subset; absent with a one-point grid.
    pub tuning_accuracy: Option<f64>,
    pub train_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CvReport {
    pub folds: Vec<FoldResult>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub mean_f1: f64,
    pub std_f1: f64,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl CvReport {
    fn from_folds(folds: Vec<FoldResult>) -> Self {
        let acc: Vec<f64> = folds.iter().map(|f| f.accuracy).collect();
        let f1: Vec<f64> = folds.iter().map(|f| f.f1).collect();
        CvReport {
            mean_accuracy: mean(&acc),
            std_accuracy: std_dev(&acc),
            mean_f1: mean(&f1),
            std_f1: std_dev(&f1),
            folds,
        }
    }

    /// Comma-separated table with one row per fold plus `mean` and `std` rows.
    /// Timing is wall-clock and varies run to run, so it is opt-in.
    pub fn to_csv(&self, with_timing: bool) -> String {
        let mut s = String::from("fold,n_train,n_test,accuracy,f1,c1,c2,gamma,tau,sigma,tuning_accuracy");
        if with_timing {
            s.push_str(",train_seconds");
        }
        s.push('\n');
        for f in &self.folds {
            let _ = write!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{}",
                f.fold,
                f.n_train,
                f.n_test,
                f.accuracy,
                f.f1,
                f.c1,
                f.c2,
                f.gamma,
                f.tau,
                fmt_opt(f.sigma),
                fmt_opt(f.tuning_accuracy)
            );
            if with_timing {
                let _ = write!(s, ",{:.6}", f.train_seconds);
            }
            s.push('\n');
        }
        let pad = if with_timing { ",,,,,,," } else { ",,,,,," };
        let _ = writeln!(s, "mean,,,{},{}{pad}", self.mean_accuracy, self.mean_f1);
        let _ = writeln!(s, "std,,,{},{}{pad}", self.std_accuracy, self.std_f1);
        s
    }
}

/// Fold id of every sample. Each class is shuffled and dealt round-robin, the
/// dealing position carrying over from one class to the next.
pub fn stratified_folds(labels: &[i64], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::invalid(format!("need at least 2 folds, got {k}")));
    }
    if labels.len() < k {
        return Err(Error::invalid(format!("{} samples cannot fill {k} folds", labels.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut classes: Vec<i64> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut fold = vec![0; labels.len()];
    let mut next = 0;
    for c in classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            fold[i] = next % k;
            next += 1;
        }
    }
    Ok(fold)
}

fn distinct(labels: &[i64]) -> Vec<i64> {
    let mut c = labels.to_vec();
    c.sort_unstable();
    c.dedup();
    c
}

fn fold_seed(seed: u64, fold: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(fold as u64 + 1)
}

/// Attaches privileged features to a training set according to `source`.
pub fn with_privileged<T: Scalar>(
    ds: &Dataset<T>,
    source: PrivilegedSource<T>,
    standardize: bool,
) -> Result<Dataset<T>> {
    let mut out = ds.clone();
    match source {
        PrivilegedSource::None => out.privileged = None,
        PrivilegedSource::Given => {
            if out.privileged.is_none() {
                return Err(Error::invalid("dataset has no privileged features"));
            }
        }
        PrivilegedSource::Pca(k) => {
            let x = if standardize { Scaling::fit(&ds.features)?.apply(&ds.features)? } else { ds.features.clone() };
            let basis = fit_pca(&x, k)?;
            out.privileged = Some(extract_privileged(&x, &basis)?);
        }
    }
    Ok(out)
}

struct Evaluation {
    accuracy: f64,
    f1: f64,
}

fn evaluate<T: Scalar>(clf: &Classifier<T>, test: &Dataset<T>, classes: &[i64]) -> Result<Evaluation> {
    let preds = clf.predict_batch(&test.features)?;
    let f1 =
        if classes == [-1, 1] { f1_score(&preds, &test.labels, 1)? } else { macro_f1(&preds, &test.labels, classes)? };
    Ok(Evaluation { accuracy: accuracy(&preds, &test.labels)?, f1 })
}

fn sigma_key<T: Scalar>(hp: &Hyperparams<T>) -> f64 {
    hp.kernel.sigma().map_or(0.0, |s| s.to_f64_lossy())
}

/// Best grid index by tuning accuracy; ties go to smaller `c1 + c2`, then smaller
/// sigma, then earlier grid position. Points that failed to train are skipped.
fn select<T: Scalar>(points: &[Hyperparams<T>], scores: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        let Some(s) = *s else { continue };
        let better = match best {
            None => true,
            Some(b) => {
                let sb = scores[b].expect("selected points have scores");
                let (ci, cb) =
                    ((points[i].c1 + points[i].c2).to_f64_lossy(), (points[b].c1 + points[b].c2).to_f64_lossy());
                s > sb || (s == sb && (ci < cb || (ci == cb && sigma_key(&points[i]) < sigma_key(&points[b]))))
            }
        };
        if better {
            best = Some(i);
        }
    }
    best
}

fn tune<T: Scalar>(
    train: &Dataset<T>,
    points: &[Hyperparams<T>],
    cfg: &SolverConfig<T>,
    opts: &CvOptions<T>,
    fit: FitOptions,
    seed: u64,
) -> Result<(Hyperparams<T>, Option<f64>)> {
    if points.len() == 1 {
        return Ok((points[0], None));
    }
    let parts = ((1.0 / opts.tuning_fraction).round() as usize).max(2);
    let assign = stratified_folds(&train.labels, parts.min(train.len()), seed)?;
    let tune_idx: Vec<usize> = (0..train.len()).filter(|&i| assign[i] == 0).collect();
    let fit_idx: Vec<usize> = (0..train.len()).filter(|&i| assign[i] != 0).collect();
    let tune_set = train.subset(&tune_idx);
    let fit_set = with_privileged(&train.subset(&fit_idx), opts.privileged, opts.standardize)?;
    let classes = distinct(&train.labels);
    let scores: Vec<Option<f64>> = points
        .par_iter()
        .map(|hp| match Classifier::fit(&fit_set, hp, cfg, fit).and_then(|clf| evaluate(&clf, &tune_set, &classes)) {
            Ok(e) => Some(e.accuracy),
            Err(e) => {
                log::debug!("grid point {hp:?} skipped: {e}");
                None
            }
        })
        .collect();
    let best =
        select(points, &scores).ok_or_else(|| Error::invalid("no grid point could be trained on the tuning split"))?;
    Ok((points[best], scores[best]))
}

/// Stratified k-fold cross-validation. Inside every fold a stratified tuning
/// subset of the training portion picks the grid point, after which the model
/// is refit on the whole training portion and scored on the held-out fold.
pub fn kfold_cv<T: Scalar>(
    ds: &Dataset<T>,
    grid: &Grid<T>,
    cfg: &SolverConfig<T>,
    opts: &CvOptions<T>,
) -> Result<CvReport> {
    ds.validate()?;
    cfg.validate()?;
    if !(opts.tuning_fraction > 0.0 && opts.tuning_fraction < 1.0) {
        return Err(Error::invalid("tuning fraction must lie in (0, 1)"));
    }
    let k = opts.folds;
    let assign = stratified_folds(&ds.labels, k, opts.seed)?;
    let classes = distinct(&ds.labels);
    let points = grid.points(opts.seed)?;
    let family = match opts.privileged {
        PrivilegedSource::None => Family::PinTwsvm,
        _ => opts.family,
    };
    let fit = FitOptions { family, standardize: opts.standardize, distance_rule: opts.distance_rule };

    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..k)
        .map(|f| {
            ((0..ds.len()).filter(|&i| assign[i] != f).collect(), (0..ds.len()).filter(|&i| assign[i] == f).collect())
        })
        .collect();
    for (f, (train_idx, test_idx)) in splits.iter().enumerate() {
        let train_classes = distinct(&train_idx.iter().map(|&i| ds.labels[i]).collect::<Vec<_>>());
        let test_classes = distinct(&test_idx.iter().map(|&i| ds.labels[i]).collect::<Vec<_>>());
        if train_classes != classes || test_classes.len() < 2 {
            return Err(Error::DegenerateDataset(format!("fold {f} does not contain both classes")));
        }
    }

    let folds = splits
        .par_iter()
        .enumerate()
        .map(|(f, (train_idx, test_idx))| {
            let train = ds.subset(train_idx);
            let test = ds.subset(test_idx);
            let start = Instant::now();
            let (hp, tuning_accuracy) = tune(&train, &points, cfg, opts, fit, fold_seed(opts.seed, f))?;
            let train_full = with_privileged(&train, opts.privileged, opts.standardize)?;
            let clf = Classifier::fit(&train_full, &hp, cfg, fit)?;
            let train_seconds = start.elapsed().as_secs_f64();
            let e = evaluate(&clf, &test, &classes)?;
            log::info!("fold {f}: accuracy {:.4} in {train_seconds:.3}s", e.accuracy);
            Ok(FoldResult {
                fold: f,
                n_train: train.len(),
                n_test: test.len(),
                accuracy: e.accuracy,
                f1: e.f1,
                c1: hp.c1.to_f64_lossy(),
                c2: hp.c2.to_f64_lossy(),
                gamma: hp.gamma.to_f64_lossy(),
                tau: hp.tau.to_f64_lossy(),
                sigma: hp.kernel.sigma().map(|s| s.to_f64_lossy()),
                tuning_accuracy,
                train_seconds,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CvReport::from_folds(folds))
}
