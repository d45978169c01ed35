use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use pin_twsvm::data::{load_dataset, load_matrix, parse_matrix, DataFormat, Dataset, Hyperparams, Scaling};
use pin_twsvm::eval::cv::{kfold_cv, with_privileged, CvOptions, Grid, PrivilegedSource};
use pin_twsvm::eval::detection::{join_images, missrate_fppi_curve, parse_boxes, score_thresholds};
use pin_twsvm::eval::metrics::accuracy;
use pin_twsvm::kernel::KernelSpec;
use pin_twsvm::pca::{extract_privileged, fit_pca, Components, PcaBasis};
use pin_twsvm::solver::SolverConfig;
use pin_twsvm::trainer::{Classifier, DistanceRule, Family, FitOptions};
use pin_twsvm::Error;

use crate::args::{
    CvArgs, DataArgs, DetectArgs, ExtractArgs, FamilyArg, FormatArg, KernelArg, ModelArgs, PredictArgs, SolverArgs,
    TrainArgs,
};
use crate::{CliResult, Failure};

pub fn format(f: FormatArg) -> DataFormat {
    match f {
        FormatArg::Csv => DataFormat::Csv,
        FormatArg::Sparse => DataFormat::SparseIndex,
    }
}

pub fn family(f: FamilyArg) -> Family {
    match f {
        FamilyArg::PinTwsvmpi => Family::PinTwsvmpi,
        FamilyArg::PinTwsvm => Family::PinTwsvm,
    }
}

pub fn solver_config(s: &SolverArgs) -> CliResult<SolverConfig<f64>> {
    let cfg = SolverConfig { tol: s.tol, max_iter: s.max_iter, ..SolverConfig::default() };
    cfg.validate()?;
    Ok(cfg)
}

pub fn distance_rule(s: &str) -> CliResult<DistanceRule> {
    s.parse().map_err(|_| Failure::Usage(format!("unknown distance rule `{s}` (expected paper or euclidean)")))
}

pub fn components(s: &Option<String>) -> CliResult<Components<f64>> {
    match s {
        Some(s) => Ok(s.parse()?),
        None => Ok(Components::default()),
    }
}

fn single(name: &str, v: &Option<Vec<f64>>, default: f64) -> CliResult<f64> {
    match v.as_deref() {
        None => Ok(default),
        Some([x]) => Ok(*x),
        Some(_) => Err(Failure::Usage(format!("--{name} takes a single value here; grids are for `cv`"))),
    }
}

pub fn hyperparams(m: &ModelArgs, seed: u64) -> CliResult<Hyperparams<f64>> {
    let d = Hyperparams::<f64>::default();
    let kernel = match m.kernel {
        KernelArg::Linear => {
            if m.sigma.is_some() {
                return Err(Failure::Usage("--sigma needs --kernel rbf".into()));
            }
            KernelSpec::Linear
        }
        KernelArg::Rbf => KernelSpec::rbf(single("sigma", &m.sigma, 1.0)?)?,
    };
    let hp = Hyperparams {
        c1: single("c1", &m.c1, d.c1)?,
        c2: single("c2", &m.c2, d.c2)?,
        gamma: single("gamma", &m.gamma, d.gamma)?,
        tau: single("tau", &m.tau, d.tau)?,
        kernel,
        seed,
    };
    hp.validate(false)?;
    Ok(hp)
}

/// Listed values, or the default grid's values for flags that were not given.
pub fn grid(m: &ModelArgs) -> CliResult<Grid<f64>> {
    let rbf = m.kernel == KernelArg::Rbf;
    if !rbf && m.sigma.is_some() {
        return Err(Failure::Usage("--sigma needs --kernel rbf".into()));
    }
    let d = Grid::<f64>::default_for(rbf);
    let pick = |v: &Option<Vec<f64>>, dv: Vec<f64>| v.clone().unwrap_or(dv);
    Ok(Grid {
        c1: pick(&m.c1, d.c1),
        c2: pick(&m.c2, d.c2),
        gamma: pick(&m.gamma, d.gamma),
        tau: pick(&m.tau, d.tau),
        rbf,
        sigma: if rbf { pick(&m.sigma, d.sigma) } else { Vec::new() },
    })
}

pub fn write_text(path: Option<&Path>, text: &str) -> CliResult {
    match path {
        Some(p) => {
            std::fs::write(p, text).map_err(|source| Failure::Core(Error::Io { path: p.display().to_string(), source }))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Loads `--data` and resolves where privileged features come from.
fn load_with_source(d: &DataArgs, fam: Family, synthesize: bool) -> CliResult<(Dataset<f64>, PrivilegedSource<f64>)> {
    let mut ds: Dataset<f64> = load_dataset(&d.data, format(d.format))?;
    if let Some(cols) = &d.privileged_cols {
        ds = ds.split_privileged(cols)?;
    }
    if let Some(p) = &d.privileged_data {
        let m: DMatrix<f64> = load_matrix(p)?;
        ds = ds.with_privileged(m)?;
    }
    let given = ds.privileged.is_some();
    if d.pca_components.is_some() && given {
        return Err(Failure::Usage("--pca-components cannot be combined with given privileged features".into()));
    }
    let source = match fam {
        Family::PinTwsvm => PrivilegedSource::None,
        Family::PinTwsvmpi if given => PrivilegedSource::Given,
        Family::PinTwsvmpi if synthesize => PrivilegedSource::Pca(components(&d.pca_components)?),
        Family::PinTwsvmpi => PrivilegedSource::None,
    };
    Ok((ds, source))
}

pub fn train(a: TrainArgs) -> CliResult {
    let fam = family(a.model.family);
    let hp = hyperparams(&a.model, a.solver.seed)?;
    let cfg = solver_config(&a.solver)?;
    let rule = distance_rule(&a.model.distance_rule)?;
    let (ds, source) = load_with_source(&a.data, fam, true)?;
    let standardize = !a.data.no_standardize;
    let train_ds = with_privileged(&ds, source, standardize)?;
    let clf = Classifier::fit(&train_ds, &hp, &cfg, FitOptions { family: fam, standardize, distance_rule: rule })?;
    clf.save(&a.model_out)?;
    let preds = clf.predict_batch(&ds.features)?;
    println!("train_accuracy={}", accuracy(&preds, &ds.labels)?);
    for (i, m) in clf.models().iter().enumerate() {
        let d = &m.diagnostics;
        log::info!(
            "model {i}: iterations {:?}, kkt residual {:?}, duality gap {:?}",
            d.iterations,
            d.kkt_residual,
            d.duality_gap
        );
    }
    Ok(())
}

fn drop_cols(x: DMatrix<f64>, cols: &Option<Vec<usize>>) -> CliResult<DMatrix<f64>> {
    let Some(cols) = cols else { return Ok(x) };
    if let Some(&c) = cols.iter().find(|&&c| c >= x.ncols()) {
        return Err(Failure::Core(Error::DimensionMismatch { expected: c + 1, found: x.ncols() }));
    }
    let keep: Vec<usize> = (0..x.ncols()).filter(|c| !cols.contains(c)).collect();
    Ok(DMatrix::from_fn(x.nrows(), keep.len(), |i, j| x[(i, keep[j])]))
}

pub fn predict(a: PredictArgs) -> CliResult {
    let mut clf = Classifier::<f64>::load(&a.model)?;
    if let Some(r) = &a.distance_rule {
        clf.set_distance_rule(distance_rule(r)?);
    }
    let (x, labels) = if a.no_labels {
        if a.format != FormatArg::Csv {
            return Err(Failure::Usage("--no-labels reads plain CSV only".into()));
        }
        let text = std::fs::read_to_string(&a.data)
            .map_err(|source| Failure::Core(Error::Io { path: a.data.display().to_string(), source }))?;
        (parse_matrix::<f64>(&text)?, None)
    } else {
        let ds: Dataset<f64> = load_dataset(&a.data, format(a.format))?;
        (ds.features, Some(ds.labels))
    };
    let x = drop_cols(x, &a.privileged_cols)?;
    let preds = clf.predict_batch(&x)?;

    let mut out = String::new();
    match &clf {
        Classifier::Binary(m) => {
            out.push_str("row,prediction,d_pos,d_neg\n");
            for (i, (p, row)) in preds.iter().zip(x.row_iter()).enumerate() {
                let r: Vec<f64> = row.iter().copied().collect();
                let (dp, dn) = m.distances(&r)?;
                let _ = writeln!(out, "{i},{p},{dp},{dn}");
            }
        }
        Classifier::Multiclass(_) => {
            out.push_str("row,prediction\n");
            for (i, p) in preds.iter().enumerate() {
                let _ = writeln!(out, "{i},{p}");
            }
        }
    }
    write_text(a.out.as_deref(), &out)?;
    if let Some(labels) = labels {
        let line = format!("accuracy={}", accuracy(&preds, &labels)?);
        if a.out.is_some() {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
    }
    Ok(())
}

pub fn cv(a: CvArgs) -> CliResult {
    let fam = family(a.model.family);
    let cfg = solver_config(&a.solver)?;
    let rule = distance_rule(&a.model.distance_rule)?;
    let grid = grid(&a.model)?;
    let (ds, source) = load_with_source(&a.data, fam, !a.no_privileged)?;
    let opts = CvOptions {
        folds: a.folds,
        family: fam,
        privileged: source,
        standardize: !a.data.no_standardize,
        distance_rule: rule,
        tuning_fraction: 0.1,
        seed: a.solver.seed,
    };
    let report = kfold_cv(&ds, &grid, &cfg, &opts)?;
    write_text(a.out.as_deref(), &report.to_csv(a.timing))?;
    if a.out.is_some() {
        println!("mean_accuracy={} std_accuracy={}", report.mean_accuracy, report.std_accuracy);
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct BasisFile {
    format: String,
    scaling: Option<Scaling<f64>>,
    basis: PcaBasis<f64>,
}

const BASIS_FORMAT: &str = "pin-twsvm-pca-basis";

pub fn extract_pi(a: ExtractArgs) -> CliResult {
    let ds: Dataset<f64> = load_dataset(&a.data, format(a.format))?;
    let file = match &a.basis {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|source| Failure::Core(Error::Io { path: p.display().to_string(), source }))?;
            let f: BasisFile =
                serde_json::from_str(&text).map_err(|e| Failure::Core(Error::Serialization(e.to_string())))?;
            if f.format != BASIS_FORMAT {
                return Err(Failure::Core(Error::Serialization("not a pca basis file".into())));
            }
            f
        }
        None => {
            let scaling = if a.no_standardize { None } else { Some(Scaling::fit(&ds.features)?) };
            let x = match &scaling {
                Some(s) => s.apply(&ds.features)?,
                None => ds.features.clone(),
            };
            let basis = fit_pca(&x, components(&a.pca_components)?)?;
            BasisFile { format: BASIS_FORMAT.into(), scaling, basis }
        }
    };
    let x = match &file.scaling {
        Some(s) => s.apply(&ds.features)?,
        None => ds.features.clone(),
    };
    let z = extract_privileged(&x, &file.basis)?;
    let mut out = (1..=z.ncols()).map(|j| format!("pc{j}")).collect::<Vec<_>>().join(",");
    out.push('\n');
    for row in z.row_iter() {
        out.push_str(&row.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    write_text(Some(&a.out), &out)?;
    let json = serde_json::to_string_pretty(&file).map_err(|e| Failure::Core(Error::Serialization(e.to_string())))?;
    write_text(Some(&a.basis_out), &json)?;
    println!("components={} explained_variance={:?}", file.basis.k(), file.basis.explained_variance);
    Ok(())
}

pub fn detect_eval(a: DetectArgs) -> CliResult {
    let read = |p: &Path| {
        std::fs::read_to_string(p).map_err(|source| Failure::Core(Error::Io { path: p.display().to_string(), source }))
    };
    let dets = parse_boxes(&read(&a.detections)?)?;
    let gts = parse_boxes(&read(&a.ground_truth)?)?;
    let images: Vec<_> = join_images(dets, gts).into_iter().map(|(_, im)| im).collect();
    let thresholds = a.thresholds.clone().unwrap_or_else(|| score_thresholds(&images));
    let curve = missrate_fppi_curve(&images, &thresholds, a.overlap)?;
    let mut out = String::from("threshold,miss_rate,fppi,tp,fp,fn\n");
    for p in &curve {
        let _ = writeln!(out, "{},{},{},{},{},{}", p.threshold, p.miss_rate, p.fppi, p.tp, p.fp, p.fn_);
    }
    write_text(a.out.as_deref(), &out)
}
