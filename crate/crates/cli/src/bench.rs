use std::fmt::Write as _;
use std::time::Instant;

use pin_twsvm::data::{load_dataset, partition_by_class, Dataset, Hyperparams};
use pin_twsvm::dual::{assemble_pin_twsvmpi_dual, Which};
use pin_twsvm::eval::cv::{kfold_cv, with_privileged, CvOptions, PrivilegedSource};
use pin_twsvm::eval::metrics::{accuracy, mean, std_dev};
use pin_twsvm::solver::{solve_decomposition, solve_dense_oracle, SolverConfig};
use pin_twsvm::synth::{flip_labels, gaussian_blobs, two_blobs};
use pin_twsvm::trainer::{Classifier, Family, FitOptions};
use pin_twsvm::Error;

use crate::args::{BenchArgs, Suite};
use crate::commands::{components, distance_rule, grid, hyperparams, solver_config, write_text};
use crate::{CliResult, Failure};

#[derive(Clone, Copy)]
struct Method {
    name: &'static str,
    family: Family,
    /// `None` keeps the configured tau.
    tau: Option<f64>,
}

const METHODS: [Method; 3] = [
    Method { name: "pin-twsvmpi", family: Family::PinTwsvmpi, tau: None },
    Method { name: "pin-twsvm", family: Family::PinTwsvm, tau: None },
    Method { name: "twsvm-tau0", family: Family::PinTwsvm, tau: Some(0.0) },
];

struct Ctx {
    hp: Hyperparams<f64>,
    cfg: SolverConfig<f64>,
    fit: FitOptions,
    privileged: PrivilegedSource<f64>,
}

impl Ctx {
    fn method_hp(&self, m: Method) -> Hyperparams<f64> {
        Hyperparams { tau: m.tau.unwrap_or(self.hp.tau), ..self.hp }
    }

    /// Test accuracy and training seconds of one method on one split.
    fn run(&self, m: Method, train: &Dataset<f64>, test: &Dataset<f64>) -> CliResult<(f64, f64)> {
        let source = if m.family == Family::PinTwsvmpi { self.privileged } else { PrivilegedSource::None };
        let start = Instant::now();
        let train = with_privileged(train, source, self.fit.standardize)?;
        let clf = Classifier::fit(&train, &self.method_hp(m), &self.cfg, FitOptions { family: m.family, ..self.fit })?;
        let secs = start.elapsed().as_secs_f64();
        let preds = clf.predict_batch(&test.features)?;
        Ok((accuracy(&preds, &test.labels)?, secs))
    }

    /// Like `run`, but a fit the solver cannot produce becomes `None` so one
    /// seed does not abort a whole table.
    fn try_run(&self, m: Method, train: &Dataset<f64>, test: &Dataset<f64>) -> CliResult<Option<(f64, f64)>> {
        match self.run(m, train, test) {
            Ok(r) => Ok(Some(r)),
            Err(Failure::Core(e)) if is_fit_failure(&e) => {
                log::warn!("{}: {e}", m.name);
                Ok(None)
            }
            Err(e) => Err(e),
        }
    }
}

fn is_fit_failure(e: &Error) -> bool {
    matches!(
        e,
        Error::DegenerateModel(_)
            | Error::NotConverged { .. }
            | Error::Singular(_)
            | Error::Infeasible(_)
            | Error::Unbounded
            | Error::NotPositiveSemidefinite { .. }
    )
}

fn synthetic(ctx: &Ctx, seeds: u64, sep: f64) -> CliResult<String> {
    let mut out =
        String::from("method,tau,n_train,n_test,seeds,failed,mean_accuracy,std_accuracy,mean_train_seconds\n");
    for m in METHODS {
        let (mut acc, mut secs, mut failed) = (Vec::new(), Vec::new(), 0);
        for s in 0..seeds {
            let train = two_blobs(200, sep, 2 * s)?;
            let test = two_blobs(200, sep, 2 * s + 1)?;
            match ctx.try_run(m, &train, &test)? {
                Some((a, t)) => {
                    acc.push(a);
                    secs.push(t);
                }
                None => failed += 1,
            }
        }
        let _ = writeln!(
            out,
            "{},{},200,200,{seeds},{failed},{},{},{:.6}",
            m.name,
            ctx.method_hp(m).tau,
            mean(&acc),
            std_dev(&acc),
            mean(&secs)
        );
    }
    Ok(out)
}

/// Training labels flipped at each rate, scored on clean test sets.
fn noise(ctx: &Ctx, seeds: u64, rates: &[f64], sep: f64) -> CliResult<String> {
    let mut out = String::from("flip_rate,method,tau,seeds,failed,mean_accuracy,std_accuracy\n");
    for &rate in rates {
        for m in METHODS {
            let (mut acc, mut failed) = (Vec::new(), 0);
            for s in 0..seeds {
                let clean = two_blobs(200, sep, 1000 + 2 * s)?;
                let train = flip_labels(&clean, rate, 5000 + s)?;
                let test = two_blobs(400, sep, 1001 + 2 * s)?;
                match ctx.try_run(m, &train, &test)? {
                    Some((a, _)) => acc.push(a),
                    None => failed += 1,
                }
            }
            let _ = writeln!(
                out,
                "{rate},{},{},{seeds},{failed},{},{}",
                m.name,
                ctx.method_hp(m).tau,
                mean(&acc),
                std_dev(&acc)
            );
        }
    }
    Ok(out)
}

/// Decomposition against the dense oracle on one privileged dual with `m`
/// samples per class.
fn speed(ctx: &Ctx, m: usize) -> CliResult<String> {
    let centers = [vec![1.0, 1.0, 0.5, 0.5], vec![-1.0, -1.0, -0.5, -0.5]];
    let ds: Dataset<f64> = gaussian_blobs(&centers, &[1, -1], m, 1.0, ctx.hp.seed)?;
    let part = partition_by_class(&ds.split_privileged(&[2, 3])?)?;
    let hp = Hyperparams { tau: if ctx.hp.tau > 0.0 { ctx.hp.tau } else { 0.5 }, ..ctx.hp };
    let qp = assemble_pin_twsvmpi_dual(Which::Class1, &part, &hp)?;

    let start = Instant::now();
    let dec = solve_decomposition(&qp, &ctx.cfg)?;
    let t_dec = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let ora = solve_dense_oracle(&qp, 1e-9)?;
    let t_ora = start.elapsed().as_secs_f64();

    let mut out = String::from("solver,m1,m2,n,seconds,objective,kkt_residual,converged\n");
    for (name, sol, t) in [("decomposition", &dec, t_dec), ("oracle", &ora, t_ora)] {
        let _ = writeln!(
            out,
            "{name},{m},{m},{},{t:.6},{},{:e},{}",
            qp.n(),
            sol.objective,
            sol.kkt_residual,
            sol.converged
        );
    }
    let _ = writeln!(out, "ratio_oracle_over_decomposition,{m},{m},{},{:.6},,,", qp.n(), t_ora / t_dec.max(1e-12));
    Ok(out)
}

fn uci(ctx: &Ctx, a: &BenchArgs) -> CliResult<String> {
    if a.data.is_empty() {
        return Err(Failure::Usage("the uci suite needs --data".into()));
    }
    let grid = grid(&a.model)?;
    let mut out = String::from("dataset,method,folds,mean_accuracy,std_accuracy,mean_f1,seconds\n");
    for path in &a.data {
        let ds: Dataset<f64> = load_dataset(path, pin_twsvm::data::DataFormat::Csv)?;
        let name = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
        for m in METHODS {
            let mut g = grid.clone();
            if let Some(t) = m.tau {
                g.tau = vec![t];
            }
            let opts = CvOptions {
                folds: a.folds,
                family: m.family,
                privileged: if m.family == Family::PinTwsvmpi { ctx.privileged } else { PrivilegedSource::None },
                standardize: true,
                distance_rule: ctx.fit.distance_rule,
                tuning_fraction: 0.1,
                seed: ctx.hp.seed,
            };
            let start = Instant::now();
            let r = kfold_cv(&ds, &g, &ctx.cfg, &opts)?;
            let secs = start.elapsed().as_secs_f64();
            let _ = writeln!(
                out,
                "{name},{},{},{},{},{},{secs:.3}",
                m.name, a.folds, r.mean_accuracy, r.std_accuracy, r.mean_f1
            );
        }
    }
    Ok(out)
}

pub fn run(a: BenchArgs) -> CliResult {
    if a.flip_rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
        return Err(Failure::Usage("flip rates must lie in [0, 1]".into()));
    }
    if !(a.separation >= 0.0 && a.separation.is_finite()) {
        return Err(Failure::Usage("separation must be a finite value >= 0".into()));
    }
    let multi = |v: &Option<Vec<f64>>| v.as_ref().is_some_and(|v| v.len() > 1);
    let fixed = if a.suite.iter().any(|s| *s != Suite::Uci)
        && (multi(&a.model.c1)
            || multi(&a.model.c2)
            || multi(&a.model.gamma)
            || multi(&a.model.tau)
            || multi(&a.model.sigma))
    {
        return Err(Failure::Usage("grids apply to the uci suite only".into()));
    } else if a.suite.iter().all(|s| *s == Suite::Uci) {
        Hyperparams::default()
    } else {
        hyperparams(&a.model, a.solver.seed)?
    };
    let ctx = Ctx {
        hp: Hyperparams { seed: a.solver.seed, ..fixed },
        cfg: solver_config(&a.solver)?,
        fit: FitOptions {
            family: Family::PinTwsvmpi,
            standardize: false,
            distance_rule: distance_rule(&a.model.distance_rule)?,
        },
        privileged: PrivilegedSource::Pca(components(&a.pca_components)?),
    };
    if let Some(dir) = &a.out_dir {
        std::fs::create_dir_all(dir)
            .map_err(|source| Failure::Core(Error::Io { path: dir.display().to_string(), source }))?;
    }
    for suite in &a.suite {
        let (name, table) = match suite {
            Suite::Synthetic => ("synthetic", synthetic(&ctx, a.seeds, a.separation)?),
            Suite::Noise => ("noise", noise(&ctx, a.seeds, &a.flip_rates, a.separation)?),
            Suite::Speed => ("speed", speed(&ctx, a.speed_m)?),
            Suite::Uci => ("uci", uci(&ctx, &a)?),
        };
        match &a.out_dir {
            Some(dir) => write_text(Some(&dir.join(format!("{name}.csv"))), &table)?,
            None => print!("# {name}\n{table}\n"),
        }
    }
    Ok(())
}
