use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{train_pin_twsvm, train_pin_twsvmpi, DistanceRule, Family, Model};
use crate::data::{partition_by_class, Dataset, Hyperparams};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::solver::SolverConfig;

/// One binary model per class, each trained on that class against the rest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MulticlassModel<T> {
    pub classes: Vec<i64>,
    pub models: Vec<Model<T>>,
}

impl<T: Scalar> MulticlassModel<T> {
    /// Class whose model gives the smallest relative distance `d+ / (d+ + d-)`;
    /// ties resolve to the lowest class id.
    pub fn predict(&self, x: &[T]) -> Result<i64> {
        let mut best: Option<(T, i64)> = None;
        for (&class, model) in self.classes.iter().zip(&self.models) {
            let (dp, dm) = model.distances(x)?;
            let total = dp + dm;
            let rel = if total > T::zero() { dp / total } else { T::lit(0.5) };
            if best.is_none_or(|(b, _)| rel < b) {
                best = Some((rel, class));
            }
        }
        best.map(|(_, c)| c).ok_or_else(|| Error::DegenerateModel("no class models".into()))
    }

    pub fn predict_batch(&self, x: &DMatrix<T>) -> Result<Vec<i64>> {
        let rows: Vec<Vec<T>> = x.row_iter().map(|r| r.iter().copied().collect()).collect();
        rows.par_iter().map(|r| self.predict(r)).collect()
    }

    pub fn set_distance_rule(&mut self, rule: DistanceRule) {
        self.models.iter_mut().for_each(|m| m.distance_rule = rule);
    }
}

/// One-vs-rest training. Uses the privileged trainer when the dataset carries
/// privileged features, otherwise the baseline.
pub fn train_multiclass<T: Scalar>(
    ds: &Dataset<T>,
    hp: &Hyperparams<T>,
    cfg: &SolverConfig<T>,
) -> Result<MulticlassModel<T>> {
    let family = if ds.privileged.is_some() { Family::PinTwsvmpi } else { Family::PinTwsvm };
    train_multiclass_with(ds, hp, cfg, family)
}

pub fn train_multiclass_with<T: Scalar>(
    ds: &Dataset<T>,
    hp: &Hyperparams<T>,
    cfg: &SolverConfig<T>,
    family: Family,
) -> Result<MulticlassModel<T>> {
    ds.validate()?;
    let classes = ds.classes();
    if classes.len() < 2 {
        return Err(Error::DegenerateDataset("at least two classes are required".into()));
    }
    for &c in &classes {
        let count = ds.labels.iter().filter(|&&l| l == c).count();
        if count < 2 {
            return Err(Error::DegenerateDataset(format!("class {c} has fewer than 2 samples")));
        }
    }
    let models = classes
        .par_iter()
        .map(|&c| {
            let part = partition_by_class(&ds.one_vs_rest(c))?;
            match family {
                Family::PinTwsvmpi => train_pin_twsvmpi(&part, hp, cfg),
                Family::PinTwsvm => train_pin_twsvm(&part, hp, cfg),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MulticlassModel { classes, models })
}
