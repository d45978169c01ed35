use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{train_multiclass_with, train_pin_twsvm, train_pin_twsvmpi, DistanceRule, Family, Model, MulticlassModel};
use crate::data::{partition_by_class, Dataset, Hyperparams, Scaling};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::solver::SolverConfig;

const CLASSIFIER_FORMAT: &str = "pin-twsvm-classifier";
const CLASSIFIER_VERSION: u32 = 1;

/// Binary model on `{+1, -1}` labels or a one-vs-rest ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", tag = "kind", rename_all = "lowercase")]
#[allow(clippy::large_enum_variant)]
pub enum Classifier<T> {
    Binary(Model<T>),
    Multiclass(MulticlassModel<T>),
}

#[derive(Clone, Copy, Debug)]
pub struct FitOptions {
    pub family: Family,
    pub standardize: bool,
    pub distance_rule: DistanceRule,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { family: Family::PinTwsvmpi, standardize: false, distance_rule: DistanceRule::default() }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct Envelope<T> {
    format: String,
    version: u32,
    scalar: String,
    classifier: Classifier<T>,
}

fn train_binary<T: Scalar>(
    ds: &Dataset<T>,
    hp: &Hyperparams<T>,
    cfg: &SolverConfig<T>,
    family: Family,
) -> Result<Model<T>> {
    let part = partition_by_class(ds)?;
    match family {
        Family::PinTwsvmpi => train_pin_twsvmpi(&part, hp, cfg),
        Family::PinTwsvm => train_pin_twsvm(&part, hp, cfg),
    }
}

impl<T: Scalar> Classifier<T> {
    /// Trains on `ds`. Labels `{+1, -1}` give a binary model, anything else one-vs-rest.
    /// The privileged family requires `ds.privileged`.
    pub fn fit(ds: &Dataset<T>, hp: &Hyperparams<T>, cfg: &SolverConfig<T>, opts: FitOptions) -> Result<Self> {
        ds.validate()?;
        if opts.family == Family::PinTwsvmpi && ds.privileged.is_none() {
            return Err(Error::invalid("the privileged model needs privileged features"));
        }
        let (train, scaling) = if opts.standardize {
            let s = Scaling::fit(&ds.features)?;
            (s.apply_dataset(ds)?, Some(s))
        } else {
            (ds.clone(), None)
        };
        let classes = ds.classes();
        let mut clf = if classes == [-1, 1] {
            Classifier::Binary(train_binary(&train, hp, cfg, opts.family)?)
        } else {
            Classifier::Multiclass(train_multiclass_with(&train, hp, cfg, opts.family)?)
        };
        clf.for_each_model(|m| {
            m.scaling = scaling.clone();
            m.distance_rule = opts.distance_rule;
        });
        Ok(clf)
    }

    fn for_each_model(&mut self, mut f: impl FnMut(&mut Model<T>)) {
        match self {
            Classifier::Binary(m) => f(m),
            Classifier::Multiclass(mc) => mc.models.iter_mut().for_each(f),
        }
    }

    pub fn models(&self) -> Vec<&Model<T>> {
        match self {
            Classifier::Binary(m) => vec![m],
            Classifier::Multiclass(mc) => mc.models.iter().collect(),
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.models().first().map_or(0, |m| m.feature_dim)
    }

    pub fn set_distance_rule(&mut self, rule: DistanceRule) {
        self.for_each_model(|m| m.distance_rule = rule);
    }

    pub fn predict(&self, x: &[T]) -> Result<i64> {
        match self {
            Classifier::Binary(m) => m.predict(x),
            Classifier::Multiclass(mc) => mc.predict(x),
        }
    }

    pub fn predict_batch(&self, x: &DMatrix<T>) -> Result<Vec<i64>> {
        if x.ncols() != self.feature_dim() {
            return Err(Error::dims(self.feature_dim(), x.ncols()));
        }
        match self {
            Classifier::Binary(m) => m.predict_batch(x),
            Classifier::Multiclass(mc) => mc.predict_batch(x),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let env = Envelope {
            format: CLASSIFIER_FORMAT.to_string(),
            version: CLASSIFIER_VERSION,
            scalar: std::any::type_name::<T>().to_string(),
            classifier: self.clone(),
        };
        serde_json::to_string_pretty(&env).map_err(|e| Error::Serialization(e.to_string()))
    }

    /// Also accepts a bare binary model document.
    pub fn from_json(text: &str) -> Result<Self> {
        let head: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))?;
        match head.get("format").and_then(|v| v.as_str()) {
            Some(CLASSIFIER_FORMAT) => {}
            Some(super::MODEL_FORMAT) => return Model::from_json(text).map(Classifier::Binary),
            _ => return Err(Error::Serialization("not a pin-twsvm classifier file".into())),
        }
        if head.get("version").and_then(|v| v.as_u64()) != Some(u64::from(CLASSIFIER_VERSION)) {
            return Err(Error::Serialization("unsupported classifier version".into()));
        }
        let env: Envelope<T> = serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))?;
        Ok(env.classifier)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|source| Error::Io { path: path.display().to_string(), source })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }
}
