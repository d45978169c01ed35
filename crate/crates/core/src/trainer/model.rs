//! Trained twin-plane models, prediction and JSON persistence.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{Hyperparams, Scaling};
use crate::error::{Error, Result};
use crate::kernel::{kernel_row, KernelSpec};
use crate::scalar::Scalar;

pub const MODEL_FORMAT: &str = "pin-twsvm-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Linear,
    Kernel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Pinball twin SVM trained with privileged information.
    PinTwsvmpi,
    /// Pinball twin SVM without privileged information.
    PinTwsvm,
}

/// Distance denominator: `|w|^2` as printed in the decision rule, or the geometric `|w|`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceRule {
    #[default]
    PaperSquaredNorm,
    Euclidean,
}

impl std::str::FromStr for DistanceRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" | "paper_squared_norm" | "squared" => Ok(DistanceRule::PaperSquaredNorm),
            "euclidean" => Ok(DistanceRule::Euclidean),
            other => Err(Error::invalid(format!("unknown distance rule {other:?}"))),
        }
    }
}

/// `x'w + b`, or `sum_j w_j K(x, X_j) + b` for kernel models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plane<T> {
    pub w: Vec<T>,
    pub b: T,
}

impl<T: Scalar> Plane<T> {
    pub fn norm_squared(&self) -> T {
        self.w.iter().fold(T::zero(), |s, v| s + *v * *v)
    }

    pub fn score(&self, features: &[T]) -> T {
        self.w.iter().zip(features).fold(self.b, |s, (w, x)| s + *w * *x)
    }

    pub(crate) fn negated(&self) -> Plane<T> {
        Plane { w: self.w.iter().map(|v| -*v).collect(), b: -self.b }
    }
}

/// Per-class solver diagnostics recorded at training time.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainDiagnostics {
    pub iterations: [usize; 2],
    pub kkt_residual: [f64; 2],
    /// Primal minus dual objective per class (privileged models only).
    pub duality_gap: Option<[f64; 2]>,
}

mod rows {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::scalar::Scalar;

    pub fn serialize<T: Scalar, S: Serializer>(m: &Option<DMatrix<T>>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Option<Vec<Vec<T>>> = m.as_ref().map(|m| m.row_iter().map(|r| r.iter().copied().collect()).collect());
        rows.serialize(s)
    }

    pub fn deserialize<'de, T: Scalar, D: Deserializer<'de>>(d: D) -> Result<Option<DMatrix<T>>, D::Error> {
        let rows: Option<Vec<Vec<T>>> = Option::deserialize(d)?;
        let Some(rows) = rows else { return Ok(None) };
        let ncols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(serde::de::Error::custom("ragged support matrix"));
        }
        Ok(Some(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j])))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Model<T> {
    pub family: Family,
    pub variant: Variant,
    pub kernel: KernelSpec<T>,
    /// Training rows `X = A u B` that kernel coefficients refer to.
    #[serde(with = "rows", default)]
    pub support: Option<DMatrix<T>>,
    #[serde(with = "rows", default)]
    pub support_star: Option<DMatrix<T>>,
    /// Planes for class `+1` and class `-1`.
    pub planes: [Plane<T>; 2],
    /// Correcting functions on the privileged space; never used by `predict`.
    pub correcting: Option<[Plane<T>; 2]>,
    pub hyperparams: Hyperparams<T>,
    pub distance_rule: DistanceRule,
    /// Applied to raw inputs before scoring when present.
    pub scaling: Option<Scaling<T>>,
    pub feature_dim: usize,
    pub diagnostics: TrainDiagnostics,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct Envelope<T> {
    format: String,
    version: u32,
    scalar: String,
    model: Model<T>,
}

impl<T: Scalar> Model<T> {
    fn prepared(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.feature_dim {
            return Err(Error::dims(self.feature_dim, x.len()));
        }
        let x = match &self.scaling {
            Some(s) => s.apply_row(x)?,
            None => x.to_vec(),
        };
        match (self.variant, &self.support) {
            (Variant::Linear, _) => Ok(x),
            (Variant::Kernel, Some(sup)) => kernel_row(&self.kernel, &x, sup),
            (Variant::Kernel, None) => Err(Error::DegenerateModel("kernel model without support rows".into())),
        }
    }

    fn denominator(&self, k: usize) -> Result<T> {
        let sq = self.planes[k].norm_squared();
        if !(sq > T::zero()) || !sq.is_finite_value() {
            return Err(Error::DegenerateModel(format!("plane {} has zero normal", k + 1)));
        }
        Ok(match self.distance_rule {
            DistanceRule::PaperSquaredNorm => sq,
            DistanceRule::Euclidean => sq.sqrt(),
        })
    }

    /// Raw plane values `(s_+, s_-)` at a point.
    pub fn scores(&self, x: &[T]) -> Result<(T, T)> {
        let z = self.prepared(x)?;
        Ok((self.planes[0].score(&z), self.planes[1].score(&z)))
    }

    /// Distances `(d_+, d_-)` of a point from the two planes under the model's rule.
    pub fn distances(&self, x: &[T]) -> Result<(T, T)> {
        let (s0, s1) = self.scores(x)?;
        Ok((s0.abs() / self.denominator(0)?, s1.abs() / self.denominator(1)?))
    }

    /// Label of the nearer plane; equal distances go to `+1`.
    pub fn predict(&self, x: &[T]) -> Result<i64> {
        let (d0, d1) = self.distances(x)?;
        Ok(if d0 <= d1 { 1 } else { -1 })
    }

    pub fn predict_batch(&self, x: &DMatrix<T>) -> Result<Vec<i64>> {
        use rayon::prelude::*;
        let rows: Vec<Vec<T>> = x.row_iter().map(|r| r.iter().copied().collect()).collect();
        rows.par_iter().map(|r| self.predict(r)).collect()
    }

    /// Correcting-function values `w*'x* + b*` of one class on privileged rows.
    pub fn correcting_values(&self, class: i64, x_star: &DMatrix<T>) -> Result<Vec<T>> {
        let planes = self
            .correcting
            .as_ref()
            .ok_or_else(|| Error::invalid("model was trained without privileged information"))?;
        let plane = &planes[if class >= 0 { 0 } else { 1 }];
        x_star
            .row_iter()
            .map(|r| {
                let r: Vec<T> = r.iter().copied().collect();
                let z = match (self.variant, &self.support_star) {
                    (Variant::Kernel, Some(sup)) => kernel_row(&self.kernel, &r, sup)?,
                    _ => r,
                };
                if z.len() != plane.w.len() {
                    return Err(Error::dims(plane.w.len(), z.len()));
                }
                Ok(plane.score(&z))
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let env = Envelope {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            scalar: std::any::type_name::<T>().to_string(),
            model: self.clone(),
        };
        serde_json::to_string_pretty(&env).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let head: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))?;
        if head.get("format").and_then(|v| v.as_str()) != Some(MODEL_FORMAT) {
            return Err(Error::Serialization("not a pin-twsvm model file".into()));
        }
        match head.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(MODEL_VERSION) => {}
            other => return Err(Error::Serialization(format!("unsupported model version {other:?}"))),
        }
        let env: Envelope<T> = serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))?;
        Ok(env.model)
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

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(rule: DistanceRule) -> Model<f64> {
        Model {
            family: Family::PinTwsvmpi,
            variant: Variant::Linear,
            kernel: KernelSpec::Linear,
            support: None,
            support_star: None,
            planes: [Plane { w: vec![1.0, 0.0], b: 0.0 }, Plane { w: vec![0.0, 2.0], b: -1.0 }],
            correcting: Some([Plane { w: vec![1.0, 0.0], b: 1.0 }, Plane { w: vec![0.0, 0.0], b: 0.0 }]),
            hyperparams: Hyperparams::default(),
            distance_rule: rule,
            scaling: None,
            feature_dim: 2,
            diagnostics: TrainDiagnostics::default(),
        }
    }

    #[test]
    fn point_on_first_plane_is_positive() {
        assert_eq!(toy(DistanceRule::PaperSquaredNorm).predict(&[0.0, 3.0]).unwrap(), 1);
    }

    #[test]
    fn tie_goes_to_positive() {
        let mut m = toy(DistanceRule::Euclidean);
        m.planes = [Plane { w: vec![1.0, 0.0], b: 0.0 }, Plane { w: vec![0.0, 1.0], b: 0.0 }];
        assert_eq!(m.distances(&[1.0, 1.0]).unwrap(), (1.0, 1.0));
        assert_eq!(m.predict(&[1.0, 1.0]).unwrap(), 1);
    }

    #[test]
    fn denominators_follow_the_rule() {
        let x = [0.0, 1.0];
        let (_, d) = toy(DistanceRule::PaperSquaredNorm).distances(&x).unwrap();
        assert_eq!(d, 1.0 / 4.0);
        let (_, d) = toy(DistanceRule::Euclidean).distances(&x).unwrap();
        assert_eq!(d, 1.0 / 2.0);
    }

    #[test]
    fn correcting_values_are_affine() {
        let m = toy(DistanceRule::PaperSquaredNorm);
        let xs = DMatrix::from_row_slice(1, 2, &[0.25, 7.0]);
        assert_eq!(m.correcting_values(1, &xs).unwrap(), vec![1.25]);
        assert_eq!(m.correcting_values(-1, &xs).unwrap(), vec![0.0]);
    }

    #[test]
    fn zero_normal_is_degenerate() {
        let mut m = toy(DistanceRule::PaperSquaredNorm);
        m.planes[1].w = vec![0.0, 0.0];
        assert!(matches!(m.predict(&[1.0, 1.0]), Err(Error::DegenerateModel(_))));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut m = toy(DistanceRule::Euclidean);
        m.planes[0].w = vec![0.1 + 0.2, 1.0 / 3.0];
        m.planes[1].b = std::f64::consts::PI * 1e-17;
        let back = Model::<f64>::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        let bad = m.to_json().unwrap().replace("\"version\": 1", "\"version\": 99");
        assert!(Model::<f64>::from_json(&bad).is_err());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        assert!(matches!(toy(DistanceRule::Euclidean).predict(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }
}
