//! Datasets, loading, class partitioning and standardization.

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::scalar::{from_usize, Scalar};

/// Feature matrix (one row per sample), integer labels and optional privileged matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    pub features: DMatrix<T>,
    pub labels: Vec<i64>,
    pub privileged: Option<DMatrix<T>>,
    pub feature_names: Option<Vec<String>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataFormat {
    /// Last column is the label, optional header row.
    Csv,
    /// `label idx:val idx:val ...` with 1-based indices.
    SparseIndex,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(features: DMatrix<T>, labels: Vec<i64>) -> Result<Self> {
        let ds = Dataset { features, labels, privileged: None, feature_names: None };
        ds.validate()?;
        Ok(ds)
    }

    pub fn with_privileged(mut self, privileged: DMatrix<T>) -> Result<Self> {
        self.privileged = Some(privileged);
        self.validate()?;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.nrows() != self.labels.len() {
            return Err(Error::dims(self.labels.len(), self.features.nrows()));
        }
        if let Some(p) = &self.privileged {
            if p.nrows() != self.labels.len() {
                return Err(Error::dims(self.labels.len(), p.nrows()));
            }
            if p.iter().any(|v| !v.is_finite_value()) {
                return Err(Error::DegenerateDataset("non-finite privileged value".into()));
            }
        }
        if self.features.iter().any(|v| !v.is_finite_value()) {
            return Err(Error::DegenerateDataset("non-finite feature value".into()));
        }
        Ok(())
    }

    /// Sorted distinct labels.
    pub fn classes(&self) -> Vec<i64> {
        self.labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn is_binary_pm1(&self) -> bool {
        self.labels.iter().all(|&y| y == 1 || y == -1)
    }

    /// Rows `idx` in the given order.
    pub fn subset(&self, idx: &[usize]) -> Dataset<T> {
        Dataset {
            features: select_rows(&self.features, idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            privileged: self.privileged.as_ref().map(|p| select_rows(p, idx)),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Moves the listed feature columns into the privileged matrix.
    pub fn split_privileged(&self, cols: &[usize]) -> Result<Dataset<T>> {
        let d = self.dim();
        let set: BTreeSet<usize> = cols.iter().copied().collect();
        if set.is_empty() {
            return Err(Error::invalid("no privileged columns given"));
        }
        if let Some(&c) = set.iter().find(|&&c| c >= d) {
            return Err(Error::invalid(format!("privileged column {c} out of range (d = {d})")));
        }
        if set.len() == d {
            return Err(Error::invalid("privileged columns cannot cover every feature"));
        }
        let keep: Vec<usize> = (0..d).filter(|c| !set.contains(c)).collect();
        let priv_cols: Vec<usize> = set.into_iter().collect();
        Ok(Dataset {
            features: select_cols(&self.features, &keep),
            labels: self.labels.clone(),
            privileged: Some(select_cols(&self.features, &priv_cols)),
            feature_names: self
                .feature_names
                .as_ref()
                .map(|n| keep.iter().filter_map(|&c| n.get(c).cloned()).collect()),
        })
    }

    /// Relabels into `{+1, -1}`: `positive` becomes +1, every other label -1.
    pub fn one_vs_rest(&self, positive: i64) -> Dataset<T> {
        let mut out = self.clone();
        out.labels = self.labels.iter().map(|&y| if y == positive { 1 } else { -1 }).collect();
        out
    }
}

pub(crate) fn select_rows<T: Scalar>(m: &DMatrix<T>, idx: &[usize]) -> DMatrix<T> {
    DMatrix::from_fn(idx.len(), m.ncols(), |i, j| m[(idx[i], j)])
}

pub(crate) fn select_cols<T: Scalar>(m: &DMatrix<T>, idx: &[usize]) -> DMatrix<T> {
    DMatrix::from_fn(m.nrows(), idx.len(), |i, j| m[(i, idx[j])])
}

/// Loads a dataset and imputes missing cells with their column mean.
pub fn load_dataset<T: Scalar>(path: impl AsRef<Path>, format: DataFormat) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    match format {
        DataFormat::Csv => parse_csv(&text),
        DataFormat::SparseIndex => parse_sparse(&text),
    }
}

fn is_missing(tok: &str) -> bool {
    matches!(tok, "" | "?" | "NA" | "na" | "NaN" | "nan")
}

fn parse_label(tok: &str, line: usize) -> Result<i64> {
    let v: f64 = tok.parse().map_err(|_| Error::Parse { line, message: format!("label `{tok}` is not a number") })?;
    if v.fract() != 0.0 || !v.is_finite() {
        return Err(Error::Parse { line, message: format!("label `{tok}` is not an integer") });
    }
    Ok(v as i64)
}

/// Parses the CSV layout: features then label; a first line whose label field is
/// not numeric is treated as a header.
pub fn parse_csv<T: Scalar>(text: &str) -> Result<Dataset<T>> {
    let mut rows: Vec<Vec<Option<f64>>> = Vec::new();
    let mut labels = Vec::new();
    let mut names = None;
    let mut width = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.trim();
        if raw.is_empty() || raw.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        if fields.len() < 2 {
            return Err(Error::Parse { line, message: "expected at least one feature and a label".into() });
        }
        let (label_tok, feats) = fields.split_last().expect("non-empty");
        if rows.is_empty() && names.is_none() && label_tok.parse::<f64>().is_err() {
            names = Some(feats.iter().map(|s| s.to_string()).collect::<Vec<_>>());
            width = Some(fields.len());
            continue;
        }
        match width {
            Some(w) if w != fields.len() => {
                return Err(Error::Parse { line, message: format!("expected {w} columns, found {}", fields.len()) })
            }
            None => width = Some(fields.len()),
            _ => {}
        }
        labels.push(parse_label(label_tok, line)?);
        let row = feats
            .iter()
            .map(|tok| {
                if is_missing(tok) {
                    Ok(None)
                } else {
                    tok.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .map(Some)
                        .ok_or_else(|| Error::Parse { line, message: format!("non-numeric feature `{tok}`") })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let d = width.map(|w| w - 1).unwrap_or(0);
    let mut ds = Dataset::new(impute(rows, d)?, labels)?;
    ds.feature_names = names;
    Ok(ds)
}

/// Parses the sparse `label idx:val ...` layout (1-based indices, absent entries are zero).
pub fn parse_sparse<T: Scalar>(text: &str) -> Result<Dataset<T>> {
    let mut entries: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut d = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.trim();
        if raw.is_empty() || raw.starts_with('#') {
            continue;
        }
        let mut toks = raw.split_whitespace();
        let label = parse_label(toks.next().expect("non-empty line"), line)?;
        let mut row = Vec::new();
        for tok in toks {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| Error::Parse { line, message: format!("expected idx:val, found `{tok}`") })?;
            let idx: usize = idx
                .parse()
                .ok()
                .filter(|&k| k >= 1)
                .ok_or_else(|| Error::Parse { line, message: format!("bad 1-based index `{idx}`") })?;
            let val: f64 = val
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::Parse { line, message: format!("non-numeric value `{val}`") })?;
            d = d.max(idx);
            row.push((idx - 1, val));
        }
        labels.push(label);
        entries.push(row);
    }
    let mut features = DMatrix::<T>::zeros(labels.len(), d);
    for (i, row) in entries.iter().enumerate() {
        for &(j, v) in row {
            features[(i, j)] = T::lit(v);
        }
    }
    Dataset::new(features, labels)
}

fn impute<T: Scalar>(rows: Vec<Vec<Option<f64>>>, d: usize) -> Result<DMatrix<T>> {
    let l = rows.len();
    let mut means = vec![0.0; d];
    for (j, mean) in means.iter_mut().enumerate() {
        let present: Vec<f64> = rows.iter().filter_map(|r| r[j]).collect();
        if present.is_empty() && l > 0 {
            return Err(Error::DegenerateDataset(format!("column {} has no values", j + 1)));
        }
        *mean = present.iter().sum::<f64>() / present.len().max(1) as f64;
    }
    Ok(DMatrix::from_fn(l, d, |i, j| T::lit(rows[i][j].unwrap_or(means[j]))))
}

/// Parses a comma-separated numeric matrix with no label column. A first line
/// that does not parse as numbers is taken as a header and skipped.
pub fn parse_matrix<T: Scalar>(text: &str) -> Result<DMatrix<T>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut seen_any = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.trim();
        if raw.is_empty() || raw.starts_with('#') {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = raw.split(',').map(|t| t.trim().parse::<f64>()).collect();
        let first = !seen_any;
        seen_any = true;
        let row = match parsed {
            Ok(r) if r.iter().all(|v| v.is_finite()) => r,
            Err(_) if first => continue,
            _ => return Err(Error::Parse { line, message: "non-numeric or non-finite matrix entry".into() }),
        };
        if let Some(w) = rows.first().map(Vec::len) {
            if w != row.len() {
                return Err(Error::Parse { line, message: format!("expected {w} columns, found {}", row.len()) });
            }
        }
        rows.push(row);
    }
    let d = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(rows.len(), d, |i, j| T::lit(rows[i][j])))
}

pub fn load_matrix<T: Scalar>(path: impl AsRef<Path>) -> Result<DMatrix<T>> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    parse_matrix(&text)
}

/// Class `+1` rows (`a`) and class `-1` rows (`b`), with the privileged rows sliced identically.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassPartition<T> {
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
    pub a_star: Option<DMatrix<T>>,
    pub b_star: Option<DMatrix<T>>,
    pub a_index: Vec<usize>,
    pub b_index: Vec<usize>,
}

impl<T: Scalar> ClassPartition<T> {
    pub fn m1(&self) -> usize {
        self.a.nrows()
    }

    pub fn m2(&self) -> usize {
        self.b.nrows()
    }

    /// Same samples with the class roles exchanged.
    pub fn swapped(&self) -> ClassPartition<T> {
        ClassPartition {
            a: self.b.clone(),
            b: self.a.clone(),
            a_star: self.b_star.clone(),
            b_star: self.a_star.clone(),
            a_index: self.b_index.clone(),
            b_index: self.a_index.clone(),
        }
    }

    pub fn privileged(&self) -> Result<(&DMatrix<T>, &DMatrix<T>)> {
        match (&self.a_star, &self.b_star) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(Error::invalid("privileged information is required")),
        }
    }

    /// Interleaves `a` and `b` back into dataset order.
    pub fn reassemble(&self) -> DMatrix<T> {
        let l = self.m1() + self.m2();
        let mut out = DMatrix::zeros(l, self.a.ncols());
        for (r, &i) in self.a_index.iter().enumerate() {
            out.row_mut(i).copy_from(&self.a.row(r));
        }
        for (r, &i) in self.b_index.iter().enumerate() {
            out.row_mut(i).copy_from(&self.b.row(r));
        }
        out
    }

    /// All training rows, class `+1` first (the support set of kernel models).
    pub fn stacked(&self) -> DMatrix<T> {
        stack_rows(&self.a, &self.b)
    }

    pub fn stacked_privileged(&self) -> Result<DMatrix<T>> {
        let (a, b) = self.privileged()?;
        Ok(stack_rows(a, b))
    }
}

pub(crate) fn stack_rows<T: Scalar>(top: &DMatrix<T>, bottom: &DMatrix<T>) -> DMatrix<T> {
    let mut out = DMatrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.rows_mut(0, top.nrows()).copy_from(top);
    out.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    out
}

pub fn partition_by_class<T: Scalar>(ds: &Dataset<T>) -> Result<ClassPartition<T>> {
    if !ds.is_binary_pm1() {
        return Err(Error::invalid("binary labels in {+1, -1} required"));
    }
    let a_index: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels[i] == 1).collect();
    let b_index: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels[i] == -1).collect();
    if a_index.is_empty() || b_index.is_empty() {
        return Err(Error::DegenerateDataset("both classes need at least one sample".into()));
    }
    let priv_rows = |idx: &[usize]| ds.privileged.as_ref().map(|p| select_rows(p, idx));
    Ok(ClassPartition {
        a: select_rows(&ds.features, &a_index),
        b: select_rows(&ds.features, &b_index),
        a_star: priv_rows(&a_index),
        b_star: priv_rows(&b_index),
        a_index,
        b_index,
    })
}

/// Per-column `(x - mean) / scale`; zero-variance columns keep scale 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaling<T> {
    pub mean: Vec<T>,
    pub scale: Vec<T>,
}

impl<T: Scalar> Scaling<T> {
    pub fn fit(x: &DMatrix<T>) -> Result<Self> {
        let l = x.nrows();
        if l < 2 {
            return Err(Error::DegenerateDataset("standardization needs at least two rows".into()));
        }
        let n = from_usize::<T>(l);
        let mut mean = Vec::with_capacity(x.ncols());
        let mut scale = Vec::with_capacity(x.ncols());
        for col in x.column_iter() {
            let mu = col.sum() / n;
            let var = col.iter().fold(T::zero(), |acc, &v| acc + (v - mu) * (v - mu)) / n;
            let sd = var.sqrt();
            mean.push(mu);
            scale.push(if sd > T::eps() * (T::one() + mu.abs()) { sd } else { T::one() });
        }
        Ok(Scaling { mean, scale })
    }

    pub fn apply(&self, x: &DMatrix<T>) -> Result<DMatrix<T>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::dims(self.mean.len(), x.ncols()));
        }
        Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| (x[(i, j)] - self.mean[j]) / self.scale[j]))
    }

    pub fn apply_row(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.mean.len() {
            return Err(Error::dims(self.mean.len(), x.len()));
        }
        Ok(x.iter().zip(self.mean.iter().zip(&self.scale)).map(|(&v, (&m, &s))| (v - m) / s).collect())
    }

    pub fn apply_dataset(&self, ds: &Dataset<T>) -> Result<Dataset<T>> {
        let mut out = ds.clone();
        out.features = self.apply(&ds.features)?;
        Ok(out)
    }
}

/// Standardizes feature columns to mean 0 / unit (population) standard deviation.
pub fn standardize<T: Scalar>(ds: &Dataset<T>) -> Result<(Dataset<T>, Scaling<T>)> {
    let scaling = Scaling::fit(&ds.features)?;
    Ok((scaling.apply_dataset(ds)?, scaling))
}

/// Model hyperparameters: trade-offs `c1`, `c2`, privileged weight `gamma`, pinball `tau`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams<T> {
    pub c1: T,
    pub c2: T,
    pub gamma: T,
    pub tau: T,
    pub kernel: KernelSpec<T>,
    pub seed: u64,
}

impl<T: Scalar> Default for Hyperparams<T> {
    fn default() -> Self {
        Hyperparams {
            c1: T::one(),
            c2: T::one(),
            gamma: T::one(),
            tau: T::lit(0.5),
            kernel: KernelSpec::Linear,
            seed: 0,
        }
    }
}

impl<T: Scalar> Hyperparams<T> {
    /// Checks `c1, c2, gamma > 0` and `tau` in `[0, 1]`; `require_positive_tau` for the dual path.
    pub fn validate(&self, require_positive_tau: bool) -> Result<()> {
        for (name, v) in [("c1", self.c1), ("c2", self.c2), ("gamma", self.gamma)] {
            if !(v > T::zero()) || !v.is_finite_value() {
                return Err(Error::invalid(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.tau < T::zero() || self.tau > T::one() || !self.tau.is_finite_value() {
            return Err(Error::invalid(format!("tau must lie in [0, 1], got {}", self.tau)));
        }
        if require_positive_tau && self.tau <= T::zero() {
            return Err(Error::invalid("tau = 0 has no dual; use the primal path"));
        }
        self.kernel.validate()
    }
}
