//! Domain types shared across the crate.
//!
//! [`ClusteredDataset`] owns the observations grouped by cluster. Rows are
//! stored contiguously per cluster, with clusters ordered by the first
//! appearance of their label in the input.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{ArtError, Result};

/// One labelled observation before canonicalization.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    pub label: String,
    pub outcome: f64,
    pub covariates: Vec<f64>,
}

impl RawRow {
    pub fn new(label: impl Into<String>, outcome: f64, covariates: Vec<f64>) -> Self {
        Self {
            label: label.into(),
            outcome,
            covariates,
        }
    }
}

/// Outcomes, covariates and cluster membership for `n` observations in `q`
/// clusters.
///
/// Invariants (checked on construction): `q >= 2`, every cluster non-empty,
/// at least one covariate, all values finite, rows of one cluster contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusteredDataset {
    outcomes: Vec<f64>,
    /// Row-major `n x d` covariate matrix.
    covariates: Vec<f64>,
    dim: usize,
    covariate_names: Vec<String>,
    labels: Vec<String>,
    /// `offsets[j]..offsets[j + 1]` is the row range of cluster `j`.
    offsets: Vec<usize>,
}

/// Group raw rows by label, ordering clusters by first appearance and keeping
/// the original row order within each cluster.
pub fn canonicalize(rows: Vec<RawRow>) -> Result<ClusteredDataset> {
    let dim = rows.first().map(|r| r.covariates.len()).unwrap_or(0);
    let names = (1..=dim).map(|k| format!("x{k}")).collect();
    ClusteredDataset::from_rows(rows, names)
}

impl ClusteredDataset {
    /// Build a dataset from labelled rows. `covariate_names` must have one entry
    /// per covariate column.
    pub fn from_rows(rows: Vec<RawRow>, covariate_names: Vec<String>) -> Result<Self> {
        let dim = covariate_names.len();
        if dim == 0 {
            return Err(ArtError::NoCovariates);
        }
        let mut order: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut buckets: Vec<Vec<usize>> = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if row.covariates.len() != dim {
                return Err(ArtError::WidthMismatch {
                    row: i,
                    expected: dim,
                    found: row.covariates.len(),
                });
            }
            if !row.outcome.is_finite() {
                return Err(ArtError::NonFiniteValue {
                    field: "outcome".into(),
                    row: i,
                });
            }
            if let Some(k) = row.covariates.iter().position(|v| !v.is_finite()) {
                return Err(ArtError::NonFiniteValue {
                    field: covariate_names[k].clone(),
                    row: i,
                });
            }
            let slot = *index.entry(row.label.clone()).or_insert_with(|| {
                order.push(row.label.clone());
                buckets.push(Vec::new());
                buckets.len() - 1
            });
            buckets[slot].push(i);
        }
        if order.len() < 2 {
            return Err(ArtError::TooFewClusters { found: order.len() });
        }

        let n = rows.len();
        let mut outcomes = Vec::with_capacity(n);
        let mut covariates = Vec::with_capacity(n * dim);
        let mut offsets = Vec::with_capacity(order.len() + 1);
        offsets.push(0);
        for bucket in &buckets {
            for &i in bucket {
                outcomes.push(rows[i].outcome);
                covariates.extend_from_slice(&rows[i].covariates);
            }
            offsets.push(outcomes.len());
        }
        Ok(Self {
            outcomes,
            covariates,
            dim,
            covariate_names,
            labels: order,
            offsets,
        })
    }

    pub fn n(&self) -> usize {
        self.outcomes.len()
    }

    pub fn q(&self) -> usize {
        self.labels.len()
    }

    /// Number of covariates `d_z`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, cluster: usize) -> &str {
        &self.labels[cluster]
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn cluster_range(&self, cluster: usize) -> std::ops::Range<usize> {
        self.offsets[cluster]..self.offsets[cluster + 1]
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.covariates[i * self.dim..(i + 1) * self.dim]
    }

    /// Cluster index of every row, in storage order.
    pub fn cluster_index(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n());
        for j in 0..self.q() {
            out.extend(std::iter::repeat_n(j, self.cluster_range(j).len()));
        }
        out
    }

    /// Covariates of one cluster as an `n_j x d` matrix.
    pub fn cluster_design(&self, cluster: usize) -> DMatrix<f64> {
        let range = self.cluster_range(cluster);
        DMatrix::from_row_slice(
            range.len(),
            self.dim,
            &self.covariates[range.start * self.dim..range.end * self.dim],
        )
    }

    pub fn cluster_outcomes(&self, cluster: usize) -> &[f64] {
        &self.outcomes[self.cluster_range(cluster)]
    }

    /// Full `n x d` design matrix.
    pub fn design(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n(), self.dim, &self.covariates)
    }

    /// Rows in storage order, each carrying its cluster label.
    pub fn to_rows(&self) -> Vec<RawRow> {
        let mut rows = Vec::with_capacity(self.n());
        for j in 0..self.q() {
            for i in self.cluster_range(j) {
                rows.push(RawRow::new(
                    self.labels[j].clone(),
                    self.outcomes[i],
                    self.row(i).to_vec(),
                ));
            }
        }
        rows
    }

    /// Same rows with outcomes multiplied by `factor`.
    pub fn with_scaled_outcomes(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.outcomes.iter_mut().for_each(|y| *y *= factor);
        out
    }

    /// Position of a named covariate.
    pub fn covariate_position(&self, name: &str) -> Option<usize> {
        self.covariate_names.iter().position(|c| c == name)
    }
}

/// Scalar linear hypothesis `c'beta = lambda`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearHypothesis {
    contrast: Vec<f64>,
    value: f64,
}

impl LinearHypothesis {
    pub fn new(contrast: Vec<f64>, value: f64) -> Result<Self> {
        if contrast.is_empty() || contrast.iter().all(|&c| c == 0.0) {
            return Err(ArtError::InvalidHypothesis(
                "contrast must not be the zero vector".into(),
            ));
        }
        if contrast.iter().any(|c| !c.is_finite()) || !value.is_finite() {
            return Err(ArtError::InvalidHypothesis(
                "contrast and value must be finite".into(),
            ));
        }
        Ok(Self { contrast, value })
    }

    /// `beta_index = value`, i.e. the contrast is a standard unit vector.
    pub fn coefficient(dim: usize, index: usize, value: f64) -> Result<Self> {
        if index >= dim {
            return Err(ArtError::InvalidHypothesis(format!(
                "coefficient index {index} out of range for {dim} covariates"
            )));
        }
        let mut c = vec![0.0; dim];
        c[index] = 1.0;
        Self::new(c, value)
    }

    pub fn contrast(&self) -> &[f64] {
        &self.contrast
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn with_value(&self, value: f64) -> Result<Self> {
        Self::new(self.contrast.clone(), value)
    }

    pub fn dot(&self, beta: &[f64]) -> f64 {
        self.contrast.iter().zip(beta).map(|(c, b)| c * b).sum()
    }
}

/// Joint hypothesis `R beta = Lambda` with `R` of full row rank.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiHypothesis {
    restriction: DMatrix<f64>,
    values: Vec<f64>,
}

impl MultiHypothesis {
    pub fn new(restriction: DMatrix<f64>, values: Vec<f64>) -> Result<Self> {
        let (p, d) = restriction.shape();
        if p == 0 || p > d {
            return Err(ArtError::InvalidHypothesis(format!(
                "restriction matrix is {p}x{d}; need 1 <= p <= d"
            )));
        }
        if values.len() != p {
            return Err(ArtError::LengthMismatch {
                expected: p,
                found: values.len(),
            });
        }
        if restriction
            .iter()
            .chain(values.iter())
            .any(|v| !v.is_finite())
        {
            return Err(ArtError::InvalidHypothesis("non-finite entry".into()));
        }
        let sv = restriction.clone().svd(false, false).singular_values;
        let smax = sv.max();
        let tol = smax * (d.max(p) as f64) * f64::EPSILON;
        if sv.iter().filter(|&&s| s > tol).count() < p {
            return Err(ArtError::InvalidHypothesis(
                "restriction matrix must have full row rank".into(),
            ));
        }
        Ok(Self {
            restriction,
            values,
        })
    }

    pub fn from_scalar(h: &LinearHypothesis) -> Self {
        Self {
            restriction: DMatrix::from_row_slice(1, h.contrast().len(), h.contrast()),
            values: vec![h.value()],
        }
    }

    pub fn rows(&self) -> usize {
        self.restriction.nrows()
    }

    pub fn restriction(&self) -> &DMatrix<f64> {
        &self.restriction
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// A vector of `+1`/`-1` signs, one per cluster.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SignVector(Vec<i8>);

impl SignVector {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(ArtError::InvalidHypothesis(
                "sign vector entries must be +1 or -1".into(),
            ));
        }
        Ok(Self(signs))
    }

    /// The identity element: all `+1`.
    pub fn identity(q: usize) -> Self {
        Self(vec![1; q])
    }

    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|s| -s).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }
}

impl AsRef<[i8]> for SignVector {
    fn as_ref(&self) -> &[i8] {
        &self.0
    }
}

/// `true` when every sign is `+1` or every sign is `-1`.
pub fn is_plus_minus_identity(g: &[i8]) -> bool {
    g.iter().all(|&s| s == 1) || g.iter().all(|&s| s == -1)
}

/// A real number extended with both infinities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal {
    NegInf,
    Finite(f64),
    PosInf,
}

impl ExtendedReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(v) => Some(v),
            _ => None,
        }
    }

    /// Lossy conversion to IEEE, used only for plotting-style output.
    pub fn to_f64(self) -> f64 {
        match self {
            ExtendedReal::NegInf => f64::NEG_INFINITY,
            ExtendedReal::Finite(v) => v,
            ExtendedReal::PosInf => f64::INFINITY,
        }
    }

    fn rank(self) -> u8 {
        match self {
            ExtendedReal::NegInf => 0,
            ExtendedReal::Finite(_) => 1,
            ExtendedReal::PosInf => 2,
        }
    }
}

impl Eq for ExtendedReal {}

impl std::ops::Neg for ExtendedReal {
    type Output = Self;

    fn neg(self) -> Self {
        match self {
            ExtendedReal::NegInf => ExtendedReal::PosInf,
            ExtendedReal::Finite(v) => ExtendedReal::Finite(-v),
            ExtendedReal::PosInf => ExtendedReal::NegInf,
        }
    }
}

impl PartialOrd for ExtendedReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtendedReal {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => a.total_cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::NegInf => f.write_str("-inf"),
            ExtendedReal::Finite(v) => write!(f, "{v}"),
            ExtendedReal::PosInf => f.write_str("+inf"),
        }
    }
}

impl Serialize for ExtendedReal {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtendedReal::Finite(v) => s.serialize_f64(*v),
            ExtendedReal::NegInf => s.serialize_str("-inf"),
            ExtendedReal::PosInf => s.serialize_str("+inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtendedReal {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Token(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(ExtendedReal::Finite(v)),
            Repr::Token(t) => match t.as_str() {
                "-inf" => Ok(ExtendedReal::NegInf),
                "+inf" => Ok(ExtendedReal::PosInf),
                other => Err(serde::de::Error::custom(format!(
                    "expected a number, \"-inf\" or \"+inf\", got {other:?}"
                ))),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(labels: &[&str]) -> Vec<RawRow> {
        labels
            .iter()
            .enumerate()
            .map(|(i, l)| RawRow::new(*l, i as f64, vec![1.0, i as f64]))
            .collect()
    }

    #[test]
    fn clusters_follow_first_appearance() {
        let ds = canonicalize(rows(&["b", "a", "b", "a"])).unwrap();
        assert_eq!(ds.labels(), ["b", "a"]);
        assert_eq!(ds.cluster_sizes(), vec![2, 2]);
        assert_eq!(ds.cluster_outcomes(0), &[0.0, 2.0]);
        assert_eq!(ds.cluster_outcomes(1), &[1.0, 3.0]);
    }

    #[test]
    fn single_label_is_rejected() {
        let err = canonicalize(rows(&["a", "a", "a"])).unwrap_err();
        assert_eq!(err, ArtError::TooFewClusters { found: 1 });
    }

    #[test]
    fn nan_outcome_is_rejected() {
        let mut r = rows(&["a", "b", "c", "a"]);
        r[2].outcome = f64::NAN;
        assert!(matches!(
            canonicalize(r),
            Err(ArtError::NonFiniteValue { row: 2, .. })
        ));
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let mut r = rows(&["a", "b", "a"]);
        r[1].covariates.push(3.0);
        assert!(matches!(
            canonicalize(r),
            Err(ArtError::WidthMismatch { row: 1, .. })
        ));
    }

    #[test]
    fn canonicalize_is_idempotent() {
        let ds = canonicalize(rows(&["x", "y", "z", "y", "x", "z", "z"])).unwrap();
        let again = canonicalize(ds.to_rows()).unwrap();
        assert_eq!(ds, again);
    }

    #[test]
    fn zero_contrast_rejected() {
        assert!(LinearHypothesis::new(vec![0.0, 0.0], 1.0).is_err());
        assert!(LinearHypothesis::new(vec![0.0, 1.0], f64::NAN).is_err());
    }

    #[test]
    fn rank_deficient_restriction_rejected() {
        let r = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 2.0, 0.0, 2.0]);
        assert!(MultiHypothesis::new(r, vec![0.0, 0.0]).is_err());
        let r = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert!(MultiHypothesis::new(r, vec![0.0, 0.0]).is_ok());
    }

    #[test]
    fn extended_real_order() {
        let mut v = vec![
            ExtendedReal::PosInf,
            ExtendedReal::Finite(1.0),
            ExtendedReal::NegInf,
            ExtendedReal::Finite(-3.0),
        ];
        v.sort();
        assert_eq!(
            v,
            vec![
                ExtendedReal::NegInf,
                ExtendedReal::Finite(-3.0),
                ExtendedReal::Finite(1.0),
                ExtendedReal::PosInf
            ]
        );
        assert_eq!(ExtendedReal::NegInf.to_string(), "-inf");
        assert_eq!(-ExtendedReal::PosInf, ExtendedReal::NegInf);
    }

    #[test]
    fn extended_real_serde_tokens() {
        let v = vec![
            ExtendedReal::NegInf,
            ExtendedReal::Finite(2.5),
            ExtendedReal::PosInf,
        ];
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, r#"["-inf",2.5,"+inf"]"#);
        let back: Vec<ExtendedReal> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
    }
}
