//! Least-squares building blocks: cluster-by-cluster OLS, the full-sample
//! fit restricted to `c'beta = lambda`, and the within-cluster weighted
//! scores computed from the restricted residuals.
//!
//! Least-squares problems are solved through a QR factorization of the
//! design; explicit inverses only appear in tests.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{ArtError, Result};
use crate::model::{ClusteredDataset, LinearHypothesis};

/// Reciprocal condition number below which a Gram matrix is treated as
/// singular.
pub const RCOND_THRESHOLD: f64 = 1e-10;

/// Cluster-by-cluster OLS output.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterEstimates {
    pub betas: Vec<Vec<f64>>,
    pub sizes: Vec<usize>,
    /// `(1/n_j) sum_i Z_ij Z_ij'` for each cluster.
    pub grams: Vec<DMatrix<f64>>,
    /// Within-cluster residual sum of squares.
    pub rss: Vec<f64>,
}

impl ClusterEstimates {
    pub fn q(&self) -> usize {
        self.betas.len()
    }

    pub fn dim(&self) -> usize {
        self.betas.first().map_or(0, Vec::len)
    }

    pub fn n_total(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// `c'beta_j` for every cluster.
    pub fn contrast_estimates(&self, contrast: &[f64]) -> Vec<f64> {
        self.betas
            .iter()
            .map(|b| b.iter().zip(contrast).map(|(x, c)| x * c).sum())
            .collect()
    }

    /// Build estimates directly from per-cluster contrast values; the
    /// coefficient vectors are one-dimensional and the Gram matrices are
    /// `1x1` identities. Useful wherever only `c'beta_j` matters.
    pub fn from_contrast_values(values: &[f64], sizes: &[usize]) -> Result<Self> {
        if values.len() != sizes.len() {
            return Err(ArtError::LengthMismatch {
                expected: sizes.len(),
                found: values.len(),
            });
        }
        if values.len() < 2 {
            return Err(ArtError::TooFewClusters {
                found: values.len(),
            });
        }
        if let Some(j) = sizes.iter().position(|&s| s == 0) {
            return Err(ArtError::EmptyCluster {
                label: j.to_string(),
            });
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(ArtError::NonFiniteValue {
                field: "estimate".into(),
                row: j,
            });
        }
        Ok(Self {
            betas: values.iter().map(|&v| vec![v]).collect(),
            sizes: sizes.to_vec(),
            grams: vec![DMatrix::identity(1, 1); values.len()],
            rss: vec![0.0; values.len()],
        })
    }
}

/// Restricted full-sample least squares.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedFit {
    pub beta: Vec<f64>,
    pub residuals: Vec<f64>,
}

/// Reciprocal 2-norm condition number of a symmetric positive semidefinite
/// matrix.
pub fn reciprocal_condition(gram: &DMatrix<f64>) -> f64 {
    let eig = gram.clone().symmetric_eigen().eigenvalues;
    let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    if max.is_nan() || max <= 0.0 || !min.is_finite() {
        return 0.0;
    }
    (min / max).max(0.0)
}

/// Least-squares solve through a thin QR of `design`.
fn qr_solve(design: &DMatrix<f64>, y: &DVector<f64>) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let qr = design.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let qty = q.transpose() * y;
    let beta = r.solve_upper_triangular(&qty)?;
    Some((beta, r))
}

fn gram_of(design: &DMatrix<f64>) -> DMatrix<f64> {
    let n = design.nrows() as f64;
    (design.transpose() * design) / n
}

/// OLS of `Y` on `Z` separately within every cluster.
///
/// Fails with [`ArtError::IdentificationFailure`] for the first cluster (in
/// cluster order) whose Gram matrix is rank deficient or ill-conditioned.
pub fn fit_per_cluster(data: &ClusteredDataset) -> Result<ClusterEstimates> {
    let fits: Vec<Result<ClusterFit>> = (0..data.q())
        .into_par_iter()
        .map(|j| fit_cluster(data, j))
        .collect();

    let q = data.q();
    let mut betas = Vec::with_capacity(q);
    let mut grams = Vec::with_capacity(q);
    let mut rss = Vec::with_capacity(q);
    for fit in fits {
        let (b, g, r) = fit?;
        betas.push(b);
        grams.push(g);
        rss.push(r);
    }
    Ok(ClusterEstimates {
        betas,
        sizes: data.cluster_sizes(),
        grams,
        rss,
    })
}

/// Coefficients, Gram matrix and residual sum of squares of one cluster.
type ClusterFit = (Vec<f64>, DMatrix<f64>, f64);

fn fit_cluster(data: &ClusteredDataset, j: usize) -> Result<ClusterFit> {
    let design = data.cluster_design(j);
    let failure = |rcond: f64| ArtError::IdentificationFailure {
        cluster: j,
        label: data.label(j).to_string(),
        rcond,
    };
    if design.nrows() < design.ncols() {
        return Err(failure(0.0));
    }
    let gram = gram_of(&design);
    let rcond = reciprocal_condition(&gram);
    if rcond < RCOND_THRESHOLD {
        return Err(failure(rcond));
    }
    let y = DVector::from_column_slice(data.cluster_outcomes(j));
    let (beta, _) = qr_solve(&design, &y).ok_or_else(|| failure(rcond))?;
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(failure(rcond));
    }
    let resid = &y - &design * &beta;
    Ok((beta.iter().copied().collect(), gram, resid.norm_squared()))
}

/// Full-sample least squares subject to `c'beta = lambda`.
///
/// The unrestricted QR solution is projected onto the constraint:
/// `beta_r = beta - A^{-1} c (c'beta - lambda) / (c'A^{-1}c)` with `A = Z'Z`.
pub fn fit_restricted(data: &ClusteredDataset, h: &LinearHypothesis) -> Result<RestrictedFit> {
    check_contrast(data.dim(), h)?;
    let design = data.design();
    let gram = design.transpose() * &design;
    let rcond = reciprocal_condition(&gram);
    if rcond < RCOND_THRESHOLD {
        return Err(ArtError::SingularFullGram { rcond });
    }
    let y = DVector::from_column_slice(data.outcomes());
    let (beta, r) = qr_solve(&design, &y).ok_or(ArtError::SingularFullGram { rcond })?;

    // A^{-1} c = R^{-1} R^{-T} c
    let c = DVector::from_column_slice(h.contrast());
    let w = r
        .transpose()
        .solve_lower_triangular(&c)
        .ok_or(ArtError::SingularFullGram { rcond })?;
    let ainv_c = r
        .solve_upper_triangular(&w)
        .ok_or(ArtError::SingularFullGram { rcond })?;
    let gap = c.dot(&beta) - h.value();
    let beta_r = &beta - &ainv_c * (gap / c.dot(&ainv_c));

    let residuals = &y - &design * &beta_r;
    Ok(RestrictedFit {
        beta: beta_r.iter().copied().collect(),
        residuals: residuals.iter().copied().collect(),
    })
}

/// Weighted scores `c' Omega_j^{-1} n_j^{-1/2} sum_i Z_ij e_ij` built from the
/// restricted residuals. Under the null these coincide with
/// `sqrt(n_j) (c'beta_j - lambda)`.
pub fn cluster_scores(
    data: &ClusteredDataset,
    fit: &RestrictedFit,
    est: &ClusterEstimates,
    h: &LinearHypothesis,
) -> Result<Vec<f64>> {
    check_contrast(data.dim(), h)?;
    if fit.residuals.len() != data.n() {
        return Err(ArtError::LengthMismatch {
            expected: data.n(),
            found: fit.residuals.len(),
        });
    }
    if est.q() != data.q() {
        return Err(ArtError::LengthMismatch {
            expected: data.q(),
            found: est.q(),
        });
    }
    let c = DVector::from_column_slice(h.contrast());
    (0..data.q())
        .map(|j| {
            let range = data.cluster_range(j);
            let nj = range.len() as f64;
            let mut moment = DVector::zeros(data.dim());
            for i in range {
                let z = DVector::from_column_slice(data.row(i));
                moment += z * fit.residuals[i];
            }
            moment /= nj.sqrt();
            let chol =
                est.grams[j]
                    .clone()
                    .cholesky()
                    .ok_or_else(|| ArtError::IdentificationFailure {
                        cluster: j,
                        label: data.label(j).to_string(),
                        rcond: reciprocal_condition(&est.grams[j]),
                    })?;
            let weights = chol.solve(&c);
            Ok(weights.dot(&moment))
        })
        .collect()
}

fn check_contrast(dim: usize, h: &LinearHypothesis) -> Result<()> {
    if h.contrast().len() != dim {
        return Err(ArtError::LengthMismatch {
            expected: dim,
            found: h.contrast().len(),
        });
    }
    Ok(())
}
