//! Sign-change randomization test on cluster-level statistics.
//!
//! Given per-cluster scores `S_j`, the statistic for a sign vector `g` is
//! `T(g) = |(1/q) sum_j g_j S_j|`. The observed statistic is `T(iota)`.
//! The p-value is the share of group elements with `T(g) >= T(iota)`; the
//! critical value is the `1 - alpha` quantile of `{T(g)}` under the
//! infimum definition.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ArtError, Result};
use crate::estimation::{self, ClusterEstimates};
use crate::group::{GroupMode, SignGroup};
use crate::model::{ClusteredDataset, LinearHypothesis, MultiHypothesis};

/// Relative tolerance under which two statistics are treated as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// `true` when `value` and `reference` are within the tie tolerance.
pub fn is_tie(value: f64, reference: f64) -> bool {
    (value - reference).abs() <= TIE_TOLERANCE * reference.abs().max(1.0)
}

/// `value >= reference`, counting snapped ties as equal.
pub fn at_least(value: f64, reference: f64) -> bool {
    value >= reference || is_tie(value, reference)
}

/// Per-cluster rate used to scale `c'beta_j - lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreScaling {
    /// `sqrt(n_j)`, the scalar-hypothesis default.
    #[default]
    RootNj,
    /// `sqrt(n)` for every cluster, as in the Wald statistic.
    RootN,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestVariant {
    #[default]
    Unstudentized,
    Studentized,
}

/// Cluster-level scores `S_j` together with the cluster sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    scores: Vec<f64>,
    sizes: Vec<usize>,
}

impl ScoreVector {
    pub fn new(scores: Vec<f64>, sizes: Vec<usize>) -> Result<Self> {
        if scores.len() != sizes.len() {
            return Err(ArtError::LengthMismatch {
                expected: sizes.len(),
                found: scores.len(),
            });
        }
        if scores.len() < 2 {
            return Err(ArtError::TooFewClusters {
                found: scores.len(),
            });
        }
        if let Some(j) = scores.iter().position(|s| !s.is_finite()) {
            return Err(ArtError::NonFiniteValue {
                field: "score".into(),
                row: j,
            });
        }
        Ok(Self { scores, sizes })
    }

    /// `S_j = sqrt(n_j) (c'beta_j - lambda)`.
    pub fn from_estimates(est: &ClusterEstimates, h: &LinearHypothesis) -> Result<Self> {
        Self::from_estimates_scaled(est, h, ScoreScaling::RootNj)
    }

    pub fn from_estimates_scaled(
        est: &ClusterEstimates,
        h: &LinearHypothesis,
        scaling: ScoreScaling,
    ) -> Result<Self> {
        if h.contrast().len() != est.dim() {
            return Err(ArtError::LengthMismatch {
                expected: est.dim(),
                found: h.contrast().len(),
            });
        }
        let n = est.n_total() as f64;
        let scores = est
            .contrast_estimates(h.contrast())
            .into_iter()
            .zip(&est.sizes)
            .map(|(theta, &nj)| {
                let rate = match scaling {
                    ScoreScaling::RootNj => (nj as f64).sqrt(),
                    ScoreScaling::RootN => n.sqrt(),
                };
                rate * (theta - h.value())
            })
            .collect();
        Self::new(scores, est.sizes.clone())
    }

    /// Scores through the restricted full-sample fit and within-cluster
    /// weighted moments.
    pub fn from_weighted_scores(
        data: &ClusteredDataset,
        est: &ClusterEstimates,
        h: &LinearHypothesis,
    ) -> Result<Self> {
        let fit = estimation::fit_restricted(data, h)?;
        let scores = estimation::cluster_scores(data, &fit, est, h)?;
        Self::new(scores, est.sizes.clone())
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn q(&self) -> usize {
        self.scores.len()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.scores.iter().map(|s| s * factor).collect(),
            self.sizes.clone(),
        )
    }

    /// `V = (1/q) sum_j S_j^2`, the same for every sign vector.
    pub fn second_moment(&self) -> f64 {
        self.scores.iter().map(|s| s * s).sum::<f64>() / self.q() as f64
    }

    fn signed_mean(&self, g: &[i8]) -> f64 {
        assert_eq!(g.len(), self.q(), "sign vector length must equal q");
        self.scores
            .iter()
            .zip(g)
            .map(|(s, &gj)| f64::from(gj) * s)
            .sum::<f64>()
            / self.q() as f64
    }
}

/// Scores `S_j = sqrt(n_j) (c'beta_j - lambda)` from per-cluster estimates.
pub fn scores_from_estimates(est: &ClusterEstimates, h: &LinearHypothesis) -> Result<ScoreVector> {
    ScoreVector::from_estimates(est, h)
}

/// `T(g) = |(1/q) sum_j g_j S_j|`.
pub fn statistic(s: &ScoreVector, g: &[i8]) -> f64 {
    s.signed_mean(g).abs()
}

/// `sqrt(q) T(g) / sigma(g)` where `sigma(g)` is the standard deviation of
/// the signed scores `g_j S_j`.
pub fn statistic_studentized(s: &ScoreVector, g: &[i8]) -> Result<f64> {
    let mean = s.signed_mean(g);
    let q = s.q() as f64;
    let var = s
        .scores
        .iter()
        .zip(g)
        .map(|(x, &gj)| (f64::from(gj) * x - mean).powi(2))
        .sum::<f64>()
        / q;
    let sd = var.sqrt();
    if sd <= TIE_TOLERANCE * s.second_moment().sqrt() {
        return Err(ArtError::DegenerateVariance);
    }
    Ok(q.sqrt() * mean.abs() / sd)
}

/// Precomputed pieces of the Wald statistic for `R beta = Lambda`.
#[derive(Debug, Clone)]
pub struct WaldScores {
    scores: Vec<DVector<f64>>,
    sigma_chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl WaldScores {
    /// `S_j = rate_j (R beta_j - Lambda)` and `Sigma = (1/q) sum_j S_j S_j'`.
    pub fn new(est: &ClusterEstimates, h: &MultiHypothesis, scaling: ScoreScaling) -> Result<Self> {
        if h.restriction().ncols() != est.dim() {
            return Err(ArtError::LengthMismatch {
                expected: est.dim(),
                found: h.restriction().ncols(),
            });
        }
        let n = est.n_total() as f64;
        let values = DVector::from_column_slice(h.values());
        let scores: Vec<DVector<f64>> = est
            .betas
            .iter()
            .zip(&est.sizes)
            .map(|(b, &nj)| {
                let rate = match scaling {
                    ScoreScaling::RootN => n.sqrt(),
                    ScoreScaling::RootNj => (nj as f64).sqrt(),
                };
                (h.restriction() * DVector::from_column_slice(b) - &values) * rate
            })
            .collect();
        let p = h.rows();
        let q = scores.len() as f64;
        let mut sigma = DMatrix::zeros(p, p);
        for s in &scores {
            sigma += s * s.transpose();
        }
        sigma /= q;
        if estimation::reciprocal_condition(&sigma) < estimation::RCOND_THRESHOLD {
            return Err(ArtError::SingularSigma);
        }
        let sigma_chol = sigma.cholesky().ok_or(ArtError::SingularSigma)?;
        Ok(Self { scores, sigma_chol })
    }

    /// `q m(g)' Sigma^{-1} m(g)` with `m(g) = (1/q) sum_j g_j S_j`.
    pub fn statistic(&self, g: &[i8]) -> f64 {
        assert_eq!(
            g.len(),
            self.scores.len(),
            "sign vector length must equal q"
        );
        let q = self.scores.len() as f64;
        let p = self.scores[0].len();
        let mut mean = DVector::zeros(p);
        for (s, &gj) in self.scores.iter().zip(g) {
            mean += s * f64::from(gj);
        }
        mean /= q;
        let solved = self.sigma_chol.solve(&mean);
        q * mean.dot(&solved)
    }
}

/// Wald-type statistic for a multi-row hypothesis.
pub fn statistic_wald(
    est: &ClusterEstimates,
    h: &MultiHypothesis,
    g: &[i8],
    scaling: ScoreScaling,
) -> Result<f64> {
    Ok(WaldScores::new(est, h, scaling)?.statistic(g))
}

/// Smallest `k` in `1..=n` with `k / n >= level`, the order statistic that
/// realizes the infimum-based quantile.
pub fn order_index(n: usize, level: f64) -> usize {
    assert!(n > 0);
    let nf = n as f64;
    let mut k = ((nf * level).ceil() as usize).clamp(1, n);
    while k > 1 && (k - 1) as f64 / nf >= level {
        k -= 1;
    }
    while k < n && (k as f64 / nf) < level {
        k += 1;
    }
    k
}

/// `inf{u : (1/|G|) #{T(g) <= u} >= level}`.
pub fn critical_value(values: &[f64], level: f64) -> f64 {
    assert!(!values.is_empty(), "critical value of an empty multiset");
    let mut scratch = values.to_vec();
    let k = order_index(scratch.len(), level) - 1;
    *scratch.select_nth_unstable_by(k, f64::total_cmp).1
}

/// Output of one randomization test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
    pub group_size: usize,
    /// Number of group elements with `T(g) >= T`.
    pub exceedances: usize,
    pub variant: TestVariant,
    pub mode: GroupMode,
    pub seed: Option<u64>,
}

impl TestResult {
    /// Smallest p-value this group can produce: `2 / |G|` in exhaustive
    /// mode (identity and its negation always count).
    pub fn min_attainable_p(&self) -> f64 {
        match self.mode {
            GroupMode::Exhaustive => 2.0 / self.group_size as f64,
            GroupMode::Sampled => 1.0 / self.group_size as f64,
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ArtError::InvalidAlpha(alpha));
    }
    Ok(())
}

fn check_group(q: usize, group: &SignGroup) -> Result<()> {
    if group.q() != q {
        return Err(ArtError::LengthMismatch {
            expected: q,
            found: group.q(),
        });
    }
    Ok(())
}

/// Decide the test from the observed statistic and the randomization
/// distribution `values` (one entry per group element).
pub fn decide(observed: f64, values: &[f64], alpha: f64) -> (f64, f64, bool, usize) {
    let crit = critical_value(values, 1.0 - alpha);
    let exceed = values.iter().filter(|&&v| at_least(v, observed)).count();
    let p = exceed as f64 / values.len() as f64;
    let reject = observed > crit && !is_tie(observed, crit);
    (crit, p, reject, exceed)
}

/// Randomization distribution of the chosen statistic over `group`.
pub fn randomization_values(
    s: &ScoreVector,
    group: &SignGroup,
    variant: TestVariant,
) -> Result<Vec<f64>> {
    check_group(s.q(), group)?;
    match variant {
        TestVariant::Unstudentized => Ok(group.par_iter().map(|g| statistic(s, g)).collect()),
        TestVariant::Studentized => {
            // the observed statistic must be well defined
            statistic_studentized(s, &vec![1; s.q()])?;
            Ok(group
                .par_iter()
                // zero spread means |mean| attains its maximum sqrt(V)
                .map(|g| statistic_studentized(s, g).unwrap_or(f64::INFINITY))
                .collect())
        }
    }
}

/// Test `c'beta = lambda` from precomputed scores.
pub fn run_test_on_scores(
    s: &ScoreVector,
    alpha: f64,
    group: &SignGroup,
    variant: TestVariant,
) -> Result<TestResult> {
    check_alpha(alpha)?;
    let values = randomization_values(s, group, variant)?;
    let iota = vec![1i8; s.q()];
    let observed = match variant {
        TestVariant::Unstudentized => statistic(s, &iota),
        TestVariant::Studentized => statistic_studentized(s, &iota)?,
    };
    let (critical_value, p_value, reject, exceedances) = decide(observed, &values, alpha);
    Ok(TestResult {
        statistic: observed,
        critical_value,
        p_value,
        reject,
        alpha,
        group_size: values.len(),
        exceedances,
        variant,
        mode: group.mode(),
        seed: group.seed(),
    })
}

/// Full pipeline: cluster-by-cluster OLS, scores, randomization test.
pub fn run_test(
    data: &ClusteredDataset,
    h: &LinearHypothesis,
    alpha: f64,
    group: &SignGroup,
    variant: TestVariant,
) -> Result<TestResult> {
    check_alpha(alpha)?;
    let est = estimation::fit_per_cluster(data)?;
    let s = ScoreVector::from_estimates(&est, h)?;
    run_test_on_scores(&s, alpha, group, variant)
}

/// Randomization test of `R beta = Lambda` with the Wald statistic.
pub fn run_wald_test(
    est: &ClusterEstimates,
    h: &MultiHypothesis,
    alpha: f64,
    group: &SignGroup,
    scaling: ScoreScaling,
) -> Result<TestResult> {
    check_alpha(alpha)?;
    check_group(est.q(), group)?;
    let wald = WaldScores::new(est, h, scaling)?;
    let values: Vec<f64> = group.par_iter().map(|g| wald.statistic(g)).collect();
    let observed = wald.statistic(&vec![1; est.q()]);
    let (critical_value, p_value, reject, exceedances) = decide(observed, &values, alpha);
    Ok(TestResult {
        statistic: observed,
        critical_value,
        p_value,
        reject,
        alpha,
        group_size: values.len(),
        exceedances,
        variant: TestVariant::Unstudentized,
        mode: group.mode(),
        seed: group.seed(),
    })
}
