//! Closed-form confidence intervals for `c'beta` obtained by inverting the
//! randomization test, plus a grid-based inversion used for cross-checks.
//!
//! Writing `theta_j = c'beta_j` and `w_j = sqrt(n_j)`, the statistic at a
//! null value `lambda` is `|b(g) - lambda a(g)|` with
//! `a(g) = (1/q) sum_j w_j g_j` and `b(g) = (1/q) sum_j w_j g_j theta_j`.
//! Each sign vector contributes the crossing points of its V-shaped map with
//! the one for the identity; the interval endpoints are `alpha` quantiles of
//! those crossing points.

use serde::{Deserialize, Serialize};

use crate::art::{self, at_least, order_index, ScoreVector, TestVariant};
use crate::error::{ArtError, Result};
use crate::estimation::{self, ClusterEstimates};
use crate::group::SignGroup;
use crate::model::{is_plus_minus_identity, ClusteredDataset, ExtendedReal, LinearHypothesis};

/// Per-cluster weights and contrast estimates, with `a(g)`, `b(g)` evaluated
/// for every element of a sign group (in group order).
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalInputs {
    weights: Vec<f64>,
    thetas: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    plus_minus_identity: Vec<bool>,
    a_iota: f64,
    b_iota: f64,
    lambda0: f64,
}

fn a_b(weights: &[f64], thetas: &[f64], g: &[i8]) -> (f64, f64) {
    let q = weights.len() as f64;
    let mut a = 0.0;
    let mut b = 0.0;
    for ((w, t), &s) in weights.iter().zip(thetas).zip(g) {
        let ws = w * f64::from(s);
        a += ws;
        b += ws * t;
    }
    (a / q, b / q)
}

/// Evaluate `a(g)`, `b(g)` and `lambda0 = b(iota)/a(iota)`.
pub fn interval_inputs(
    est: &ClusterEstimates,
    contrast: &[f64],
    group: &SignGroup,
) -> Result<IntervalInputs> {
    if contrast.len() != est.dim() {
        return Err(ArtError::LengthMismatch {
            expected: est.dim(),
            found: contrast.len(),
        });
    }
    IntervalInputs::from_contrast_values(&est.contrast_estimates(contrast), &est.sizes, group)
}

impl IntervalInputs {
    pub fn from_contrast_values(
        thetas: &[f64],
        sizes: &[usize],
        group: &SignGroup,
    ) -> Result<Self> {
        if thetas.len() != sizes.len() {
            return Err(ArtError::LengthMismatch {
                expected: sizes.len(),
                found: thetas.len(),
            });
        }
        if group.q() != thetas.len() {
            return Err(ArtError::LengthMismatch {
                expected: thetas.len(),
                found: group.q(),
            });
        }
        if sizes.contains(&0) {
            return Err(ArtError::EmptyCluster {
                label: "(unnamed)".into(),
            });
        }
        let weights: Vec<f64> = sizes.iter().map(|&n| (n as f64).sqrt()).collect();
        let (a_iota, b_iota) = a_b(&weights, thetas, &vec![1; thetas.len()]);
        let mut a = Vec::with_capacity(group.len());
        let mut b = Vec::with_capacity(group.len());
        let mut pm = Vec::with_capacity(group.len());
        for g in group.iter() {
            let (ag, bg) = a_b(&weights, thetas, g);
            a.push(ag);
            b.push(bg);
            pm.push(is_plus_minus_identity(g));
        }
        Ok(Self {
            weights,
            thetas: thetas.to_vec(),
            a,
            b,
            plus_minus_identity: pm,
            a_iota,
            b_iota,
            lambda0: b_iota / a_iota,
        })
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn a_iota(&self) -> f64 {
        self.a_iota
    }

    pub fn b_iota(&self) -> f64 {
        self.b_iota
    }

    /// `a(g)` in group order.
    pub fn a(&self) -> &[f64] {
        &self.a
    }

    /// `b(g)` in group order.
    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn group_len(&self) -> usize {
        self.a.len()
    }

    /// `a(g)`, `b(g)` for an arbitrary sign vector.
    pub fn evaluate(&self, g: &[i8]) -> (f64, f64) {
        assert_eq!(
            g.len(),
            self.weights.len(),
            "sign vector length must equal q"
        );
        a_b(&self.weights, &self.thetas, g)
    }

    fn bounds_from(&self, a: f64, b: f64, pm_identity: bool) -> (ExtendedReal, ExtendedReal) {
        if pm_identity {
            return (ExtendedReal::NegInf, ExtendedReal::PosInf);
        }
        let (ai, bi, l0) = (self.a_iota, self.b_iota, self.lambda0);
        if a == 0.0 {
            let half = b.abs() / ai;
            return (
                ExtendedReal::Finite(l0 - half),
                ExtendedReal::Finite(l0 + half),
            );
        }
        let abs_a = a.abs();
        let ratio = b / a;
        // |a| * (b/a) written as sign(a) * b to avoid dividing by a tiny a
        let weighted = a.signum() * b;
        let near = (bi + weighted) / (ai + abs_a);
        let far = (bi - weighted) / (ai - abs_a);
        let lower = if ratio <= l0 { near } else { far };
        let upper = if ratio >= l0 { near } else { far };
        (ExtendedReal::Finite(lower), ExtendedReal::Finite(upper))
    }

    /// `(lambda_l(g), lambda_u(g))` for the `k`-th group element.
    pub fn bounds_at(&self, k: usize) -> (ExtendedReal, ExtendedReal) {
        self.bounds_from(self.a[k], self.b[k], self.plus_minus_identity[k])
    }

    /// Statistic `|b(g) - lambda a(g)|` for the `k`-th group element.
    pub fn statistic_at(&self, k: usize, lambda: f64) -> f64 {
        (self.b[k] - lambda * self.a[k]).abs()
    }
}

/// Crossing points of `lambda -> |b(g) - lambda a(g)|` with the identity's
/// V. Infinite for `g = +-iota`.
pub fn per_g_bounds(inputs: &IntervalInputs, g: &[i8]) -> (ExtendedReal, ExtendedReal) {
    let (a, b) = inputs.evaluate(g);
    inputs.bounds_from(a, b, is_plus_minus_identity(g))
}

/// A confidence interval over the extended reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: ExtendedReal,
    pub upper: ExtendedReal,
    pub alpha: f64,
    pub lambda0: f64,
    /// `(lambda_l(g), lambda_u(g))` in group order. Empty for intervals
    /// obtained by grid inversion.
    #[serde(skip)]
    pub per_g_bounds: Vec<(ExtendedReal, ExtendedReal)>,
}

impl ConfidenceInterval {
    pub fn is_bounded(&self) -> bool {
        self.lower.is_finite() && self.upper.is_finite()
    }

    pub fn contains(&self, lambda: f64) -> bool {
        let x = ExtendedReal::Finite(lambda);
        self.lower <= x && x <= self.upper
    }
}

/// `alpha`-quantile of `lambda_l(g)` for the lower endpoint and minus the
/// `alpha`-quantile of `-lambda_u(g)` for the upper endpoint.
pub fn interval(inputs: &IntervalInputs, alpha: f64) -> Result<ConfidenceInterval> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ArtError::InvalidAlpha(alpha));
    }
    let bounds: Vec<(ExtendedReal, ExtendedReal)> = (0..inputs.group_len())
        .map(|k| inputs.bounds_at(k))
        .collect();
    let k = order_index(bounds.len(), alpha) - 1;
    let mut lowers: Vec<ExtendedReal> = bounds.iter().map(|b| b.0).collect();
    let mut neg_uppers: Vec<ExtendedReal> = bounds.iter().map(|b| -b.1).collect();
    let (_, lower, _) = lowers.select_nth_unstable(k);
    let (_, neg_upper, _) = neg_uppers.select_nth_unstable(k);
    Ok(ConfidenceInterval {
        lower: *lower,
        upper: -*neg_upper,
        alpha,
        lambda0: inputs.lambda0,
        per_g_bounds: bounds,
    })
}

/// Per-cluster OLS followed by the closed-form interval.
pub fn confidence_interval(
    data: &ClusteredDataset,
    contrast: &[f64],
    alpha: f64,
    group: &SignGroup,
) -> Result<ConfidenceInterval> {
    let est = estimation::fit_per_cluster(data)?;
    interval(&interval_inputs(&est, contrast, group)?, alpha)
}

/// Randomization p-value at `lambda` from the piecewise crossing-point
/// representation.
pub fn pvalue_profile(inputs: &IntervalInputs, lambda: f64) -> f64 {
    let l0 = inputs.lambda0;
    if lambda == l0 {
        return 1.0;
    }
    let x = ExtendedReal::Finite(lambda);
    let count = (0..inputs.group_len())
        .filter(|&k| {
            let (lo, hi) = inputs.bounds_at(k);
            if lambda < l0 {
                x >= lo
            } else {
                x <= hi
            }
        })
        .count();
    count as f64 / inputs.group_len() as f64
}

/// Randomization p-value at `lambda` by direct comparison of
/// `|b(g) - lambda a(g)|` against `|b(iota) - lambda a(iota)|`.
pub fn pvalue_profile_direct(inputs: &IntervalInputs, lambda: f64) -> f64 {
    let observed = (inputs.b_iota - lambda * inputs.a_iota).abs();
    let count = (0..inputs.group_len())
        .filter(|&k| at_least(inputs.statistic_at(k, lambda), observed))
        .count();
    count as f64 / inputs.group_len() as f64
}

/// Evenly spaced grid of null values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lower: f64,
    pub upper: f64,
    pub points: usize,
}

impl GridSpec {
    pub const DEFAULT_POINTS: usize = 4001;

    /// `points` values over `[lambda0 - 10 span, lambda0 + 10 span]` where
    /// `span = max_j |theta_j - lambda0|` plus a machine floor.
    pub fn around(inputs: &IntervalInputs, points: usize) -> Self {
        let l0 = inputs.lambda0;
        let span = inputs
            .thetas
            .iter()
            .map(|t| (t - l0).abs())
            .fold(0.0, f64::max)
            + f64::EPSILON * l0.abs().max(1.0);
        Self {
            lower: l0 - 10.0 * span,
            upper: l0 + 10.0 * span,
            points,
        }
    }

    pub fn step(&self) -> f64 {
        (self.upper - self.lower) / (self.points - 1) as f64
    }

    pub fn values(&self) -> Vec<f64> {
        let step = self.step();
        (0..self.points)
            .map(|i| {
                if i + 1 == self.points {
                    self.upper
                } else {
                    self.lower + step * i as f64
                }
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.points < 2
            || self.lower >= self.upper
            || !self.lower.is_finite()
            || !self.upper.is_finite()
        {
            return Err(ArtError::InvalidGrid(format!(
                "need finite lower < upper and at least 2 points, got [{}, {}] x {}",
                self.lower, self.upper, self.points
            )));
        }
        Ok(())
    }
}

/// One grid point of a test-inversion scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub lambda: f64,
    pub p_value: f64,
    pub reject: bool,
}

/// Run the randomization test at every grid value.
pub fn inversion_scan(
    est: &ClusterEstimates,
    contrast: &[f64],
    alpha: f64,
    group: &SignGroup,
    grid: &GridSpec,
) -> Result<Vec<ScanPoint>> {
    grid.validate()?;
    // validates the contrast once; scores are then rebuilt per grid value
    let h = LinearHypothesis::new(contrast.to_vec(), grid.lower)?;
    ScoreVector::from_estimates(est, &h)?;
    let thetas = est.contrast_estimates(contrast);
    let roots: Vec<f64> = est.sizes.iter().map(|&n| (n as f64).sqrt()).collect();
    let mut out = Vec::with_capacity(grid.points);
    for lambda in grid.values() {
        let scores = thetas
            .iter()
            .zip(&roots)
            .map(|(t, r)| r * (t - lambda))
            .collect();
        let s = ScoreVector::new(scores, est.sizes.clone())?;
        let r = art::run_test_on_scores(&s, alpha, group, TestVariant::Unstudentized)?;
        out.push(ScanPoint {
            lambda,
            p_value: r.p_value,
            reject: r.reject,
        });
    }
    Ok(out)
}

/// Brute-force interval: smallest and largest grid values the test does not
/// reject. Endpoints are finite grid values even when the closed-form
/// interval is unbounded.
pub fn interval_by_inversion(
    data: &ClusteredDataset,
    contrast: &[f64],
    alpha: f64,
    group: &SignGroup,
    grid: Option<GridSpec>,
) -> Result<ConfidenceInterval> {
    let est = estimation::fit_per_cluster(data)?;
    interval_by_inversion_from_estimates(&est, contrast, alpha, group, grid)
}

pub fn interval_by_inversion_from_estimates(
    est: &ClusterEstimates,
    contrast: &[f64],
    alpha: f64,
    group: &SignGroup,
    grid: Option<GridSpec>,
) -> Result<ConfidenceInterval> {
    let inputs = interval_inputs(est, contrast, group)?;
    let grid = grid.unwrap_or_else(|| GridSpec::around(&inputs, GridSpec::DEFAULT_POINTS));
    let scan = inversion_scan(est, contrast, alpha, group, &grid)?;
    let kept: Vec<f64> = scan
        .iter()
        .filter(|p| !p.reject)
        .map(|p| p.lambda)
        .collect();
    let (Some(&lo), Some(&hi)) = (kept.first(), kept.last()) else {
        return Err(ArtError::GridTooCoarse);
    };
    Ok(ConfidenceInterval {
        lower: ExtendedReal::Finite(lo),
        upper: ExtendedReal::Finite(hi),
        alpha,
        lambda0: inputs.lambda0,
        per_g_bounds: Vec::new(),
    })
}
