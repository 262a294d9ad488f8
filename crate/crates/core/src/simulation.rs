//! Monte Carlo size and power studies under clustered, heteroskedastic
//! data-generating processes.
//!
//! Replication `r` of a design draws from ChaCha20 seeded with the design
//! seed and switched to stream `r`, so every replication is reproducible on
//! its own and results do not depend on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::art::{self, ScoreVector, TestVariant};
use crate::error::{ArtError, Result};
use crate::estimation;
use crate::group::{GroupSpec, SignGroup};
use crate::model::{ClusteredDataset, LinearHypothesis, RawRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovariateLaw {
    /// Standard normal regressors.
    #[default]
    Normal,
    /// `exp(N(0,1))` regressors; heavier tails, worse conditioning.
    LogNormal,
}

/// A clustered linear model `Y = Z'beta + e`. The first covariate is an
/// intercept; the remaining `dim - 1` are drawn from `covariates`. Errors
/// are `sigma_j (sqrt(rho) u_j + sqrt(1 - rho) e_ij)` with a shared cluster
/// factor `u_j` and idiosyncratic `e_ij`, all standard normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub sizes: Vec<usize>,
    pub beta: Vec<f64>,
    pub sigma: Vec<f64>,
    #[serde(default)]
    pub rho: f64,
    #[serde(default)]
    pub covariates: CovariateLaw,
    pub seed: u64,
}

impl DgpSpec {
    /// Equal cluster sizes, noise scales spaced evenly on `[1, ratio]`.
    pub fn heteroskedastic(q: usize, size: usize, beta: Vec<f64>, ratio: f64, seed: u64) -> Self {
        let sigma = (0..q)
            .map(|j| {
                if q == 1 {
                    1.0
                } else {
                    1.0 + (ratio - 1.0) * j as f64 / (q - 1) as f64
                }
            })
            .collect();
        Self {
            sizes: vec![size; q],
            beta,
            sigma,
            rho: 0.0,
            covariates: CovariateLaw::Normal,
            seed,
        }
    }

    pub fn q(&self) -> usize {
        self.sizes.len()
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ArtError::InvalidDesign(m));
        if self.q() < 2 {
            return bad(format!("need at least 2 clusters, got {}", self.q()));
        }
        if self.beta.is_empty() {
            return bad("beta must be non-empty".into());
        }
        if self.sigma.len() != self.q() {
            return bad(format!(
                "sigma has {} entries for {} clusters",
                self.sigma.len(),
                self.q()
            ));
        }
        if self.sigma.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return bad("noise scales must be positive and finite".into());
        }
        if let Some(&s) = self.sizes.iter().find(|&&s| s < self.dim() + 1) {
            return bad(format!(
                "cluster size {s} is below dim + 1 = {}",
                self.dim() + 1
            ));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return bad(format!("rho must lie in [0, 1), got {}", self.rho));
        }
        if self.beta.iter().any(|b| !b.is_finite()) {
            return bad("beta must be finite".into());
        }
        Ok(())
    }
}

/// Draw replication `replication` of the design.
pub fn generate(spec: &DgpSpec, replication: u64) -> Result<ClusteredDataset> {
    spec.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    rng.set_stream(replication);
    let dim = spec.dim();
    let (w_shared, w_own) = (spec.rho.sqrt(), (1.0 - spec.rho).sqrt());
    let mut rows = Vec::with_capacity(spec.sizes.iter().sum());
    for (j, (&nj, &sigma)) in spec.sizes.iter().zip(&spec.sigma).enumerate() {
        let shared: f64 = rng.sample(StandardNormal);
        for _ in 0..nj {
            let mut z = Vec::with_capacity(dim);
            z.push(1.0);
            for _ in 1..dim {
                let draw: f64 = rng.sample(StandardNormal);
                z.push(match spec.covariates {
                    CovariateLaw::Normal => draw,
                    CovariateLaw::LogNormal => draw.exp(),
                });
            }
            let own: f64 = rng.sample(StandardNormal);
            let noise = sigma * (w_shared * shared + w_own * own);
            let y = z.iter().zip(&spec.beta).map(|(a, b)| a * b).sum::<f64>() + noise;
            rows.push(RawRow::new(format!("c{}", j + 1), y, z));
        }
    }
    let names = (0..dim)
        .map(|k| {
            if k == 0 {
                "const".to_string()
            } else {
                format!("x{k}")
            }
        })
        .collect();
    ClusteredDataset::from_rows(rows, names)
}

/// Rejection frequency over `replications` draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub replications: usize,
    pub rejections: usize,
    pub rate: f64,
    /// `sqrt(rate (1 - rate) / R)`.
    pub mcse: f64,
    pub alpha: f64,
    pub null_value: f64,
    pub true_value: f64,
    pub p_values: Vec<f64>,
}

impl MonteCarloReport {
    /// `rate + 2 * mcse`, the tolerance used throughout.
    pub fn upper_band(&self) -> f64 {
        self.rate + 2.0 * self.mcse
    }

    pub fn lower_band(&self) -> f64 {
        self.rate - 2.0 * self.mcse
    }
}

/// Test settings shared by the studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySettings {
    pub contrast: Vec<f64>,
    pub alpha: f64,
    pub replications: usize,
    #[serde(default)]
    pub group: GroupSpec,
    #[serde(default)]
    pub variant: TestVariant,
}

fn rejection_study(
    spec: &DgpSpec,
    settings: &StudySettings,
    null_value: f64,
) -> Result<MonteCarloReport> {
    spec.validate()?;
    if settings.replications == 0 {
        return Err(ArtError::InvalidDesign(
            "need at least one replication".into(),
        ));
    }
    if settings.contrast.len() != spec.dim() {
        return Err(ArtError::LengthMismatch {
            expected: spec.dim(),
            found: settings.contrast.len(),
        });
    }
    let h = LinearHypothesis::new(settings.contrast.clone(), null_value)?;
    let group: SignGroup = settings.group.build(spec.q())?;
    let p_values: Vec<Result<(f64, bool)>> = (0..settings.replications as u64)
        .into_par_iter()
        .map(|r| {
            let data = generate(spec, r)?;
            let est = estimation::fit_per_cluster(&data)?;
            let s = ScoreVector::from_estimates(&est, &h)?;
            let res = art::run_test_on_scores(&s, settings.alpha, &group, settings.variant)?;
            Ok((res.p_value, res.reject))
        })
        .collect();
    let mut ps = Vec::with_capacity(p_values.len());
    let mut rejections = 0;
    for item in p_values {
        let (p, reject) = item?;
        ps.push(p);
        rejections += usize::from(reject);
    }
    let r = settings.replications as f64;
    let rate = rejections as f64 / r;
    Ok(MonteCarloReport {
        replications: settings.replications,
        rejections,
        rate,
        mcse: (rate * (1.0 - rate) / r).sqrt(),
        alpha: settings.alpha,
        null_value,
        true_value: h.dot(&spec.beta),
        p_values: ps,
    })
}

/// Rejection rate when the tested value equals the true `c'beta`.
pub fn size_study(spec: &DgpSpec, settings: &StudySettings) -> Result<MonteCarloReport> {
    let truth: f64 = settings
        .contrast
        .iter()
        .zip(&spec.beta)
        .map(|(c, b)| c * b)
        .sum();
    rejection_study(spec, settings, truth)
}

/// Rejection rate when testing `c'beta = true value - effect`.
pub fn power_study(
    spec: &DgpSpec,
    settings: &StudySettings,
    effect: f64,
) -> Result<MonteCarloReport> {
    if !effect.is_finite() {
        return Err(ArtError::InvalidDesign("effect must be finite".into()));
    }
    let truth: f64 = settings
        .contrast
        .iter()
        .zip(&spec.beta)
        .map(|(c, b)| c * b)
        .sum();
    rejection_study(spec, settings, truth - effect)
}

/// Power at each effect size, in input order.
pub fn power_curve(
    spec: &DgpSpec,
    settings: &StudySettings,
    effects: &[f64],
) -> Result<Vec<(f64, MonteCarloReport)>> {
    effects
        .iter()
        .map(|&e| power_study(spec, settings, e).map(|r| (e, r)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(q: usize) -> DgpSpec {
        DgpSpec::heteroskedastic(q, 30, vec![0.0, 1.0], 4.0, 17)
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = base(5);
        assert_eq!(generate(&spec, 3).unwrap(), generate(&spec, 3).unwrap());
        assert_ne!(generate(&spec, 3).unwrap(), generate(&spec, 4).unwrap());
    }

    #[test]
    fn invalid_designs() {
        let mut spec = base(4);
        spec.sigma[1] = 0.0;
        assert!(generate(&spec, 0).is_err());
        let mut spec = base(4);
        spec.rho = 1.0;
        assert!(generate(&spec, 0).is_err());
        let mut spec = base(4);
        spec.sizes[0] = 2;
        assert!(generate(&spec, 0).is_err());
    }

    #[test]
    fn estimates_center_on_truth() {
        let mut spec = base(6);
        spec.beta = vec![0.0, 0.0];
        let reps = 400;
        let mut total = 0.0;
        let mut total_sq = 0.0;
        for r in 0..reps {
            let est = estimation::fit_per_cluster(&generate(&spec, r).unwrap()).unwrap();
            let m = est.betas.iter().map(|b| b[1]).sum::<f64>() / est.q() as f64;
            total += m;
            total_sq += m * m;
        }
        let mean = total / reps as f64;
        let sd = (total_sq / reps as f64 - mean * mean).sqrt();
        assert!(
            mean.abs() < 3.0 * sd / (reps as f64).sqrt(),
            "mean {mean} sd {sd}"
        );
    }

    #[test]
    fn independent_errors_are_uncorrelated_within_clusters() {
        // with beta = 0 and an intercept-only design, Y is the error itself
        let spec = DgpSpec {
            sizes: vec![40; 5],
            beta: vec![0.0],
            sigma: vec![1.0; 5],
            rho: 0.0,
            covariates: CovariateLaw::Normal,
            seed: 5,
        };
        let reps = 200;
        let mut products = 0.0;
        let mut count = 0.0;
        for r in 0..reps {
            let data = generate(&spec, r).unwrap();
            for j in 0..data.q() {
                let y = data.cluster_outcomes(j);
                for pair in y.chunks_exact(2) {
                    products += pair[0] * pair[1];
                    count += 1.0;
                }
            }
        }
        let corr = products / count;
        assert!(corr.abs() < 4.0 / count.sqrt(), "corr {corr}");
    }

    #[test]
    fn equicorrelated_errors_show_up() {
        let spec = DgpSpec {
            sizes: vec![40; 5],
            beta: vec![0.0],
            sigma: vec![1.0; 5],
            rho: 0.5,
            covariates: CovariateLaw::Normal,
            seed: 5,
        };
        let mut products = 0.0;
        let mut count = 0.0;
        for r in 0..200 {
            let data = generate(&spec, r).unwrap();
            for j in 0..data.q() {
                let y = data.cluster_outcomes(j);
                for pair in y.chunks_exact(2) {
                    products += pair[0] * pair[1];
                    count += 1.0;
                }
            }
        }
        assert!((products / count - 0.5).abs() < 0.1);
    }

    #[test]
    fn zero_effect_power_equals_size() {
        let spec = base(6);
        let settings = StudySettings {
            contrast: vec![0.0, 1.0],
            alpha: 0.1,
            replications: 50,
            group: GroupSpec::exhaustive(),
            variant: TestVariant::Unstudentized,
        };
        assert_eq!(
            size_study(&spec, &settings).unwrap(),
            power_study(&spec, &settings, 0.0).unwrap()
        );
    }
}
