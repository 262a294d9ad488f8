//! Sign-change groups: the full set `{1,-1}^q` or a seeded Rademacher sample.
//!
//! Sampled groups use ChaCha20 seeded through `SeedableRng::seed_from_u64`.
//! Each of the `B - 1` random vectors consumes `ceil(q / 64)` consecutive
//! `u64` words from the stream; bit `j % 64` of word `j / 64` set means
//! `g_j = -1`. The stream layout is fixed, so a seed reproduces the same
//! group on every platform.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ArtError, Result};
use crate::model::SignVector;

/// Largest `q` enumerated exhaustively without an explicit override.
pub const MAX_EXHAUSTIVE_Q: usize = 20;
/// Hard ceiling even with the override (memory: `q * 2^q` bytes).
pub const MAX_EXHAUSTIVE_Q_OVERRIDE: usize = 24;
/// `Auto` enumerates exhaustively up to this many clusters.
pub const AUTO_EXHAUSTIVE_Q: usize = 14;
pub const DEFAULT_DRAWS: usize = 1000;
pub const DEFAULT_SEED: u64 = 20_170_401;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupMode {
    Exhaustive,
    Sampled,
}

/// How to build the group for a given `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum GroupSpec {
    Exhaustive {
        #[serde(default)]
        allow_large: bool,
    },
    Sampled {
        draws: usize,
        seed: u64,
    },
    /// Exhaustive for `q <= 14`, sampled otherwise.
    Auto {
        draws: usize,
        seed: u64,
    },
}

impl Default for GroupSpec {
    fn default() -> Self {
        GroupSpec::Auto {
            draws: DEFAULT_DRAWS,
            seed: DEFAULT_SEED,
        }
    }
}

impl GroupSpec {
    pub fn exhaustive() -> Self {
        GroupSpec::Exhaustive { allow_large: false }
    }

    pub fn sampled(draws: usize, seed: u64) -> Self {
        GroupSpec::Sampled { draws, seed }
    }

    pub fn build(&self, q: usize) -> Result<SignGroup> {
        match *self {
            GroupSpec::Exhaustive { allow_large } => SignGroup::exhaustive(q, allow_large),
            GroupSpec::Sampled { draws, seed } => SignGroup::sampled(q, draws, seed),
            GroupSpec::Auto { draws, seed } => {
                if q <= AUTO_EXHAUSTIVE_Q {
                    SignGroup::exhaustive(q, false)
                } else {
                    SignGroup::sampled(q, draws, seed)
                }
            }
        }
    }
}

/// An ordered collection of sign vectors of common length `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignGroup {
    mode: GroupMode,
    q: usize,
    seed: Option<u64>,
    /// Row-major `len x q`.
    signs: Vec<i8>,
}

/// Build a sign group. `draws` and `seed` are ignored in exhaustive mode.
pub fn enumerate_group(q: usize, mode: GroupMode, draws: usize, seed: u64) -> Result<SignGroup> {
    match mode {
        GroupMode::Exhaustive => SignGroup::exhaustive(q, false),
        GroupMode::Sampled => SignGroup::sampled(q, draws, seed),
    }
}

impl SignGroup {
    /// All `2^q` sign vectors in lexicographic order with `+1 < -1`, so the
    /// identity comes first and its negation last.
    pub fn exhaustive(q: usize, allow_large: bool) -> Result<Self> {
        check_q(q)?;
        let limit = if allow_large {
            MAX_EXHAUSTIVE_Q_OVERRIDE
        } else {
            MAX_EXHAUSTIVE_Q
        };
        if q > limit {
            return Err(ArtError::GroupTooLarge { q, limit });
        }
        let count = 1usize << q;
        let mut signs = Vec::with_capacity(count * q);
        for k in 0..count {
            for j in 0..q {
                let bit = (k >> (q - 1 - j)) & 1;
                signs.push(if bit == 1 { -1 } else { 1 });
            }
        }
        Ok(Self {
            mode: GroupMode::Exhaustive,
            q,
            seed: None,
            signs,
        })
    }

    /// Identity first, then `draws - 1` i.i.d. Rademacher vectors.
    pub fn sampled(q: usize, draws: usize, seed: u64) -> Result<Self> {
        check_q(q)?;
        if draws < 2 {
            return Err(ArtError::TooFewDraws(draws));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let words = q.div_ceil(64);
        let mut signs = Vec::with_capacity(draws * q);
        signs.extend(std::iter::repeat_n(1i8, q));
        let mut buf = vec![0u64; words];
        for _ in 1..draws {
            buf.iter_mut().for_each(|w| *w = rng.next_u64());
            for j in 0..q {
                let bit = (buf[j / 64] >> (j % 64)) & 1;
                signs.push(if bit == 1 { -1 } else { 1 });
            }
        }
        Ok(Self {
            mode: GroupMode::Sampled,
            q,
            seed: Some(seed),
            signs,
        })
    }

    pub fn mode(&self) -> GroupMode {
        self.mode
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// `|G|` in exhaustive mode, `B` in sampled mode.
    pub fn len(&self) -> usize {
        self.signs.len() / self.q
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    pub fn get(&self, k: usize) -> &[i8] {
        &self.signs[k * self.q..(k + 1) * self.q]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, i8> {
        self.signs.chunks_exact(self.q)
    }

    pub fn par_iter(&self) -> rayon::slice::ChunksExact<'_, i8> {
        self.signs.par_chunks_exact(self.q)
    }

    pub fn vectors(&self) -> Vec<SignVector> {
        self.iter()
            .map(|g| SignVector::new(g.to_vec()).expect("group holds valid signs"))
            .collect()
    }
}

fn check_q(q: usize) -> Result<()> {
    if q < 2 {
        return Err(ArtError::TooFewClusters { found: q });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn two_cluster_enumeration() {
        let g = SignGroup::exhaustive(2, false).unwrap();
        let v: Vec<&[i8]> = g.iter().collect();
        assert_eq!(v, vec![&[1, 1][..], &[1, -1], &[-1, 1], &[-1, -1]]);
        assert_eq!(g.len(), 4);
    }

    #[test]
    fn exhaustive_has_no_repeats() {
        for q in 2..=12 {
            let g = SignGroup::exhaustive(q, false).unwrap();
            let set: HashSet<&[i8]> = g.iter().collect();
            assert_eq!(set.len(), 1 << q);
            assert_eq!(g.len(), 1 << q);
        }
    }

    #[test]
    fn exhaustive_count_at_cap() {
        let g = SignGroup::exhaustive(MAX_EXHAUSTIVE_Q, false).unwrap();
        assert_eq!(g.len(), 1 << MAX_EXHAUSTIVE_Q);
        assert!(g.get(0).iter().all(|&s| s == 1));
        assert!(g.get(g.len() - 1).iter().all(|&s| s == -1));
    }

    #[test]
    fn exhaustive_too_large() {
        assert_eq!(
            SignGroup::exhaustive(21, false).unwrap_err(),
            ArtError::GroupTooLarge { q: 21, limit: 20 }
        );
        assert!(SignGroup::exhaustive(25, true).is_err());
    }

    #[test]
    fn sampled_is_deterministic_and_starts_with_identity() {
        let a = SignGroup::sampled(12, 1000, 7).unwrap();
        let b = SignGroup::sampled(12, 1000, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.get(0).iter().all(|&s| s == 1));
        let c = SignGroup::sampled(12, 1000, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sampled_coordinates_are_balanced() {
        let b = 1000;
        let g = SignGroup::sampled(12, b, 99).unwrap();
        let bound = 4.0 / ((b - 1) as f64).sqrt();
        for j in 0..12 {
            let mean: f64 = (1..b).map(|k| g.get(k)[j] as f64).sum::<f64>() / (b - 1) as f64;
            assert!(mean.abs() < bound, "coordinate {j}: mean {mean}");
        }
    }

    #[test]
    fn sampled_needs_two_draws() {
        assert_eq!(
            SignGroup::sampled(5, 1, 0).unwrap_err(),
            ArtError::TooFewDraws(1)
        );
        assert!(SignGroup::sampled(70, 10, 0).is_ok());
    }

    #[test]
    fn auto_switches_on_q() {
        let spec = GroupSpec::default();
        assert_eq!(spec.build(14).unwrap().mode(), GroupMode::Exhaustive);
        let big = spec.build(15).unwrap();
        assert_eq!(big.mode(), GroupMode::Sampled);
        assert_eq!(big.len(), DEFAULT_DRAWS);
    }
}
