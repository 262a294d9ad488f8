//! Pseudo-clusters from consecutive blocks of time-ordered data, and
//! coarsening of existing clusters.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{ArtError, Result};
use crate::model::{ClusteredDataset, RawRow};

/// Split of `n` ordered observations into `q` consecutive blocks: the first
/// `q - 1` blocks hold `floor(n/q)` observations and the last holds the rest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPlan {
    pub n: usize,
    pub q: usize,
    pub base_size: usize,
    pub last_size: usize,
    pub boundaries: Vec<std::ops::Range<usize>>,
}

pub fn plan_blocks(n: usize, q: usize) -> Result<BlockPlan> {
    if q < 2 {
        return Err(ArtError::TooFewClusters { found: q });
    }
    if n < q {
        return Err(ArtError::TooFewObservations { n, q });
    }
    let base = n / q;
    let last = n - base * (q - 1);
    let mut boundaries: Vec<_> = (0..q - 1).map(|j| j * base..(j + 1) * base).collect();
    boundaries.push(base * (q - 1)..n);
    Ok(BlockPlan {
        n,
        q,
        base_size: base,
        last_size: last,
        boundaries,
    })
}

impl BlockPlan {
    pub fn sizes(&self) -> Vec<usize> {
        self.boundaries.iter().map(|r| r.len()).collect()
    }
}

/// An observation carrying a sortable time key.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedRow {
    pub time: f64,
    pub outcome: f64,
    pub covariates: Vec<f64>,
}

/// Sort rows by time (stable) and label them `1..=q` by consecutive blocks.
pub fn blockify(
    mut rows: Vec<TimedRow>,
    q: usize,
    covariate_names: Vec<String>,
) -> Result<ClusteredDataset> {
    let plan = plan_blocks(rows.len(), q)?;
    if let Some(i) = rows.iter().position(|r| !r.time.is_finite()) {
        return Err(ArtError::NonFiniteValue {
            field: "time".into(),
            row: i,
        });
    }
    rows.sort_by(|a, b| a.time.total_cmp(&b.time));
    let duplicates = rows.windows(2).filter(|w| w[0].time == w[1].time).count();
    if duplicates > 0 {
        log::warn!("{duplicates} duplicated time keys; keeping input order among ties");
    }
    let mut raw = Vec::with_capacity(rows.len());
    for (j, range) in plan.boundaries.iter().enumerate() {
        for row in &rows[range.clone()] {
            raw.push(RawRow::new(
                (j + 1).to_string(),
                row.outcome,
                row.covariates.clone(),
            ));
        }
    }
    ClusteredDataset::from_rows(raw, covariate_names)
}

/// Relabel clusters through `grouping` (old label to new label). Rows keep
/// their relative order; merged clusters are ordered by first appearance of
/// the new label.
pub fn merge_clusters(
    data: &ClusteredDataset,
    grouping: &HashMap<String, String>,
) -> Result<ClusteredDataset> {
    for label in data.labels() {
        if !grouping.contains_key(label) {
            return Err(ArtError::IncompleteGrouping(label.clone()));
        }
    }
    let rows: Vec<RawRow> = data
        .to_rows()
        .into_iter()
        .map(|mut r| {
            r.label = grouping[&r.label].clone();
            r
        })
        .collect();
    let first = &rows[0].label;
    if rows.iter().all(|r| &r.label == first) {
        return Err(ArtError::DegenerateGrouping);
    }
    ClusteredDataset::from_rows(rows, data.covariate_names().to_vec())
}
