//! Redundancy pruning and the feature learn loop.

use std::collections::HashMap;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::graph::SnapshotGraph;

use super::binning::{derived_bin_count, log_bins};
use super::extract::{base_features, recursive_aggregate};
use super::{FeatureDefinition, FeatureMatrix};

/// Knobs for [`learn_features_with`].
#[derive(Debug, Clone, Copy)]
pub struct LearnOptions {
    /// Bin count for redundancy pruning; `None` derives it from the node
    /// count and `bin_fraction`.
    pub bins: Option<usize>,
    /// Fraction of remaining nodes placed in each successive bin.
    pub bin_fraction: f64,
    /// Safety cap on the aggregation depth.
    pub max_generation: usize,
}

impl Default for LearnOptions {
    fn default() -> Self {
        Self {
            bins: None,
            bin_fraction: 0.5,
            max_generation: 6,
        }
    }
}

impl LearnOptions {
    fn bin_count(&self, nodes: usize) -> usize {
        self.bins
            .unwrap_or_else(|| derived_bin_count(nodes, self.bin_fraction))
    }
}

/// Drop columns whose log-binned values agree with an earlier or cheaper
/// column on every node. One representative survives per group, chosen by
/// lowest generation, then earliest column index.
pub fn prune_features(candidates: &FeatureMatrix, s: usize) -> FeatureMatrix {
    prune_features_with(candidates, s, 0.5)
}

pub fn prune_features_with(candidates: &FeatureMatrix, s: usize, fraction: f64) -> FeatureMatrix {
    assert!(s >= 2, "bin count must be at least 2");
    let n = candidates.node_count();
    let f = candidates.feature_count();
    // Group columns by their binned fingerprint.
    let mut groups: HashMap<Vec<u32>, usize> = HashMap::new();
    let mut keep: Vec<usize> = Vec::new();
    for j in 0..f {
        let fingerprint = if n == 0 {
            Vec::new()
        } else {
            log_bins(&candidates.values.column(j).to_vec(), s, fraction)
        };
        match groups.get(&fingerprint) {
            None => {
                groups.insert(fingerprint, keep.len());
                keep.push(j);
            }
            Some(&slot) => {
                let current = keep[slot];
                if candidates.defs[j].generation() < candidates.defs[current].generation() {
                    keep[slot] = j;
                }
            }
        }
    }
    keep.sort_unstable();
    let defs = keep.iter().map(|&j| candidates.defs[j].clone()).collect();
    let mut values = Array2::zeros((n, keep.len()));
    for (out, &j) in keep.iter().enumerate() {
        values.column_mut(out).assign(&candidates.values.column(j));
    }
    FeatureMatrix {
        timestep: candidates.timestep,
        nodes: candidates.nodes.clone(),
        defs,
        values,
    }
}

/// Learn a representative feature set for one snapshot: starting from base
/// features, alternate neighbor aggregation and redundancy pruning until
/// an iteration retains nothing new.
pub fn learn_features(
    snap: &SnapshotGraph,
    s: usize,
) -> Result<(Vec<FeatureDefinition>, FeatureMatrix)> {
    learn_features_with(
        snap,
        &LearnOptions {
            bins: Some(s),
            ..Default::default()
        },
    )
}

pub fn learn_features_with(
    snap: &SnapshotGraph,
    opts: &LearnOptions,
) -> Result<(Vec<FeatureDefinition>, FeatureMatrix)> {
    if snap.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot learn features on an empty snapshot".into(),
        ));
    }
    let s = opts.bin_count(snap.node_count());
    let mut current = prune_features_with(&base_features(snap), s, opts.bin_fraction);
    loop {
        let generation = current
            .defs
            .iter()
            .map(FeatureDefinition::generation)
            .max()
            .unwrap_or(0);
        if generation >= opts.max_generation {
            log::warn!(
                "feature recursion stopped at the generation cap ({})",
                opts.max_generation
            );
            break;
        }
        let expanded = recursive_aggregate(&current, snap);
        let pruned = prune_features_with(&expanded, s, opts.bin_fraction);
        debug_assert!(pruned.feature_count() >= current.feature_count());
        let grew = pruned.feature_count() > current.feature_count();
        current = pruned;
        if !grew {
            break;
        }
    }
    Ok((current.defs.clone(), current))
}
