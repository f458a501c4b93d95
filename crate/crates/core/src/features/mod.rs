//! Recursive structural features.
//!
//! Each snapshot is summarized by a node-by-feature matrix. Base features
//! are degree and egonet counts (weighted variants when edge weights are
//! present); recursive features aggregate an existing feature over each
//! node's neighbors with sum or mean. Redundant candidates are pruned by
//! comparing vertically log-binned columns, and the learn loop alternates
//! aggregation and pruning until nothing new is retained.

mod binning;
mod extract;
mod learn;

pub use binning::{derived_bin_count, log_bins};
pub use extract::{
    base_features, base_features_with_stats, extract_features, recursive_aggregate,
    recursive_aggregate_with_stats, ExtractStats,
};
pub use learn::{learn_features, learn_features_with, prune_features, LearnOptions};

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::graph::NodeId;

/// Structural quantity computed directly from a snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseFeature {
    InDegree,
    OutDegree,
    TotalDegree,
    WeightedInDegree,
    WeightedOutDegree,
    WeightedTotalDegree,
    /// Edges of the induced subgraph on a node plus its neighbors.
    EgonetInternal,
    /// Edges entering the egonet from outside.
    EgonetIn,
    /// Edges leaving the egonet.
    EgonetOut,
    WeightedEgonetInternal,
    WeightedEgonetIn,
    WeightedEgonetOut,
}

impl BaseFeature {
    /// Unweighted bases, in canonical column order.
    pub const UNWEIGHTED: [BaseFeature; 6] = [
        BaseFeature::InDegree,
        BaseFeature::OutDegree,
        BaseFeature::TotalDegree,
        BaseFeature::EgonetInternal,
        BaseFeature::EgonetIn,
        BaseFeature::EgonetOut,
    ];

    /// Weighted bases, appended when any edge weight differs from 1.
    pub const WEIGHTED: [BaseFeature; 6] = [
        BaseFeature::WeightedInDegree,
        BaseFeature::WeightedOutDegree,
        BaseFeature::WeightedTotalDegree,
        BaseFeature::WeightedEgonetInternal,
        BaseFeature::WeightedEgonetIn,
        BaseFeature::WeightedEgonetOut,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaseFeature::InDegree => "in-degree",
            BaseFeature::OutDegree => "out-degree",
            BaseFeature::TotalDegree => "total-degree",
            BaseFeature::WeightedInDegree => "weighted-in-degree",
            BaseFeature::WeightedOutDegree => "weighted-out-degree",
            BaseFeature::WeightedTotalDegree => "weighted-total-degree",
            BaseFeature::EgonetInternal => "egonet-internal",
            BaseFeature::EgonetIn => "egonet-in",
            BaseFeature::EgonetOut => "egonet-out",
            BaseFeature::WeightedEgonetInternal => "weighted-egonet-internal",
            BaseFeature::WeightedEgonetIn => "weighted-egonet-in",
            BaseFeature::WeightedEgonetOut => "weighted-egonet-out",
        }
    }
}

impl FromStr for BaseFeature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        BaseFeature::UNWEIGHTED
            .iter()
            .chain(BaseFeature::WEIGHTED.iter())
            .copied()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::Definition(format!("unknown base feature '{s}'")))
    }
}

/// Neighbor aggregation applied when deriving a recursive feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregator {
    Sum,
    Mean,
}

impl Aggregator {
    pub const ALL: [Aggregator; 2] = [Aggregator::Sum, Aggregator::Mean];

    pub fn name(self) -> &'static str {
        match self {
            Aggregator::Sum => "sum",
            Aggregator::Mean => "mean",
        }
    }
}

/// A base feature plus an ordered chain of neighbor aggregations.
///
/// The chain applies left to right: `chain = [sum, mean]` means the base
/// column is sum-aggregated once, then mean-aggregated. Generation equals
/// the chain length.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureDefinition {
    pub base: BaseFeature,
    #[serde(default)]
    pub chain: Vec<Aggregator>,
}

impl FeatureDefinition {
    pub fn base(base: BaseFeature) -> Self {
        Self {
            base,
            chain: Vec::new(),
        }
    }

    pub fn generation(&self) -> usize {
        self.chain.len()
    }

    /// Derive the child definition with one more aggregation step.
    pub fn extended(&self, agg: Aggregator) -> Self {
        let mut chain = self.chain.clone();
        chain.push(agg);
        Self {
            base: self.base,
            chain,
        }
    }
}

impl fmt::Display for FeatureDefinition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for agg in self.chain.iter().rev() {
            write!(f, "{}(", agg.name())?;
        }
        write!(f, "{}", self.base.name())?;
        for _ in &self.chain {
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl FromStr for FeatureDefinition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let mut aggs = Vec::new();
        let mut rest = s.trim();
        loop {
            if let Some(inner) = rest.strip_prefix("sum(").and_then(|r| r.strip_suffix(')')) {
                aggs.push(Aggregator::Sum);
                rest = inner;
            } else if let Some(inner) = rest.strip_prefix("mean(").and_then(|r| r.strip_suffix(')'))
            {
                aggs.push(Aggregator::Mean);
                rest = inner;
            } else {
                break;
            }
        }
        let base: BaseFeature = rest.parse()?;
        aggs.reverse();
        Ok(Self { base, chain: aggs })
    }
}

/// Node-by-feature matrix for one snapshot. Rows follow the snapshot's
/// `active_nodes` order; all entries are non-negative and finite.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub timestep: usize,
    pub nodes: Vec<NodeId>,
    pub defs: Vec<FeatureDefinition>,
    pub values: Array2<f64>,
}

impl FeatureMatrix {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn feature_count(&self) -> usize {
        self.defs.len()
    }

    /// Position of a definition in the column list.
    pub fn column_of(&self, def: &FeatureDefinition) -> Option<usize> {
        self.defs.iter().position(|d| d == def)
    }
}
