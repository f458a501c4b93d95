//! Structural role dynamics of temporal networks.
//!
//! The pipeline turns a timestamped edge list into an ordered sequence of
//! snapshot graphs, learns recursive structural features per snapshot,
//! discovers behavioral roles by non-negative matrix factorization with
//! MDL rank selection, tracks per-node role memberships over time, and
//! interprets the roles against classical node measures. Reports cover
//! global network dynamics (role-importance series) and local node
//! dynamics (trajectories and behavior-change scores).

pub mod dynamics;
pub mod error;
pub mod features;
pub mod graph;
pub mod interpret;
pub mod measures;
pub mod nnls;
pub mod pipeline;
pub mod plot;
pub mod roles;
pub mod synth;

pub use dynamics::{NodeTrajectory, RoleImportanceSeries};
pub use error::{Error, Result};
pub use features::{FeatureDefinition, FeatureMatrix};
pub use graph::{SnapshotGraph, SnapshotSequence, TemporalEdgeSet};
pub use pipeline::{run_pipeline, RunConfig, RunManifest};
pub use roles::{MembershipMatrix, RoleModel};
