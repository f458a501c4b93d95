//! Role discovery: non-negative factorization of node-by-feature matrices
//! with MDL rank selection, plus membership estimation against a fixed
//! basis.

mod mdl;
mod membership;
mod nmf;
mod quantize;

pub use mdl::{mdl_select_rank, nmf_best_of, ErrorModel, MdlCandidate, MdlOptions, RankSelection};
pub use membership::{estimate_memberships, nnls_against_basis, MembershipMatrix};
pub use nmf::{nmf, NmfFit, NmfOptions};
pub use quantize::{lloyd_levels, quantize_matrix};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::features::FeatureDefinition;

/// A fitted role basis: each row expresses one role as a non-negative
/// combination of features. Immutable once fit; share it read-only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleModel {
    /// r-by-f role-by-feature basis.
    pub basis: Array2<f64>,
    /// Definitions the basis columns refer to.
    pub feature_defs: Vec<FeatureDefinition>,
    /// Description-length scores from the rank scan.
    pub mdl_trace: Vec<MdlCandidate>,
}

impl RoleModel {
    pub fn rank(&self) -> usize {
        self.basis.nrows()
    }

    pub fn feature_count(&self) -> usize {
        self.basis.ncols()
    }

    /// Attach feature definitions to a rank-scan winner.
    pub fn from_selection(selection: &RankSelection, defs: Vec<FeatureDefinition>) -> Self {
        Self {
            basis: selection.fit.f.clone(),
            feature_defs: defs,
            mdl_trace: selection.trace.clone(),
        }
    }
}
