//! Membership estimation against a fixed role basis.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::graph::NodeId;
use crate::nnls::nnls_normal;

use super::RoleModel;

/// Node-by-role matrix for one timestep. Rows follow the snapshot's
/// active-node order.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipMatrix {
    pub timestep: usize,
    pub nodes: Vec<NodeId>,
    pub values: Array2<f64>,
    /// True when rows have been rescaled to sum to one.
    pub normalized: bool,
}

impl MembershipMatrix {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn rank(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Membership row of a node, if it is active at this timestep.
    pub fn row_of(&self, node: NodeId) -> Option<Array1<f64>> {
        self.nodes
            .binary_search(&node)
            .ok()
            .map(|i| self.values.row(i).to_owned())
    }

    /// Rescale each active row to sum to one; all-zero rows stay zero.
    pub fn normalized(&self) -> Self {
        let mut values = self.values.clone();
        for mut row in values.rows_mut() {
            let sum: f64 = row.iter().sum();
            if sum > 0.0 {
                row.mapv_inplace(|v| v / sum);
            }
        }
        Self {
            timestep: self.timestep,
            nodes: self.nodes.clone(),
            values,
            normalized: true,
        }
    }
}

/// Align a feature matrix onto the model's column schema. Columns missing
/// at this timestep are zero-filled; columns the model does not know are a
/// schema error.
fn align_columns(v: &FeatureMatrix, model: &RoleModel) -> Result<Array2<f64>> {
    if v.defs == model.feature_defs {
        return Ok(v.values.clone());
    }
    for def in &v.defs {
        if !model.feature_defs.contains(def) {
            return Err(Error::Schema(format!(
                "feature '{def}' at timestep {} is unknown to the role model",
                v.timestep
            )));
        }
    }
    let mut aligned = Array2::zeros((v.node_count(), model.feature_defs.len()));
    for (target, def) in model.feature_defs.iter().enumerate() {
        if let Some(source) = v.column_of(def) {
            aligned.column_mut(target).assign(&v.values.column(source));
        }
    }
    Ok(aligned)
}

/// Estimate node-by-role memberships with the basis held fixed: solve
/// `min ||V - G F||_F, G >= 0` row by row. Deterministic given V and F.
pub fn estimate_memberships(v: &FeatureMatrix, model: &RoleModel) -> Result<MembershipMatrix> {
    let aligned = align_columns(v, model)?;
    let values = nnls_against_basis(&aligned, &model.basis)?;
    Ok(MembershipMatrix {
        timestep: v.timestep,
        nodes: v.nodes.clone(),
        values,
        normalized: false,
    })
}

/// Row-wise NNLS of `v` (n-by-f) against `basis` (r-by-f); returns n-by-r.
pub fn nnls_against_basis(v: &Array2<f64>, basis: &Array2<f64>) -> Result<Array2<f64>> {
    if v.ncols() != basis.ncols() {
        return Err(Error::Schema(format!(
            "feature width {} does not match basis width {}",
            v.ncols(),
            basis.ncols()
        )));
    }
    let rank = basis.nrows();
    // Shared Gram matrix: the per-row system is F F' g = F v_row.
    let gram = basis.dot(&basis.t());
    let mut g = Array2::zeros((v.nrows(), rank));
    for (i, row) in v.rows().into_iter().enumerate() {
        let rhs = basis.dot(&row);
        let sol = nnls_normal(gram.view(), rhs.view())?;
        g.row_mut(i).assign(&sol);
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureDefinition;
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn defs(names: &[&str]) -> Vec<FeatureDefinition> {
        names.iter().map(|n| n.parse().unwrap()).collect()
    }

    fn model(basis: Array2<f64>, names: &[&str]) -> RoleModel {
        RoleModel {
            basis,
            feature_defs: defs(names),
            mdl_trace: Vec::new(),
        }
    }

    fn feature_matrix(values: Array2<f64>, names: &[&str]) -> FeatureMatrix {
        FeatureMatrix {
            timestep: 1,
            nodes: (0..values.nrows() as NodeId).collect(),
            defs: defs(names),
            values,
        }
    }

    #[test]
    fn planted_memberships_are_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let g_true = Array2::from_shape_fn((25, 3), |_| rng.random::<f64>());
        let basis = Array2::from_shape_fn((3, 7), |_| 0.5 + rng.random::<f64>());
        let v = g_true.dot(&basis);
        let g = nnls_against_basis(&v, &basis).unwrap();
        let err = (&g - &g_true).mapv(|x| x * x).sum().sqrt() / g_true.mapv(|x| x * x).sum().sqrt();
        assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn zero_features_give_zero_memberships() {
        let basis = array![[1.0, 0.5], [0.2, 2.0]];
        let v = Array2::<f64>::zeros((4, 2));
        let g = nnls_against_basis(&v, &basis).unwrap();
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn row_equal_to_basis_row_concentrates_on_that_role() {
        let basis = array![[3.0, 0.1, 0.1], [0.1, 2.0, 0.4], [0.2, 0.1, 1.5]];
        let m = model(basis.clone(), &["in-degree", "out-degree", "egonet-in"]);
        let v = feature_matrix(
            basis.row(1).to_owned().insert_axis(ndarray::Axis(0)),
            &["in-degree", "out-degree", "egonet-in"],
        );
        let g = estimate_memberships(&v, &m).unwrap().normalized();
        let row = g.values.row(0);
        let argmax = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(argmax, 1);
        assert!((row.sum() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn missing_columns_are_zero_filled() {
        let basis = array![[1.0, 0.0, 2.0], [0.0, 3.0, 1.0]];
        let m = model(basis, &["in-degree", "out-degree", "total-degree"]);
        let v = feature_matrix(array![[2.0], [4.0]], &["in-degree"]);
        let g = estimate_memberships(&v, &m).unwrap();
        assert_eq!(g.values.nrows(), 2);
    }

    #[test]
    fn unknown_columns_are_a_schema_error() {
        let basis = array![[1.0, 0.0], [0.0, 3.0]];
        let m = model(basis, &["in-degree", "out-degree"]);
        let v = feature_matrix(array![[2.0]], &["egonet-in"]);
        assert!(matches!(
            estimate_memberships(&v, &m),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn estimation_is_a_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let basis = Array2::from_shape_fn((3, 6), |_| 0.3 + rng.random::<f64>());
        let g0 = Array2::from_shape_fn((10, 3), |_| rng.random::<f64>());
        let g1 = nnls_against_basis(&g0.dot(&basis), &basis).unwrap();
        let g2 = nnls_against_basis(&g1.dot(&basis), &basis).unwrap();
        let max_diff = (&g1 - &g2)
            .mapv(f64::abs)
            .iter()
            .fold(0.0f64, |a, &b| a.max(b));
        assert!(max_diff < 1e-6, "fixed point violated: {max_diff}");
    }

    #[test]
    fn scaling_features_scales_memberships_but_not_normalized_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let basis = Array2::from_shape_fn((2, 5), |_| 0.2 + rng.random::<f64>());
        let g_true = Array2::from_shape_fn((6, 2), |_| rng.random::<f64>());
        let v = g_true.dot(&basis);
        let scaled = &v * 3.5;
        let g = nnls_against_basis(&v, &basis).unwrap();
        let g_scaled = nnls_against_basis(&scaled, &basis).unwrap();
        let diff = (&g_scaled - &(&g * 3.5)).mapv(f64::abs).sum();
        assert!(diff < 1e-8, "covariance violated: {diff}");
    }
}
