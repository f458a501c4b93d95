//! Dynamics over the full snapshot sequence: the global feature set and
//! role basis, per-timestep membership tracking, role-importance series,
//! node trajectories and behavior-change scores.

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureDefinition;
use crate::features::FeatureMatrix;
use crate::graph::NodeId;
use crate::roles::{
    estimate_memberships, mdl_select_rank, MdlOptions, MembershipMatrix, RankSelection, RoleModel,
};

/// Deduplicated union of per-timestep feature definitions, with the
/// timesteps where each definition was independently discovered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalFeatureSet {
    pub defs: Vec<FeatureDefinition>,
    /// Parallel to `defs`: 1-based timesteps of independent discovery.
    pub provenance: Vec<Vec<usize>>,
}

impl GlobalFeatureSet {
    pub fn len(&self) -> usize {
        self.defs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defs.is_empty()
    }
}

/// Union per-timestep definition lists, preserving first-discovery order.
pub fn union_features(
    per_timestep_defs: &[(usize, Vec<FeatureDefinition>)],
) -> Result<GlobalFeatureSet> {
    if per_timestep_defs.is_empty() {
        return Err(Error::InvalidArgument(
            "need at least one definition list".into(),
        ));
    }
    let mut defs: Vec<FeatureDefinition> = Vec::new();
    let mut provenance: Vec<Vec<usize>> = Vec::new();
    for (t, list) in per_timestep_defs {
        for def in list {
            match defs.iter().position(|d| d == def) {
                Some(i) => provenance[i].push(*t),
                None => {
                    defs.push(def.clone());
                    provenance.push(vec![*t]);
                }
            }
        }
    }
    Ok(GlobalFeatureSet { defs, provenance })
}

/// Row provenance of the stacked matrix: which `(timestep, node)` each row
/// came from.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedMatrix {
    pub values: Array2<f64>,
    pub rows: Vec<(usize, NodeId)>,
}

/// Vertically concatenate per-timestep feature matrices that share one
/// column schema.
pub fn stack_global(v_seq: &[FeatureMatrix]) -> Result<StackedMatrix> {
    let Some(first) = v_seq.first() else {
        return Err(Error::InvalidArgument("no matrices to stack".into()));
    };
    let f = first.feature_count();
    let mut rows = Vec::new();
    let total: usize = v_seq.iter().map(FeatureMatrix::node_count).sum();
    let mut values = Array2::zeros((total, f));
    let mut offset = 0;
    for v in v_seq {
        if v.defs != first.defs {
            return Err(Error::Schema(format!(
                "feature schema at timestep {} differs from timestep {}",
                v.timestep, first.timestep
            )));
        }
        for (i, &node) in v.nodes.iter().enumerate() {
            rows.push((v.timestep, node));
            values.row_mut(offset + i).assign(&v.values.row(i));
        }
        offset += v.node_count();
    }
    Ok(StackedMatrix { values, rows })
}

/// Discover the global role basis from the stacked matrix.
pub fn learn_global_roles(
    stacked: &StackedMatrix,
    defs: &[FeatureDefinition],
    r_min: usize,
    r_max: usize,
    opts: &MdlOptions,
) -> Result<(RoleModel, RankSelection)> {
    let selection = mdl_select_rank(&stacked.values, r_min, r_max, opts)?;
    let model = RoleModel::from_selection(&selection, defs.to_vec());
    Ok((model, selection))
}

/// Estimate memberships for every timestep against a fixed basis.
/// Timesteps are processed in parallel; output order matches input order.
pub fn track_memberships(
    v_seq: &[FeatureMatrix],
    model: &RoleModel,
) -> Result<Vec<MembershipMatrix>> {
    v_seq
        .par_iter()
        .map(|v| {
            estimate_memberships(v, model).map_err(|e| match e {
                Error::Schema(msg) => Error::Schema(format!("timestep {}: {msg}", v.timestep)),
                other => other,
            })
        })
        .collect()
}

/// Relative role importance at one timestep: column means of the
/// membership matrix over active nodes. Empty timesteps yield a zero
/// vector so series stay aligned.
pub fn role_importance(g: &MembershipMatrix) -> Array1<f64> {
    let n = g.node_count();
    if n == 0 {
        return Array1::zeros(g.rank());
    }
    let mut x = Array1::zeros(g.rank());
    for row in g.values.rows() {
        x += &row;
    }
    x / n as f64
}

/// Role-importance series: row `t-1` is the importance vector x_t.
#[derive(Debug, Clone, PartialEq)]
pub struct RoleImportanceSeries {
    pub values: Array2<f64>,
}

impl RoleImportanceSeries {
    pub fn t_max(&self) -> usize {
        self.values.nrows()
    }

    pub fn rank(&self) -> usize {
        self.values.ncols()
    }

    /// Timestep (2-based onward) with the largest L1 jump from its
    /// predecessor, or None for series shorter than two steps.
    pub fn largest_shift(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for t in 1..self.t_max() {
            let shift = (&self.values.row(t) - &self.values.row(t - 1))
                .mapv(f64::abs)
                .sum();
            if best.is_none_or(|(_, b)| shift > b) {
                best = Some((t + 1, shift));
            }
        }
        best
    }
}

pub fn role_importance_series(g_seq: &[MembershipMatrix]) -> RoleImportanceSeries {
    let rank = g_seq.iter().map(MembershipMatrix::rank).max().unwrap_or(0);
    let mut values = Array2::zeros((g_seq.len(), rank));
    for (t, g) in g_seq.iter().enumerate() {
        let x = role_importance(g);
        for (k, &v) in x.iter().enumerate() {
            values[[t, k]] = v;
        }
    }
    RoleImportanceSeries { values }
}

/// Per-node membership rows over time; `None` marks inactive timesteps.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeTrajectory {
    pub node: NodeId,
    pub steps: Vec<Option<Array1<f64>>>,
}

impl NodeTrajectory {
    pub fn active_steps(&self) -> usize {
        self.steps.iter().filter(|s| s.is_some()).count()
    }
}

/// Gather one node's membership row per timestep.
pub fn node_trajectory(
    g_seq: &[MembershipMatrix],
    node: NodeId,
    node_universe: usize,
) -> Result<NodeTrajectory> {
    if (node as usize) >= node_universe {
        return Err(Error::UnknownNode(format!("node id {node}")));
    }
    let steps = g_seq.iter().map(|g| g.row_of(node)).collect();
    Ok(NodeTrajectory { node, steps })
}

/// Distance between membership (or basis) vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMetric {
    Euclidean,
    CosineDistance,
    #[default]
    Hellinger,
}

impl std::str::FromStr for DistanceMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Self::Euclidean),
            "cosine" | "cosine-distance" => Ok(Self::CosineDistance),
            "hellinger" => Ok(Self::Hellinger),
            other => Err(Error::InvalidArgument(format!(
                "unknown distance metric '{other}'"
            ))),
        }
    }
}

impl DistanceMetric {
    pub fn distance(self, a: &Array1<f64>, b: &Array1<f64>) -> f64 {
        match self {
            DistanceMetric::Euclidean => (a - b).mapv(|v| v * v).sum().sqrt(),
            DistanceMetric::CosineDistance => {
                let na = a.dot(a).sqrt();
                let nb = b.dot(b).sqrt();
                if na == 0.0 && nb == 0.0 {
                    0.0
                } else if na == 0.0 || nb == 0.0 {
                    1.0
                } else {
                    (1.0 - a.dot(b) / (na * nb)).max(0.0)
                }
            }
            DistanceMetric::Hellinger => {
                let diff = a.mapv(|v| v.max(0.0).sqrt()) - b.mapv(|v| v.max(0.0).sqrt());
                (diff.mapv(|v| v * v).sum() / 2.0).sqrt()
            }
        }
    }
}

/// One consecutive-pair change score. `spans_gap` marks pairs whose
/// endpoints straddle inactive timesteps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChangePoint {
    /// 1-based timestep of the later member of the pair.
    pub t: usize,
    pub score: f64,
    pub spans_gap: bool,
}

/// Behavior-change series for one node.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeScores {
    pub node: NodeId,
    pub points: Vec<ChangePoint>,
    /// Timestep of the largest score (earliest on ties).
    pub argmax_t: usize,
}

/// Score how much a node's membership vector moves between consecutive
/// active timesteps, on row-normalized memberships.
pub fn behavior_change_score(
    traj: &NodeTrajectory,
    metric: DistanceMetric,
) -> Result<ChangeScores> {
    let normalize = |row: &Array1<f64>| -> Array1<f64> {
        let sum: f64 = row.iter().sum();
        if sum > 0.0 {
            row / sum
        } else {
            row.clone()
        }
    };
    let active: Vec<(usize, Array1<f64>)> = traj
        .steps
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.as_ref().map(|row| (i + 1, normalize(row))))
        .collect();
    if active.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "node {} is active at {} timestep(s); need at least 2",
            traj.node,
            active.len()
        )));
    }
    let mut points = Vec::with_capacity(active.len() - 1);
    for pair in active.windows(2) {
        let (t_prev, prev) = &pair[0];
        let (t, cur) = &pair[1];
        points.push(ChangePoint {
            t: *t,
            score: metric.distance(cur, prev),
            spans_gap: t - t_prev > 1,
        });
    }
    let argmax_t = points
        .iter()
        .max_by(|a, b| a.score.total_cmp(&b.score).then(b.t.cmp(&a.t)))
        .map(|p| p.t)
        .unwrap();
    Ok(ChangeScores {
        node: traj.node,
        points,
        argmax_t,
    })
}

/// Which objects a distance matrix compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceAxis {
    Role,
    Node,
    Time,
}

/// Symmetric pairwise distances with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub axis: DistanceAxis,
    pub values: Array2<f64>,
}

/// Pairwise distances between basis rows, computed on max-normalized rows.
pub fn role_distance(model: &RoleModel, metric: DistanceMetric) -> DistanceMatrix {
    let r = model.rank();
    let rows: Vec<Array1<f64>> = (0..r)
        .map(|k| {
            let row = model.basis.row(k).to_owned();
            let max = row.iter().fold(0.0f64, |a, &b| a.max(b));
            if max > 0.0 {
                row / max
            } else {
                row
            }
        })
        .collect();
    let mut values = Array2::zeros((r, r));
    for i in 0..r {
        for j in i + 1..r {
            let d = metric.distance(&rows[i], &rows[j]);
            values[[i, j]] = d;
            values[[j, i]] = d;
        }
    }
    DistanceMatrix {
        axis: DistanceAxis::Role,
        values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn membership(t: usize, nodes: Vec<NodeId>, values: Array2<f64>) -> MembershipMatrix {
        MembershipMatrix {
            timestep: t,
            nodes,
            values,
            normalized: true,
        }
    }

    fn defs(names: &[&str]) -> Vec<FeatureDefinition> {
        names.iter().map(|n| n.parse().unwrap()).collect()
    }

    #[test]
    fn union_of_identical_lists_is_idempotent() {
        let l = defs(&["in-degree", "sum(in-degree)"]);
        let set = union_features(&[(1, l.clone()), (2, l.clone()), (3, l.clone())]).unwrap();
        assert_eq!(set.defs, l);
        assert_eq!(set.provenance[0], vec![1, 2, 3]);
    }

    #[test]
    fn union_preserves_first_discovery_order() {
        let l1 = defs(&["in-degree"]);
        let l2 = defs(&["in-degree", "sum(in-degree)"]);
        let set = union_features(&[(1, l1), (2, l2)]).unwrap();
        assert_eq!(set.defs, defs(&["in-degree", "sum(in-degree)"]));
    }

    #[test]
    fn union_matches_brute_force_set_union() {
        let l1 = defs(&["in-degree", "out-degree"]);
        let l2 = defs(&["out-degree", "egonet-in"]);
        let l3 = defs(&["egonet-in", "in-degree", "mean(out-degree)"]);
        let set = union_features(&[(1, l1.clone()), (2, l2.clone()), (3, l3.clone())]).unwrap();
        let mut brute: Vec<FeatureDefinition> = Vec::new();
        for def in l1.iter().chain(l2.iter()).chain(l3.iter()) {
            if !brute.contains(def) {
                brute.push(def.clone());
            }
        }
        assert_eq!(set.defs.len(), brute.len());
        for d in &brute {
            assert!(set.defs.contains(d));
        }
    }

    fn feature_matrix(t: usize, nodes: Vec<NodeId>, values: Array2<f64>) -> FeatureMatrix {
        FeatureMatrix {
            timestep: t,
            nodes,
            defs: defs(&["in-degree", "out-degree"]),
            values,
        }
    }

    #[test]
    fn stacking_concatenates_with_provenance() {
        let v1 = feature_matrix(1, vec![0, 1, 2], array![[1.0, 0.0], [2.0, 1.0], [3.0, 2.0]]);
        let v2 = feature_matrix(2, vec![0, 2, 5], array![[4.0, 3.0], [5.0, 4.0], [6.0, 5.0]]);
        let stacked = stack_global(&[v1.clone(), v2.clone()]).unwrap();
        assert_eq!(stacked.values.nrows(), 6);
        assert_eq!(stacked.rows[0], (1, 0));
        assert_eq!(stacked.rows[3], (2, 0));
        // Every row maps back to its source entrywise.
        for (i, &(t, node)) in stacked.rows.iter().enumerate() {
            let src = if t == 1 { &v1 } else { &v2 };
            let local = src.nodes.iter().position(|&n| n == node).unwrap();
            assert_eq!(stacked.values.row(i), src.values.row(local));
        }
    }

    #[test]
    fn stacking_a_single_matrix_is_identity() {
        let v1 = feature_matrix(1, vec![0, 1], array![[1.0, 0.0], [2.0, 1.0]]);
        let stacked = stack_global(std::slice::from_ref(&v1)).unwrap();
        assert_eq!(stacked.values, v1.values);
    }

    #[test]
    fn schema_mismatch_is_rejected() {
        let v1 = feature_matrix(1, vec![0], array![[1.0, 0.0]]);
        let mut v2 = feature_matrix(2, vec![0], array![[1.0, 0.0]]);
        v2.defs = defs(&["in-degree", "egonet-out"]);
        assert!(matches!(stack_global(&[v1, v2]), Err(Error::Schema(_))));
    }

    #[test]
    fn single_row_stack_cannot_learn_roles() {
        use crate::roles::MdlOptions;
        let v1 = feature_matrix(1, vec![0], array![[1.0, 2.0]]);
        let stacked = stack_global(&[v1]).unwrap();
        let d = defs(&["in-degree", "out-degree"]);
        assert!(matches!(
            learn_global_roles(&stacked, &d, 1, 3, &MdlOptions::default()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn stacking_identical_snapshots_selects_the_same_rank() {
        use crate::roles::{MdlOptions, NmfOptions};
        use crate::synth::planted_matrix;
        let values = planted_matrix(24, 8, 2, 3, 0.0);
        let d: Vec<FeatureDefinition> = [
            "in-degree",
            "out-degree",
            "total-degree",
            "egonet-in",
            "egonet-out",
            "egonet-internal",
            "sum(in-degree)",
            "mean(in-degree)",
        ]
        .iter()
        .map(|n| n.parse().unwrap())
        .collect();
        let single = FeatureMatrix {
            timestep: 1,
            nodes: (0..24).collect(),
            defs: d.clone(),
            values: values.clone(),
        };
        let mut repeat = single.clone();
        repeat.timestep = 2;
        let opts = MdlOptions {
            nmf: NmfOptions {
                max_iters: 300,
                tol: 1e-8,
                seed: 1,
                ..Default::default()
            },
            ..Default::default()
        };
        let one = learn_global_roles(
            &stack_global(std::slice::from_ref(&single)).unwrap(),
            &d,
            1,
            4,
            &opts,
        )
        .unwrap()
        .0;
        let stacked =
            learn_global_roles(&stack_global(&[single, repeat]).unwrap(), &d, 1, 4, &opts)
                .unwrap()
                .0;
        assert_eq!(one.rank(), 2);
        assert_eq!(stacked.rank(), 2);
    }

    #[test]
    fn unanimous_role_importance() {
        let g = membership(
            1,
            vec![0, 1, 2],
            array![[1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]],
        );
        assert_eq!(role_importance(&g), array![1.0, 0.0, 0.0]);
    }

    #[test]
    fn symmetric_role_importance() {
        let g = membership(1, vec![0, 1], array![[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(role_importance(&g), array![0.5, 0.5]);
    }

    #[test]
    fn empty_timestep_gives_zero_vector() {
        let g = membership(1, vec![], Array2::zeros((0, 3)));
        assert_eq!(role_importance(&g), Array1::<f64>::zeros(3));
    }

    #[test]
    fn importance_matches_brute_force_column_means() {
        let mut rng = {
            use rand::SeedableRng;
            rand_chacha::ChaCha8Rng::seed_from_u64(2)
        };
        use rand::Rng;
        let mut values = Array2::from_shape_fn((10, 3), |_| rng.random::<f64>());
        for mut row in values.rows_mut() {
            let s: f64 = row.iter().sum();
            row.mapv_inplace(|v| v / s);
        }
        let g = membership(1, (0..10).collect(), values.clone());
        let x = role_importance(&g);
        for k in 0..3 {
            let brute: f64 = (0..10).map(|i| values[[i, k]]).sum::<f64>() / 10.0;
            assert!((x[k] - brute).abs() < 1e-12);
        }
        assert!((x.sum() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn trajectory_marks_inactivity() {
        let g1 = membership(1, vec![0, 1], array![[1.0, 0.0], [0.0, 1.0]]);
        let g2 = membership(2, vec![1], array![[0.5, 0.5]]);
        let traj = node_trajectory(&[g1, g2], 0, 5).unwrap();
        assert!(traj.steps[0].is_some());
        assert!(traj.steps[1].is_none());
        assert_eq!(traj.active_steps(), 1);
    }

    #[test]
    fn trajectory_rows_match_membership_rows() {
        let g1 = membership(1, vec![0, 1], array![[0.8, 0.2], [0.3, 0.7]]);
        let g2 = membership(2, vec![0], array![[0.1, 0.9]]);
        let seq = [g1.clone(), g2.clone()];
        for &node in &[0, 1] {
            let traj = node_trajectory(&seq, node, 2).unwrap();
            for (t, step) in traj.steps.iter().enumerate() {
                match (step, seq[t].row_of(node)) {
                    (Some(a), Some(b)) => assert_eq!(a, &b),
                    (None, None) => {}
                    other => panic!("mismatch at t={t}: {other:?}"),
                }
            }
        }
    }

    #[test]
    fn unknown_node_is_an_error() {
        let g1 = membership(1, vec![0], array![[1.0]]);
        assert!(matches!(
            node_trajectory(&[g1], 7, 3),
            Err(Error::UnknownNode(_))
        ));
    }

    #[test]
    fn constant_trajectory_scores_zero() {
        let row = array![0.5, 0.5];
        let traj = NodeTrajectory {
            node: 0,
            steps: vec![Some(row.clone()), Some(row.clone()), Some(row)],
        };
        let scores = behavior_change_score(&traj, DistanceMetric::Euclidean).unwrap();
        assert!(scores.points.iter().all(|p| p.score == 0.0));
    }

    #[test]
    fn role_switch_scores_sqrt_two_euclidean() {
        let mut steps: Vec<Option<Array1<f64>>> = (0..4).map(|_| Some(array![1.0, 0.0])).collect();
        steps.extend((0..4).map(|_| Some(array![0.0, 1.0])));
        let traj = NodeTrajectory { node: 3, steps };
        let scores = behavior_change_score(&traj, DistanceMetric::Euclidean).unwrap();
        assert_eq!(scores.argmax_t, 5);
        for p in &scores.points {
            if p.t == 5 {
                assert!((p.score - 2.0f64.sqrt()).abs() < 1e-12);
            } else {
                assert_eq!(p.score, 0.0);
            }
        }
    }

    #[test]
    fn gaps_are_flagged() {
        let traj = NodeTrajectory {
            node: 0,
            steps: vec![Some(array![1.0, 0.0]), None, Some(array![0.0, 1.0])],
        };
        let scores = behavior_change_score(&traj, DistanceMetric::Hellinger).unwrap();
        assert_eq!(scores.points.len(), 1);
        assert!(scores.points[0].spans_gap);
        assert_eq!(scores.points[0].t, 3);
    }

    #[test]
    fn single_active_step_is_insufficient() {
        let traj = NodeTrajectory {
            node: 0,
            steps: vec![Some(array![1.0]), None],
        };
        assert!(matches!(
            behavior_change_score(&traj, DistanceMetric::Hellinger),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn role_distance_on_orthogonal_indicators() {
        let model = RoleModel {
            basis: array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            feature_defs: defs(&["in-degree", "out-degree", "total-degree"]),
            mdl_trace: vec![],
        };
        let d = role_distance(&model, DistanceMetric::CosineDistance);
        assert_eq!(d.values[[0, 1]], 1.0);
        assert_eq!(d.values[[0, 0]], 0.0);
        assert_eq!(d.values[[1, 0]], d.values[[0, 1]]);
    }

    #[test]
    fn identical_basis_rows_have_zero_distance() {
        let model = RoleModel {
            basis: array![[2.0, 1.0], [4.0, 2.0]], // same after max-normalization
            feature_defs: defs(&["in-degree", "out-degree"]),
            mdl_trace: vec![],
        };
        let d = role_distance(&model, DistanceMetric::Euclidean);
        assert_eq!(d.values[[0, 1]], 0.0);
    }

    #[test]
    fn role_distance_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let basis = Array2::from_shape_fn((4, 6), |_| rng.random::<f64>());
        let model = RoleModel {
            basis: basis.clone(),
            feature_defs: defs(&[
                "in-degree",
                "out-degree",
                "total-degree",
                "egonet-in",
                "egonet-out",
                "egonet-internal",
            ]),
            mdl_trace: vec![],
        };
        let d = role_distance(&model, DistanceMetric::Euclidean);
        for i in 0..4 {
            for j in 0..4 {
                let a = {
                    let r = basis.row(i).to_owned();
                    let m = r.iter().fold(0.0f64, |acc, &v| acc.max(v));
                    r / m
                };
                let b = {
                    let r = basis.row(j).to_owned();
                    let m = r.iter().fold(0.0f64, |acc, &v| acc.max(v));
                    r / m
                };
                let brute = (&a - &b).mapv(|v| v * v).sum().sqrt();
                assert!((d.values[[i, j]] - brute).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn hellinger_is_bounded_on_probability_rows(
            a in proptest::collection::vec(0.0f64..1.0, 4),
            b in proptest::collection::vec(0.0f64..1.0, 4),
        ) {
            let norm = |v: Vec<f64>| {
                let s: f64 = v.iter().sum();
                let arr = Array1::from_vec(v);
                if s > 0.0 { arr / s } else { arr }
            };
            let (a, b) = (norm(a), norm(b));
            let d = DistanceMetric::Hellinger.distance(&a, &b);
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&d));
        }

        // When the nodes currently assigned to a role go stale (their
        // membership rows vanish while the active-node count is held at
        // the original n_t), that role's importance weakly decreases.
        // With a recomputed denominator the claim fails for r >= 3, so
        // the stale-node reading is the one tested.
        #[test]
        fn stale_roles_lose_importance(seed in 0u64..150) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let (n, r) = (12, 4);
            let mut values = Array2::from_shape_fn((n, r), |_| rng.random::<f64>());
            for mut row in values.rows_mut() {
                let s: f64 = row.iter().sum();
                row.mapv_inplace(|v| v / s);
            }
            let g = membership(1, (0..n as NodeId).collect(), values.clone());
            let x = role_importance(&g);
            for k in 0..r {
                let mut reduced = values.clone();
                for i in 0..n {
                    let row = values.row(i);
                    let argmax = row
                        .iter()
                        .enumerate()
                        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
                        .unwrap()
                        .0;
                    if argmax == k {
                        reduced.row_mut(i).fill(0.0);
                    }
                }
                let x_k_after: f64 = reduced.column(k).sum() / n as f64;
                prop_assert!(x_k_after <= x[k] + 1e-12);
            }
        }

        // Permuting rows of a membership matrix permutes nothing observable
        // in the importance vector.
        #[test]
        fn importance_is_row_order_independent(seed in 0u64..100) {
            use rand::seq::SliceRandom;
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = 8;
            let values = Array2::from_shape_fn((n, 3), |_| rng.random::<f64>());
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let permuted = Array2::from_shape_fn((n, 3), |(i, j)| values[[perm[i], j]]);
            let g1 = membership(1, (0..n as NodeId).collect(), values);
            let g2 = membership(1, (0..n as NodeId).collect(), permuted);
            let (x1, x2) = (role_importance(&g1), role_importance(&g2));
            prop_assert!((&x1 - &x2).mapv(f64::abs).sum() < 1e-12);
        }
    }
}
