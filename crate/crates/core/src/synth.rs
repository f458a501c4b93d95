//! Synthetic temporal networks and planted factorizations, used for
//! desk-scale evaluation in place of proprietary traces.

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::graph::{NodeDictionary, NodeId, SnapshotGraph, SnapshotSequence};

fn sequence_from(snapshots: Vec<SnapshotGraph>, n_nodes: usize) -> SnapshotSequence {
    let mut nodes = NodeDictionary::new();
    for i in 0..n_nodes {
        nodes.intern(&format!("n{i}"));
    }
    SnapshotSequence {
        snapshots,
        nodes,
        window_width: 1.0,
        origin: 0.0,
    }
}

/// Star of `leaves` leaves around node 0 plus a disjoint clique, in one
/// snapshot. Returns the snapshot and the (hub, leaf ids, clique ids).
pub fn star_plus_clique(
    leaves: usize,
    clique: usize,
) -> (SnapshotGraph, NodeId, Vec<NodeId>, Vec<NodeId>) {
    let mut edges = Vec::new();
    let hub: NodeId = 0;
    let leaf_ids: Vec<NodeId> = (1..=leaves as NodeId).collect();
    for &leaf in &leaf_ids {
        edges.push((leaf, hub, 1.0));
    }
    let base = leaves as NodeId + 1;
    let clique_ids: Vec<NodeId> = (base..base + clique as NodeId).collect();
    for (i, &a) in clique_ids.iter().enumerate() {
        for &b in &clique_ids[i + 1..] {
            edges.push((a, b, 1.0));
        }
    }
    (SnapshotGraph::new(1, edges), hub, leaf_ids, clique_ids)
}

/// Settings for [`role_switch_network`].
#[derive(Debug, Clone, Copy)]
pub struct RoleSwitchConfig {
    /// Nodes that are star hubs before the switch and peripheral after.
    pub switchers: usize,
    /// Nodes that stay hubs for the whole run.
    pub stable_hubs: usize,
    /// Nodes that are always peripheral.
    pub leaves: usize,
    pub t_max: usize,
    /// First timestep (1-based) at which switchers are peripheral.
    pub switch_at: usize,
}

impl Default for RoleSwitchConfig {
    fn default() -> Self {
        Self {
            switchers: 30,
            stable_hubs: 30,
            leaves: 240,
            t_max: 20,
            switch_at: 10,
        }
    }
}

/// A planted role-switch network: every timestep is a union of disjoint
/// stars. Before `switch_at` the switcher nodes host stars of their own;
/// from `switch_at` on they attach to the stable hubs as leaves. Leaf
/// assignment rotates with `t` so graphs vary while class structure stays
/// fixed. Returns the sequence plus the switcher ids.
pub fn role_switch_network(cfg: &RoleSwitchConfig) -> (SnapshotSequence, Vec<NodeId>) {
    let switchers: Vec<NodeId> = (0..cfg.switchers as NodeId).collect();
    let hub_base = cfg.switchers as NodeId;
    let stable: Vec<NodeId> = (hub_base..hub_base + cfg.stable_hubs as NodeId).collect();
    let leaf_base = hub_base + cfg.stable_hubs as NodeId;
    let leaves: Vec<NodeId> = (leaf_base..leaf_base + cfg.leaves as NodeId).collect();
    let total = cfg.switchers + cfg.stable_hubs + cfg.leaves;

    let mut snapshots = Vec::with_capacity(cfg.t_max);
    for t in 1..=cfg.t_max {
        let hubs: Vec<NodeId> = if t < cfg.switch_at {
            switchers.iter().chain(stable.iter()).copied().collect()
        } else {
            stable.clone()
        };
        let peripherals: Vec<NodeId> = if t < cfg.switch_at {
            leaves.clone()
        } else {
            switchers.iter().chain(leaves.iter()).copied().collect()
        };
        let mut edges = Vec::with_capacity(peripherals.len());
        for (i, &leaf) in peripherals.iter().enumerate() {
            let hub = hubs[(i + t) % hubs.len()];
            edges.push((leaf, hub, 1.0));
        }
        snapshots.push(SnapshotGraph::new(t, edges));
    }
    (sequence_from(snapshots, total), switchers)
}

/// Random sparse temporal network with `edges_per_snapshot` directed edges
/// per timestep over `n_nodes` nodes (constant expected degree when both
/// scale together).
pub fn random_temporal_network(
    n_nodes: usize,
    edges_per_snapshot: usize,
    t_max: usize,
    seed: u64,
) -> SnapshotSequence {
    let mut snapshots = Vec::with_capacity(t_max);
    for t in 1..=t_max {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (t as u64).wrapping_mul(0x9e37_79b9));
        let mut edges = Vec::with_capacity(edges_per_snapshot);
        for _ in 0..edges_per_snapshot {
            let src = rng.random_range(0..n_nodes as NodeId);
            let dst = rng.random_range(0..n_nodes as NodeId);
            if src != dst {
                edges.push((src, dst, 1.0));
            }
        }
        snapshots.push(SnapshotGraph::new(t, edges));
    }
    sequence_from(snapshots, n_nodes)
}

/// Block-structured planted factors: each row of `G*` is the indicator of
/// its role (round-robin) and `F*` has a strong per-role block plus a
/// small random floor, so roles are well separated.
pub fn planted_factors(
    n: usize,
    f: usize,
    rank: usize,
    seed: u64,
    separation: f64,
) -> (Array2<f64>, Array2<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Array2::zeros((n, rank));
    for i in 0..n {
        g[[i, i % rank]] = 1.0;
    }
    let mut basis = Array2::from_shape_fn((rank, f), |_| rng.random::<f64>() * 0.5);
    for k in 0..rank {
        for j in 0..f {
            if j % rank == k {
                basis[[k, j]] += separation;
            }
        }
    }
    (g, basis)
}

/// `G* F*` plus elementwise Gaussian-ish noise of relative scale `noise`
/// (clamped to stay non-negative).
pub fn planted_matrix(n: usize, f: usize, rank: usize, seed: u64, noise: f64) -> Array2<f64> {
    let (g, basis) = planted_factors(n, f, rank, seed, 5.0);
    let mut v = g.dot(&basis);
    if noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        let scale = v.iter().fold(0.0f64, |a, &b| a.max(b)) * noise;
        v.mapv_inplace(|x| {
            let jitter = (rng.random::<f64>() - 0.5) * 2.0 * scale;
            (x + jitter).max(0.0)
        });
    }
    v
}
