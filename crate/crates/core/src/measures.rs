//! Classical node measures used to interpret roles: exact Brandes
//! betweenness, per-node biconnected-component counts, PageRank, local
//! clustering coefficient and total degree.
//!
//! Betweenness, clustering and biconnectivity run on the undirected
//! simple projection of a snapshot; degree and PageRank respect edge
//! direction.

use std::collections::VecDeque;

use ndarray::Array2;

use crate::graph::{NodeId, SnapshotGraph};

/// Fixed column order of the measure matrix.
pub const MEASURE_NAMES: [&str; 5] = [
    "betweenness",
    "biconnected components",
    "pagerank",
    "clustering coefficient",
    "degree",
];

/// Node-by-measure matrix for one snapshot. `raw` holds the measures as
/// computed; `normalized` divides each column by its maximum so no single
/// measure dominates a regression by scale.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeMeasureMatrix {
    pub timestep: usize,
    pub nodes: Vec<NodeId>,
    pub raw: Array2<f64>,
    pub normalized: Array2<f64>,
}

impl NodeMeasureMatrix {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Regression input: normalized or raw columns.
    pub fn values(&self, use_normalized: bool) -> &Array2<f64> {
        if use_normalized {
            &self.normalized
        } else {
            &self.raw
        }
    }
}

/// Undirected simple projection as sorted neighbor lists (self-loops
/// removed).
fn undirected_adjacency(snap: &SnapshotGraph) -> Vec<Vec<usize>> {
    (0..snap.node_count())
        .map(|u| {
            snap.neighbors(u)
                .iter()
                .copied()
                .filter(|&v| v != u)
                .collect()
        })
        .collect()
}

/// Exact betweenness centrality (Brandes) on an undirected, unweighted
/// adjacency. Unnormalized; each unordered pair contributes once.
pub fn betweenness(adj: &[Vec<usize>]) -> Vec<f64> {
    let n = adj.len();
    let mut centrality = vec![0.0; n];
    let mut stack: Vec<usize> = Vec::with_capacity(n);
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut sigma = vec![0.0f64; n];
    let mut dist = vec![-1i64; n];
    let mut delta = vec![0.0f64; n];
    let mut queue = VecDeque::new();

    for s in 0..n {
        stack.clear();
        queue.clear();
        for v in 0..n {
            preds[v].clear();
            sigma[v] = 0.0;
            dist[v] = -1;
            delta[v] = 0.0;
        }
        sigma[s] = 1.0;
        dist[s] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            stack.push(v);
            for &w in &adj[v] {
                if dist[w] < 0 {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        while let Some(w) = stack.pop() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                centrality[w] += delta[w];
            }
        }
    }
    // Each unordered pair was visited from both endpoints.
    for c in &mut centrality {
        *c /= 2.0;
    }
    centrality
}

/// Number of biconnected components (blocks) each node belongs to, via an
/// iterative articulation-point DFS. Isolated nodes belong to none.
pub fn biconnected_counts(adj: &[Vec<usize>]) -> Vec<f64> {
    let n = adj.len();
    let mut counts = vec![0.0; n];
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut timer = 0usize;
    let mut edge_stack: Vec<(usize, usize)> = Vec::new();
    //

    #[derive(Clone)]
    struct Frame {
        v: usize,
        parent: Option<usize>,
        next: usize,
    }

    let mut seen_in_block = vec![usize::MAX; n];
    let mut block_id = 0usize;
    let mut pop_block = |edge_stack: &mut Vec<(usize, usize)>,
                         until: (usize, usize),
                         counts: &mut Vec<f64>,
                         seen: &mut Vec<usize>| {
        let id = block_id;
        block_id += 1;
        loop {
            let (a, b) = edge_stack.pop().expect("edge stack underflow");
            for node in [a, b] {
                if seen[node] != id {
                    seen[node] = id;
                    counts[node] += 1.0;
                }
            }
            if (a, b) == until {
                break;
            }
        }
    };

    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        let mut stack = vec![Frame {
            v: root,
            parent: None,
            next: 0,
        }];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(frame) = stack.last_mut() {
            let v = frame.v;
            if frame.next < adj[v].len() {
                let w = adj[v][frame.next];
                frame.next += 1;
                if Some(w) == frame.parent {
                    continue;
                }
                if disc[w] == usize::MAX {
                    edge_stack.push((v, w));
                    disc[w] = timer;
                    low[w] = timer;
                    timer += 1;
                    stack.push(Frame {
                        v: w,
                        parent: Some(v),
                        next: 0,
                    });
                } else if disc[w] < disc[v] {
                    edge_stack.push((v, w));
                    low[v] = low[v].min(disc[w]);
                }
            } else {
                let finished = stack.pop().unwrap();
                if let Some(p) = finished.parent {
                    let v = finished.v;
                    if low[v] >= disc[p] {
                        pop_block(&mut edge_stack, (p, v), &mut counts, &mut seen_in_block);
                    }
                    low[p] = low[p].min(low[v]);
                }
            }
        }
    }
    counts
}

/// PageRank on the directed weighted adjacency with uniform teleport.
/// Dangling mass is redistributed uniformly over active nodes. Iterates
/// until the L1 residual falls below `tol`.
pub fn pagerank(snap: &SnapshotGraph, damping: f64, tol: f64) -> Vec<f64> {
    let n = snap.node_count();
    if n == 0 {
        return Vec::new();
    }
    let out_weight: Vec<f64> = (0..n)
        .map(|u| snap.out_edges(u).iter().map(|&(_, w)| w).sum())
        .collect();
    let uniform = 1.0 / n as f64;
    let mut p = vec![uniform; n];
    let mut next = vec![0.0; n];
    for _ in 0..10_000 {
        next.fill(0.0);
        let mut dangling = 0.0;
        for u in 0..n {
            if out_weight[u] > 0.0 {
                let share = p[u] / out_weight[u];
                for &(v, w) in snap.out_edges(u) {
                    next[v] += share * w;
                }
            } else {
                dangling += p[u];
            }
        }
        let base = (1.0 - damping) * uniform + damping * dangling * uniform;
        let mut residual = 0.0;
        for v in 0..n {
            let value = base + damping * next[v];
            residual += (value - p[v]).abs();
            next[v] = value;
        }
        std::mem::swap(&mut p, &mut next);
        if residual < tol {
            break;
        }
    }
    p
}

/// Local clustering coefficient on the undirected simple projection.
/// Nodes with fewer than two neighbors score zero.
pub fn clustering_coefficients(adj: &[Vec<usize>]) -> Vec<f64> {
    let n = adj.len();
    let mut member = vec![false; n];
    let mut coefficients = vec![0.0; n];
    for u in 0..n {
        let deg = adj[u].len();
        if deg < 2 {
            continue;
        }
        for &v in &adj[u] {
            member[v] = true;
        }
        let mut links = 0usize;
        for &v in &adj[u] {
            for &w in &adj[v] {
                if w != u && member[w] {
                    links += 1; // counted twice per triangle edge
                }
            }
        }
        for &v in &adj[u] {
            member[v] = false;
        }
        coefficients[u] = links as f64 / (deg * (deg - 1)) as f64;
    }
    coefficients
}

/// Total degree (in + out edge count) on the directed adjacency.
pub fn total_degrees(snap: &SnapshotGraph) -> Vec<f64> {
    (0..snap.node_count())
        .map(|u| (snap.in_edges(u).len() + snap.out_edges(u).len()) as f64)
        .collect()
}

/// Compute the five-measure matrix for one snapshot.
pub fn compute_node_measures(snap: &SnapshotGraph) -> NodeMeasureMatrix {
    compute_node_measures_guarded(snap, usize::MAX).0
}

/// Like [`compute_node_measures`], but skips exact betweenness (leaving a
/// zero column) when the snapshot exceeds `betweenness_node_cap` nodes.
/// The boolean reports whether betweenness was computed.
pub fn compute_node_measures_guarded(
    snap: &SnapshotGraph,
    betweenness_node_cap: usize,
) -> (NodeMeasureMatrix, bool) {
    let n = snap.node_count();
    let adj = undirected_adjacency(snap);
    let betweenness_ok = n <= betweenness_node_cap;
    let btw = if betweenness_ok {
        betweenness(&adj)
    } else {
        vec![0.0; n]
    };
    let blocks = biconnected_counts(&adj);
    let pr = pagerank(snap, 0.85, 1e-10);
    let cc = clustering_coefficients(&adj);
    let deg = total_degrees(snap);

    let mut raw = Array2::zeros((n, 5));
    for i in 0..n {
        raw[[i, 0]] = btw[i];
        raw[[i, 1]] = blocks[i];
        raw[[i, 2]] = pr[i];
        raw[[i, 3]] = cc[i];
        raw[[i, 4]] = deg[i];
    }
    let mut normalized = raw.clone();
    for j in 0..5 {
        let max = raw.column(j).iter().fold(0.0f64, |a, &b| a.max(b));
        if max > 0.0 {
            normalized.column_mut(j).mapv_inplace(|v| v / max);
        }
    }
    (
        NodeMeasureMatrix {
            timestep: snap.index(),
            nodes: snap.active_nodes().to_vec(),
            raw,
            normalized,
        },
        betweenness_ok,
    )
}
