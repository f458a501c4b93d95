//! Temporal edge lists and snapshot sequences.
//!
//! Timestamped edges are parsed from delimited text, interned into a
//! contiguous node dictionary and binned into an ordered sequence of
//! equal-width snapshot graphs. An edge with a duration contributes to
//! every window it overlaps; parallel edges within a window are
//! aggregated into a single weighted entry. Windows with no edges are
//! kept as empty snapshots so timestep indices stay uniform.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Compact node identifier, assigned in order of first appearance.
pub type NodeId = u32;

/// Bidirectional mapping between raw node labels and interned ids.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct NodeDictionary {
    labels: Vec<String>,
    index: HashMap<String, NodeId>,
}

impl NodeDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, label: &str) -> NodeId {
        if let Some(&id) = self.index.get(label) {
            return id;
        }
        let id = self.labels.len() as NodeId;
        self.labels.push(label.to_string());
        self.index.insert(label.to_string(), id);
        id
    }

    pub fn get(&self, label: &str) -> Option<NodeId> {
        self.index.get(label).copied()
    }

    pub fn label(&self, id: NodeId) -> &str {
        &self.labels[id as usize]
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

impl From<Vec<String>> for NodeDictionary {
    fn from(labels: Vec<String>) -> Self {
        let index = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i as NodeId))
            .collect();
        Self { labels, index }
    }
}

impl From<NodeDictionary> for Vec<String> {
    fn from(dict: NodeDictionary) -> Self {
        dict.labels
    }
}

/// A timestamped edge. `end == begin` for instantaneous edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemporalEdge {
    pub src: NodeId,
    pub dst: NodeId,
    pub weight: f64,
    pub begin: f64,
    pub end: f64,
}

/// All parsed edges plus the node dictionary and a malformed-line count.
#[derive(Debug, Clone, Default)]
pub struct TemporalEdgeSet {
    pub edges: Vec<TemporalEdge>,
    pub nodes: NodeDictionary,
    pub malformed: usize,
    pub self_loops: usize,
}

impl TemporalEdgeSet {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// How timestamps appear in the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TimeColumns {
    Instant(usize),
    Interval { begin: usize, end: usize },
}

/// Column mapping for delimited edge lists.
///
/// Parsed from a comma-separated role list such as `src,dst,time` or
/// `src,dst,begin,end,weight`. A `_` token skips a column; columns beyond
/// the schema (node attributes and the like) are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSchema {
    src: usize,
    dst: usize,
    time: TimeColumns,
    weight: Option<usize>,
    /// None means any run of whitespace.
    pub delimiter: Option<char>,
    /// Fail on the first malformed line instead of counting it.
    pub strict: bool,
    min_columns: usize,
}

impl Default for EdgeSchema {
    fn default() -> Self {
        "src,dst,time".parse().unwrap()
    }
}

impl FromStr for EdgeSchema {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut src = None;
        let mut dst = None;
        let mut time = None;
        let mut begin = None;
        let mut end = None;
        let mut weight = None;
        for (i, token) in s.split(',').enumerate() {
            let slot = match token.trim() {
                "src" => &mut src,
                "dst" => &mut dst,
                "time" | "timestamp" => &mut time,
                "begin" => &mut begin,
                "end" => &mut end,
                "weight" => &mut weight,
                "_" | "" => continue,
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown schema column '{other}'"
                    )))
                }
            };
            if slot.replace(i).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "duplicate schema column at position {i}"
                )));
            }
        }
        let src = src.ok_or_else(|| Error::InvalidArgument("schema needs a src column".into()))?;
        let dst = dst.ok_or_else(|| Error::InvalidArgument("schema needs a dst column".into()))?;
        let time = match (time, begin, end) {
            (Some(t), None, None) => TimeColumns::Instant(t),
            (None, Some(b), Some(e)) => TimeColumns::Interval { begin: b, end: e },
            _ => {
                return Err(Error::InvalidArgument(
                    "schema needs either a time column or begin+end columns".into(),
                ))
            }
        };
        let mut min_columns = src.max(dst);
        match time {
            TimeColumns::Instant(t) => min_columns = min_columns.max(t),
            TimeColumns::Interval { begin, end } => min_columns = min_columns.max(begin).max(end),
        }
        if let Some(w) = weight {
            min_columns = min_columns.max(w);
        }
        Ok(Self {
            src,
            dst,
            time,
            weight,
            delimiter: None,
            strict: false,
            min_columns: min_columns + 1,
        })
    }
}

impl EdgeSchema {
    pub fn with_delimiter(mut self, delimiter: Option<char>) -> Self {
        self.delimiter = delimiter;
        self
    }

    pub fn with_strict(mut self, strict: bool) -> Self {
        self.strict = strict;
        self
    }
}

fn parse_number(field: &str) -> Option<f64> {
    field.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Parse a delimited edge stream into a [`TemporalEdgeSet`].
///
/// Node labels are interned in order of first appearance. Empty lines and
/// lines starting with `#` are skipped. Malformed lines are counted, or
/// reported as an error naming the first offending line in strict mode.
pub fn ingest_edge_list<R: BufRead>(reader: R, schema: &EdgeSchema) -> Result<TemporalEdgeSet> {
    let mut set = TemporalEdgeSet::default();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = match schema.delimiter {
            None => trimmed.split_whitespace().collect(),
            Some(d) => trimmed.split(d).map(str::trim).collect(),
        };
        match parse_edge_fields(&fields, schema, &mut set.nodes) {
            Some(edge) => {
                if edge.src == edge.dst {
                    set.self_loops += 1;
                }
                set.edges.push(edge);
            }
            None => {
                if schema.strict {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("malformed edge record: {trimmed:?}"),
                    });
                }
                set.malformed += 1;
            }
        }
    }
    Ok(set)
}

fn parse_edge_fields(
    fields: &[&str],
    schema: &EdgeSchema,
    nodes: &mut NodeDictionary,
) -> Option<TemporalEdge> {
    if fields.len() < schema.min_columns {
        return None;
    }
    let (begin, end) = match schema.time {
        TimeColumns::Instant(t) => {
            let t = parse_number(fields[t])?;
            (t, t)
        }
        TimeColumns::Interval { begin, end } => {
            (parse_number(fields[begin])?, parse_number(fields[end])?)
        }
    };
    if end < begin {
        return None;
    }
    let weight = match schema.weight {
        Some(w) => parse_number(fields[w]).filter(|&w| w >= 0.0)?,
        None => 1.0,
    };
    let src = nodes.intern(fields[schema.src]);
    let dst = nodes.intern(fields[schema.dst]);
    Some(TemporalEdge {
        src,
        dst,
        weight,
        begin,
        end,
    })
}

/// How parallel edges inside one window collapse into a single entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Sum,
    Max,
    Count,
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(Self::Sum),
            "max" => Ok(Self::Max),
            "count" => Ok(Self::Count),
            other => Err(Error::InvalidArgument(format!(
                "unknown aggregation '{other}' (expected sum, max or count)"
            ))),
        }
    }
}

/// One time window of the network: aggregated adjacency plus active nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotGraph {
    index: usize,
    nodes: Vec<NodeId>,
    edges: Vec<(NodeId, NodeId, f64)>,
    out_adj: Vec<Vec<(usize, f64)>>,
    in_adj: Vec<Vec<(usize, f64)>>,
    nbrs: Vec<Vec<usize>>,
    weighted: bool,
}

impl SnapshotGraph {
    /// Build a snapshot from weighted directed edges. Duplicate `(src, dst)`
    /// pairs are summed; entries must end up with positive weight.
    pub fn new(index: usize, edges: Vec<(NodeId, NodeId, f64)>) -> Self {
        let mut agg: BTreeMap<(NodeId, NodeId), f64> = BTreeMap::new();
        for (s, d, w) in edges {
            *agg.entry((s, d)).or_insert(0.0) += w;
        }
        Self::from_aggregated(index, agg)
    }

    fn from_aggregated(index: usize, agg: BTreeMap<(NodeId, NodeId), f64>) -> Self {
        let edges: Vec<(NodeId, NodeId, f64)> = agg
            .into_iter()
            .filter(|&(_, w)| w > 0.0)
            .map(|((s, d), w)| (s, d, w))
            .collect();
        let mut nodes: Vec<NodeId> = edges.iter().flat_map(|&(s, d, _)| [s, d]).collect();
        nodes.sort_unstable();
        nodes.dedup();
        let n = nodes.len();
        let local = |id: NodeId| nodes.binary_search(&id).unwrap();
        let mut out_adj = vec![Vec::new(); n];
        let mut in_adj = vec![Vec::new(); n];
        let mut weighted = false;
        for &(s, d, w) in &edges {
            let (ls, ld) = (local(s), local(d));
            out_adj[ls].push((ld, w));
            in_adj[ld].push((ls, w));
            if w != 1.0 {
                weighted = true;
            }
        }
        let mut nbrs = vec![Vec::new(); n];
        for (u, list) in nbrs.iter_mut().enumerate() {
            list.extend(out_adj[u].iter().map(|&(v, _)| v));
            list.extend(in_adj[u].iter().map(|&(v, _)| v));
            list.sort_unstable();
            list.dedup();
        }
        Self {
            index,
            nodes,
            edges,
            out_adj,
            in_adj,
            nbrs,
            weighted,
        }
    }

    /// Empty snapshot for a window without edges.
    pub fn empty(index: usize) -> Self {
        Self::from_aggregated(index, BTreeMap::new())
    }

    /// 1-based timestep index.
    pub fn index(&self) -> usize {
        self.index
    }

    /// Nodes with at least one incident edge, sorted by id.
    pub fn active_nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Aggregated directed edges, sorted by `(src, dst)`.
    pub fn edges(&self) -> &[(NodeId, NodeId, f64)] {
        &self.edges
    }

    /// Local index of a node in `active_nodes` order.
    pub fn local(&self, id: NodeId) -> Option<usize> {
        self.nodes.binary_search(&id).ok()
    }

    pub fn out_edges(&self, local: usize) -> &[(usize, f64)] {
        &self.out_adj[local]
    }

    pub fn in_edges(&self, local: usize) -> &[(usize, f64)] {
        &self.in_adj[local]
    }

    /// Union of in- and out-neighbors, sorted, deduplicated.
    pub fn neighbors(&self, local: usize) -> &[usize] {
        &self.nbrs[local]
    }

    /// True when any aggregated weight differs from 1.
    pub fn is_weighted(&self) -> bool {
        self.weighted
    }
}

/// Ordered, consecutive, equal-width snapshot windows.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSequence {
    pub snapshots: Vec<SnapshotGraph>,
    pub nodes: NodeDictionary,
    pub window_width: f64,
    pub origin: f64,
}

impl SnapshotSequence {
    pub fn t_max(&self) -> usize {
        self.snapshots.len()
    }

    /// Active-node counts per timestep.
    pub fn activity_series(&self) -> Vec<usize> {
        self.snapshots.iter().map(|s| s.node_count()).collect()
    }
}

/// Options for [`bin_snapshots`].
#[derive(Debug, Clone, Copy, Default)]
pub struct BinOptions {
    pub aggregation: Aggregation,
    /// Self-loops are dropped unless set.
    pub keep_self_loops: bool,
}

/// Bin a temporal edge set into consecutive, non-overlapping windows of
/// `window_width` seconds starting at the earliest edge begin time.
///
/// An edge with interval `[begin, end]` contributes to every window it
/// overlaps. Windows with no edges yield empty snapshots.
pub fn bin_snapshots(
    edges: &TemporalEdgeSet,
    window_width: f64,
    opts: BinOptions,
) -> Result<SnapshotSequence> {
    if window_width.is_nan() || window_width <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "window width must be positive, got {window_width}"
        )));
    }
    if edges.is_empty() {
        return Err(Error::InvalidArgument("empty edge set".into()));
    }
    let origin = edges
        .edges
        .iter()
        .map(|e| e.begin)
        .fold(f64::INFINITY, f64::min);
    let window_of = |t: f64| ((t - origin) / window_width).floor() as usize;
    let t_max = edges.edges.iter().map(|e| window_of(e.end)).max().unwrap() + 1;

    // Per-window aggregation state: (sum, max, count) per node pair.
    type PairStats = (f64, f64, u64);
    let mut windows: Vec<BTreeMap<(NodeId, NodeId), PairStats>> = vec![BTreeMap::new(); t_max];
    for e in &edges.edges {
        if e.src == e.dst && !opts.keep_self_loops {
            continue;
        }
        for w in windows
            .iter_mut()
            .take(window_of(e.end) + 1)
            .skip(window_of(e.begin))
        {
            let entry = w.entry((e.src, e.dst)).or_insert((0.0, 0.0, 0));
            entry.0 += e.weight;
            entry.1 = entry.1.max(e.weight);
            entry.2 += 1;
        }
    }

    let snapshots = windows
        .into_iter()
        .enumerate()
        .map(|(k, w)| {
            let agg = w
                .into_iter()
                .map(|(key, (sum, max, count))| {
                    let value = match opts.aggregation {
                        Aggregation::Sum => sum,
                        Aggregation::Max => max,
                        Aggregation::Count => count as f64,
                    };
                    (key, value)
                })
                .collect();
            SnapshotGraph::from_aggregated(k + 1, agg)
        })
        .collect();

    Ok(SnapshotSequence {
        snapshots,
        nodes: edges.nodes.clone(),
        window_width,
        origin,
    })
}

#[derive(Serialize, Deserialize)]
struct SnapshotRecord {
    t: usize,
    edges: Vec<(NodeId, NodeId, f64)>,
}

#[derive(Serialize, Deserialize)]
struct ArchiveManifest {
    nodes: NodeDictionary,
    window_width: f64,
    origin: f64,
    t_max: usize,
}

/// Write the snapshot archive: one JSON record per snapshot plus a JSON
/// manifest carrying the node dictionary and the time axis.
pub fn write_archive(
    seq: &SnapshotSequence,
    snapshots_path: &Path,
    manifest_path: &Path,
) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(snapshots_path)?);
    for snap in &seq.snapshots {
        let record = SnapshotRecord {
            t: snap.index(),
            edges: snap.edges().to_vec(),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    let manifest = ArchiveManifest {
        nodes: seq.nodes.clone(),
        window_width: seq.window_width,
        origin: seq.origin,
        t_max: seq.t_max(),
    };
    let mut out = std::io::BufWriter::new(std::fs::File::create(manifest_path)?);
    serde_json::to_writer_pretty(&mut out, &manifest)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// Read back an archive written by [`write_archive`].
pub fn read_archive(snapshots_path: &Path, manifest_path: &Path) -> Result<SnapshotSequence> {
    let manifest: ArchiveManifest =
        serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(manifest_path)?))?;
    let mut snapshots: Vec<SnapshotGraph> =
        (1..=manifest.t_max).map(SnapshotGraph::empty).collect();
    let reader = std::io::BufReader::new(std::fs::File::open(snapshots_path)?);
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: SnapshotRecord = serde_json::from_str(&line)?;
        if record.t == 0 || record.t > manifest.t_max {
            return Err(Error::Parse {
                line: lineno + 1,
                message: format!("snapshot index {} out of range", record.t),
            });
        }
        snapshots[record.t - 1] = SnapshotGraph::new(record.t, record.edges);
    }
    Ok(SnapshotSequence {
        snapshots,
        nodes: manifest.nodes,
        window_width: manifest.window_width,
        origin: manifest.origin,
    })
}
