//! End-to-end driver: ingest, bin, learn/extract features, discover
//! roles, track memberships, interpret, and report. Every stage writes
//! its artifacts to the output directory so stages can be rerun
//! independently; a run manifest lists all artifacts with checksums.

use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{
    behavior_change_score, learn_global_roles, node_trajectory, role_importance_series,
    stack_global, union_features, ChangeScores, DistanceMetric, GlobalFeatureSet, NodeTrajectory,
    RoleImportanceSeries,
};
use crate::error::{Error, Result};
use crate::features::{extract_features, learn_features_with, FeatureMatrix, LearnOptions};
use crate::graph::{
    bin_snapshots, ingest_edge_list, read_archive, write_archive, Aggregation, BinOptions,
    EdgeSchema, NodeId, SnapshotSequence,
};
use crate::interpret::{dominant_measure, interpret_roles, DominantMeasure, RoleExplanation};
use crate::measures::{compute_node_measures_guarded, NodeMeasureMatrix, MEASURE_NAMES};
use crate::plot::{plot_network_dynamics, plot_node_dynamics};
use crate::roles::{
    mdl_select_rank, ErrorModel, MdlCandidate, MdlOptions, MembershipMatrix, NmfOptions, RoleModel,
};

pub const SNAPSHOTS_FILE: &str = "snapshots.jsonl";
pub const DATASET_FILE: &str = "dataset.json";
pub const FEATURE_DEFS_FILE: &str = "feature_defs.json";
pub const FEATURES_DIR: &str = "features";
pub const ROLE_MODEL_FILE: &str = "role_model.json";
pub const DRIFT_MODELS_FILE: &str = "role_models.json";
pub const MEMBERSHIPS_FILE: &str = "memberships.csv";
pub const MEMBERSHIPS_RAW_FILE: &str = "memberships_raw.csv";
pub const IMPORTANCE_FILE: &str = "role_importance.csv";
pub const IMPORTANCE_JSON_FILE: &str = "role_importance.json";
pub const CHANGES_FILE: &str = "change_scores.csv";
pub const CHANGES_JSON_FILE: &str = "change_scores.json";
pub const EXPLANATION_CSV_FILE: &str = "role_explanation.csv";
pub const EXPLANATION_JSON_FILE: &str = "explanation.json";
pub const NETWORK_PLOT_FILE: &str = "network_dynamics.svg";
pub const NODE_PLOT_FILE: &str = "node_dynamics.svg";
pub const MANIFEST_FILE: &str = "run_manifest.json";

/// How the role basis relates to time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoleMode {
    /// One basis learned from the stacked matrix over all timesteps.
    #[default]
    GlobalBasis,
    /// Refit the basis per timestep; roles are matched across timesteps
    /// by nearest basis row (heuristic, flagged in the manifest).
    PerTimestepRefit,
}

impl std::str::FromStr for RoleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global-basis" | "global" => Ok(Self::GlobalBasis),
            "per-timestep-refit" | "drift" => Ok(Self::PerTimestepRefit),
            other => Err(Error::InvalidArgument(format!(
                "unknown mode '{other}' (expected global-basis or per-timestep-refit)"
            ))),
        }
    }
}

/// Full run configuration; serializes round-trip to JSON and is embedded
/// in the run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub input: PathBuf,
    pub schema: String,
    pub delimiter: Option<char>,
    pub strict: bool,
    pub keep_self_loops: bool,
    pub window_width: f64,
    pub aggregation: Aggregation,
    /// Pruning bin count; 0 derives it from the node count.
    pub bins: usize,
    pub bin_fraction: f64,
    pub max_generation: usize,
    pub nmf_max_iters: usize,
    pub nmf_tol: f64,
    pub restarts: usize,
    pub seed: u64,
    pub r_min: usize,
    pub r_max: usize,
    pub mdl_bits: u32,
    pub error_model: ErrorModel,
    pub mode: RoleMode,
    pub change_metric: DistanceMetric,
    pub normalize_measures: bool,
    /// Exact betweenness is skipped on snapshots larger than this.
    pub betweenness_node_cap: usize,
    /// Maximum bands in the node-dynamics plot.
    pub plot_nodes: usize,
    /// Worker threads for per-timestep stages; 0 uses the default pool.
    pub workers: usize,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: PathBuf::new(),
            schema: "src,dst,time".into(),
            delimiter: None,
            strict: false,
            keep_self_loops: false,
            window_width: 1.0,
            aggregation: Aggregation::Sum,
            bins: 0,
            bin_fraction: 0.5,
            max_generation: 6,
            nmf_max_iters: 200,
            nmf_tol: 1e-4,
            restarts: 3,
            seed: 0,
            r_min: 1,
            r_max: 8,
            mdl_bits: 4,
            error_model: ErrorModel::Squared,
            mode: RoleMode::GlobalBasis,
            change_metric: DistanceMetric::Hellinger,
            normalize_measures: true,
            betweenness_node_cap: 50_000,
            plot_nodes: 40,
            workers: 0,
            out_dir: PathBuf::from("roletrace-out"),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_width.is_nan() || self.window_width <= 0.0 {
            return Err(Error::InvalidArgument(
                "window width must be positive".into(),
            ));
        }
        if self.bins == 1 {
            return Err(Error::InvalidArgument(
                "bin count must be 0 (auto) or >= 2".into(),
            ));
        }
        if !(self.bin_fraction > 0.0 && self.bin_fraction < 1.0) {
            return Err(Error::InvalidArgument(
                "bin fraction must be in (0, 1)".into(),
            ));
        }
        if self.nmf_max_iters == 0 {
            return Err(Error::InvalidArgument("nmf max iters must be >= 1".into()));
        }
        if self.nmf_tol < 0.0 {
            return Err(Error::InvalidArgument("nmf tol must be >= 0".into()));
        }
        if self.r_min < 1 || self.r_min > self.r_max {
            return Err(Error::InvalidArgument(format!(
                "invalid rank range [{}, {}]",
                self.r_min, self.r_max
            )));
        }
        if self.mdl_bits == 0 || self.mdl_bits > 16 {
            return Err(Error::InvalidArgument("mdl bits must be in 1..=16".into()));
        }
        Ok(())
    }

    pub fn schema_parsed(&self) -> Result<EdgeSchema> {
        Ok(self
            .schema
            .parse::<EdgeSchema>()?
            .with_delimiter(self.delimiter)
            .with_strict(self.strict))
    }

    fn learn_options(&self) -> LearnOptions {
        LearnOptions {
            bins: if self.bins == 0 {
                None
            } else {
                Some(self.bins)
            },
            bin_fraction: self.bin_fraction,
            max_generation: self.max_generation,
        }
    }

    fn mdl_options(&self) -> MdlOptions {
        MdlOptions {
            bits: self.mdl_bits,
            error_model: self.error_model,
            restarts: self.restarts,
            nmf: NmfOptions {
                max_iters: self.nmf_max_iters,
                tol: self.nmf_tol,
                seed: self.seed,
                scale_columns: true,
            },
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

/// Run a closure inside a bounded rayon pool when `workers > 0`.
pub fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    if workers == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub nodes: usize,
    pub edges: usize,
    pub malformed_lines: usize,
    pub self_loops: usize,
    pub t_max: usize,
    pub active_nodes_per_timestep: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub path: String,
    pub sha256: String,
}

/// Everything a run leaves behind, plus enough stats to read the outputs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunManifest {
    pub config: RunConfig,
    pub dataset: DatasetStats,
    pub feature_count: usize,
    pub selected_rank: usize,
    pub per_timestep_ranks: Option<Vec<usize>>,
    pub mdl_trace: Vec<MdlCandidate>,
    pub role_labels: Vec<String>,
    /// Time-averaged role-by-measure contributions (rows are roles,
    /// columns follow [`MEASURE_NAMES`]).
    pub explanation_averaged: Vec<Vec<f64>>,
    pub stage_seconds: Vec<(String, f64)>,
    pub completed_stages: Vec<String>,
    pub warnings: Vec<String>,
    pub artifacts: Vec<ArtifactRecord>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

fn float_field(v: f64) -> String {
    format!("{v}")
}

// ---------------------------------------------------------------------------
// Stage: ingest
// ---------------------------------------------------------------------------

/// Parse the input edge list, bin it into snapshots and write the archive.
pub fn ingest_stage(cfg: &RunConfig) -> Result<(SnapshotSequence, DatasetStats)> {
    let schema = cfg.schema_parsed()?;
    let file = fs::File::open(&cfg.input)?;
    let edges = ingest_edge_list(BufReader::new(file), &schema)?;
    let seq = bin_snapshots(
        &edges,
        cfg.window_width,
        BinOptions {
            aggregation: cfg.aggregation,
            keep_self_loops: cfg.keep_self_loops,
        },
    )?;
    fs::create_dir_all(&cfg.out_dir)?;
    write_archive(&seq, &cfg.path(SNAPSHOTS_FILE), &cfg.path(DATASET_FILE))?;
    let stats = DatasetStats {
        nodes: seq.nodes.len(),
        edges: edges.len(),
        malformed_lines: edges.malformed,
        self_loops: edges.self_loops,
        t_max: seq.t_max(),
        active_nodes_per_timestep: seq.activity_series(),
    };
    Ok((seq, stats))
}

pub fn load_archive(cfg: &RunConfig) -> Result<SnapshotSequence> {
    read_archive(&cfg.path(SNAPSHOTS_FILE), &cfg.path(DATASET_FILE))
}

// ---------------------------------------------------------------------------
// Stage: features
// ---------------------------------------------------------------------------

/// Learn features per snapshot, union them into the global set, extract
/// the union on every snapshot and write definitions plus matrices.
pub fn features_stage(
    cfg: &RunConfig,
    seq: &SnapshotSequence,
) -> Result<(GlobalFeatureSet, Vec<FeatureMatrix>)> {
    let opts = cfg.learn_options();
    let learned: Vec<Option<(usize, Vec<crate::features::FeatureDefinition>)>> = seq
        .snapshots
        .par_iter()
        .map(|snap| {
            if snap.is_empty() {
                return Ok(None);
            }
            let (defs, _) = learn_features_with(snap, &opts)?;
            Ok(Some((snap.index(), defs)))
        })
        .collect::<Result<_>>()?;
    let per_timestep: Vec<(usize, Vec<crate::features::FeatureDefinition>)> =
        learned.into_iter().flatten().collect();
    if per_timestep.is_empty() {
        return Err(Error::InsufficientData(
            "every snapshot is empty; nothing to learn features from".into(),
        ));
    }
    let global = union_features(&per_timestep)?;

    let v_seq: Vec<FeatureMatrix> = seq
        .snapshots
        .par_iter()
        .map(|snap| extract_features(snap, &global.defs))
        .collect::<Result<_>>()?;

    fs::create_dir_all(cfg.path(FEATURES_DIR))?;
    let json = serde_json::to_string_pretty(&global)?;
    fs::write(cfg.path(FEATURE_DEFS_FILE), json + "\n")?;
    for v in &v_seq {
        write_feature_matrix_csv(
            &cfg.path(FEATURES_DIR)
                .join(format!("V_{:04}.csv", v.timestep)),
            v,
            seq,
        )?;
    }
    Ok((global, v_seq))
}

fn write_feature_matrix_csv(path: &Path, v: &FeatureMatrix, seq: &SnapshotSequence) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["node".to_string()];
    header.extend(v.defs.iter().map(|d| d.to_string()));
    w.write_record(&header)?;
    for (i, &node) in v.nodes.iter().enumerate() {
        let mut record = vec![seq.nodes.label(node).to_string()];
        record.extend(v.values.row(i).iter().map(|&x| float_field(x)));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_feature_defs(cfg: &RunConfig) -> Result<GlobalFeatureSet> {
    let text = fs::read_to_string(cfg.path(FEATURE_DEFS_FILE))?;
    Ok(serde_json::from_str(&text)?)
}

/// Reload per-timestep feature matrices by re-extracting the stored
/// definitions over the archived snapshots (cheaper to recompute than to
/// parse, and exact by construction).
pub fn load_features(
    cfg: &RunConfig,
    seq: &SnapshotSequence,
) -> Result<(GlobalFeatureSet, Vec<FeatureMatrix>)> {
    let global = load_feature_defs(cfg)?;
    let v_seq: Vec<FeatureMatrix> = seq
        .snapshots
        .par_iter()
        .map(|snap| extract_features(snap, &global.defs))
        .collect::<Result<_>>()?;
    Ok((global, v_seq))
}

// ---------------------------------------------------------------------------
// Stage: roles
// ---------------------------------------------------------------------------

/// A per-timestep model in drift mode, with its roles mapped onto the
/// run-global role index space by the correspondence heuristic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedModel {
    pub timestep: usize,
    /// Global role index of each local basis row.
    pub global_roles: Vec<usize>,
    pub model: RoleModel,
}

/// Outcome of role discovery in either mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RoleOutcome {
    Global(RoleModel),
    Drift {
        models: Vec<AlignedModel>,
        /// Total number of global role slots.
        width: usize,
    },
}

impl RoleOutcome {
    /// Width of the membership matrices this outcome produces.
    pub fn rank(&self) -> usize {
        match self {
            RoleOutcome::Global(m) => m.rank(),
            RoleOutcome::Drift { width, .. } => *width,
        }
    }

    pub fn per_timestep_ranks(&self) -> Option<Vec<usize>> {
        match self {
            RoleOutcome::Global(_) => None,
            RoleOutcome::Drift { models, .. } => {
                Some(models.iter().map(|m| m.model.rank()).collect())
            }
        }
    }
}

fn clamp_rank_range(
    r_min: usize,
    r_max: usize,
    rows: usize,
    cols: usize,
) -> Option<(usize, usize)> {
    let cap = rows.min(cols).checked_sub(1)?;
    if cap == 0 || r_min > cap {
        return None;
    }
    Some((r_min, r_max.min(cap)))
}

/// Discover roles: one MDL-selected basis over the stacked matrix in
/// global mode, or one basis per timestep (aligned heuristically) in
/// drift mode. Writes the model artifact.
pub fn roles_stage(
    cfg: &RunConfig,
    global: &GlobalFeatureSet,
    v_seq: &[FeatureMatrix],
    warnings: &mut Vec<String>,
) -> Result<RoleOutcome> {
    let opts = cfg.mdl_options();
    let outcome = match cfg.mode {
        RoleMode::GlobalBasis => {
            let stacked = stack_global(v_seq)?;
            let (rows, cols) = stacked.values.dim();
            let (r_min, r_max) =
                clamp_rank_range(cfg.r_min, cfg.r_max, rows, cols).ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "rank range [{}, {}] infeasible for stacked {rows}x{cols} matrix",
                        cfg.r_min, cfg.r_max
                    ))
                })?;
            if r_max < cfg.r_max {
                warnings.push(format!(
                    "rank scan clamped to [{r_min}, {r_max}] by the stacked matrix shape"
                ));
            }
            let (model, _) = learn_global_roles(&stacked, &global.defs, r_min, r_max, &opts)?;
            let json = serde_json::to_string_pretty(&model)?;
            fs::write(cfg.path(ROLE_MODEL_FILE), json + "\n")?;
            RoleOutcome::Global(model)
        }
        RoleMode::PerTimestepRefit => {
            warnings.push(
                "per-timestep-refit mode: cross-timestep role correspondence is a \
                 nearest-basis-row heuristic"
                    .into(),
            );
            let fits: Vec<Option<(usize, RoleModel)>> = v_seq
                .par_iter()
                .map(|v| {
                    let (rows, cols) = v.values.dim();
                    let Some((r_min, r_max)) = clamp_rank_range(cfg.r_min, cfg.r_max, rows, cols)
                    else {
                        return Ok(None);
                    };
                    let selection = mdl_select_rank(&v.values, r_min, r_max, &opts)?;
                    Ok(Some((
                        v.timestep,
                        RoleModel::from_selection(&selection, global.defs.clone()),
                    )))
                })
                .collect::<Result<_>>()?;
            for (v, fit) in v_seq.iter().zip(&fits) {
                if fit.is_none() {
                    warnings.push(format!(
                        "timestep {}: too few active nodes to fit a role model",
                        v.timestep
                    ));
                }
            }
            let (models, width) = align_drift_models(fits.into_iter().flatten().collect());
            let json = serde_json::to_string_pretty(&models)?;
            fs::write(cfg.path(DRIFT_MODELS_FILE), json + "\n")?;
            RoleOutcome::Drift { models, width }
        }
    };
    Ok(outcome)
}

fn max_normalized_rows(basis: &Array2<f64>) -> Vec<Array1<f64>> {
    (0..basis.nrows())
        .map(|k| {
            let row = basis.row(k).to_owned();
            let max = row.iter().fold(0.0f64, |a, &b| a.max(b));
            if max > 0.0 {
                row / max
            } else {
                row
            }
        })
        .collect()
}

/// Greedy correspondence between per-timestep bases: each new basis row is
/// matched to the nearest existing global role (by euclidean distance on
/// max-normalized rows); leftovers open new global roles.
fn align_drift_models(fits: Vec<(usize, RoleModel)>) -> (Vec<AlignedModel>, usize) {
    let mut reference: Vec<Array1<f64>> = Vec::new();
    let mut aligned = Vec::with_capacity(fits.len());
    for (timestep, model) in fits {
        let rows = max_normalized_rows(&model.basis);
        let r = rows.len();
        let mut assignment = vec![usize::MAX; r];
        if !reference.is_empty() {
            let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
            for (g, refrow) in reference.iter().enumerate() {
                for (k, row) in rows.iter().enumerate() {
                    let d = (refrow - row).mapv(|v| v * v).sum().sqrt();
                    pairs.push((d, g, k));
                }
            }
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            let mut global_used = vec![false; reference.len()];
            for (_, g, k) in pairs {
                if assignment[k] == usize::MAX && !global_used[g] {
                    assignment[k] = g;
                    global_used[g] = true;
                }
            }
        }
        for (k, slot) in assignment.iter_mut().enumerate() {
            if *slot == usize::MAX {
                *slot = reference.len();
                reference.push(rows[k].clone());
            } else {
                reference[*slot] = rows[k].clone();
            }
        }
        aligned.push(AlignedModel {
            timestep,
            global_roles: assignment,
            model,
        });
    }
    let width = reference.len();
    (aligned, width)
}

pub fn load_role_outcome(cfg: &RunConfig) -> Result<RoleOutcome> {
    match cfg.mode {
        RoleMode::GlobalBasis => {
            let text = fs::read_to_string(cfg.path(ROLE_MODEL_FILE))?;
            Ok(RoleOutcome::Global(serde_json::from_str(&text)?))
        }
        RoleMode::PerTimestepRefit => {
            let text = fs::read_to_string(cfg.path(DRIFT_MODELS_FILE))?;
            let models: Vec<AlignedModel> = serde_json::from_str(&text)?;
            let width = models
                .iter()
                .flat_map(|m| m.global_roles.iter().copied())
                .max()
                .map_or(0, |m| m + 1);
            Ok(RoleOutcome::Drift { models, width })
        }
    }
}

// ---------------------------------------------------------------------------
// Stage: track
// ---------------------------------------------------------------------------

/// Estimate memberships for every timestep and write raw plus normalized
/// CSVs. In drift mode memberships are expanded onto the global role
/// index space.
pub fn track_stage(
    cfg: &RunConfig,
    seq: &SnapshotSequence,
    outcome: &RoleOutcome,
    v_seq: &[FeatureMatrix],
) -> Result<Vec<MembershipMatrix>> {
    let raw = match outcome {
        RoleOutcome::Global(model) => crate::dynamics::track_memberships(v_seq, model)?,
        RoleOutcome::Drift { models, width } => {
            let by_t: std::collections::HashMap<usize, &AlignedModel> =
                models.iter().map(|m| (m.timestep, m)).collect();
            v_seq
                .par_iter()
                .map(|v| {
                    let Some(aligned) = by_t.get(&v.timestep) else {
                        // No model could be fit here; all-zero memberships.
                        return Ok(MembershipMatrix {
                            timestep: v.timestep,
                            nodes: v.nodes.clone(),
                            values: Array2::zeros((v.node_count(), *width)),
                            normalized: false,
                        });
                    };
                    let local = crate::roles::estimate_memberships(v, &aligned.model)?;
                    let mut values = Array2::zeros((local.node_count(), *width));
                    for (k, &g) in aligned.global_roles.iter().enumerate() {
                        values.column_mut(g).assign(&local.values.column(k));
                    }
                    Ok(MembershipMatrix {
                        timestep: v.timestep,
                        nodes: local.nodes,
                        values,
                        normalized: false,
                    })
                })
                .collect::<Result<_>>()?
        }
    };
    write_memberships_csv(&cfg.path(MEMBERSHIPS_RAW_FILE), &raw, seq)?;
    let normalized: Vec<MembershipMatrix> = raw.iter().map(MembershipMatrix::normalized).collect();
    write_memberships_csv(&cfg.path(MEMBERSHIPS_FILE), &normalized, seq)?;
    Ok(normalized)
}

fn write_memberships_csv(
    path: &Path,
    g_seq: &[MembershipMatrix],
    seq: &SnapshotSequence,
) -> Result<()> {
    let rank = g_seq.iter().map(MembershipMatrix::rank).max().unwrap_or(0);
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["node".to_string(), "t".to_string()];
    header.extend((1..=rank).map(|k| format!("role_{k}")));
    w.write_record(&header)?;
    for g in g_seq {
        for (i, &node) in g.nodes.iter().enumerate() {
            let mut record = vec![seq.nodes.label(node).to_string(), g.timestep.to_string()];
            record.extend(g.values.row(i).iter().map(|&x| float_field(x)));
            w.write_record(&record)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a memberships CSV back into per-timestep matrices. Timesteps
/// without rows come back empty (0 x rank).
pub fn load_memberships(cfg: &RunConfig, seq: &SnapshotSequence) -> Result<Vec<MembershipMatrix>> {
    let path = cfg.path(MEMBERSHIPS_FILE);
    let mut reader = csv::Reader::from_path(&path)?;
    let headers = reader.headers()?.clone();
    let rank = headers.len().saturating_sub(2);
    let mut per_t: Vec<Vec<(NodeId, Vec<f64>)>> = vec![Vec::new(); seq.t_max()];
    for record in reader.records() {
        let record = record?;
        let label = &record[0];
        let node = seq
            .nodes
            .get(label)
            .ok_or_else(|| Error::UnknownNode(label.to_string()))?;
        let t: usize = record[1]
            .parse()
            .map_err(|_| Error::Schema(format!("bad timestep '{}'", &record[1])))?;
        if t == 0 || t > seq.t_max() {
            return Err(Error::Schema(format!("timestep {t} out of range")));
        }
        let row: Vec<f64> = (0..rank)
            .map(|k| {
                record[k + 2]
                    .parse::<f64>()
                    .map_err(|_| Error::Schema(format!("bad value '{}'", &record[k + 2])))
            })
            .collect::<Result<_>>()?;
        per_t[t - 1].push((node, row));
    }
    Ok(per_t
        .into_iter()
        .enumerate()
        .map(|(i, mut rows)| {
            rows.sort_by_key(|&(node, _)| node);
            let mut values = Array2::zeros((rows.len(), rank));
            let mut nodes = Vec::with_capacity(rows.len());
            for (r, (node, row)) in rows.into_iter().enumerate() {
                nodes.push(node);
                for (k, v) in row.into_iter().enumerate() {
                    values[[r, k]] = v;
                }
            }
            MembershipMatrix {
                timestep: i + 1,
                nodes,
                values,
                normalized: true,
            }
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Stage: interpret
// ---------------------------------------------------------------------------

/// Compute node measures per snapshot (with the betweenness size guard)
/// and regress memberships onto them. Writes the explanation artifacts.
pub fn interpret_stage(
    cfg: &RunConfig,
    seq: &SnapshotSequence,
    g_seq: &[MembershipMatrix],
    warnings: &mut Vec<String>,
) -> Result<(RoleExplanation, Vec<DominantMeasure>)> {
    let measures: Vec<(NodeMeasureMatrix, bool)> = seq
        .snapshots
        .par_iter()
        .map(|snap| compute_node_measures_guarded(snap, cfg.betweenness_node_cap))
        .collect();
    for (m, computed) in &measures {
        if !computed {
            warnings.push(format!(
                "timestep {}: exact betweenness skipped ({} nodes exceed the cap of {})",
                m.timestep,
                m.node_count(),
                cfg.betweenness_node_cap
            ));
        }
    }
    let m_seq: Vec<NodeMeasureMatrix> = measures.into_iter().map(|(m, _)| m).collect();
    let explanation = interpret_roles(g_seq, &m_seq, cfg.normalize_measures)?;
    let skipped: Vec<usize> = g_seq
        .iter()
        .map(|g| g.timestep)
        .filter(|t| !explanation.used_timesteps.contains(t))
        .collect();
    for t in &skipped {
        warnings.push(format!(
            "timestep {t}: interpretation fit skipped (under-determined)"
        ));
    }

    let rank = explanation.averaged.nrows();
    let dominant: Vec<DominantMeasure> = (0..rank)
        .map(|k| dominant_measure(&explanation, k))
        .collect();

    let mut w = csv::Writer::from_path(cfg.path(EXPLANATION_CSV_FILE))?;
    w.write_record(["role", "measure", "contribution"])?;
    for k in 0..rank {
        for (j, name) in MEASURE_NAMES.iter().enumerate() {
            w.write_record([
                format!("role_{}", k + 1),
                name.to_string(),
                float_field(explanation.averaged[[k, j]]),
            ])?;
        }
    }
    w.flush()?;

    #[derive(Serialize)]
    struct ExplanationDoc<'a> {
        measure_names: [&'static str; 5],
        averaged: Vec<Vec<f64>>,
        dominant: &'a [DominantMeasure],
        used_timesteps: &'a [usize],
        normalized_measures: bool,
    }
    let doc = ExplanationDoc {
        measure_names: MEASURE_NAMES,
        averaged: explanation
            .averaged
            .rows()
            .into_iter()
            .map(|r| r.to_vec())
            .collect(),
        dominant: &dominant,
        used_timesteps: &explanation.used_timesteps,
        normalized_measures: cfg.normalize_measures,
    };
    let json = serde_json::to_string_pretty(&doc)?;
    fs::write(cfg.path(EXPLANATION_JSON_FILE), json + "\n")?;
    Ok((explanation, dominant))
}

/// Role legend labels: "role k (dominant measure)".
pub fn role_labels(rank: usize, dominant: &[DominantMeasure]) -> Vec<String> {
    (0..rank)
        .map(|k| match dominant.get(k) {
            Some(d) if !d.degenerate => format!("role {} ({})", k + 1, d.measure),
            _ => format!("role {}", k + 1),
        })
        .collect()
}

pub fn load_role_labels(cfg: &RunConfig, rank: usize) -> Vec<String> {
    #[derive(Deserialize)]
    struct Doc {
        dominant: Vec<OwnedDominant>,
    }
    #[derive(Deserialize)]
    struct OwnedDominant {
        measure: String,
        degenerate: bool,
    }
    let fallback: Vec<String> = (0..rank).map(|k| format!("role {}", k + 1)).collect();
    let Ok(text) = fs::read_to_string(cfg.path(EXPLANATION_JSON_FILE)) else {
        return fallback;
    };
    let Ok(doc) = serde_json::from_str::<Doc>(&text) else {
        return fallback;
    };
    (0..rank)
        .map(|k| match doc.dominant.get(k) {
            Some(d) if !d.degenerate => format!("role {} ({})", k + 1, d.measure),
            _ => format!("role {}", k + 1),
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Stage: report
// ---------------------------------------------------------------------------

/// Dynamics products: importance series, change scores, trajectories and
/// the two SVG reports.
pub fn report_stage(
    cfg: &RunConfig,
    seq: &SnapshotSequence,
    g_seq: &[MembershipMatrix],
    labels: &[String],
) -> Result<RoleImportanceSeries> {
    let series = role_importance_series(g_seq);
    let mut w = csv::Writer::from_path(cfg.path(IMPORTANCE_FILE))?;
    w.write_record(["t", "role", "value"])?;
    for t in 0..series.t_max() {
        for k in 0..series.rank() {
            w.write_record([
                (t + 1).to_string(),
                format!("role_{}", k + 1),
                float_field(series.values[[t, k]]),
            ])?;
        }
    }
    w.flush()?;
    #[derive(Serialize)]
    struct ImportanceDoc<'a> {
        t_max: usize,
        rank: usize,
        labels: &'a [String],
        /// Row t-1 is the importance vector at timestep t.
        values: Vec<Vec<f64>>,
    }
    let doc = ImportanceDoc {
        t_max: series.t_max(),
        rank: series.rank(),
        labels,
        values: series
            .values
            .rows()
            .into_iter()
            .map(|r| r.to_vec())
            .collect(),
    };
    fs::write(
        cfg.path(IMPORTANCE_JSON_FILE),
        serde_json::to_string_pretty(&doc)? + "\n",
    )?;

    // Change scores for every node active at two or more timesteps.
    let universe = seq.nodes.len();
    let mut active_any: Vec<NodeId> = g_seq.iter().flat_map(|g| g.nodes.iter().copied()).collect();
    active_any.sort_unstable();
    active_any.dedup();
    let scored: Vec<ChangeScores> = active_any
        .par_iter()
        .filter_map(|&node| {
            let traj = node_trajectory(g_seq, node, universe).ok()?;
            if traj.active_steps() < 2 {
                return None;
            }
            behavior_change_score(&traj, cfg.change_metric).ok()
        })
        .collect();
    let mut w = csv::Writer::from_path(cfg.path(CHANGES_FILE))?;
    w.write_record(["node", "t", "score", "spans_gap"])?;
    for scores in &scored {
        for p in &scores.points {
            w.write_record([
                seq.nodes.label(scores.node).to_string(),
                p.t.to_string(),
                float_field(p.score),
                p.spans_gap.to_string(),
            ])?;
        }
    }
    w.flush()?;
    #[derive(Serialize)]
    struct ChangeDoc<'a> {
        node: &'a str,
        argmax_t: usize,
        points: &'a [crate::dynamics::ChangePoint],
    }
    let docs: Vec<ChangeDoc> = scored
        .iter()
        .map(|s| ChangeDoc {
            node: seq.nodes.label(s.node),
            argmax_t: s.argmax_t,
            points: &s.points,
        })
        .collect();
    fs::write(
        cfg.path(CHANGES_JSON_FILE),
        serde_json::to_string_pretty(&docs)? + "\n",
    )?;

    let network_svg = plot_network_dynamics(&series, labels);
    fs::write(cfg.path(NETWORK_PLOT_FILE), network_svg)?;

    let plotted: Vec<NodeId> = active_any.iter().copied().take(cfg.plot_nodes).collect();
    let trajs: Vec<NodeTrajectory> = plotted
        .iter()
        .map(|&node| node_trajectory(g_seq, node, universe))
        .collect::<Result<_>>()?;
    let node_labels: Vec<String> = plotted
        .iter()
        .map(|&n| seq.nodes.label(n).to_string())
        .collect();
    let node_svg = plot_node_dynamics(&trajs, &node_labels, labels);
    fs::write(cfg.path(NODE_PLOT_FILE), node_svg)?;

    Ok(series)
}

// ---------------------------------------------------------------------------
// Full pipeline
// ---------------------------------------------------------------------------

struct StageClock {
    stage_seconds: Vec<(String, f64)>,
    completed: Vec<String>,
}

impl StageClock {
    fn new() -> Self {
        Self {
            stage_seconds: Vec::new(),
            completed: Vec::new(),
        }
    }

    fn run<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f()?;
        self.stage_seconds
            .push((name.to_string(), start.elapsed().as_secs_f64()));
        self.completed.push(name.to_string());
        Ok(out)
    }
}

fn manifest_artifacts(cfg: &RunConfig) -> Result<Vec<ArtifactRecord>> {
    let mut files: Vec<PathBuf> = Vec::new();
    for name in [
        SNAPSHOTS_FILE,
        DATASET_FILE,
        FEATURE_DEFS_FILE,
        ROLE_MODEL_FILE,
        DRIFT_MODELS_FILE,
        MEMBERSHIPS_FILE,
        MEMBERSHIPS_RAW_FILE,
        IMPORTANCE_FILE,
        IMPORTANCE_JSON_FILE,
        CHANGES_FILE,
        CHANGES_JSON_FILE,
        EXPLANATION_CSV_FILE,
        EXPLANATION_JSON_FILE,
        NETWORK_PLOT_FILE,
        NODE_PLOT_FILE,
    ] {
        let p = cfg.path(name);
        if p.is_file() {
            files.push(p);
        }
    }
    let features_dir = cfg.path(FEATURES_DIR);
    if features_dir.is_dir() {
        let mut fv: Vec<PathBuf> = fs::read_dir(&features_dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        fv.sort();
        files.extend(fv);
    }
    files
        .into_iter()
        .map(|p| {
            let rel = p
                .strip_prefix(&cfg.out_dir)
                .unwrap_or(&p)
                .to_string_lossy()
                .replace('\\', "/");
            Ok(ArtifactRecord {
                path: rel,
                sha256: sha256_file(&p)?,
            })
        })
        .collect()
}

fn write_manifest(cfg: &RunConfig, manifest: &RunManifest) -> Result<()> {
    let json = serde_json::to_string_pretty(manifest)?;
    let mut f = fs::File::create(cfg.path(MANIFEST_FILE))?;
    f.write_all(json.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

/// Execute every stage and write the run manifest. On a stage failure the
/// manifest still records the completed stages before the error returns.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunManifest> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out_dir)?;
    let mut manifest = RunManifest {
        config: cfg.clone(),
        ..Default::default()
    };
    let result = with_pool(cfg.workers, || run_pipeline_inner(cfg, &mut manifest));
    manifest.artifacts = manifest_artifacts(cfg)?;
    write_manifest(cfg, &manifest)?;
    match result {
        Ok(()) => Ok(manifest),
        Err(e) => Err(e),
    }
}

fn run_pipeline_inner(cfg: &RunConfig, manifest: &mut RunManifest) -> Result<()> {
    let mut clock = StageClock::new();
    let mut warnings = Vec::new();

    let outcome = (|| -> Result<()> {
        let (seq, stats) = clock.run("ingest", || ingest_stage(cfg))?;
        manifest.dataset = stats;

        let (global, v_seq) = clock.run("features", || features_stage(cfg, &seq))?;
        manifest.feature_count = global.len();

        let roles = clock.run("roles", || roles_stage(cfg, &global, &v_seq, &mut warnings))?;
        manifest.selected_rank = roles.rank();
        manifest.per_timestep_ranks = roles.per_timestep_ranks();
        if let RoleOutcome::Global(model) = &roles {
            manifest.mdl_trace = model.mdl_trace.clone();
        }

        let g_seq = clock.run("track", || track_stage(cfg, &seq, &roles, &v_seq))?;

        let (explanation, dominant) = clock.run("interpret", || {
            interpret_stage(cfg, &seq, &g_seq, &mut warnings)
        })?;
        let labels = role_labels(roles.rank(), &dominant);
        manifest.role_labels = labels.clone();
        manifest.explanation_averaged = explanation
            .averaged
            .rows()
            .into_iter()
            .map(|r| r.to_vec())
            .collect();

        clock.run("report", || report_stage(cfg, &seq, &g_seq, &labels))?;
        Ok(())
    })();

    manifest.stage_seconds = clock.stage_seconds;
    manifest.completed_stages = clock.completed;
    manifest.warnings = warnings;
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_through_json() {
        let cfg = RunConfig {
            input: PathBuf::from("edges.tsv"),
            seed: 17,
            mode: RoleMode::PerTimestepRefit,
            delimiter: Some(','),
            ..Default::default()
        };
        let json = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn validation_catches_bad_ranges() {
        let mut cfg = RunConfig {
            window_width: 0.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        cfg.window_width = 1.0;
        cfg.r_min = 5;
        cfg.r_max = 2;
        assert!(cfg.validate().is_err());
        cfg.r_min = 1;
        cfg.r_max = 2;
        cfg.bins = 1;
        assert!(cfg.validate().is_err());
        cfg.bins = 0;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn drift_alignment_matches_similar_rows() {
        use crate::features::FeatureDefinition;
        let defs: Vec<FeatureDefinition> = vec![
            "in-degree".parse().unwrap(),
            "out-degree".parse().unwrap(),
            "total-degree".parse().unwrap(),
        ];
        let m1 = RoleModel {
            basis: ndarray::array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            feature_defs: defs.clone(),
            mdl_trace: vec![],
        };
        // Same two roles, swapped order, slightly perturbed.
        let m2 = RoleModel {
            basis: ndarray::array![[0.0, 0.95, 0.05], [0.98, 0.02, 0.0]],
            feature_defs: defs,
            mdl_trace: vec![],
        };
        let (aligned, width) = align_drift_models(vec![(1, m1), (2, m2)]);
        assert_eq!(width, 2);
        assert_eq!(aligned[0].global_roles, vec![0, 1]);
        assert_eq!(aligned[1].global_roles, vec![1, 0]);
    }

    #[test]
    fn rank_clamp_behaves() {
        assert_eq!(clamp_rank_range(1, 8, 100, 5), Some((1, 4)));
        assert_eq!(clamp_rank_range(1, 8, 3, 100), Some((1, 2)));
        assert_eq!(clamp_rank_range(1, 8, 1, 100), None);
        assert_eq!(clamp_rank_range(3, 8, 3, 3), None);
    }
}
