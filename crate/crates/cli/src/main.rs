//! `roletrace`: mine the structural role dynamics of a temporal network.
//!
//! Subcommands map onto pipeline stages (`ingest`, `features`, `roles`,
//! `track`, `interpret`, `report`) with `all` running the whole pipeline
//! and writing the run manifest. Intermediate artifacts live in the
//! output directory so stages can be rerun independently.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical
//! failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use roletrace_core::dynamics::DistanceMetric;
use roletrace_core::graph::Aggregation;
use roletrace_core::pipeline::{self, RoleMode, RunConfig};
use roletrace_core::roles::ErrorModel;
use roletrace_core::Error;

#[derive(Parser)]
#[command(
    name = "roletrace",
    version,
    about = "Structural role dynamics of temporal networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags mirror the run configuration one to one. `ROLETRACE_SEED` and
/// `ROLETRACE_WORKERS` override the corresponding flags.
#[derive(Args, Clone)]
struct ConfigArgs {
    /// Delimited edge-list input (whitespace or --delimiter separated).
    #[arg(long, global = true, default_value = "edges.tsv")]
    input: PathBuf,

    /// Column roles, e.g. "src,dst,time" or "src,dst,begin,end,weight".
    #[arg(long, global = true, default_value = "src,dst,time")]
    schema: String,

    /// Field delimiter; unset means any whitespace.
    #[arg(long, global = true)]
    delimiter: Option<char>,

    /// Fail on the first malformed line instead of counting it.
    #[arg(long, global = true)]
    strict: bool,

    /// Keep self-loops instead of dropping them.
    #[arg(long, global = true)]
    keep_self_loops: bool,

    /// Snapshot window width in seconds.
    #[arg(long, global = true, default_value_t = 1.0)]
    window_width: f64,

    /// Parallel-edge aggregation: sum, max or count.
    #[arg(long, global = true, default_value = "sum")]
    aggregation: String,

    /// Pruning bin count; 0 derives it from the node count.
    #[arg(long, global = true, default_value_t = 0)]
    bins: usize,

    /// Fraction of remaining nodes per log bin.
    #[arg(long, global = true, default_value_t = 0.5)]
    bin_fraction: f64,

    /// Cap on recursive aggregation depth.
    #[arg(long, global = true, default_value_t = 6)]
    max_generation: usize,

    /// NMF iteration cap.
    #[arg(long, global = true, default_value_t = 200)]
    nmf_max_iters: usize,

    /// NMF relative-decrease stopping tolerance.
    #[arg(long, global = true, default_value_t = 1e-4)]
    nmf_tol: f64,

    /// NMF restarts per candidate rank.
    #[arg(long, global = true, default_value_t = 3)]
    restarts: usize,

    /// RNG seed for reproducible runs.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Smallest rank in the MDL scan.
    #[arg(long, global = true, default_value_t = 1)]
    r_min: usize,

    /// Largest rank in the MDL scan.
    #[arg(long, global = true, default_value_t = 8)]
    r_max: usize,

    /// Bits per quantized factor value in the MDL score.
    #[arg(long, global = true, default_value_t = 4)]
    mdl_bits: u32,

    /// MDL error model: squared or kl.
    #[arg(long, global = true, default_value = "squared")]
    error_model: String,

    /// Role basis mode: global-basis or per-timestep-refit.
    #[arg(long, global = true, default_value = "global-basis")]
    mode: String,

    /// Behavior-change metric: euclidean, cosine or hellinger.
    #[arg(long, global = true, default_value = "hellinger")]
    change_metric: String,

    /// Regress against raw instead of max-normalized measures.
    #[arg(long, global = true)]
    raw_measures: bool,

    /// Node cap above which exact betweenness is skipped.
    #[arg(long, global = true, default_value_t = 50_000)]
    betweenness_node_cap: usize,

    /// Maximum bands in the node-dynamics plot.
    #[arg(long, global = true, default_value_t = 40)]
    plot_nodes: usize,

    /// Worker threads for per-timestep stages; 0 = default pool.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    /// Output directory for all artifacts.
    #[arg(long, global = true, default_value = "roletrace-out")]
    out_dir: PathBuf,
}

impl ConfigArgs {
    fn into_config(self) -> Result<RunConfig, Error> {
        let mut cfg = RunConfig {
            input: self.input,
            schema: self.schema,
            delimiter: self.delimiter,
            strict: self.strict,
            keep_self_loops: self.keep_self_loops,
            window_width: self.window_width,
            aggregation: self.aggregation.parse::<Aggregation>()?,
            bins: self.bins,
            bin_fraction: self.bin_fraction,
            max_generation: self.max_generation,
            nmf_max_iters: self.nmf_max_iters,
            nmf_tol: self.nmf_tol,
            restarts: self.restarts,
            seed: self.seed,
            r_min: self.r_min,
            r_max: self.r_max,
            mdl_bits: self.mdl_bits,
            error_model: self.error_model.parse::<ErrorModel>()?,
            mode: self.mode.parse::<RoleMode>()?,
            change_metric: self.change_metric.parse::<DistanceMetric>()?,
            normalize_measures: !self.raw_measures,
            betweenness_node_cap: self.betweenness_node_cap,
            plot_nodes: self.plot_nodes,
            workers: self.workers,
            out_dir: self.out_dir,
        };
        if let Ok(seed) = std::env::var("ROLETRACE_SEED") {
            cfg.seed = seed
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad ROLETRACE_SEED '{seed}'")))?;
        }
        if let Ok(workers) = std::env::var("ROLETRACE_WORKERS") {
            cfg.workers = workers.parse().map_err(|_| {
                Error::InvalidArgument(format!("bad ROLETRACE_WORKERS '{workers}'"))
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse the edge list and write the snapshot archive.
    Ingest(ConfigArgs),
    /// Learn per-snapshot features, union them and extract the union.
    Features(ConfigArgs),
    /// Discover roles (MDL rank selection) from the extracted features.
    Roles(ConfigArgs),
    /// Estimate per-timestep role memberships against the fitted basis.
    Track(ConfigArgs),
    /// Interpret roles against classical node measures.
    Interpret(ConfigArgs),
    /// Write importance series, change scores and SVG reports.
    Report(ConfigArgs),
    /// Run the whole pipeline and write the run manifest.
    All(ConfigArgs),
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::InvalidArgument(_) | Error::Definition(_) => 1,
        Error::Numerical(_) => 3,
        _ => 2,
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Ingest(args) => {
            let cfg = args.into_config()?;
            let (seq, stats) = pipeline::ingest_stage(&cfg)?;
            println!(
                "ingested {} edges over {} nodes into {} snapshots ({} malformed lines)",
                stats.edges,
                stats.nodes,
                seq.t_max(),
                stats.malformed_lines
            );
        }
        Command::Features(args) => {
            let cfg = args.into_config()?;
            let seq = pipeline::load_archive(&cfg)?;
            let (global, v_seq) =
                pipeline::with_pool(cfg.workers, || pipeline::features_stage(&cfg, &seq))?;
            println!(
                "learned {} unique features across {} snapshots",
                global.len(),
                v_seq.len()
            );
        }
        Command::Roles(args) => {
            let cfg = args.into_config()?;
            let seq = pipeline::load_archive(&cfg)?;
            let mut warnings = Vec::new();
            let outcome = pipeline::with_pool(cfg.workers, || {
                let (global, v_seq) = pipeline::load_features(&cfg, &seq)?;
                pipeline::roles_stage(&cfg, &global, &v_seq, &mut warnings)
            })?;
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            match &outcome {
                pipeline::RoleOutcome::Global(model) => {
                    println!("selected {} roles by MDL", model.rank());
                    for c in &model.mdl_trace {
                        println!(
                            "  r={} model_bits={:.1} error_bits={:.1} total={:.1}",
                            c.rank, c.model_bits, c.error_bits, c.total_bits
                        );
                    }
                }
                pipeline::RoleOutcome::Drift { models, width } => {
                    println!(
                        "fit {} per-timestep models over {} aligned global roles",
                        models.len(),
                        width
                    );
                }
            }
        }
        Command::Track(args) => {
            let cfg = args.into_config()?;
            let seq = pipeline::load_archive(&cfg)?;
            let g_seq = pipeline::with_pool(cfg.workers, || {
                let (_, v_seq) = pipeline::load_features(&cfg, &seq)?;
                let outcome = pipeline::load_role_outcome(&cfg)?;
                pipeline::track_stage(&cfg, &seq, &outcome, &v_seq)
            })?;
            let rows: usize = g_seq.iter().map(|g| g.node_count()).sum();
            println!(
                "tracked {} membership rows over {} timesteps",
                rows,
                g_seq.len()
            );
        }
        Command::Interpret(args) => {
            let cfg = args.into_config()?;
            let seq = pipeline::load_archive(&cfg)?;
            let mut warnings = Vec::new();
            let (explanation, dominant) = pipeline::with_pool(cfg.workers, || {
                let g_seq = pipeline::load_memberships(&cfg, &seq)?;
                pipeline::interpret_stage(&cfg, &seq, &g_seq, &mut warnings)
            })?;
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "interpreted {} roles over {} timesteps",
                explanation.averaged.nrows(),
                explanation.used_timesteps.len()
            );
            for (k, d) in dominant.iter().enumerate() {
                println!("  role {} -> {}", k + 1, d.measure);
            }
        }
        Command::Report(args) => {
            let cfg = args.into_config()?;
            let seq = pipeline::load_archive(&cfg)?;
            let series = pipeline::with_pool(cfg.workers, || {
                let g_seq = pipeline::load_memberships(&cfg, &seq)?;
                let labels = pipeline::load_role_labels(
                    &cfg,
                    g_seq.iter().map(|g| g.rank()).max().unwrap_or(0),
                );
                pipeline::report_stage(&cfg, &seq, &g_seq, &labels)
            })?;
            println!(
                "reported {} timesteps x {} roles",
                series.t_max(),
                series.rank()
            );
        }
        Command::All(args) => {
            let cfg = args.into_config()?;
            let manifest = pipeline::run_pipeline(&cfg)?;
            println!(
                "pipeline complete: {} nodes, {} edges, t_max={}, f={}, r={}",
                manifest.dataset.nodes,
                manifest.dataset.edges,
                manifest.dataset.t_max,
                manifest.feature_count,
                manifest.selected_rank
            );
            for (stage, secs) in &manifest.stage_seconds {
                println!("  {stage}: {secs:.2}s");
            }
            for w in &manifest.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "manifest: {}",
                cfg.out_dir.join(pipeline::MANIFEST_FILE).display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors.
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
