//! Implementation of the `polyrank` command-line tool.
//!
//! Three subcommands share one data model:
//!
//! * `rank`  — optimize, sweep direction weights, score features, write the
//!   ranking and all intermediate reports;
//! * `eval`  — backward elimination of a ranking with repeated splits;
//! * `trace` — a single optimization run for descent-curve inspection.
//!
//! Every command derives all randomness from one `--seed`, writes its outputs
//! atomically (temp file + rename), and drops a `manifest.json` recording the
//! resolved configuration and a content hash of the input dataset.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use polyrank_core::dataset::{self, CsvOptions, Dataset, LabelColumn};
use polyrank_core::error::Error as CoreError;
use polyrank_core::eval::{self, Classifier, EvalConfig};
use polyrank_core::objective;
use polyrank_core::optimizer::{self, SearchConfig, SearchMode, SimplexWeights};
use polyrank_core::scoring::{self, FeatureRanking, RankedFeature};
use polyrank_core::seeds::{derive_seed, STREAM_INIT};
use polyrank_core::sweep::{self, CurveScoring};

pub const EXIT_IO: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;
pub const EXIT_CONFIG: i32 = 5;

/// Maps an error to the documented process exit code.
pub fn exit_code(err: &CoreError) -> i32 {
    match err {
        CoreError::Io { .. } => EXIT_IO,
        CoreError::Data(_) | CoreError::Dimension(_) => EXIT_DATA,
        CoreError::Numerical(_) => EXIT_NUMERICAL,
        CoreError::Config(_) => EXIT_CONFIG,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "polyrank",
    version,
    about = "Feature selection by orthogonality-constrained regression and polygon-area scoring"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rank features: optimize over the simplex grid and score by polygon area.
    Rank(RankArgs),
    /// Evaluate a ranking by backward elimination over repeated splits.
    Eval(EvalArgs),
    /// Run a single optimization and export its descent curve.
    Trace(TraceArgs),
}

#[derive(Debug, Args, Clone)]
pub struct DataArgs {
    /// Input CSV file.
    #[arg(long)]
    pub data: PathBuf,
    /// Label column, by header name or zero-based index.
    #[arg(long = "label-col", default_value = "class")]
    pub label_col: String,
    /// Field delimiter.
    #[arg(long, default_value = ",")]
    pub delimiter: char,
    /// Treat the first row as data instead of a header.
    #[arg(long = "no-header", default_value_t = false)]
    pub no_header: bool,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Lattice spacing of the (alpha, beta, gamma) grid.
    #[arg(long = "grid-step", default_value_t = 0.05)]
    pub grid_step: f64,
    /// Base seed for the initial point.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Descent-curve scoring: normalize by the starting value or integrate raw.
    #[arg(long = "normalize-curve", value_enum, default_value_t = NormalizeCurve::On)]
    pub normalize_curve: NormalizeCurve,
    /// Cap on iterations per optimization run.
    #[arg(long = "max-iters")]
    pub max_iters: Option<usize>,
    /// Gradient-norm stopping tolerance (default 1e-4 * sqrt(d*k)).
    #[arg(long = "eps-grad")]
    pub eps_grad: Option<f64>,
    /// Worker threads for the sweep (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Ranking CSV produced by `rank`.
    #[arg(long)]
    pub ranking: PathBuf,
    /// Repeated split trials per subset size.
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, value_enum, default_value_t = ClassifierArg::Linear)]
    pub classifier: ClassifierArg,
    /// Neighbor count for the knn classifier.
    #[arg(long = "knn-k", default_value_t = 5)]
    pub knn_k: usize,
    /// Comma-separated subset sizes, e.g. "10,5,1" (default: full schedule).
    #[arg(long)]
    pub sizes: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub beta: f64,
    #[arg(long)]
    pub gamma: f64,
    /// Search variant: blended direction + averaged step, or the F1 baseline.
    #[arg(long, value_enum, default_value_t = ModeArg::Hybrid)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "normalize-curve", value_enum, default_value_t = NormalizeCurve::On)]
    pub normalize_curve: NormalizeCurve,
    #[arg(long = "max-iters")]
    pub max_iters: Option<usize>,
    #[arg(long = "eps-grad")]
    pub eps_grad: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormalizeCurve {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClassifierArg {
    Linear,
    Knn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Hybrid,
    Plain,
}

/// Resolved run description written next to every output.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub seed: u64,
    pub dataset_path: String,
    pub dataset_sha256: String,
    pub config: serde_json::Value,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<String>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CoreError {
    CoreError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Writes `bytes` to `dir/name` atomically (temp file in the same directory,
/// then rename).
fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CoreError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(dir, e))?;
    tmp.write_all(bytes).map_err(|e| io_err(dir, e))?;
    let target = dir.join(name);
    tmp.persist(&target).map_err(|e| io_err(&target, e.error))?;
    Ok(target)
}

fn sha256_file(path: &Path) -> Result<String, CoreError> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn parse_label_column(spec: &str) -> LabelColumn {
    match spec.parse::<usize>() {
        Ok(i) => LabelColumn::Index(i),
        Err(_) => LabelColumn::Name(spec.to_owned()),
    }
}

fn load(data: &DataArgs) -> Result<Dataset, CoreError> {
    let options = CsvOptions {
        delimiter: data.delimiter as u8,
        has_header: !data.no_header,
    };
    dataset::load_csv(&data.data, &parse_label_column(&data.label_col), &options)
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool, CoreError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CoreError::Config(format!("cannot build thread pool: {e}")))
}

fn search_config(
    d: usize,
    k: usize,
    seed: u64,
    max_iters: Option<usize>,
    eps_grad: Option<f64>,
    mode: SearchMode,
) -> SearchConfig {
    let mut cfg = SearchConfig::for_shape(d, k);
    cfg.seed = derive_seed(seed, STREAM_INIT);
    cfg.mode = mode;
    if let Some(m) = max_iters {
        cfg.max_iters = m;
    }
    if let Some(e) = eps_grad {
        cfg.eps_grad = e;
    }
    cfg
}

fn scoring_of(norm: NormalizeCurve) -> CurveScoring {
    match norm {
        NormalizeCurve::On => CurveScoring::Normalized,
        NormalizeCurve::Off => CurveScoring::Raw,
    }
}

#[derive(Serialize)]
struct RankingJsonEntry<'a> {
    feature_index: usize,
    feature_name: &'a str,
    polygon_area: f64,
    rank: usize,
}

fn ranking_json(ranking: &FeatureRanking, names: Option<&[String]>) -> serde_json::Value {
    let fallback: Vec<String> = (0..ranking.len()).map(|i| format!("f{i}")).collect();
    let entries: Vec<RankingJsonEntry> = ranking
        .entries()
        .iter()
        .enumerate()
        .map(|(rank, e)| RankingJsonEntry {
            feature_index: e.feature_index,
            feature_name: names
                .and_then(|n| n.get(e.feature_index))
                .unwrap_or(&fallback[e.feature_index]),
            polygon_area: e.area,
            rank: rank + 1,
        })
        .collect();
    serde_json::json!({ "entries": entries })
}

/// Runs the full ranking pipeline and writes ranking, sweep report, best
/// descent trace, polygon vertices, dataset sidecar, and manifest.
pub fn run_rank(args: &RankArgs) -> Result<(), CoreError> {
    let started_at = now();
    let ds = load(&args.data)?;
    let ds = dataset::standardize(&ds);
    let problem = objective::build_problem(ds.features(), &dataset::one_hot(&ds))?;
    let grid = sweep::build_grid(args.grid_step)?;
    let cfg = search_config(
        ds.n_features(),
        ds.n_classes(),
        args.seed,
        args.max_iters,
        args.eps_grad,
        SearchMode::Hybrid,
    );
    let scoring_mode = scoring_of(args.normalize_curve);

    let pool = thread_pool(args.threads)?;
    let result = pool.install(|| sweep::sweep(&problem, &grid, &cfg, scoring_mode))?;

    let quadrant = scoring::quadrant_process(&result.best_w);
    let ranking = scoring::rank_features(&quadrant);

    let mut ranking_csv = Vec::new();
    ranking
        .write_csv(ds.feature_names(), &mut ranking_csv)
        .map_err(|e| io_err(&args.out, e))?;
    let mut sweep_csv = Vec::new();
    result
        .write_csv(&mut sweep_csv)
        .map_err(|e| io_err(&args.out, e))?;
    let mut trace_csv = Vec::new();
    result
        .best_trace
        .write_csv(&mut trace_csv)
        .map_err(|e| io_err(&args.out, e))?;

    let polygons: Vec<scoring::FeaturePolygon> = (0..ds.n_features())
        .map(|j| scoring::build_polygon(&quadrant, j).expect("index in range"))
        .collect();

    let mut outputs = Vec::new();
    write_atomic(&args.out, "ranking.csv", &ranking_csv)?;
    outputs.push("ranking.csv".to_owned());
    write_atomic(
        &args.out,
        "ranking.json",
        serde_json::to_string_pretty(&ranking_json(&ranking, ds.feature_names()))
            .expect("serializable")
            .as_bytes(),
    )?;
    outputs.push("ranking.json".to_owned());
    write_atomic(&args.out, "sweep.csv", &sweep_csv)?;
    outputs.push("sweep.csv".to_owned());
    write_atomic(&args.out, "trace.csv", &trace_csv)?;
    outputs.push("trace.csv".to_owned());
    write_atomic(
        &args.out,
        "polygons.json",
        serde_json::to_string_pretty(&polygons)
            .expect("serializable")
            .as_bytes(),
    )?;
    outputs.push("polygons.json".to_owned());
    write_atomic(
        &args.out,
        "dataset_meta.json",
        serde_json::to_string_pretty(ds.meta())
            .expect("serializable")
            .as_bytes(),
    )?;
    outputs.push("dataset_meta.json".to_owned());

    let best = result.best_point();
    let manifest = RunManifest {
        command: "rank".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        seed: args.seed,
        dataset_path: args.data.data.display().to_string(),
        dataset_sha256: sha256_file(&args.data.data)?,
        config: serde_json::json!({
            "label_col": args.data.label_col,
            "delimiter": args.data.delimiter.to_string(),
            "has_header": !args.data.no_header,
            "standardized": true,
            "grid_step": args.grid_step,
            "grid_points": grid.len(),
            "normalize_curve": matches!(args.normalize_curve, NormalizeCurve::On),
            "eps_grad": cfg.eps_grad,
            "max_iters": cfg.max_iters,
            "threads": args.threads,
            "best_weights": {
                "alpha": best.weights.alpha(),
                "beta": best.weights.beta(),
                "gamma": best.weights.gamma(),
            },
            "best_area": best.area,
            "best_iterations": best.iterations,
            "best_converged": best.converged,
        }),
        started_at,
        finished_at: now(),
        outputs,
    };
    write_atomic(
        &args.out,
        "manifest.json",
        serde_json::to_string_pretty(&manifest)
            .expect("serializable")
            .as_bytes(),
    )?;
    Ok(())
}

/// Reads a ranking CSV (as written by `rank`) back into a [`FeatureRanking`].
pub fn read_ranking_csv(path: &Path) -> Result<FeatureRanking, CoreError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| io_err(path, e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| io_err(path, e.to_string()))?
        .clone();
    let col = |name: &str| -> Result<usize, CoreError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CoreError::Data(format!("ranking file lacks a {name:?} column")))
    };
    let idx_col = col("feature_index")?;
    let area_col = col("polygon_area")?;
    let rank_col = col("rank")?;
    let mut rows: Vec<(usize, RankedFeature)> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| io_err(path, e.to_string()))?;
        let get = |c: usize| -> Result<&str, CoreError> {
            record
                .get(c)
                .ok_or_else(|| CoreError::Data(format!("ranking row {} is short", line + 2)))
        };
        let feature_index: usize = get(idx_col)?
            .parse()
            .map_err(|_| CoreError::Data(format!("bad feature_index in row {}", line + 2)))?;
        let area: f64 = get(area_col)?
            .parse()
            .map_err(|_| CoreError::Data(format!("bad polygon_area in row {}", line + 2)))?;
        let rank: usize = get(rank_col)?
            .parse()
            .map_err(|_| CoreError::Data(format!("bad rank in row {}", line + 2)))?;
        rows.push((rank, RankedFeature { feature_index, area }));
    }
    rows.sort_by_key(|(rank, _)| *rank);
    FeatureRanking::from_entries(rows.into_iter().map(|(_, e)| e).collect())
}

fn parse_sizes(spec: &str) -> Result<Vec<usize>, CoreError> {
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| CoreError::Config(format!("bad subset size {s:?}")))
        })
        .collect()
}

/// Runs backward elimination for a stored ranking and writes the accuracy
/// curve, a summary, and the manifest.
pub fn run_eval(args: &EvalArgs) -> Result<(), CoreError> {
    let started_at = now();
    let ds = load(&args.data)?;
    let ds = dataset::standardize(&ds);
    let ranking = read_ranking_csv(&args.ranking)?;
    if ranking.len() != ds.n_features() {
        return Err(CoreError::Data(format!(
            "ranking covers {} features but the dataset has {}",
            ranking.len(),
            ds.n_features()
        )));
    }
    let mut cfg = EvalConfig::for_dimension(ds.n_features());
    cfg.n_trials = args.trials;
    cfg.classifier = match args.classifier {
        ClassifierArg::Linear => Classifier::Linear,
        ClassifierArg::Knn => Classifier::Knn,
    };
    cfg.knn_k = args.knn_k;
    cfg.base_seed = args.seed;
    if let Some(sizes) = &args.sizes {
        cfg.elimination_schedule = parse_sizes(sizes)?;
    }

    let pool = thread_pool(args.threads)?;
    let curve = pool.install(|| eval::backward_eliminate(&ds, &ranking, &cfg))?;

    let mut curve_csv = Vec::new();
    curve
        .write_csv(&mut curve_csv)
        .map_err(|e| io_err(&args.out, e))?;

    let mut outputs = Vec::new();
    write_atomic(&args.out, "curve.csv", &curve_csv)?;
    outputs.push("curve.csv".to_owned());
    let summary = serde_json::json!({
        "best_size": curve.best_size,
        "best_accuracy": curve.best_accuracy,
        "full_size_accuracy": curve
            .points
            .iter()
            .find(|p| p.subset_size == cfg.elimination_schedule[0])
            .map(|p| p.mean_accuracy),
    });
    write_atomic(
        &args.out,
        "eval_summary.json",
        serde_json::to_string_pretty(&summary)
            .expect("serializable")
            .as_bytes(),
    )?;
    outputs.push("eval_summary.json".to_owned());

    let manifest = RunManifest {
        command: "eval".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        seed: args.seed,
        dataset_path: args.data.data.display().to_string(),
        dataset_sha256: sha256_file(&args.data.data)?,
        config: serde_json::json!({
            "label_col": args.data.label_col,
            "standardized": true,
            "stratified_split": true,
            "ranking": args.ranking.display().to_string(),
            "trials": cfg.n_trials,
            "classifier": format!("{:?}", cfg.classifier),
            "knn_k": cfg.knn_k,
            "ridge": cfg.ridge,
            "schedule": cfg.elimination_schedule,
            "threads": args.threads,
        }),
        started_at,
        finished_at: now(),
        outputs,
    };
    write_atomic(
        &args.out,
        "manifest.json",
        serde_json::to_string_pretty(&manifest)
            .expect("serializable")
            .as_bytes(),
    )?;
    Ok(())
}

/// Runs one optimization and writes the descent trace plus its curve area.
pub fn run_trace(args: &TraceArgs) -> Result<(), CoreError> {
    let started_at = now();
    let weights = SimplexWeights::new(args.alpha, args.beta, args.gamma)?;
    let ds = load(&args.data)?;
    let ds = dataset::standardize(&ds);
    let problem = objective::build_problem(ds.features(), &dataset::one_hot(&ds))?;
    let mode = match args.mode {
        ModeArg::Hybrid => SearchMode::Hybrid,
        ModeArg::Plain => SearchMode::Plain,
    };
    let cfg = search_config(
        ds.n_features(),
        ds.n_classes(),
        args.seed,
        args.max_iters,
        args.eps_grad,
        mode,
    );
    let (_, trace) = optimizer::minimize(&problem, &weights, &cfg)?;
    let area = match scoring_of(args.normalize_curve) {
        CurveScoring::Normalized => sweep::curve_area(&trace)?,
        CurveScoring::Raw => sweep::curve_area_raw(&trace),
    };

    let mut trace_csv = Vec::new();
    trace
        .write_csv(&mut trace_csv)
        .map_err(|e| io_err(&args.out, e))?;
    let mut outputs = Vec::new();
    write_atomic(&args.out, "trace.csv", &trace_csv)?;
    outputs.push("trace.csv".to_owned());

    let summary = serde_json::json!({
        "mode": match mode {
            SearchMode::Hybrid => "hybrid",
            SearchMode::Plain => "plain (F1 direction only, no step averaging)",
        },
        "alpha": args.alpha,
        "beta": args.beta,
        "gamma": args.gamma,
        "curve_area": area,
        "normalized": matches!(args.normalize_curve, NormalizeCurve::On),
        "iterations": trace.iterations,
        "converged": trace.converged,
        "final_f": trace.f_values.last(),
        "final_grad_norm": trace.grad_norms.last(),
    });
    write_atomic(
        &args.out,
        "trace_summary.json",
        serde_json::to_string_pretty(&summary)
            .expect("serializable")
            .as_bytes(),
    )?;
    outputs.push("trace_summary.json".to_owned());

    let manifest = RunManifest {
        command: "trace".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        seed: args.seed,
        dataset_path: args.data.data.display().to_string(),
        dataset_sha256: sha256_file(&args.data.data)?,
        config: serde_json::json!({
            "label_col": args.data.label_col,
            "standardized": true,
            "alpha": args.alpha,
            "beta": args.beta,
            "gamma": args.gamma,
            "mode": format!("{:?}", mode),
            "eps_grad": cfg.eps_grad,
            "max_iters": cfg.max_iters,
            "normalize_curve": matches!(args.normalize_curve, NormalizeCurve::On),
        }),
        started_at,
        finished_at: now(),
        outputs,
    };
    write_atomic(
        &args.out,
        "manifest.json",
        serde_json::to_string_pretty(&manifest)
            .expect("serializable")
            .as_bytes(),
    )?;
    Ok(())
}

/// Dispatches a parsed command line.
pub fn run(cli: &Cli) -> Result<(), CoreError> {
    match &cli.command {
        Command::Rank(args) => run_rank(args),
        Command::Eval(args) => run_eval(args),
        Command::Trace(args) => run_trace(args),
    }
}
