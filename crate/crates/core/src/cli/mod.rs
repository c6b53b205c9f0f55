//! The `debtcast` command line. Exit codes: 0 success, 1 data or runtime
//! error, 2 usage error.

mod manifest;

use std::collections::BTreeMap;
use std::error::Error;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::Duration;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::dropcol::{drop_column_importance, exhaustive_search, subsets_to_csv, DEFAULT_MAX_P};
use crate::eval::{evaluate_all, make_folds, FoldPlan, Grouping, DEFAULT_FOLDS};
use crate::features::{build_matrix, column_medians, fill_missing, DesignMatrix, DistributionPolicy, TargetKind};
use crate::ingest::{
    default_metric_keys, fetch_snapshots, parse_snapshot_csv, parse_timestamp, render_snapshot_csv,
    sample_interval, FetchConfig,
};
use crate::lifecycle::{
    build_timelines, debt_series, parse_events_csv, plot_series_svg, rank_items, render_events_csv,
    render_ranking_csv, render_series_csv, simulate_events, RankWeights, SimulationParams,
};
use crate::regress::{fit, FittedModel, Hyperparameters, ParamValue, RegressorConfig, RegressorKind};
use crate::synth::{synth_snapshots, SynthParams};
pub use manifest::{manifest_path, RunManifest};

type Result<T> = std::result::Result<T, Box<dyn Error + Send + Sync>>;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(name = "debtcast", version, about = "Benchmark regressors that predict technical-debt remediation effort")]
pub struct Cli {
    /// Worker threads for parallel fitting (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cross-validate regressors and write the MAE/R2 report.
    Evaluate(EvaluateArgs),
    /// Drop-column feature importance, optionally with the exhaustive subset search.
    Importance(ImportanceArgs),
    /// Train one regressor on all rows and save the model as JSON.
    Train(TrainArgs),
    /// Predict a snapshot CSV with a saved model.
    Predict(PredictArgs),
    /// Generate a seeded TD-item event log.
    Simulate(SimulateArgs),
    /// Rank TD items by impact per remediation minute.
    Rank(RankArgs),
    /// Sample the open-debt series of an event log.
    Series(SeriesArgs),
    /// Download a project's measure history and down-sample it.
    Fetch(FetchArgs),
    /// Write a seeded synthetic snapshot CSV.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Target {
    Maintainability,
    Reliability,
}

impl From<Target> for TargetKind {
    fn from(t: Target) -> Self {
        match t {
            Target::Maintainability => TargetKind::Maintainability,
            Target::Reliability => TargetKind::Reliability,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GroupingArg {
    Row,
    Project,
}

impl From<GroupingArg> for Grouping {
    fn from(g: GroupingArg) -> Self {
        match g {
            GroupingArg::Row => Grouping::RowShuffle,
            GroupingArg::Project => Grouping::ByProject,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PolicyArg {
    WeightedSum,
    Total,
    Drop,
}

impl From<PolicyArg> for DistributionPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::WeightedSum => DistributionPolicy::WeightedSum,
            PolicyArg::Total => DistributionPolicy::Total,
            PolicyArg::Drop => DistributionPolicy::Drop,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReportFormat {
    Md,
    Csv,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Snapshot CSV.
    #[arg(long)]
    data: PathBuf,
    /// Regression target. Security effort is not modelled.
    #[arg(long, value_enum)]
    target: Target,
    /// How distribution metrics become features.
    #[arg(long, value_enum, default_value = "weighted-sum")]
    policy: PolicyArg,
    /// Base seed; every fold, tree and resample seed derives from it.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// TOML file with `[regressors.<kind>]` hyperparameter tables.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated feature columns to keep, in matrix order (default: all).
    #[arg(long, value_delimiter = ',')]
    features: Vec<String>,
}

#[derive(Debug, Args)]
struct CvArgs {
    /// Number of cross-validation folds.
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    folds: usize,
    /// Fold assignment: shuffled rows, or whole projects per fold.
    #[arg(long, value_enum, default_value = "row")]
    grouping: GroupingArg,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    cv: CvArgs,
    /// Comma-separated regressor kinds (default: all eight).
    #[arg(long, value_delimiter = ',')]
    regressors: Vec<String>,
    /// Report path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format.
    #[arg(long, value_enum, default_value = "md")]
    format: ReportFormat,
}

#[derive(Debug, Args)]
struct ImportanceArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    cv: CvArgs,
    /// Regressor kind to explain.
    #[arg(long)]
    regressor: String,
    /// Also evaluate every feature subset (2^P - 1 cross-validations).
    #[arg(long)]
    exhaustive: bool,
    /// Largest feature count the exhaustive search accepts.
    #[arg(long, default_value_t = DEFAULT_MAX_P)]
    max_p: usize,
    /// Subset CSV path (default: `<out>.subsets.csv`).
    #[arg(long)]
    subsets_out: Option<PathBuf>,
    /// Importance CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Regressor kind.
    #[arg(long)]
    regressor: String,
    /// Model JSON path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Model JSON written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Snapshot CSV to predict; target columns may be empty.
    #[arg(long)]
    data: PathBuf,
    /// Distribution policy the model was trained with.
    #[arg(long, value_enum, default_value = "weighted-sum")]
    policy: PolicyArg,
    /// Predictions CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Number of TD items.
    #[arg(long)]
    items: usize,
    /// Simulated days.
    #[arg(long)]
    horizon_days: u32,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Daily chance an item first appears.
    #[arg(long)]
    intro_rate: Option<f64>,
    /// Daily chance an open item is removed.
    #[arg(long)]
    removal_prob: Option<f64>,
    /// Daily chance a removed item returns.
    #[arg(long)]
    reintro_prob: Option<f64>,
    /// Remediation cost range in minutes, `lo..hi` inclusive.
    #[arg(long)]
    cost_range: Option<String>,
    /// Events CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RankArgs {
    /// Events CSV.
    #[arg(long)]
    events: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    bug_weight: f64,
    #[arg(long, default_value_t = 1.0)]
    change_weight: f64,
    /// Prefer the costlier of equal-impact items.
    #[arg(long)]
    invert_cost: bool,
    /// Ranking CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SeriesArgs {
    /// Events CSV.
    #[arg(long)]
    events: PathBuf,
    /// First sample instant (RFC 3339 or YYYY-MM-DD).
    #[arg(long)]
    start: String,
    /// Last sample instant, inclusive.
    #[arg(long)]
    end: String,
    #[arg(long, default_value_t = 1)]
    step_days: u32,
    /// Series CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Also write an SVG line chart of open debt.
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FetchArgs {
    /// Analysis server base URL.
    #[arg(long)]
    server: String,
    /// Project key on the server.
    #[arg(long)]
    project: String,
    /// Minimum days between kept snapshots.
    #[arg(long, default_value_t = 180)]
    interval_days: u32,
    /// Environment variable holding the API token.
    #[arg(long)]
    token_env: Option<String>,
    #[arg(long, default_value_t = 500)]
    page_size: u32,
    /// Snapshot CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 8)]
    projects: usize,
    /// Snapshots per project.
    #[arg(long, default_value_t = 25)]
    snapshots: usize,
    #[arg(long, default_value_t = 180)]
    interval_days: u32,
    /// Chance that a metric cell is left empty.
    #[arg(long, default_value_t = 0.01)]
    missing_rate: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Snapshot CSV path.
    #[arg(long)]
    out: PathBuf,
}

/// Parses `std::env::args`, runs, and returns the process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Evaluate(a) => evaluate(a),
        Command::Importance(a) => importance(a),
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Simulate(a) => simulate(a),
        Command::Rank(a) => rank(a),
        Command::Series(a) => series(a),
        Command::Fetch(a) => fetch(a),
        Command::Synth(a) => synth(a),
    }
}

fn read(path: &Path, manifest: &mut RunManifest) -> Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    manifest.record_input(path, &bytes);
    Ok(bytes)
}

fn write(path: &Path, bytes: &[u8], manifest: &mut RunManifest) -> Result<()> {
    fs::write(path, bytes).map_err(|e| format!("{}: {e}", path.display()))?;
    manifest.record_output(path);
    Ok(())
}

fn finish(manifest: &RunManifest, out: Option<&Path>) -> Result<()> {
    match out {
        Some(out) => {
            let path = manifest_path(out);
            fs::write(&path, manifest.to_json()).map_err(|e| format!("{}: {e}", path.display()))?;
        }
        None => std::io::stderr().write_all(manifest.to_json().as_bytes())?,
    }
    Ok(())
}

fn toml_to_param(name: &str, v: toml::Value) -> Result<ParamValue> {
    Ok(match v {
        toml::Value::Boolean(b) => ParamValue::Bool(b),
        toml::Value::Integer(i) => ParamValue::Int(i),
        toml::Value::Float(f) => ParamValue::Float(f),
        toml::Value::String(s) => ParamValue::Text(s),
        other => return Err(format!("hyperparameter `{name}`: unsupported value {other}").into()),
    })
}

/// `[regressors.<kind>]` tables from the optional TOML config.
fn overrides(path: Option<&Path>, manifest: &mut RunManifest) -> Result<BTreeMap<RegressorKind, Hyperparameters>> {
    let mut out = BTreeMap::new();
    let Some(path) = path else {
        return Ok(out);
    };
    let text = String::from_utf8(read(path, manifest)?)?;
    let mut doc: toml::Table = toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    if let Some(key) = doc.keys().find(|k| *k != "regressors") {
        return Err(format!("{}: unknown section `{key}`", path.display()).into());
    }
    let Some(toml::Value::Table(regs)) = doc.remove("regressors") else {
        return Ok(out);
    };
    for (kind, table) in regs {
        let kind: RegressorKind = kind.parse()?;
        let toml::Value::Table(table) = table else {
            return Err(format!("regressors.{kind} must be a table").into());
        };
        let params = table
            .into_iter()
            .map(|(k, v)| Ok((k.clone(), toml_to_param(&k, v)?)))
            .collect::<Result<Hyperparameters>>()?;
        out.insert(kind, params);
    }
    Ok(out)
}

fn configure(kind: RegressorKind, seed: u64, overrides: &BTreeMap<RegressorKind, Hyperparameters>) -> RegressorConfig {
    let mut cfg = RegressorConfig::new(kind, seed);
    if let Some(extra) = overrides.get(&kind) {
        cfg.hyperparameters.extend(extra.clone());
    }
    cfg
}

fn load_matrix(args: &DataArgs, manifest: &mut RunManifest) -> Result<DesignMatrix> {
    let snaps = parse_snapshot_csv(&read(&args.data, manifest)?)?;
    let matrix = build_matrix(&snaps, args.target.into(), args.policy.into())?;
    if args.features.is_empty() {
        return Ok(matrix);
    }
    let columns = column_indices(&matrix, &args.features)?;
    let mut sorted = columns.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != columns.len() {
        return Err("--features lists a column twice".into());
    }
    Ok(matrix.select_columns(&sorted))
}

fn column_indices(matrix: &DesignMatrix, wanted: &[String]) -> Result<Vec<usize>> {
    wanted
        .iter()
        .map(|name| {
            matrix
                .feature_names()
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| format!("unknown feature `{name}`").into())
        })
        .collect()
}

fn plan_for(matrix: &DesignMatrix, cv: &CvArgs, seed: u64) -> Result<FoldPlan> {
    Ok(make_folds(
        matrix.n_rows(),
        cv.folds,
        seed,
        cv.grouping.into(),
        Some(matrix.groups()),
    )?)
}

fn data_json(d: &DataArgs) -> serde_json::Value {
    json!({
        "target": TargetKind::from(d.target),
        "policy": DistributionPolicy::from(d.policy),
        "seed": d.seed,
        "features": d.features,
    })
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let mut manifest = RunManifest::new("evaluate", json!(null));
    let over = overrides(a.data.config.as_deref(), &mut manifest)?;
    let kinds: Vec<RegressorKind> = if a.regressors.is_empty() {
        RegressorKind::ALL.to_vec()
    } else {
        a.regressors.iter().map(|r| r.parse()).collect::<std::result::Result<_, _>>()?
    };
    let configs: Vec<RegressorConfig> = kinds.iter().map(|&k| configure(k, a.data.seed, &over)).collect();
    let matrix = load_matrix(&a.data, &mut manifest)?;
    let plan = plan_for(&matrix, &a.cv, a.data.seed)?;
    let report = evaluate_all(&configs, &matrix, &plan)?;
    let text = match a.format {
        ReportFormat::Md => report.to_markdown(),
        ReportFormat::Csv => report.to_csv(),
    };
    manifest.config = json!({
        "data": data_json(&a.data),
        "folds": plan.k(),
        "grouping": plan.grouping(),
        "format": format!("{:?}", a.format).to_lowercase(),
        "regressors": configs,
    });
    match &a.out {
        Some(out) => write(out, text.as_bytes(), &mut manifest)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    finish(&manifest, a.out.as_deref())
}

fn default_subsets_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".subsets.csv");
    PathBuf::from(name)
}

fn importance(a: ImportanceArgs) -> Result<()> {
    let mut manifest = RunManifest::new("importance", json!(null));
    let over = overrides(a.data.config.as_deref(), &mut manifest)?;
    let config = configure(a.regressor.parse()?, a.data.seed, &over);
    let matrix = load_matrix(&a.data, &mut manifest)?;
    let plan = plan_for(&matrix, &a.cv, a.data.seed)?;
    // The guard runs before any fitting so an oversized request fails fast.
    let subsets = if a.exhaustive {
        Some(exhaustive_search(&config, &matrix, &plan, a.max_p)?)
    } else {
        None
    };
    let report = drop_column_importance(&config, &matrix, &plan)?;
    write(&a.out, report.to_csv().as_bytes(), &mut manifest)?;
    if let Some(map) = &subsets {
        let path = a.subsets_out.clone().unwrap_or_else(|| default_subsets_path(&a.out));
        write(&path, subsets_to_csv(map).as_bytes(), &mut manifest)?;
    }
    manifest.config = json!({
        "data": data_json(&a.data),
        "folds": plan.k(),
        "grouping": plan.grouping(),
        "regressor": config,
        "exhaustive": a.exhaustive,
        "max_p": a.max_p,
    });
    finish(&manifest, Some(&a.out))
}

fn train(a: TrainArgs) -> Result<()> {
    let mut manifest = RunManifest::new("train", json!(null));
    let over = overrides(a.data.config.as_deref(), &mut manifest)?;
    let config = configure(a.regressor.parse()?, a.data.seed, &over);
    let matrix = load_matrix(&a.data, &mut manifest)?;
    let all: Vec<usize> = (0..matrix.n_rows()).collect();
    let fills = column_medians(matrix.rows(), &all);
    let x = fill_missing(matrix.rows(), &fills);
    let model = fit(&config, &x, matrix.target(), Some(matrix.feature_names()))?.with_fill_values(fills)?;
    write(&a.out, model.to_json().as_bytes(), &mut manifest)?;
    manifest.config = json!({ "data": data_json(&a.data), "regressor": config });
    finish(&manifest, Some(&a.out))
}

fn predict(a: PredictArgs) -> Result<()> {
    let mut manifest = RunManifest::new("predict", json!(null));
    let model = FittedModel::from_json(std::str::from_utf8(&read(&a.model, &mut manifest)?)?)?;
    let snaps = parse_snapshot_csv(&read(&a.data, &mut manifest)?)?;
    let policy = DistributionPolicy::from(a.policy);
    // Targets are irrelevant here; fill them so rows without targets still build.
    let mut rows = snaps.clone();
    for s in &mut rows {
        s.sqale_index.get_or_insert(0.0);
    }
    let full = build_matrix(&rows, TargetKind::Maintainability, policy)?;
    let matrix = full.select_columns(&column_indices(&full, model.feature_names())?);
    let x = match model.fill_values() {
        Some(fills) if fills.len() == matrix.n_features() => fill_missing(matrix.rows(), fills),
        _ => matrix.rows().clone(),
    };
    let predicted = model.predict_named(matrix.feature_names(), &x)?;
    let mut out = String::from("project,commit_sha,commit_date,predicted\n");
    for (s, p) in snaps.iter().zip(&predicted) {
        out.push_str(&format!(
            "{},{},{},{}\n",
            s.project_id,
            s.commit_sha,
            crate::ingest::render_timestamp(&s.timestamp),
            p
        ));
    }
    write(&a.out, out.as_bytes(), &mut manifest)?;
    manifest.config = json!({ "model_kind": model.kind(), "policy": policy });
    finish(&manifest, Some(&a.out))
}

fn parse_cost_range(text: &str) -> Result<(u32, u32)> {
    let (lo, hi) = text
        .split_once("..")
        .ok_or_else(|| format!("cost range `{text}` must look like lo..hi"))?;
    Ok((lo.trim().parse()?, hi.trim().parse()?))
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let mut params = SimulationParams::default();
    if let Some(v) = a.intro_rate {
        params.intro_rate = v;
    }
    if let Some(v) = a.removal_prob {
        params.removal_prob = v;
    }
    if let Some(v) = a.reintro_prob {
        params.reintro_prob = v;
    }
    if let Some(r) = &a.cost_range {
        params.cost_range = parse_cost_range(r)?;
    }
    let events = simulate_events(a.items, a.horizon_days, a.seed, &params)?;
    let mut manifest = RunManifest::new(
        "simulate",
        json!({ "items": a.items, "horizon_days": a.horizon_days, "seed": a.seed, "params": params }),
    );
    write(&a.out, render_events_csv(&events).as_bytes(), &mut manifest)?;
    finish(&manifest, Some(&a.out))
}

fn rank(a: RankArgs) -> Result<()> {
    let weights = RankWeights {
        bug_weight: a.bug_weight,
        change_weight: a.change_weight,
    };
    let mut manifest = RunManifest::new("rank", json!({ "weights": weights, "invert_cost": a.invert_cost }));
    let events = parse_events_csv(&read(&a.events, &mut manifest)?)?;
    let ranked = rank_items(&build_timelines(&events)?, weights, a.invert_cost)?;
    write(&a.out, render_ranking_csv(&ranked).as_bytes(), &mut manifest)?;
    finish(&manifest, Some(&a.out))
}

fn series(a: SeriesArgs) -> Result<()> {
    let start = parse_timestamp(&a.start)?;
    let end = parse_timestamp(&a.end)?;
    let mut manifest = RunManifest::new(
        "series",
        json!({ "start": crate::ingest::render_timestamp(&start), "end": crate::ingest::render_timestamp(&end), "step_days": a.step_days }),
    );
    let events = parse_events_csv(&read(&a.events, &mut manifest)?)?;
    let s = debt_series(&build_timelines(&events)?, start, end, Duration::days(i64::from(a.step_days)))?;
    write(&a.out, render_series_csv(&s).as_bytes(), &mut manifest)?;
    if let Some(plot) = &a.plot {
        plot_series_svg(&s, plot)?;
        manifest.record_output(plot);
    }
    finish(&manifest, Some(&a.out))
}

fn fetch(a: FetchArgs) -> Result<()> {
    let token = match &a.token_env {
        Some(var) => Some(std::env::var(var).map_err(|_| format!("environment variable `{var}` is not set"))?),
        None => None,
    };
    let config = FetchConfig {
        page_size: a.page_size,
        ..FetchConfig::default()
    };
    let all = fetch_snapshots(&a.server, &a.project, &default_metric_keys(), token.as_deref(), &config)?;
    let kept = sample_interval(&all, a.interval_days)?;
    log::info!("fetched {} snapshots, kept {}", all.len(), kept.len());
    let mut manifest = RunManifest::new(
        "fetch",
        json!({
            "server": a.server,
            "project": a.project,
            "interval_days": a.interval_days,
            "page_size": a.page_size,
            "token_env": a.token_env,
        }),
    );
    write(&a.out, &render_snapshot_csv(&kept)?, &mut manifest)?;
    finish(&manifest, Some(&a.out))
}

fn synth(a: SynthArgs) -> Result<()> {
    let params = SynthParams {
        n_projects: a.projects,
        snapshots_per_project: a.snapshots,
        interval_days: a.interval_days,
        missing_rate: a.missing_rate,
        ..SynthParams::default()
    };
    if !(0.0..=1.0).contains(&params.missing_rate) {
        return Err(format!("missing rate {} is not a probability", params.missing_rate).into());
    }
    let snaps = synth_snapshots(&params, a.seed);
    let mut manifest = RunManifest::new("synth", json!({ "params": params, "seed": a.seed }));
    write(&a.out, &render_snapshot_csv(&snaps)?, &mut manifest)?;
    finish(&manifest, Some(&a.out))
}
