//! Command-line front end: subcommand routing, config loading, and
//! deterministic report emission.
//!
//! Exit codes: 0 success, 1 domain error, 2 usage error. Diagnostics go to
//! standard error; data goes to files or standard output only.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use v2n_core::neural::ModelKind;
use v2n_core::queueing::{QueueSizing, ServiceProfile};
use v2n_core::smoothing::SmoothingModel;

use crate::config::{self, RunConfig};
use crate::evaluation::{self, ExperimentSpec, GridRow, Mode, Technique};
use crate::features;
use crate::ingest::{self, InputFormat};
use crate::scaling::{
    self, FlowForecaster, HoldForecaster, PolicyKind, ScalingReport, ScalingTrace,
    SmoothingForecaster,
};

#[derive(Parser)]
#[command(
    name = "v2n",
    about = "Traffic-flow forecasting and V2N service dimensioning",
    version
)]
struct Cli {
    /// JSON run configuration; defaults applied for missing fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker count for grid commands.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Seed; falls back to $V2N_SEED, then the config file, then 0.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Download a raw data snapshot.
    Fetch(FetchArgs),
    /// Parse, filter, and gap-fill a raw dataset.
    Sanitize(SanitizeArgs),
    /// Print probe neighborhood membership or distance quantiles.
    Features(FeaturesArgs),
    /// Forecast a probe's flow with a classical technique.
    Forecast(ForecastArgs),
    /// Train a neural model and persist its parameters.
    Train(TrainArgs),
    /// Run an experiment grid and emit the RMSE table.
    Evaluate(EvaluateArgs),
    /// Size an M/M/c system for a latency target.
    Size(SizeArgs),
    /// Run a scaling policy over a scenario and emit its trace.
    Scale(ScaleArgs),
    /// Aggregate scaling reports into the final tables.
    Report(ReportArgs),
}

#[derive(Args)]
struct FetchArgs {
    #[arg(long)]
    endpoint: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 30)]
    timeout_secs: u64,
}

#[derive(Args)]
struct SanitizeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = CliFormat::Csv)]
    format: CliFormat,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = ingest::DEFAULT_MIN_COVERAGE)]
    min_coverage: f64,
    #[arg(long, default_value_t = ingest::DEFAULT_INTERVAL_SECS)]
    interval: i64,
    /// Where to write the sanitation report JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliFormat {
    Csv,
    Xml,
}

#[derive(Args)]
struct FeaturesArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    target: String,
    /// Neighborhood radius in km; omit to print distance quantiles.
    #[arg(long)]
    radius: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliSmoothingModel {
    Des,
    Tes,
    Hold,
}

#[derive(Args)]
struct ForecastArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    probe: String,
    #[arg(long, value_enum)]
    model: CliSmoothingModel,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    season_steps: Option<usize>,
    #[arg(long, default_value_t = 1)]
    lookahead: usize,
    #[arg(long)]
    online: bool,
    /// Scenario name (non-covid / covid); omit for a 70/30 index split.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliNetModel {
    Lstm,
    Gru,
    Tcn,
    Tcnlstm,
}

impl From<CliNetModel> for ModelKind {
    fn from(m: CliNetModel) -> Self {
        match m {
            CliNetModel::Lstm => ModelKind::Lstm,
            CliNetModel::Gru => ModelKind::Gru,
            CliNetModel::Tcn => ModelKind::Tcn,
            CliNetModel::Tcnlstm => ModelKind::TcnLstm,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    probe: String,
    #[arg(long, value_enum)]
    model: CliNetModel,
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long, default_value_t = 1)]
    lookahead: usize,
    /// Neighborhood radius in km for multivariate features.
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// JSON list of experiment specs.
    #[arg(long)]
    grid: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    target: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SizeArgs {
    /// Arrival rate, vehicles/second.
    #[arg(long)]
    lambda: f64,
    /// Per-server service rate, vehicles/second.
    #[arg(long)]
    mu: f64,
    /// Mean system-time target, seconds.
    #[arg(long)]
    t0: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliPolicy {
    NMin,
    Avg,
    Max,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliForecaster {
    Hold,
    DesOnline,
    TesOnline,
}

#[derive(Args)]
struct ScaleArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    probe: String,
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long, value_enum)]
    policy: CliPolicy,
    /// Decision interval in minutes (n-min policy).
    #[arg(long, default_value_t = 45)]
    n: usize,
    #[arg(long)]
    service: String,
    #[arg(long, value_enum, default_value_t = CliForecaster::TesOnline)]
    forecaster: CliForecaster,
    /// Trace CSV output path.
    #[arg(long)]
    out: PathBuf,
    /// Report JSON output path (consumed by `v2n report`).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory of report JSON files written by `v2n scale`.
    #[arg(long)]
    traces: PathBuf,
    /// Output directory for the aggregated tables.
    #[arg(long)]
    out: PathBuf,
}

/// Routes argv; returns the process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => config::load_config(path)?,
        None => RunConfig::default(),
    };
    cfg.seed = resolve_seed(cli.seed, cfg.seed)?;
    match cli.command {
        Command::Fetch(a) => cmd_fetch(a),
        Command::Sanitize(a) => cmd_sanitize(a),
        Command::Features(a) => cmd_features(a),
        Command::Forecast(a) => cmd_forecast(a, &cfg),
        Command::Train(a) => cmd_train(a, &cfg),
        Command::Evaluate(a) => cmd_evaluate(a, cli.jobs),
        Command::Size(a) => cmd_size(a),
        Command::Scale(a) => cmd_scale(a, &cfg),
        Command::Report(a) => cmd_report(a),
    }
}

fn resolve_seed(flag: Option<u64>, config_seed: u64) -> anyhow::Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    if let Ok(env) = std::env::var("V2N_SEED") {
        return env
            .parse::<u64>()
            .map_err(|_| anyhow::anyhow!("V2N_SEED is not an integer: {env}"));
    }
    Ok(config_seed)
}

/// Writes via a temp file + rename so outputs are never partially written.
fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let tmp = path.with_extension("tmp~");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn load_clean(path: &Path) -> anyhow::Result<ingest::CleanDataset> {
    let bytes = std::fs::read(path)?;
    let (raw, report) =
        ingest::parse_records(&bytes, InputFormat::Csv, ingest::DEFAULT_INTERVAL_SECS)?;
    if !report.row_errors.is_empty() {
        eprintln!(
            "warning: {} malformed rows ignored in {}",
            report.row_errors.len(),
            path.display()
        );
    }
    let (clean, _) = ingest::sanitize(&raw)?;
    Ok(clean)
}

/// Train/test index ranges: the named scenario, or a 70/30 split.
fn resolve_ranges(
    clean: &ingest::CleanDataset,
    scenario: &Option<String>,
) -> anyhow::Result<(std::ops::Range<usize>, std::ops::Range<usize>)> {
    match scenario {
        Some(name) => {
            let splits = ingest::split_scenarios(clean)?;
            Ok(evaluation::scenario_ranges(clean, &splits, name)?)
        }
        None => {
            let cut = clean.grid.len() * 7 / 10;
            Ok((0..cut, cut..clean.grid.len()))
        }
    }
}

fn cmd_fetch(a: FetchArgs) -> anyhow::Result<()> {
    let bytes = ingest::fetch_snapshot(&a.endpoint, Duration::from_secs(a.timeout_secs))?;
    write_atomic(&a.out, &bytes)?;
    eprintln!("fetched {} bytes to {}", bytes.len(), a.out.display());
    Ok(())
}

fn cmd_sanitize(a: SanitizeArgs) -> anyhow::Result<()> {
    let bytes = std::fs::read(&a.input)?;
    let format = match a.format {
        CliFormat::Csv => InputFormat::Csv,
        CliFormat::Xml => InputFormat::Xml,
    };
    let (raw, parse_report) = ingest::parse_records(&bytes, format, a.interval)?;
    let (kept, removed) = ingest::filter_spurious(&raw, a.min_coverage)?;
    let (clean, mut report) = ingest::sanitize(&kept)?;
    report.parse = parse_report;
    report.probes_removed = removed;
    write_atomic(&a.output, clean.to_csv().as_bytes())?;
    if let Some(path) = &a.report {
        write_atomic(path, serde_json::to_string_pretty(&report)?.as_bytes())?;
    }
    eprintln!(
        "sanitized: {} probes kept, {} removed, grid {} steps",
        clean.probes.len(),
        report.probes_removed.len(),
        clean.grid.len()
    );
    Ok(())
}

fn cmd_features(a: FeaturesArgs) -> anyhow::Result<()> {
    let clean = load_clean(&a.data)?;
    let json = match a.radius {
        Some(r) => serde_json::to_string_pretty(&features::neighborhood(&clean, &a.target, r)?)?,
        None => serde_json::to_string_pretty(&features::neighborhood_quantiles(
            &clean, &a.target,
        )?)?,
    };
    println!("{json}");
    Ok(())
}

fn cmd_forecast(a: ForecastArgs, cfg: &RunConfig) -> anyhow::Result<()> {
    let clean = load_clean(&a.data)?;
    let (train_range, test_range) = resolve_ranges(&clean, &a.scenario)?;
    let flow = clean.flow_series(&a.probe)?;
    let mut smoothing = cfg.smoothing;
    if let Some(v) = a.alpha {
        smoothing.alpha = v;
    }
    if let Some(v) = a.beta {
        smoothing.beta = v;
    }
    if let Some(v) = a.gamma {
        smoothing.gamma = v;
    }
    if let Some(v) = a.season_steps {
        smoothing.season_steps = v;
    }
    smoothing.validate().map_err(anyhow::Error::from)?;
    let technique = match a.model {
        CliSmoothingModel::Des => Technique::Des(smoothing),
        CliSmoothingModel::Tes => Technique::Tes(smoothing),
        CliSmoothingModel::Hold => Technique::Hold,
    };
    let mode = if a.online { Mode::Online } else { Mode::Offline };
    let result = evaluation::run_series_experiment(
        &technique,
        mode,
        &flow[train_range],
        &flow[test_range.clone()],
        a.lookahead,
        Some(a.lookahead),
        cfg.seed,
    )?;
    let mut out = String::from("timestamp,actual,forecast\n");
    for (i, actual, forecast) in &result.forecasts {
        let ts = clean.grid[test_range.start + i].format("%Y-%m-%dT%H:%M:%SZ");
        let _ = writeln!(out, "{ts},{actual},{forecast}");
    }
    write_atomic(&a.out, out.as_bytes())?;
    eprintln!("rmse {} over {} forecasts", result.rmse, result.forecasts.len());
    Ok(())
}

fn cmd_train(a: TrainArgs, cfg: &RunConfig) -> anyhow::Result<()> {
    let clean = load_clean(&a.data)?;
    let net_cfg = cfg.net_config(a.model.into())?;
    let spec = ExperimentSpec {
        technique: Technique::Neural(net_cfg.clone()),
        mode: Mode::Offline,
        scenario: a.scenario.clone().unwrap_or_else(|| "adhoc".into()),
        k: a.lookahead,
        radius_km: a.radius,
        seed: cfg.seed,
        warmup: None,
    };
    // Train on the resolved training range by running the training part of
    // the experiment; persist the parameter bundle.
    let (train_range, _) = resolve_ranges(&clean, &a.scenario)?;
    let params = evaluation::train_dataset_model(&spec, &net_cfg, &clean, &a.probe, &train_range)?;
    write_atomic(&a.out, serde_json::to_string(&params)?.as_bytes())?;
    eprintln!("trained {} -> {}", net_cfg.kind.as_str(), a.out.display());
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs, jobs: usize) -> anyhow::Result<()> {
    let clean = load_clean(&a.data)?;
    let splits = ingest::split_scenarios(&clean).unwrap_or_else(|_| ingest::default_splits());
    let text = std::fs::read_to_string(&a.grid)?;
    let specs: Vec<ExperimentSpec> = serde_json::from_str(&text)?;
    let rows = run_grid_parallel(&specs, &clean, &splits, &a.target, jobs.max(1));
    write_atomic(&a.out, rmse_grid_csv(&rows).as_bytes())?;
    eprintln!("{} grid rows -> {}", rows.len(), a.out.display());
    Ok(())
}

/// Order-preserving parallel grid execution.
fn run_grid_parallel(
    specs: &[ExperimentSpec],
    clean: &ingest::CleanDataset,
    splits: &[ingest::ScenarioSplit],
    target: &str,
    jobs: usize,
) -> Vec<GridRow> {
    if jobs <= 1 || specs.len() <= 1 {
        return evaluation::run_grid(specs, clean, splits, target);
    }
    let mut rows: Vec<Option<GridRow>> = (0..specs.len()).map(|_| None).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots = std::sync::Mutex::new(&mut rows);
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(specs.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= specs.len() {
                    break;
                }
                let row = evaluation::run_grid(
                    std::slice::from_ref(&specs[i]),
                    clean,
                    splits,
                    target,
                )
                .pop()
                .expect("one spec yields one row");
                slots.lock().expect("no poisoned lock")[i] = Some(row);
            });
        }
    });
    rows.into_iter().map(|r| r.expect("all slots filled")).collect()
}

/// Long-format RMSE table, stable column order.
pub fn rmse_grid_csv(rows: &[GridRow]) -> String {
    let mut out = String::from("technique,mode,scenario,k,seed,rmse,error\n");
    for r in rows {
        let mode = match r.mode {
            Mode::Offline => "offline",
            Mode::Online => "online",
        };
        let rmse = r.rmse.map(|v| v.to_string()).unwrap_or_default();
        let error = r.error.clone().unwrap_or_default().replace(',', ";");
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.technique, mode, r.scenario, r.k, r.seed, rmse, error
        );
    }
    out
}

fn cmd_size(a: SizeArgs) -> anyhow::Result<()> {
    let sizing = QueueSizing::for_target(a.lambda, a.mu, a.t0)?;
    println!("{}", serde_json::to_string_pretty(&sizing)?);
    Ok(())
}

fn cmd_scale(a: ScaleArgs, cfg: &RunConfig) -> anyhow::Result<()> {
    let clean = load_clean(&a.data)?;
    let profile = ServiceProfile::by_name(&a.service)
        .ok_or_else(|| anyhow::anyhow!("unknown service profile {}", a.service))?;
    let (train_range, test_range) = resolve_ranges(&clean, &a.scenario)?;
    let flow = clean.flow_series(&a.probe)?;
    let train = &flow[train_range];
    let test = &flow[test_range];
    let trace = match a.policy {
        CliPolicy::Max => scaling::static_schedule(train, PolicyKind::Max, profile, test.len())?,
        CliPolicy::Avg => scaling::static_schedule(train, PolicyKind::Avg, profile, test.len())?,
        CliPolicy::NMin => {
            let mut forecaster = make_forecaster(a.forecaster, train, cfg)?;
            scaling::n_min_schedule(test, forecaster.as_mut(), a.n, profile)?
        }
    };
    let max_cost = scaling::static_schedule(train, PolicyKind::Max, profile, test.len())
        .and_then(|t| scaling::replay(&t, test, None))
        .map(|r| r.cost)?;
    let report = scaling::replay(&trace, test, Some(max_cost))?;
    write_atomic(&a.out, trace_csv(&trace).as_bytes())?;
    if let Some(path) = &a.report {
        write_atomic(path, serde_json::to_string_pretty(&report)?.as_bytes())?;
    }
    eprintln!(
        "policy {:?}: cost {} (ratio {:.4}), violations {:.4}",
        report.policy, report.cost, report.cost_ratio, report.violation_ratio
    );
    Ok(())
}

fn make_forecaster(
    kind: CliForecaster,
    train: &[f64],
    cfg: &RunConfig,
) -> anyhow::Result<Box<dyn FlowForecaster>> {
    Ok(match kind {
        CliForecaster::Hold => Box::new(HoldForecaster::new(*train.last().unwrap_or(&0.0))),
        CliForecaster::DesOnline => Box::new(SmoothingForecaster::fit(
            train,
            cfg.smoothing,
            SmoothingModel::Des,
        )?),
        CliForecaster::TesOnline => Box::new(SmoothingForecaster::fit(
            train,
            cfg.smoothing,
            SmoothingModel::Tes,
        )?),
    })
}

/// Per-interval trace table, stable column order.
pub fn trace_csv(trace: &ScalingTrace) -> String {
    let mut out = String::from("start_step,steps,servers,forecast_peak,forecast_failed\n");
    for i in &trace.intervals {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            i.start_step, i.steps, i.servers, i.forecast_peak, i.forecast_failed
        );
    }
    out
}

/// Long-format scaling comparison table.
pub fn scaling_report_csv(reports: &[ScalingReport]) -> String {
    let mut out = String::from("policy,n_minutes,profile,cost,cost_ratio,violation_ratio\n");
    for r in reports {
        let policy = match r.policy {
            PolicyKind::NMin => "n_min",
            PolicyKind::Avg => "avg",
            PolicyKind::Max => "max",
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            policy, r.n_minutes, r.profile_name, r.cost, r.cost_ratio, r.violation_ratio
        );
    }
    out
}

fn cmd_report(a: ReportArgs) -> anyhow::Result<()> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&a.traces)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut reports = Vec::new();
    for p in &paths {
        let text = std::fs::read_to_string(p)?;
        reports.push(serde_json::from_str::<ScalingReport>(&text)?);
    }
    if reports.is_empty() {
        anyhow::bail!("no report JSON files in {}", a.traces.display());
    }
    std::fs::create_dir_all(&a.out)?;
    write_atomic(
        &a.out.join("scaling_report.csv"),
        scaling_report_csv(&reports).as_bytes(),
    )?;
    let summary = serde_json::json!({
        "reports": reports.len(),
        "policies": reports.iter().map(|r| format!("{:?}", r.policy)).collect::<Vec<_>>(),
        "mean_cost_ratio": reports.iter().map(|r| r.cost_ratio).sum::<f64>() / reports.len() as f64,
        "max_violation_ratio": reports.iter().map(|r| r.violation_ratio).fold(0.0, f64::max),
    });
    write_atomic(
        &a.out.join("summary.json"),
        serde_json::to_string_pretty(&summary)?.as_bytes(),
    )?;
    eprintln!("{} reports -> {}", reports.len(), a.out.display());
    Ok(())
}

/// Used by `evaluate`-style helpers and tests to write the grid table.
pub fn emit_rmse_grid(rows: &[GridRow], path: &Path) -> anyhow::Result<()> {
    if rows.is_empty() {
        anyhow::bail!("empty results");
    }
    write_atomic(path, rmse_grid_csv(rows).as_bytes())
}
