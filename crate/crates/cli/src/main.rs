use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sharpecast::cv::{plan_splits, write_plan, DEFAULT_MIN_TRAIN, DEFAULT_SPLITS};
use sharpecast::data::{
    align_panel, compute_sharpe_panel, ingest_returns, ingest_risk_free, read_sharpe, write_returns, write_risk_free,
    write_sharpe, RiskFreeConversion, SharpePanel,
};
use sharpecast::ensemble::EnsembleGroup;
use sharpecast::hpo;
use sharpecast::metrics::read_cells;
use sharpecast::pipeline::{
    best_config_json, prepare_splits, render_tables, run_pipeline, tune_neural, Algorithm, ErrorKind, PipelineError,
    RunConfig, DEFAULT_MIN_MONTHS, DEFAULT_WINDOW,
};
use sharpecast::seed::derive;
use sharpecast::synth::{generate, Regime, SynthSpec};

#[derive(Parser)]
#[command(name = "sharpecast", version, about = "Forecast fund Sharpe ratios with neural, statistical and ensemble models")]
struct Cli {
    /// Log more (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic returns panel and risk-free series.
    Synth(SynthArgs),
    /// Read, validate and align returns with the risk-free series.
    Ingest(IngestArgs),
    /// Compute the rolling annualized Sharpe panel.
    Sharpe(SharpeArgs),
    /// Print the rolling-origin split table.
    PlanCv(PlanCvArgs),
    /// Run the full pipeline.
    Run(RunArgs),
    /// Render report tables from a metrics file.
    Report(ReportArgs),
    /// Tune one recurrent network type for one horizon.
    Hpo(HpoArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 20)]
    funds: usize,
    #[arg(long, default_value_t = 240)]
    months: usize,
    #[arg(long)]
    seed: u64,
    /// ar1, trend+ar1 or random-walk
    #[arg(long, default_value = "ar1")]
    regime: Regime,
    #[arg(long, default_value_t = 0.4)]
    cross_corr: f64,
    /// Directory for returns.csv and risk_free.csv
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReturnsInput {
    #[arg(long)]
    returns: PathBuf,
    #[arg(long)]
    risk_free: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MIN_MONTHS)]
    min_months: usize,
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    input: ReturnsInput,
    /// Directory for the aligned returns.csv and risk_free.csv
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SharpeArgs {
    #[command(flatten)]
    input: ReturnsInput,
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    window: usize,
    /// simple (y/12) or compound
    #[arg(long, default_value = "simple", value_parser = parse_conversion)]
    conversion: RiskFreeConversion,
    /// Output file; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlanCvArgs {
    /// Series length
    #[arg(long, conflicts_with = "sharpe", required_unless_present = "sharpe")]
    n: Option<usize>,
    /// Take the length from a Sharpe panel
    #[arg(long)]
    sharpe: Option<PathBuf>,
    #[arg(long, visible_alias = "horizons")]
    horizon: usize,
    #[arg(long, default_value_t = DEFAULT_SPLITS)]
    splits: usize,
    #[arg(long, default_value_t = DEFAULT_MIN_TRAIN)]
    min_train: usize,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run config; flags given here override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    returns: Option<PathBuf>,
    #[arg(long)]
    risk_free: Option<PathBuf>,
    /// Precomputed Sharpe panel, instead of returns and risk-free
    #[arg(long, conflicts_with_all = ["returns", "risk_free"])]
    sharpe: Option<PathBuf>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long, value_parser = parse_conversion)]
    conversion: Option<RiskFreeConversion>,
    #[arg(long)]
    min_months: Option<usize>,
    /// Comma-separated subset of 6,9,12,18,24
    #[arg(long, value_delimiter = ',')]
    horizons: Option<Vec<usize>>,
    #[arg(long)]
    splits: Option<usize>,
    #[arg(long)]
    min_train: Option<usize>,
    /// Comma-separated, e.g. lstm,gru,arima,ets,theta,naive
    #[arg(long, value_delimiter = ',')]
    algorithms: Option<Vec<Algorithm>>,
    /// Comma-separated `name=alg+alg`, e.g. dl=lstm+gru,stats=arima+ets+theta
    #[arg(long, value_delimiter = ',', value_parser = parse_group)]
    ensemble_groups: Option<Vec<EnsembleGroup>>,
    #[arg(long)]
    hpo_iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// metrics.csv of a finished run
    #[arg(long)]
    metrics: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct HpoArgs {
    #[arg(long, required_unless_present = "returns")]
    sharpe: Option<PathBuf>,
    #[arg(long, requires = "risk_free", conflicts_with = "sharpe")]
    returns: Option<PathBuf>,
    #[arg(long)]
    risk_free: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    window: usize,
    #[arg(long, default_value_t = DEFAULT_MIN_MONTHS)]
    min_months: usize,
    /// lstm or gru
    #[arg(long)]
    algorithm: Algorithm,
    #[arg(long)]
    horizon: usize,
    #[arg(long, default_value_t = DEFAULT_SPLITS)]
    splits: usize,
    #[arg(long, default_value_t = DEFAULT_MIN_TRAIN)]
    min_train: usize,
    #[arg(long, default_value_t = hpo::DEFAULT_ITERATIONS)]
    hpo_iters: usize,
    #[arg(long)]
    seed: u64,
    /// Directory for the trial log and best config
    #[arg(long)]
    out: PathBuf,
}

fn parse_conversion(s: &str) -> Result<RiskFreeConversion, String> {
    match s {
        "simple" => Ok(RiskFreeConversion::Simple),
        "compound" => Ok(RiskFreeConversion::Compound),
        _ => Err(format!("unknown conversion `{s}` (simple, compound)")),
    }
}

fn parse_group(s: &str) -> Result<EnsembleGroup, String> {
    let (name, members) = s.split_once('=').ok_or_else(|| format!("expected name=alg+alg, got `{s}`"))?;
    let algorithms: Vec<&str> = members.split('+').map(str::trim).collect();
    for a in &algorithms {
        a.parse::<Algorithm>()?;
    }
    Ok(EnsembleGroup::new(name.trim(), &algorithms))
}

fn data(stage: &str) -> impl Fn(&dyn std::fmt::Display) -> PipelineError + '_ {
    move |e| PipelineError::new(stage, ErrorKind::Data, e)
}

fn write_file(stage: &str, path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| data(stage)(&format!("{}: {e}", parent.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| data(stage)(&format!("{}: {e}", path.display())))
}

fn emit(stage: &str, out: Option<&Path>, bytes: &[u8]) -> Result<(), PipelineError> {
    match out {
        Some(p) => write_file(stage, p, bytes),
        None => std::io::stdout().write_all(bytes).map_err(|e| data(stage)(&e)),
    }
}

fn aligned(input: &ReturnsInput) -> Result<sharpecast::data::Aligned, PipelineError> {
    let returns = ingest_returns(&input.returns).map_err(|e| data("ingest")(&e))?;
    let rf = ingest_risk_free(&input.risk_free).map_err(|e| data("ingest")(&e))?;
    let a = align_panel(&returns, &rf, input.min_months).map_err(|e| data("ingest")(&e))?;
    if !a.dropped.is_empty() {
        log::warn!("dropped {} funds to keep {} common months: {:?}", a.dropped.len(), input.min_months, a.dropped);
    }
    Ok(a)
}

fn load_sharpe(path: &Path) -> Result<SharpePanel, PipelineError> {
    let file = std::fs::File::open(path).map_err(|e| data("ingest")(&format!("{}: {e}", path.display())))?;
    read_sharpe(file).map_err(|e| data("ingest")(&e))
}

fn synth(a: SynthArgs) -> Result<(), PipelineError> {
    let spec = SynthSpec { n_funds: a.funds, n_months: a.months, seed: a.seed, regime: a.regime, cross_corr: a.cross_corr };
    let (series, rf) = generate(&spec).map_err(PipelineError::config)?;
    let (mut r, mut f) = (Vec::new(), Vec::new());
    write_returns(&mut r, &series).map_err(|e| data("synth")(&e))?;
    write_risk_free(&mut f, &rf).map_err(|e| data("synth")(&e))?;
    write_file("synth", &a.out.join("returns.csv"), &r)?;
    write_file("synth", &a.out.join("risk_free.csv"), &f)?;
    println!("{} funds x {} months -> {}", a.funds, a.months, a.out.display());
    Ok(())
}

fn ingest(a: IngestArgs) -> Result<(), PipelineError> {
    let al = aligned(&a.input)?;
    let first = &al.series[0];
    println!("funds: {}", al.series.len());
    println!("months: {} ({} to {})", first.values.len(), first.start, first.end());
    if !al.dropped.is_empty() {
        println!("dropped: {}", al.dropped.join(","));
    }
    if let Some(dir) = a.out {
        let (mut r, mut f) = (Vec::new(), Vec::new());
        write_returns(&mut r, &al.series).map_err(|e| data("ingest")(&e))?;
        write_risk_free(&mut f, &al.risk_free).map_err(|e| data("ingest")(&e))?;
        write_file("ingest", &dir.join("returns.csv"), &r)?;
        write_file("ingest", &dir.join("risk_free.csv"), &f)?;
    }
    Ok(())
}

fn sharpe(a: SharpeArgs) -> Result<(), PipelineError> {
    let al = aligned(&a.input)?;
    let panel =
        compute_sharpe_panel(&al.series, &al.risk_free, a.window, a.conversion).map_err(|e| data("sharpe")(&e))?;
    let mut buf = Vec::new();
    write_sharpe(&mut buf, &panel).map_err(|e| data("sharpe")(&e))?;
    emit("sharpe", a.out.as_deref(), &buf)
}

fn plan_cv(a: PlanCvArgs) -> Result<(), PipelineError> {
    let n = match (a.n, &a.sharpe) {
        (Some(n), _) => n,
        (None, Some(p)) => load_sharpe(p)?.len(),
        (None, None) => unreachable!("clap requires one"),
    };
    let plan = plan_splits(n, a.horizon, a.splits, a.min_train).map_err(PipelineError::config)?;
    let mut buf = Vec::new();
    write_plan(&mut buf, &plan).map_err(|e| data("cv")(&e))?;
    emit("cv", None, &buf)
}

fn run_config(a: RunArgs) -> Result<RunConfig, PipelineError> {
    let mut c = match &a.config {
        Some(path) => RunConfig::load(path)?,
        None => {
            let seed = a.seed.ok_or_else(|| PipelineError::config("--seed is required without --config"))?;
            let out = a.out.clone().ok_or_else(|| PipelineError::config("--out is required without --config"))?;
            RunConfig::new(seed, out)
        }
    };
    if a.sharpe.is_some() {
        (c.returns, c.risk_free, c.sharpe) = (None, None, a.sharpe);
    }
    if a.returns.is_some() || a.risk_free.is_some() {
        c.sharpe = None;
        c.returns = a.returns.or(c.returns);
        c.risk_free = a.risk_free.or(c.risk_free);
    }
    c.sharpe_window = a.window.unwrap_or(c.sharpe_window);
    c.risk_free_conversion = a.conversion.unwrap_or(c.risk_free_conversion);
    c.min_months = a.min_months.unwrap_or(c.min_months);
    c.horizons = a.horizons.unwrap_or(c.horizons);
    c.splits = a.splits.unwrap_or(c.splits);
    c.min_train = a.min_train.unwrap_or(c.min_train);
    c.algorithms = a.algorithms.unwrap_or(c.algorithms);
    c.ensemble_groups = a.ensemble_groups.or(c.ensemble_groups);
    c.hpo_iterations = a.hpo_iters.unwrap_or(c.hpo_iterations);
    c.seed = a.seed.unwrap_or(c.seed);
    c.out_dir = a.out.unwrap_or(c.out_dir);
    Ok(c)
}

fn run(a: RunArgs) -> Result<(), PipelineError> {
    let config = run_config(a)?;
    let started = std::time::Instant::now();
    let summary = run_pipeline(&config)?;
    let table = std::fs::read_to_string(summary.out_dir.join("report/table2.md")).unwrap_or_default();
    print!("{table}");
    println!(
        "{} metric cells in {:.1}s -> {}",
        summary.cells.len(),
        started.elapsed().as_secs_f64(),
        summary.out_dir.display()
    );
    Ok(())
}

fn report(a: ReportArgs) -> Result<(), PipelineError> {
    let file = std::fs::File::open(&a.metrics).map_err(|e| data("report")(&format!("{}: {e}", a.metrics.display())))?;
    let cells = read_cells(file).map_err(|e| data("report")(&e))?;
    let tables = render_tables(&cells).map_err(|e| data("report")(&e))?;
    for (name, bytes) in &tables {
        write_file("report", &a.out.join(name), bytes)?;
    }
    println!("{} files -> {}", tables.len(), a.out.display());
    Ok(())
}

fn hpo_cmd(a: HpoArgs) -> Result<(), PipelineError> {
    let cell = a.algorithm.cell().ok_or_else(|| PipelineError::config("--algorithm must be lstm or gru"))?;
    let panel = match (&a.sharpe, &a.returns, &a.risk_free) {
        (Some(p), _, _) => load_sharpe(p)?,
        (None, Some(r), Some(f)) => {
            let al = aligned(&ReturnsInput { returns: r.clone(), risk_free: f.clone(), min_months: a.min_months })?;
            compute_sharpe_panel(&al.series, &al.risk_free, a.window, RiskFreeConversion::Simple)
                .map_err(|e| data("sharpe")(&e))?
        }
        _ => return Err(PipelineError::config("give --sharpe, or --returns and --risk-free")),
    };
    if a.hpo_iters == 0 {
        return Err(PipelineError::config("--hpo-iters must be at least 1"));
    }
    let plan = plan_splits(panel.len(), a.horizon, a.splits, a.min_train).map_err(PipelineError::config)?;
    let splits = prepare_splits(&panel, &plan)?;
    let tag = format!("h{}", a.horizon);
    let seed = derive(a.seed, &format!("hpo/{cell}/{tag}"));
    let tuned = tune_neural(cell, &splits, a.horizon, a.hpo_iters, seed)?;
    let mut buf = Vec::new();
    hpo::write_trial_log(&mut buf, &tuned.space, &tuned.result.trials).map_err(|e| data("hpo")(&e))?;
    write_file("hpo", &a.out.join(format!("{cell}_{tag}_trials.csv")), &buf)?;
    let best = best_config_json(&tuned);
    write_file("hpo", &a.out.join(format!("{cell}_{tag}_best.json")), best.as_bytes())?;
    println!("{best}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Ingest(a) => ingest(a),
        Command::Sharpe(a) => sharpe(a),
        Command::PlanCv(a) => plan_cv(a),
        Command::Run(a) => run(a),
        Command::Report(a) => report(a),
        Command::Hpo(a) => hpo_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.kind.exit_code() as u8)
        }
    }
}
