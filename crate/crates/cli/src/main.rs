//! knobtune: mine tuning documents for parameter hints and tune a DBMS
//! against a benchmark within a time budget.

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use knobtune_core::agent::Agent;
use knobtune_core::catalog::load_catalog_path;
use knobtune_core::config::TunerConfig;
use knobtune_core::corpus::load_corpus;
use knobtune_core::dbms::{BenchmarkSpec, DbmsHandle, MetricKind, SimulatedDbms};
use knobtune_core::error::Error as CoreError;
use knobtune_core::extraction::{order_hints, CandidateHint};
use knobtune_core::labels::LabelSet;
use knobtune_core::live::CommandDbms;
use knobtune_core::scorer::{LexicalScorer, LinearScorer, RemoteScorer, Scorer};
use knobtune_core::session::{extract_corpus_hints, train, tune, Budget, TrainingSpec};
use knobtune_core::translation::SystemProperties;
use serde::Serialize;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "knobtune", version, about = "Document-driven DBMS knob tuning")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract candidate hints from a corpus as JSON lines
    Extract(ExtractArgs),
    /// Extract hints and emit them in stride-priority order
    Order(ExtractArgs),
    /// Run a tuning session and report the best configuration found
    Tune(TuneArgs),
    /// Train an agent on a simulator scenario and emit a checkpoint
    Train(TrainArgs),
    /// Re-render a session log as a readable report
    Replay(ReplayArgs),
}

#[derive(Args)]
struct TunerFlags {
    /// Max hints per parameter per stride round
    #[arg(long)]
    l: Option<usize>,
    /// Max hints per episode
    #[arg(long)]
    e: Option<usize>,
    /// Configurations evaluated per episode
    #[arg(long)]
    n: Option<usize>,
    /// Snippet length budget in tokens
    #[arg(long)]
    segment_limit: Option<usize>,
    /// Comma-separated multiplicator set
    #[arg(long, value_delimiter = ',')]
    multiplicators: Option<Vec<f64>>,
    /// Comma-separated weight set
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    #[arg(long)]
    perf_scale: Option<f64>,
    #[arg(long)]
    training_perf_divisor: Option<f64>,
    #[arg(long)]
    training_bonus: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    epsilon_start: Option<f64>,
    #[arg(long)]
    epsilon_end: Option<f64>,
    /// Episodes over which epsilon anneals
    #[arg(long)]
    epsilon_anneal: Option<u64>,
    #[arg(long)]
    replay_capacity: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    sync_interval: Option<u64>,
    #[arg(long)]
    gradient_steps: Option<u32>,
}

impl TunerFlags {
    fn apply(&self, cfg: &mut TunerConfig) {
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = &self.$field { $target = v.clone(); })*
            };
        }
        set! {
            l => cfg.hints_per_param,
            e => cfg.hints_per_episode,
            n => cfg.configs_per_episode,
            segment_limit => cfg.segment_limit,
            multiplicators => cfg.multiplicators,
            weights => cfg.weights,
            perf_scale => cfg.perf_scale,
            training_perf_divisor => cfg.training_perf_divisor,
            training_bonus => cfg.training_bonus,
            gamma => cfg.learning.gamma,
            epsilon_start => cfg.learning.epsilon.start,
            epsilon_end => cfg.learning.epsilon.end,
            epsilon_anneal => cfg.learning.epsilon.anneal_episodes,
            replay_capacity => cfg.learning.replay_capacity,
            batch_size => cfg.learning.batch_size,
            learning_rate => cfg.learning.learning_rate,
            sync_interval => cfg.learning.sync_interval,
            gradient_steps => cfg.learning.gradient_steps,
        }
    }
}

#[derive(Args)]
struct SystemFlags {
    /// RAM of the target host in bytes
    #[arg(long, default_value_t = 8 * 1024 * 1024 * 1024)]
    ram_bytes: u64,
    /// Core count of the target host
    #[arg(long, default_value_t = 4)]
    cores: u64,
    /// Disk capacity of the target host in bytes
    #[arg(long, default_value_t = 1024 * 1024 * 1024 * 1024)]
    disk_bytes: u64,
}

impl SystemFlags {
    fn build(&self) -> anyhow::Result<SystemProperties> {
        Ok(SystemProperties::new(self.ram_bytes, self.cores, self.disk_bytes)?)
    }
}

#[derive(Args)]
struct ExtractArgs {
    /// Directory of .txt files or a JSON-lines corpus file
    #[arg(long)]
    corpus: PathBuf,
    /// Parameter catalog (JSON array)
    #[arg(long)]
    catalog: PathBuf,
    #[arg(long, default_value_t = 128)]
    segment_limit: usize,
    /// Stride length for priority ordering
    #[arg(long, default_value_t = 10)]
    l: usize,
    /// Write JSON lines here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("target").required(true).args(["scenario", "dbms_url"]))]
#[command(group = clap::ArgGroup::new("limit").required(true).multiple(true).args(["budget", "episodes"]))]
struct TuneArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Simulator scenario JSON
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Live adapter URL; `cmd:PATH` points at a command-driver config file
    #[arg(long)]
    dbms_url: Option<String>,
    /// Tuning time budget in seconds
    #[arg(long)]
    budget: Option<f64>,
    /// Episode budget (alternative or addition to --budget)
    #[arg(long)]
    episodes: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// lexical | linear | remote:URL
    #[arg(long, default_value = "linear")]
    scorer: String,
    /// Request timeout toward a remote scorer, seconds
    #[arg(long, default_value_t = 5.0)]
    scorer_timeout: f64,
    /// Mask parameter names before scoring
    #[arg(long)]
    masked: bool,
    /// Warm-start the agent from a checkpoint file
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Override the benchmark metric (run_time | throughput)
    #[arg(long)]
    metric: Option<String>,
    /// Override the benchmark workload id
    #[arg(long)]
    workload: Option<String>,
    /// Output directory for session.jsonl, best_config.properties, summary.json
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[command(flatten)]
    system: SystemFlags,
    #[command(flatten)]
    tuner: TunerFlags,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    scenario: PathBuf,
    /// Training iterations (episodes)
    #[arg(long, default_value_t = 200)]
    episodes: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// lexical | linear | remote:URL
    #[arg(long, default_value = "linear")]
    scorer: String,
    #[arg(long, default_value_t = 5.0)]
    scorer_timeout: f64,
    /// Where to write the trained agent checkpoint
    #[arg(long)]
    checkpoint: PathBuf,
    /// Optional session log output
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    system: SystemFlags,
    #[command(flatten)]
    tuner: TunerFlags,
}

#[derive(Args)]
struct ReplayArgs {
    /// Session log (JSON lines) to render
    #[arg(long)]
    log: PathBuf,
}

fn main() {
    // die quietly when stdout is closed early (e.g. piped into head)
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err:#}");
            match err.downcast_ref::<CoreError>() {
                Some(e) if e.is_input_error() => 2,
                Some(_) => 3,
                None => 2,
            }
        }
    }
}

fn dispatch(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Extract(args) => run_extract(args, false),
        Command::Order(args) => run_extract(args, true),
        Command::Tune(args) => run_tune(args),
        Command::Train(args) => run_train(args),
        Command::Replay(args) => run_replay(args),
    }
}

#[derive(Serialize)]
struct HintRecord<'a> {
    doc: &'a str,
    snippet: usize,
    param: &'a str,
    value: serde_json::Value,
    unit: &'a str,
    raw: &'a str,
    explicit: bool,
}

fn write_hints(hints: &[CandidateHint], out: &mut dyn Write) -> anyhow::Result<()> {
    let mut unit_buf = String::new();
    for h in hints {
        unit_buf.clear();
        unit_buf.push_str(&h.value.canonical.unit.to_string());
        let record = HintRecord {
            doc: &h.snippet.doc_id,
            snippet: h.snippet.index,
            param: &h.param.name,
            value: h.value.canonical.scalar_json(),
            unit: &unit_buf,
            raw: &h.value.raw_text,
            explicit: h.explicit,
        };
        serde_json::to_writer(&mut *out, &record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn run_extract(args: ExtractArgs, ordered: bool) -> anyhow::Result<()> {
    let corpus = load_corpus(&args.corpus)?;
    let catalog = load_catalog_path(&args.catalog)?;
    let mut hints = extract_corpus_hints(&corpus, &catalog, args.segment_limit);
    if ordered {
        hints = order_hints(hints, args.l).hints;
    }
    match &args.out {
        Some(path) => {
            let mut file = std::fs::File::create(path)
                .with_context(|| format!("cannot create {}", path.display()))?;
            write_hints(&hints, &mut file)?;
        }
        None => {
            let stdout = std::io::stdout();
            write_hints(&hints, &mut stdout.lock())?;
        }
    }
    log::info!("{} candidate hints from {} documents", hints.len(), corpus.len());
    Ok(())
}

fn build_scorer(spec: &str, timeout_secs: f64, learning_rate: f64) -> anyhow::Result<Box<dyn Scorer>> {
    if spec == "lexical" {
        return Ok(Box::new(LexicalScorer));
    }
    if spec == "linear" {
        return Ok(Box::new(LinearScorer::new(learning_rate)));
    }
    if let Some(url) = spec.strip_prefix("remote:") {
        let fallback: Box<dyn Scorer> = Box::new(LinearScorer::new(learning_rate));
        return Ok(Box::new(RemoteScorer::new(
            url,
            std::time::Duration::from_secs_f64(timeout_secs),
            fallback,
        )?));
    }
    bail!("unknown scorer '{spec}': expected lexical, linear, or remote:URL");
}

fn parse_metric(s: &str) -> anyhow::Result<MetricKind> {
    match s {
        "run_time" => Ok(MetricKind::RunTime),
        "throughput" => Ok(MetricKind::Throughput),
        other => bail!("unknown metric '{other}': expected run_time or throughput"),
    }
}

fn open_dbms(
    scenario: &Option<PathBuf>,
    dbms_url: &Option<String>,
) -> anyhow::Result<(Box<dyn DbmsHandle>, Option<BenchmarkSpec>)> {
    if let Some(path) = scenario {
        let (dbms, benchmark) = SimulatedDbms::from_scenario_path(path)?;
        return Ok((Box::new(dbms), benchmark));
    }
    let url = dbms_url.as_ref().expect("clap group guarantees one target");
    if let Some(path) = url.strip_prefix("cmd:") {
        let dbms = CommandDbms::from_config_path(Path::new(path))?;
        return Ok((Box::new(dbms), None));
    }
    Err(anyhow::Error::new(CoreError::Dbms(format!(
        "no driver for '{url}'; use a cmd:CONFIG.json URL or --scenario"
    ))))
}

#[derive(Serialize)]
struct Summary<'a> {
    baseline: f64,
    best_perf: f64,
    episodes: u64,
    /// Session clock in seconds (deterministic benchmark charges on the simulator).
    wall_time: f64,
    evaluations: u64,
    hints: usize,
    best_config: &'a knobtune_core::aggregation::Configuration,
    flags: SummaryFlags<'a>,
}

#[derive(Serialize)]
struct SummaryFlags<'a> {
    corpus: String,
    scenario: Option<String>,
    dbms_url: Option<&'a String>,
    seed: u64,
    budget_secs: Option<f64>,
    budget_episodes: Option<u64>,
    scorer: &'a str,
    masked: bool,
    ram_bytes: u64,
    cores: u64,
    disk_bytes: u64,
    metric: &'a str,
    workload: &'a str,
    config: &'a TunerConfig,
}

fn run_tune(args: TuneArgs) -> anyhow::Result<()> {
    let corpus = load_corpus(&args.corpus)?;
    let system = args.system.build()?;
    let mut cfg = TunerConfig::default();
    args.tuner.apply(&mut cfg);
    cfg.validate()?;

    let (mut dbms, scenario_benchmark) = open_dbms(&args.scenario, &args.dbms_url)?;
    let mut benchmark = scenario_benchmark.unwrap_or_default();
    if let Some(metric) = &args.metric {
        benchmark.kind = parse_metric(metric)?;
    }
    if let Some(workload) = &args.workload {
        benchmark.workload = workload.clone();
    }

    let budget = Budget { seconds: args.budget, episodes: args.episodes };
    budget.validate()?;

    let mut agent = match &args.checkpoint {
        Some(path) => {
            let ckpt = Agent::load_checkpoint(path)?;
            Agent::from_checkpoint(&ckpt, LabelSet::builtin().clone(), cfg.learning, args.masked, args.seed)?
        }
        None => Agent::new(
            build_scorer(&args.scorer, args.scorer_timeout, cfg.learning.learning_rate)?,
            LabelSet::builtin().clone(),
            cfg.learning,
            args.masked,
            args.seed,
        ),
    };

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))?;
    let log_path = args.out.join("session.jsonl");
    let mut log = std::io::BufWriter::new(
        std::fs::File::create(&log_path)
            .with_context(|| format!("cannot create {}", log_path.display()))?,
    );

    let outcome = tune(
        &corpus,
        &system,
        &benchmark,
        dbms.as_mut(),
        &cfg,
        budget,
        &mut agent,
        args.seed,
        &mut log,
    )?;
    drop(log);

    let properties = outcome.best_config.render_properties();
    std::fs::write(args.out.join("best_config.properties"), properties)?;
    let summary = Summary {
        baseline: outcome.baseline,
        best_perf: outcome.best_perf,
        episodes: outcome.episodes,
        wall_time: outcome.elapsed_secs,
        evaluations: outcome.evaluations,
        hints: outcome.hint_count,
        best_config: &outcome.best_config,
        flags: SummaryFlags {
            corpus: args.corpus.display().to_string(),
            scenario: args.scenario.as_ref().map(|p| p.display().to_string()),
            dbms_url: args.dbms_url.as_ref(),
            seed: args.seed,
            budget_secs: args.budget,
            budget_episodes: args.episodes,
            scorer: &args.scorer,
            masked: args.masked,
            ram_bytes: args.system.ram_bytes,
            cores: args.system.cores,
            disk_bytes: args.system.disk_bytes,
            metric: match benchmark.kind {
                MetricKind::RunTime => "run_time",
                MetricKind::Throughput => "throughput",
            },
            workload: &benchmark.workload,
            config: &cfg,
        },
    };
    let summary_json = serde_json::to_string_pretty(&summary)?;
    std::fs::write(args.out.join("summary.json"), &summary_json)?;

    println!(
        "baseline {:.6} -> best {:.6} after {} episodes ({} evaluations, {:.1}s charged)",
        outcome.baseline, outcome.best_perf, outcome.episodes, outcome.evaluations, outcome.elapsed_secs
    );
    for line in outcome.best_config.render_properties().lines() {
        println!("  {line}");
    }
    Ok(())
}

fn run_train(args: TrainArgs) -> anyhow::Result<()> {
    let corpus = load_corpus(&args.corpus)?;
    let system = args.system.build()?;
    let mut cfg = TunerConfig::default();
    args.tuner.apply(&mut cfg);
    cfg.validate()?;
    let (dbms, scenario_benchmark) = SimulatedDbms::from_scenario_path(&args.scenario)?;
    let benchmark = scenario_benchmark.unwrap_or_default();

    let mut agent = Agent::new(
        build_scorer(&args.scorer, args.scorer_timeout, cfg.learning.learning_rate)?,
        LabelSet::builtin().clone(),
        cfg.learning,
        true,
        args.seed,
    );
    let spec = TrainingSpec {
        corpus,
        dbms,
        benchmark,
        system,
        iterations: args.episodes,
        seed: args.seed,
    };
    let mut log: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(std::io::BufWriter::new(std::fs::File::create(path)?)),
        None => Box::new(std::io::sink()),
    };
    let (ckpt, outcome) = train(spec, &cfg, &mut agent, &mut log)?;
    drop(log);
    agent.save_checkpoint(&args.checkpoint)?;
    let _ = ckpt;
    println!(
        "trained {} episodes; mean episode reward {:.3}; checkpoint written to {}",
        outcome.episodes,
        if outcome.episode_rewards.is_empty() {
            0.0
        } else {
            outcome.episode_rewards.iter().sum::<f64>() / outcome.episode_rewards.len() as f64
        },
        args.checkpoint.display()
    );
    Ok(())
}

fn run_replay(args: ReplayArgs) -> anyhow::Result<()> {
    let file = std::fs::File::open(&args.log)
        .with_context(|| format!("cannot open {}", args.log.display()))?;
    let mut metric = MetricKind::RunTime;
    let mut baseline: Option<f64> = None;
    let mut best_so_far: Option<f64> = None;
    let mut rows = 0usize;
    println!("{:>8} {:>10} {:>7} {:>14} {:>14}", "episode", "reward", "evals", "best_perf", "best_so_far");
    for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| {
            anyhow::Error::new(CoreError::Corpus(format!(
                "{}:{}: invalid log record: {e}",
                args.log.display(),
                lineno + 1
            )))
        })?;
        if let Some(event) = value.get("event").and_then(|v| v.as_str()) {
            match event {
                "session_start" => {
                    if let Some(kind) = value.pointer("/benchmark/kind").and_then(|v| v.as_str()) {
                        metric = parse_metric(kind)?;
                    }
                }
                "baseline" => {
                    baseline = value.get("perf").and_then(|v| v.as_f64());
                    if let Some(b) = baseline {
                        println!("baseline performance: {b:.6}");
                    }
                }
                "session_end" => {
                    println!(
                        "session end: {} episodes, best {:.6}, {:.1}s charged",
                        value.get("episodes").and_then(|v| v.as_u64()).unwrap_or(0),
                        value.get("best_perf").and_then(|v| v.as_f64()).unwrap_or(f64::NAN),
                        value.get("elapsed_secs").and_then(|v| v.as_f64()).unwrap_or(f64::NAN),
                    );
                }
                _ => {}
            }
            continue;
        }
        let episode = value.get("episode").and_then(|v| v.as_u64());
        let Some(episode) = episode else { continue };
        let reward = value.get("reward").and_then(|v| v.as_f64()).unwrap_or(f64::NAN);
        let evals = value.get("configs_evaluated").and_then(|v| v.as_u64()).unwrap_or(0);
        let best_perf = value.get("best_perf").and_then(|v| v.as_f64());
        if let Some(p) = best_perf {
            let improves = match (best_so_far, metric) {
                (None, _) => true,
                (Some(cur), MetricKind::RunTime) => p < cur,
                (Some(cur), MetricKind::Throughput) => p > cur,
            };
            if improves {
                best_so_far = Some(p);
            }
        }
        let fmt_opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "-".into());
        println!(
            "{episode:>8} {reward:>10.3} {evals:>7} {:>14} {:>14}",
            fmt_opt(best_perf),
            fmt_opt(best_so_far)
        );
        rows += 1;
    }
    if rows == 0 {
        log::warn!("log contained no episode records");
    }
    if let (Some(b), Some(best)) = (baseline, best_so_far) {
        let gain = match metric {
            MetricKind::RunTime => b / best,
            MetricKind::Throughput => best / b,
        };
        println!("overall improvement factor: {gain:.3}");
    }
    Ok(())
}
