//! Command-line entry point: simulate scenarios, run detection on traces,
//! replay built-in fixtures, render verdict reports.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

use clap::{Args, Parser, Subcommand, ValueEnum};
use pacsmon::pipeline::{run_trace_reader, PipelineConfig, PipelineError, RunSinks};
use pacsmon::report;
use pacsmon::simulator::{builtin_scenario, builtin_scenarios_seeded, generate, ScenarioSpec};
use pacsmon::{AggFn, GroundTruth, TrafficProfile, Verdict};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;

#[derive(Parser)]
#[command(
    name = "pacsmon",
    about = "Failure detection and localization for instant-payment clearing, driven by pacs.008/pacs.002 timing",
    version,
    disable_help_subcommand = true
)]
struct Cli {
    /// Print the effective built-in defaults (pipeline config, traffic
    /// profile, scenario names) as JSON and exit.
    #[arg(long, global = true)]
    show_config: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// List the built-in scenarios.
    Scenarios(ScenariosArgs),
    /// Generate a trace (plus ground-truth sidecar) from a built-in
    /// scenario or a scenario spec JSON file.
    Simulate(SimulateArgs),
    /// Run the full detection pipeline over a trace JSONL file.
    Detect(DetectArgs),
    /// Run a built-in scenario end to end, writing every artifact.
    Replay(ReplayArgs),
    /// Render verdict JSONL as a table.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Text,
    Csv,
    Json,
}

#[derive(Args)]
struct ScenariosArgs {
    #[arg(long, value_enum, default_value = "text")]
    format: OutputFormat,
}

#[derive(Args)]
struct SimulateArgs {
    /// Built-in scenario name or path to a scenario spec JSON file.
    scenario: String,
    /// Seed for all randomness; derived and printed when omitted.
    #[arg(long)]
    seed: Option<u64>,
    /// Trace output path (stdout when omitted).
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Ground-truth sidecar path (defaults to <out>.gt.json).
    #[arg(long)]
    ground_truth: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct PipelineFlags {
    /// Pipeline config JSON file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Sampling rate (bin width) in milliseconds.
    #[arg(long)]
    eta_ms: Option<i64>,
    /// Anomaly threshold for the volume feature.
    #[arg(long)]
    theta_v: Option<f64>,
    /// Anomaly threshold for the three processing-time features.
    #[arg(long)]
    theta_delta: Option<f64>,
    /// Per-bin aggregation function.
    #[arg(long, value_enum)]
    agg: Option<AggChoice>,
    /// Bin grid anchor; defaults to the first event's timestamp.
    #[arg(long)]
    alpha_ms: Option<i64>,
    /// End of the observation horizon; bins past it are not emitted.
    #[arg(long)]
    omega_ms: Option<i64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AggChoice {
    Mean,
    Median,
}

#[derive(Args)]
struct DetectArgs {
    /// Trace JSONL input.
    trace: PathBuf,
    #[command(flatten)]
    pipeline: PipelineFlags,
    /// Ground-truth sidecar; enables per-window reporting in the summary.
    #[arg(long)]
    ground_truth: Option<PathBuf>,
    /// Verdict JSONL output path.
    #[arg(short, long)]
    out: Option<PathBuf>,
    #[arg(long)]
    scores_out: Option<PathBuf>,
    #[arg(long)]
    observations_out: Option<PathBuf>,
    #[arg(long)]
    payments_out: Option<PathBuf>,
    /// Run summary JSON path (stdout when omitted).
    #[arg(long)]
    summary_out: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    /// Built-in scenario name.
    fixture: String,
    /// Seed; fixtures default to the fixed seed 42 for reproducibility.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output directory for all artifacts.
    #[arg(short, long, default_value = ".")]
    out_dir: PathBuf,
    #[command(flatten)]
    pipeline: PipelineFlags,
}

#[derive(Args)]
struct ReportArgs {
    /// Verdict JSONL input.
    verdicts: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    format: OutputFormat,
    /// One row per bin instead of grouped episodes.
    #[arg(long)]
    per_bin: bool,
    /// Bin width used for episode grouping.
    #[arg(long, default_value_t = 1_000)]
    eta_ms: i64,
}

/// Anything that should surface as exit code 2.
#[derive(Debug, thiserror::Error)]
enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Json {
        path: String,
        line: u64,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("{0}")]
    Invalid(String),
}

enum CmdError {
    Usage(String),
    Data(DataError),
}

impl From<DataError> for CmdError {
    fn from(err: DataError) -> Self {
        CmdError::Data(err)
    }
}

fn open_reader(path: &Path) -> Result<BufReader<File>, DataError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })
}

fn create_writer(path: &Path) -> Result<BufWriter<File>, DataError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, DataError> {
    let mut text = String::new();
    open_reader(path)?
        .read_to_string(&mut text)
        .map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
    serde_json::from_str(&text).map_err(|source| DataError::Json {
        path: path.display().to_string(),
        line: source.line() as u64,
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), DataError> {
    let mut w = create_writer(path)?;
    w.write_all(text.as_bytes())
        .and_then(|_| w.write_all(b"\n"))
        .and_then(|_| w.flush())
        .map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version are successful outcomes, not usage errors.
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };

    if cli.show_config {
        show_config();
        return ExitCode::SUCCESS;
    }

    let Some(command) = cli.command else {
        eprintln!("error: a subcommand is required; see --help");
        return ExitCode::from(EXIT_USAGE);
    };

    let outcome = match command {
        Command::Scenarios(args) => cmd_scenarios(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Detect(args) => cmd_detect(args),
        Command::Replay(args) => cmd_replay(args),
        Command::Report(args) => cmd_report(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(CmdError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(CmdError::Data(err)) => {
            eprintln!("error: {err}");
            ExitCode::from(EXIT_DATA)
        }
    }
}

fn show_config() {
    let defaults = serde_json::json!({
        "pipeline": PipelineConfig::default(),
        "traffic_profile": TrafficProfile::default(),
        "scenarios": builtin_scenarios_seeded(42)
            .iter()
            .map(|s| s.name.clone())
            .collect::<Vec<_>>(),
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&defaults).expect("defaults serialize")
    );
}

fn scenario_names() -> String {
    builtin_scenarios_seeded(42)
        .iter()
        .map(|s| s.name.clone())
        .collect::<Vec<_>>()
        .join(", ")
}

fn describe(name: &str) -> &'static str {
    match name {
        "s1-mild-internal" => "mild stress on internal processing phases, volume unaffected",
        "s2-multi-internal" => "moderate stress on multiple internal components, small volume drop",
        "s3-external" => "delayed responses from external participants, small volume drop",
        "s4-heavy-internal" => "severe internal degradation, major volume drop",
        "nsp-incident" => "network-provider outage: >10s external delays, 78.62% volume collapse",
        _ => "",
    }
}

fn cmd_scenarios(args: ScenariosArgs) -> Result<(), CmdError> {
    let scenarios = builtin_scenarios_seeded(42);
    match args.format {
        OutputFormat::Json => {
            println!(
                "{}",
                serde_json::to_string_pretty(&scenarios).expect("scenarios serialize")
            );
        }
        _ => {
            println!(
                "{:<18} {:>7} {:>10} {:>6}  {:<8} description",
                "name", "minutes", "multiplier", "drop", "targets"
            );
            for s in &scenarios {
                let w = &s.windows[0];
                let targets: Vec<&str> = w.targets.iter().map(|f| f.name()).collect();
                println!(
                    "{:<18} {:>7} {:>10.2} {:>6.2}  {:<8} {}",
                    s.name,
                    s.injected_secs() / 60,
                    w.delay_multiplier,
                    w.drop_fraction,
                    targets.join(","),
                    describe(&s.name),
                );
            }
        }
    }
    Ok(())
}

fn load_scenario(name_or_path: &str, seed: Option<u64>) -> Result<ScenarioSpec, CmdError> {
    if name_or_path.ends_with(".json") || Path::new(name_or_path).exists() {
        let mut spec: ScenarioSpec = read_json(Path::new(name_or_path))?;
        if let Some(seed) = seed {
            spec.profile.seed = seed;
        }
        spec.validate()
            .map_err(|e| CmdError::Data(DataError::Invalid(e)))?;
        return Ok(spec);
    }
    match builtin_scenario(name_or_path, seed.unwrap_or(42)) {
        Some(spec) => Ok(spec),
        None => Err(CmdError::Usage(format!(
            "unknown scenario '{name_or_path}'; valid names: {}",
            scenario_names()
        ))),
    }
}

fn derive_seed() -> u64 {
    use std::time::{SystemTime, UNIX_EPOCH};
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_nanos() as u64)
        .unwrap_or(0)
        ^ std::process::id() as u64
}

fn write_events<W: Write>(
    w: &mut W,
    events: &[pacsmon::TraceEvent],
    path: &Path,
) -> Result<(), DataError> {
    for e in events {
        serde_json::to_writer(&mut *w, e)
            .map_err(std::io::Error::other)
            .and_then(|_| w.write_all(b"\n"))
            .map_err(|source| DataError::Io {
                path: path.display().to_string(),
                source,
            })?;
    }
    w.flush().map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CmdError> {
    // Validate the scenario reference before deriving a seed, so usage
    // errors stay quiet.
    let is_file = args.scenario.ends_with(".json") || Path::new(&args.scenario).exists();
    if !is_file && builtin_scenario(&args.scenario, 0).is_none() {
        return Err(CmdError::Usage(format!(
            "unknown scenario '{}'; valid names: {}",
            args.scenario,
            scenario_names()
        )));
    }
    let seed = match args.seed {
        Some(seed) => seed,
        None => {
            let seed = derive_seed();
            eprintln!("seed: {seed} (pass --seed {seed} to reproduce)");
            seed
        }
    };
    let spec = load_scenario(&args.scenario, Some(seed))?;
    let trace = generate(&spec).map_err(|e| CmdError::Data(DataError::Invalid(e)))?;

    let gt_path = args
        .ground_truth
        .clone()
        .or_else(|| args.out.as_ref().map(|o| sibling(o, ".gt.json")));

    match &args.out {
        Some(path) => {
            let mut w = create_writer(path)?;
            write_events(&mut w, &trace.events, path)?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            write_events(&mut w, &trace.events, Path::new("<stdout>"))?;
        }
    }
    if let Some(path) = gt_path {
        let text =
            serde_json::to_string_pretty(&trace.ground_truth).expect("ground truth serialize");
        write_text(&path, &text)?;
    }
    eprintln!(
        "generated {} events ({} settled transactions) for '{}'",
        trace.events.len(),
        trace.outcomes.settled,
        spec.name
    );
    Ok(())
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

/// flags > config file > built-in defaults.
fn resolve_config(flags: &PipelineFlags) -> Result<PipelineConfig, CmdError> {
    let mut cfg = match &flags.config {
        Some(path) => read_json::<PipelineConfig>(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(eta) = flags.eta_ms {
        cfg.aggregation.eta_ms = eta;
    }
    if let Some(theta) = flags.theta_v {
        cfg.detector.theta.v = theta;
    }
    if let Some(theta) = flags.theta_delta {
        cfg.detector.theta.d1 = theta;
        cfg.detector.theta.d2 = theta;
        cfg.detector.theta.d3 = theta;
    }
    if let Some(agg) = flags.agg {
        cfg.aggregation.agg_fn = match agg {
            AggChoice::Mean => AggFn::Mean,
            AggChoice::Median => AggFn::Median,
        };
    }
    if let Some(alpha) = flags.alpha_ms {
        cfg.aggregation.alpha_ms = alpha;
        cfg.anchor_alpha_to_first_event = false;
    }
    if let Some(omega) = flags.omega_ms {
        cfg.aggregation.omega_ms = Some(omega);
    }
    Ok(cfg)
}

fn cmd_detect(args: DetectArgs) -> Result<(), CmdError> {
    let cfg = resolve_config(&args.pipeline)?;
    let ground_truth: Option<GroundTruth> = match &args.ground_truth {
        Some(path) => Some(read_json(path)?),
        None => None,
    };

    let mut verdicts_w = args.out.as_deref().map(create_writer).transpose()?;
    let mut scores_w = args.scores_out.as_deref().map(create_writer).transpose()?;
    let mut observations_w = args
        .observations_out
        .as_deref()
        .map(create_writer)
        .transpose()?;
    let mut payments_w = args
        .payments_out
        .as_deref()
        .map(create_writer)
        .transpose()?;

    let reader = open_reader(&args.trace)?;
    let mut sinks = RunSinks {
        payments: payments_w.as_mut().map(|w| w as &mut dyn Write),
        observations: observations_w.as_mut().map(|w| w as &mut dyn Write),
        scores: scores_w.as_mut().map(|w| w as &mut dyn Write),
        verdicts: verdicts_w.as_mut().map(|w| w as &mut dyn Write),
    };
    let summary = run_trace_reader(reader, cfg, ground_truth.as_ref(), &mut sinks)
        .map_err(DataError::Pipeline)?;

    for w in [verdicts_w, scores_w, observations_w, payments_w]
        .into_iter()
        .flatten()
    {
        let mut w = w;
        w.flush().map_err(|source| DataError::Io {
            path: args.trace.display().to_string(),
            source,
        })?;
    }

    let summary_json = serde_json::to_string_pretty(&summary).expect("summary serialize");
    match &args.summary_out {
        Some(path) => write_text(path, &summary_json)?,
        None => println!("{summary_json}"),
    }
    Ok(())
}

fn cmd_replay(args: ReplayArgs) -> Result<(), CmdError> {
    let spec = match builtin_scenario(&args.fixture, args.seed) {
        Some(spec) => spec,
        None => {
            return Err(CmdError::Usage(format!(
                "unknown fixture '{}'; valid names: {}",
                args.fixture,
                scenario_names()
            )))
        }
    };
    let trace = generate(&spec).map_err(|e| CmdError::Data(DataError::Invalid(e)))?;

    std::fs::create_dir_all(&args.out_dir).map_err(|source| DataError::Io {
        path: args.out_dir.display().to_string(),
        source,
    })?;
    let file = |suffix: &str| args.out_dir.join(format!("{}{}", spec.name, suffix));

    let trace_path = file(".trace.jsonl");
    let mut w = create_writer(&trace_path)?;
    write_events(&mut w, &trace.events, &trace_path)?;

    let gt_text =
        serde_json::to_string_pretty(&trace.ground_truth).expect("ground truth serialize");
    write_text(&file(".gt.json"), &gt_text)?;

    // Scenario bins are anchored at the simulation origin and capped at
    // the scenario horizon, so trace truncation never reads as a drop.
    let mut flags = args.pipeline.clone();
    if flags.alpha_ms.is_none() {
        flags.alpha_ms = Some(0);
    }
    if flags.omega_ms.is_none() {
        flags.omega_ms = Some(spec.total_duration_ms);
    }
    let cfg = resolve_config(&flags)?;

    let scores_path = file(".scores.jsonl");
    let verdicts_path = file(".verdicts.jsonl");
    let mut scores_w = create_writer(&scores_path)?;
    let mut verdicts_w = create_writer(&verdicts_path)?;
    let reader = open_reader(&trace_path)?;
    let mut sinks = RunSinks {
        payments: None,
        observations: None,
        scores: Some(&mut scores_w),
        verdicts: Some(&mut verdicts_w),
    };
    let summary = run_trace_reader(reader, cfg, Some(&trace.ground_truth), &mut sinks)
        .map_err(DataError::Pipeline)?;
    scores_w.flush().map_err(|source| DataError::Io {
        path: scores_path.display().to_string(),
        source,
    })?;
    verdicts_w.flush().map_err(|source| DataError::Io {
        path: verdicts_path.display().to_string(),
        source,
    })?;

    let summary_text = serde_json::to_string_pretty(&summary).expect("summary serialize");
    write_text(&file(".summary.json"), &summary_text)?;

    eprintln!(
        "replayed '{}': {} bins, {} anomalous, {} verdicts -> {}",
        spec.name,
        summary.bins,
        summary.anomalous_bins,
        summary.verdicts.total,
        args.out_dir.display()
    );
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<(), CmdError> {
    let reader = open_reader(&args.verdicts)?;
    let mut verdicts: Vec<Verdict> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| DataError::Io {
            path: args.verdicts.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        verdicts.push(
            serde_json::from_str(&line).map_err(|source| DataError::Json {
                path: args.verdicts.display().to_string(),
                line: i as u64 + 1,
                source,
            })?,
        );
    }

    let episodes = if args.per_bin {
        // Degenerate grouping: one row per bin.
        verdicts
            .iter()
            .flat_map(|v| report::episodes(std::slice::from_ref(v), args.eta_ms))
            .collect()
    } else {
        report::episodes(&verdicts, args.eta_ms)
    };
    let rendered = match args.format {
        OutputFormat::Text => report::render_text(&episodes),
        OutputFormat::Csv => report::render_csv(&episodes),
        OutputFormat::Json => {
            let mut s = report::render_json(&episodes);
            s.push('\n');
            s
        }
    };
    print!("{rendered}");
    Ok(())
}
