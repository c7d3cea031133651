use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::thread;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fogsim::placement::POLICY_NAMES;
use fogsim::report::{emit_report, ReportDocument, ReportFormat};
use fogsim::runtime::write_event_log;
use fogsim::scenario::{
    generate_builtin, parse_scenario, run_scenario, scenario_to_json, RunOptions, Scenario, ScenarioError,
    BUILTIN_SCENARIOS,
};

#[derive(Parser, Debug)]
#[command(name = "fogsim", version, about = "Simulate IoT applications on fog/edge/cloud hierarchies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a scenario and report latency, energy, network usage and cost.
    Run(RunArgs),
    /// Print a builtin scenario as an explicit scenario file.
    Export {
        #[arg(long)]
        builtin: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// List builtin scenarios and placement policies.
    List,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["scenario", "builtin"]))]
struct RunArgs {
    /// Scenario file (JSON).
    #[arg(long, value_name = "PATH")]
    scenario: Option<PathBuf>,
    /// Builtin scenario name (see `fogsim list`).
    #[arg(long, value_name = "NAME")]
    builtin: Option<String>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Simulated time to run, in ms.
    #[arg(long, value_name = "MS")]
    horizon: Option<f64>,
    /// Override the scenario's placement policy.
    #[arg(long, value_name = "NAME", value_parser = clap::builder::PossibleValuesParser::new(POLICY_NAMES))]
    policy: Option<String>,
    /// Write the machine-readable report here.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Write the line-delimited event log here.
    #[arg(long, value_name = "PATH")]
    event_log: Option<PathBuf>,
    /// Format of the report printed to standard output.
    #[arg(long, value_enum, default_value_t = Format::Human)]
    format: Format,
    /// Run once per seed, in parallel: `1,2,5` or `1..=20`.
    #[arg(long, value_name = "SEEDS", conflicts_with_all = ["seed", "event_log"])]
    sweep: Option<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Human,
    Machine,
    Csv,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Human => ReportFormat::Human,
            Format::Machine => ReportFormat::Machine,
            Format::Csv => ReportFormat::Csv,
        }
    }
}

/// Failures sorted by exit status.
#[derive(Debug)]
enum Failure {
    Usage(anyhow::Error),
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Validation(_) => 3,
            Failure::Runtime(_) => 1,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Validation(e) | Failure::Runtime(e) => e,
        }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Io { .. } | ScenarioError::UnknownBuiltin { .. } => Failure::Usage(e.into()),
            ScenarioError::Syntax { .. } | ScenarioError::Invalid(_) | ScenarioError::Placement(_) => {
                Failure::Validation(e.into())
            }
            ScenarioError::Runtime(_) => Failure::Runtime(e.into()),
        }
    }
}

fn parse_seeds(spec: &str) -> anyhow::Result<Vec<u64>> {
    let spec = spec.trim();
    if let Some((a, b)) = spec.split_once("..") {
        let (b, inclusive) = match b.strip_prefix('=') {
            Some(b) => (b, true),
            None => (b, false),
        };
        let a: u64 = a.trim().parse().with_context(|| format!("bad seed range start {a:?}"))?;
        let b: u64 = b.trim().parse().with_context(|| format!("bad seed range end {b:?}"))?;
        let seeds: Vec<u64> = if inclusive { (a..=b).collect() } else { (a..b).collect() };
        if seeds.is_empty() {
            bail!("seed range {spec:?} is empty");
        }
        return Ok(seeds);
    }
    spec.split(',')
        .map(|s| s.trim().parse().with_context(|| format!("bad seed {s:?}")))
        .collect()
}

fn load(args: &RunArgs, seed: Option<u64>) -> Result<Scenario, Failure> {
    match (&args.scenario, &args.builtin) {
        (Some(path), _) => Ok(parse_scenario(path)?),
        (None, Some(name)) => Ok(generate_builtin(name, seed.unwrap_or(1))?),
        (None, None) => Err(Failure::Usage(anyhow::anyhow!("give --scenario or --builtin"))),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(Failure::Runtime)
}

fn run_one(args: &RunArgs, seed: Option<u64>) -> Result<(ReportDocument, Option<String>), Failure> {
    let scenario = load(args, seed)?;
    let opts = RunOptions {
        seed,
        horizon_ms: args.horizon,
        policy: args.policy.clone(),
        record_events: args.event_log.is_some(),
    };
    let run = run_scenario(&scenario, &opts)?;
    let log = args.event_log.as_ref().map(|_| write_event_log(&run.output.events));
    Ok((ReportDocument::from_run(&run), log))
}

fn run_command(args: &RunArgs) -> Result<(), Failure> {
    let format = ReportFormat::from(args.format);
    let mut stdout = std::io::stdout().lock();
    let Some(sweep) = &args.sweep else {
        let (doc, log) = run_one(args, args.seed)?;
        if let (Some(path), Some(log)) = (&args.event_log, log) {
            write_file(path, log.as_bytes())?;
        }
        if let Some(path) = &args.out {
            write_file(path, doc.to_json().as_bytes())?;
        }
        let _ = stdout.write_all(&emit_report(&doc, format));
        return Ok(());
    };

    let seeds = parse_seeds(sweep).map_err(Failure::Usage)?;
    let results: Vec<Result<ReportDocument, Failure>> = thread::scope(|s| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| s.spawn(move || run_one(args, Some(seed)).map(|(doc, _)| doc)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Failure::Runtime(anyhow::anyhow!("worker panicked")))))
            .collect()
    });
    let docs = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    if let Some(path) = &args.out {
        let mut text = serde_json::to_string_pretty(&docs).expect("reports serialize");
        text.push('\n');
        write_file(path, text.as_bytes())?;
    }
    for doc in &docs {
        let _ = stdout.write_all(&emit_report(doc, format));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run_command(&args),
        Command::Export { builtin, seed } => generate_builtin(&builtin, seed)
            .map(|s| println!("{}", scenario_to_json(&s)))
            .map_err(Failure::from),
        Command::List => {
            println!("builtin scenarios: {}", BUILTIN_SCENARIOS.join(", "));
            println!("placement policies: {}", POLICY_NAMES.join(", "));
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}
