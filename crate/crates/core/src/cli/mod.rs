//! Command-line front end: `run`, `sweep`, `validate` and `lag-cdf`.
//!
//! Results go to `--out` (or standard output). Errors go to standard error
//! as one JSON object per line. Exit codes: 0 success, 1 I/O failure,
//! 2 configuration error, 3 migration aborted.

mod config;
mod units;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analysis::{
    channel_lag_cdf, compare_strategies, rep_seed, sweep_rtt, sweep_table_size, write_report, Format, SweepError,
};
use crate::controller::{ChannelKind, CommandChannel, MigrationMetrics, Ordering, Scenario, ScenarioError, Strategy};
use crate::topology::validate as validate_topology;

pub use config::{load_scenario_file, parse_scenario_file, ConfigError, ScenarioFile};
pub use units::{format_duration, parse_duration, parse_rate, Duration, Rate, UnitError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ABORT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "vnmig", version, about = "Simulate SDN virtual network migration")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario, once per repetition.
    Run(RunArgs),
    /// Sweep one parameter of a scenario.
    Sweep(SweepArgs),
    /// Check a scenario file and its topology.
    Validate(ValidateArgs),
    /// Sample command-channel lag.
    LagCdf(LagCdfArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub strategy: Option<Strategy>,
    #[arg(long)]
    pub ordering: Option<Ordering>,
    #[arg(long)]
    pub channel: Option<ChannelKind>,
    /// Overrides the seed in the scenario file.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    /// Round-trip time between the first two gateways (`10ms`, ...).
    Rtt,
    /// Rules per old-VN switch (plain integers).
    TableSize,
    /// Per-flow traffic rate (`1000pkt/s`, `1Mbit/s`, ...).
    Rate,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum)]
    pub axis: Axis,
    /// Comma-separated values with units.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub values: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct LagCdfArgs {
    #[arg(long, default_value = "of-message")]
    pub channel: ChannelKind,
    #[arg(long, default_value_t = 50)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    pub format: Format,
}

/// Failure of a subcommand, mapped to an exit code.
#[derive(Debug)]
pub enum CliError {
    Config { message: String, keys: Vec<String> },
    Io(String),
    /// Results were written but at least one migration aborted.
    Aborted(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => EXIT_CONFIG,
            CliError::Io(_) => EXIT_IO,
            CliError::Aborted(_) => EXIT_ABORT,
        }
    }

    /// One-line JSON error record.
    pub fn record(&self) -> String {
        let v = match self {
            CliError::Config { message, keys } => {
                serde_json::json!({"error": "config", "message": message, "keys": keys})
            }
            CliError::Io(m) => serde_json::json!({"error": "io", "message": m}),
            CliError::Aborted(r) => serde_json::json!({"error": "migration-aborted", "runs": r}),
        };
        v.to_string()
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config { keys: e.keys(), message: e.to_string() }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        CliError::Config { message: e.to_string(), keys: Vec::new() }
    }
}

impl From<SweepError> for CliError {
    fn from(e: SweepError) -> Self {
        let keys = match e {
            SweepError::NoValues | SweepError::NonPositive(_) => vec!["values".to_string()],
            SweepError::NoRepetitions => vec!["reps".to_string()],
            SweepError::Run(_) => Vec::new(),
        };
        CliError::Config { message: e.to_string(), keys }
    }
}

fn config_error(key: &str, message: impl ToString) -> CliError {
    CliError::Config { message: message.to_string(), keys: vec![key.to_string()] }
}

/// The fully resolved inputs of a run, embedded in every output file.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance<'a, X: Serialize> {
    pub command: &'a str,
    pub version: &'a str,
    pub seed: u64,
    pub reps: usize,
    pub scenario: &'a Scenario,
    #[serde(flatten)]
    pub extra: X,
}

struct Loaded {
    scenario: Scenario,
    seed: u64,
}

fn load(c: &Common) -> Result<Loaded, CliError> {
    let file = load_scenario_file(&c.scenario)?;
    let mut scenario = file.to_scenario()?;
    if let Some(s) = c.strategy {
        scenario.migration.strategy = s;
    }
    if let Some(o) = c.ordering {
        scenario.migration.ordering = o;
    }
    if let Some(ch) = c.channel {
        scenario.migration.channel = CommandChannel::of_kind(ch);
    }
    if c.reps == 0 {
        return Err(config_error("reps", "at least one repetition is required"));
    }
    let seed = c.seed.unwrap_or(file.seed);
    // Catch topology and strategy/layout mismatches before any output exists.
    let topo = scenario.build(seed).map_err(ScenarioError::from)?;
    let diags = validate_topology(&topo);
    if !diags.is_empty() {
        return Err(CliError::Config {
            message: diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "),
            keys: vec!["topology".into()],
        });
    }
    if scenario.migration.strategy == Strategy::InterfaceToggle && topo.layout != crate::topology::Layout::SharedVlan
        || scenario.migration.strategy == Strategy::Gateway && topo.layout == crate::topology::Layout::SharedVlan
    {
        return Err(config_error(
            "migration.strategy",
            format!("strategy {} cannot run on the {:?} layout", scenario.migration.strategy, topo.layout),
        ));
    }
    Ok(Loaded { scenario, seed })
}

fn emit<C: Serialize, R: Serialize>(
    out: &Option<PathBuf>,
    stdout: &mut dyn Write,
    format: Format,
    kind: &str,
    config: &C,
    rows: &[R],
) -> Result<(), CliError> {
    let mut buf = Vec::new();
    write_report(&mut buf, format, kind, config, rows).map_err(|e| CliError::Io(e.to_string()))?;
    match out {
        Some(p) => std::fs::write(p, &buf).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => stdout.write_all(&buf).map_err(|e| CliError::Io(e.to_string())),
    }
}

/// One CSV row of `run`: a flow of one repetition.
#[derive(Debug, Clone, Serialize)]
pub struct RunRow {
    pub rep: usize,
    pub seed: u64,
    pub strategy: Strategy,
    pub ordering: Ordering,
    pub channel: ChannelKind,
    pub src: String,
    pub dst: String,
    pub rate_pps: f64,
    pub sent: u64,
    pub received: u64,
    pub duplicates: u64,
    pub lost: u64,
    pub loss_pct: f64,
    pub max_gap_ms: f64,
    pub migration_duration_ms: Option<f64>,
    pub aborted: bool,
}

fn run_rows(rep: usize, m: &MigrationMetrics) -> Vec<RunRow> {
    m.flows
        .iter()
        .map(|f| RunRow {
            rep,
            seed: m.seed,
            strategy: m.strategy,
            ordering: m.ordering,
            channel: m.channel,
            src: f.src.to_string(),
            dst: f.dst.to_string(),
            rate_pps: f.rate_pps,
            sent: f.sent,
            received: f.received,
            duplicates: f.duplicates,
            lost: f.lost,
            loss_pct: f.loss_pct,
            max_gap_ms: f.max_gap.as_millis_f64(),
            migration_duration_ms: m.duration().map(|d| d.as_millis_f64()),
            aborted: m.abort().is_some(),
        })
        .collect()
}

pub fn cmd_run(args: &RunArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let c = &args.common;
    let l = load(c)?;
    let mut metrics = Vec::with_capacity(c.reps);
    for rep in 0..c.reps {
        metrics.push(l.scenario.run(rep_seed(l.seed, rep))?);
    }
    let prov = Provenance { command: "run", version: env!("CARGO_PKG_VERSION"), seed: l.seed, reps: c.reps, scenario: &l.scenario, extra: () };
    match c.format {
        Format::Csv => {
            let rows: Vec<RunRow> = metrics.iter().enumerate().flat_map(|(i, m)| run_rows(i, m)).collect();
            emit(&c.out, stdout, c.format, "run", &prov, &rows)?;
        }
        Format::Json => emit(&c.out, stdout, c.format, "run", &prov, &metrics)?,
    }
    let aborted: Vec<String> =
        metrics.iter().filter_map(|m| m.abort().map(|a| format!("seed {}: {a}", m.seed))).collect();
    if aborted.is_empty() {
        Ok(())
    } else {
        Err(CliError::Aborted(aborted))
    }
}

#[derive(Serialize)]
struct SweepExtra<'a> {
    axis: Axis,
    values: &'a [String],
}

pub fn cmd_sweep(args: &SweepArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let c = &args.common;
    if args.values.is_empty() {
        return Err(SweepError::NoValues.into());
    }
    let l = load(c)?;
    let prov = Provenance {
        command: "sweep",
        version: env!("CARGO_PKG_VERSION"),
        seed: l.seed,
        reps: c.reps,
        scenario: &l.scenario,
        extra: SweepExtra { axis: args.axis, values: &args.values },
    };
    match args.axis {
        Axis::Rtt => {
            let mut rtts = Vec::new();
            for v in &args.values {
                rtts.push(parse_duration(v).map_err(|e| config_error("values", e))?.as_millis_f64());
            }
            let orderings = match c.ordering {
                Some(o) => vec![o],
                None => vec![Ordering::Algorithm1, Ordering::Simultaneous],
            };
            let rows = sweep_rtt(&l.scenario, &rtts, &orderings, c.reps, l.seed)?;
            emit(&c.out, stdout, c.format, "sweep-rtt", &prov, &rows)
        }
        Axis::TableSize => {
            let mut sizes = Vec::new();
            for v in &args.values {
                sizes.push(v.trim().parse::<usize>().map_err(|_| config_error("values", format!("`{v}` is not a rule count")))?);
            }
            let rows = sweep_table_size(&l.scenario, &sizes, c.reps, l.seed)?;
            emit(&c.out, stdout, c.format, "sweep-table-size", &prov, &rows)
        }
        Axis::Rate => {
            let mut rates = Vec::new();
            for v in &args.values {
                rates.push(parse_rate(v, l.scenario.traffic.packet_size).map_err(|e| config_error("values", e))?);
            }
            let rows = compare_strategies(&l.scenario, &rates, c.reps, l.seed)?;
            emit(&c.out, stdout, c.format, "sweep-rate", &prov, &rows)
        }
    }
}

/// Writes one JSON line per diagnostic; fails if there are any.
pub fn cmd_validate(args: &ValidateArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let file = load_scenario_file(&args.scenario)?;
    let scenario = file.to_scenario()?;
    let seed = args.seed.unwrap_or(file.seed);
    let topo = scenario.build(seed).map_err(ScenarioError::from)?;
    let diags = validate_topology(&topo);
    let io = |e: std::io::Error| CliError::Io(e.to_string());
    for d in &diags {
        writeln!(stdout, "{}", serde_json::to_string(d).map_err(|e| CliError::Io(e.to_string()))?).map_err(io)?;
    }
    if diags.is_empty() {
        writeln!(
            stdout,
            "{}",
            serde_json::json!({"ok": true, "nodes": topo.nodes.len(), "links": topo.substrate_links.len(), "seed": seed})
        )
        .map_err(io)?;
        Ok(())
    } else {
        Err(CliError::Config { message: format!("{} topology diagnostics", diags.len()), keys: vec!["topology".into()] })
    }
}

#[derive(Serialize)]
struct LagProvenance {
    command: &'static str,
    version: &'static str,
    seed: u64,
    samples: usize,
    channel: CommandChannel,
}

pub fn cmd_lag_cdf(args: &LagCdfArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let channel = CommandChannel::of_kind(args.channel);
    let cdf = channel_lag_cdf(&channel, args.samples, args.seed).map_err(|_| config_error("samples", "must be positive"))?;
    let prov = LagProvenance {
        command: "lag-cdf",
        version: env!("CARGO_PKG_VERSION"),
        seed: args.seed,
        samples: args.samples,
        channel,
    };
    emit(&args.out, stdout, args.format, "lag-cdf", &prov, &cdf.rows())
}

pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Run(a) => cmd_run(a, stdout),
        Command::Sweep(a) => cmd_sweep(a, stdout),
        Command::Validate(a) => cmd_validate(a, stdout),
        Command::LagCdf(a) => cmd_lag_cdf(a, stdout),
    }
}

/// Parses `args`, runs the subcommand and returns the exit code.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return EXIT_OK;
            }
            let msg = e.kind().as_str().map_or_else(|| e.to_string(), |k| format!("{k}: {}", e.to_string().lines().next().unwrap_or("")));
            let err = CliError::Config { message: msg, keys: Vec::new() };
            let _ = writeln!(stderr, "{}", err.record());
            return err.exit_code();
        }
    };
    match execute(&cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "{}", e.record());
            e.exit_code()
        }
    }
}
