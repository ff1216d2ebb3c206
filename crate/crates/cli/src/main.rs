use std::fs::File;
use std::io::{BufWriter, Write};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rabi_ising::RabiError;
use serde::Serialize;

mod config;
mod output;
mod routes;

use config::{Defaults, FileConfig, Format, RunArgs, RunConfig};
use output::{write_csv, write_json, CsvRow, Document, Fig1Row, SCHEMA};

/// Coherent-state amplitudes and partition functions of the quantum Rabi model.
#[derive(Debug, Parser)]
#[command(name = "rabi-ising", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Amplitude <beta| e^{-iHt} |alpha> (or e^{-H tau}) on a time grid.
    Amplitude(RunArgs),
    /// Partition function of one parity sector, spectral sum against the
    /// wall series, on a tau grid.
    Partition(RunArgs),
    /// Cross-check two or more routes; exits non-zero if a check fails.
    Compare(RunArgs),
    /// Series against the oracle for the shipped presets.
    Fig1 {
        /// One preset (e.g. set1-g0.5); all six when omitted.
        preset: Option<String>,
        #[command(flatten)]
        args: RunArgs,
    },
}

const PRESETS: [(&str, &str); 6] = [
    (
        "set1-g0.05",
        include_str!("../../../configs/fig1/set1-g0.05.toml"),
    ),
    (
        "set1-g0.5",
        include_str!("../../../configs/fig1/set1-g0.5.toml"),
    ),
    (
        "set1-g5",
        include_str!("../../../configs/fig1/set1-g5.toml"),
    ),
    (
        "set2-g0.05",
        include_str!("../../../configs/fig1/set2-g0.05.toml"),
    ),
    (
        "set2-g0.5",
        include_str!("../../../configs/fig1/set2-g0.5.toml"),
    ),
    (
        "set2-g5",
        include_str!("../../../configs/fig1/set2-g5.toml"),
    ),
];

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numeric(String),
    Io(std::io::Error),
    ChecksFailed(usize),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) | CliError::ChecksFailed(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
            CliError::ChecksFailed(n) => write!(f, "{n} check(s) failed"),
        }
    }
}

impl From<RabiError> for CliError {
    fn from(e: RabiError) -> Self {
        match e {
            RabiError::InvalidArgument(_)
            | RabiError::Domain(_)
            | RabiError::ResourceLimit { .. } => CliError::Usage(e.to_string()),
            RabiError::TruncationTooSmall { .. }
            | RabiError::Numeric(_)
            | RabiError::UnsupportedOrder(_) => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.into())
    }
}

fn load_file(args: &RunArgs) -> Result<FileConfig, CliError> {
    match &args.config {
        Some(path) => FileConfig::load(path),
        None => Ok(FileConfig::default()),
    }
}

fn init_threads(threads: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Numeric(e.to_string()))?;
    }
    Ok(())
}

fn sink(cfg: &RunConfig) -> Result<Box<dyn Write>, CliError> {
    Ok(match &cfg.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn emit<C: Serialize, R: Serialize + CsvRow>(
    command: &str,
    cfg: &RunConfig,
    config: C,
    rows: &[R],
    warnings: &[String],
    pass: Option<bool>,
) -> Result<(), CliError> {
    for w in warnings {
        eprintln!("warning: {w}");
    }
    let mut out = sink(cfg)?;
    match cfg.format {
        Format::Csv => write_csv(command, rows, &mut out)?,
        Format::Json => {
            let doc = Document {
                schema: SCHEMA,
                command,
                config,
                seed: cfg.seed,
                rows,
                warnings,
                pass,
            };
            write_json(&doc, &mut out)?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct PresetConfig<'a> {
    preset: &'a str,
    #[serde(flatten)]
    config: &'a RunConfig,
}

fn run_fig1(preset: Option<String>, args: &RunArgs) -> Result<(), CliError> {
    if args.config.is_some() {
        return Err(CliError::usage(
            "fig1 uses its built-in presets; --config is not accepted",
        ));
    }
    let chosen: Vec<(&'static str, &'static str)> = match preset {
        None => PRESETS.to_vec(),
        Some(name) => {
            let p = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
                let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
                CliError::usage(format!(
                    "unknown preset '{name}', expected one of {names:?}"
                ))
            })?;
            vec![*p]
        }
    };
    let mut configs = Vec::new();
    for (name, text) in &chosen {
        let file = FileConfig::parse(text, name)?;
        configs.push((
            *name,
            RunConfig::resolve(args, &file, &Defaults::AMPLITUDE)?,
        ));
    }
    init_threads(configs[0].1.threads)?;
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for (name, cfg) in &configs {
        let (r, w) = routes::amplitude_rows(cfg)?;
        summarize_fig1(name, cfg, &r);
        rows.extend(r.into_iter().map(|row| Fig1Row { preset: name, row }));
        warnings.extend(w.into_iter().map(|w| format!("{name}: {w}")));
    }
    let meta: Vec<PresetConfig> = configs
        .iter()
        .map(|(preset, config)| PresetConfig { preset, config })
        .collect();
    emit("fig1", &configs[0].1, meta, &rows, &warnings, None)
}

/// One stderr line per preset: how far the series strays from the oracle.
fn summarize_fig1(name: &str, cfg: &RunConfig, rows: &[routes::AmplitudeRow]) {
    let mut worst: f64 = 0.0;
    let mut outside = 0;
    for pair in rows.chunks(cfg.routes.len()) {
        let oracle = pair.iter().find(|r| r.route == "oracle");
        let series = pair.iter().find(|r| r.route == "series");
        if let (Some(o), Some(s)) = (oracle, series) {
            let d = (o.re - s.re).hypot(o.im - s.im);
            worst = worst.max(d);
            if d > (3.0 * s.stderr).max(cfg.tolerance) {
                outside += 1;
            }
        }
    }
    eprintln!(
        "{name}: max |series - oracle| = {worst:.3e}, {outside} of {} points outside max(3 stderr, {})",
        cfg.time_grid.count, cfg.tolerance
    );
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Amplitude(args) => {
            let cfg = RunConfig::resolve(&args, &load_file(&args)?, &Defaults::AMPLITUDE)?;
            init_threads(cfg.threads)?;
            let (rows, warnings) = routes::amplitude_rows(&cfg)?;
            emit("amplitude", &cfg, &cfg, &rows, &warnings, None)
        }
        Command::Partition(args) => {
            let cfg = RunConfig::resolve(&args, &load_file(&args)?, &Defaults::PARTITION)?;
            init_threads(cfg.threads)?;
            let (rows, warnings) = routes::partition_rows(&cfg)?;
            emit("partition", &cfg, &cfg, &rows, &warnings, None)
        }
        Command::Compare(args) => {
            let cfg = RunConfig::resolve(&args, &load_file(&args)?, &Defaults::AMPLITUDE)?;
            init_threads(cfg.threads)?;
            let rows = routes::compare_rows(&cfg)?;
            let failed = rows.iter().filter(|r| !r.pass).count();
            emit("compare", &cfg, &cfg, &rows, &[], Some(failed == 0))?;
            if failed > 0 {
                return Err(CliError::ChecksFailed(failed));
            }
            Ok(())
        }
        Command::Fig1 { preset, args } => run_fig1(preset, &args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rabi-ising: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
