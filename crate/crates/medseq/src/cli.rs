//! Argument parsing, thread-pool setup and output writing.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{resolve, Command, Format, Overrides, Resolved, Runtime, RunConfig};
use crate::emit::canonical_json;
use crate::error::{CliError, CliResult};
use crate::run::{run, RunOutput};

/// Environment variable consulted when no thread count is configured.
pub const THREADS_ENV: &str = "MEDSEQ_THREADS";

#[derive(Debug, Parser)]
#[command(name = "medseq", version, about = "Interventional mediation effects of longitudinal modified treatment policies")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// One-step estimate of θ(d', d*).
    Estimate(Flags),
    /// Total, direct and indirect effects of d' against d*.
    Decompose(Flags),
    /// Draw a panel from a structural model.
    Simulate(Flags),
    /// Monte Carlo ground truth of θ(d', d*) for a structural model.
    Oracle(Flags),
    /// Repeated simulation and estimation against a known truth.
    Benchmark(Flags),
    /// Effect-modification slopes on baseline covariates.
    Effectmod(Flags),
}

#[derive(Debug, Args)]
struct Flags {
    /// Run configuration document (TOML, or JSON by extension).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Wide-format CSV panel.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Schema document for `--data`.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Master seed (estimator.seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; falls back to MEDSEQ_THREADS.
    #[arg(long)]
    threads: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Full JSON document or flat CSV table.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Built-in simulation design (two_period).
    #[arg(long)]
    builtin: Option<String>,
    /// Sign of the second treatment's effect in the built-in design.
    #[arg(long = "U", allow_negative_numbers = true)]
    u: Option<f64>,
    /// Sign of the second mediator's effect in the built-in design.
    #[arg(long = "V", allow_negative_numbers = true)]
    v: Option<f64>,
    /// Units per simulated dataset.
    #[arg(long)]
    n: Option<usize>,
    /// Benchmark replicates per cell.
    #[arg(long)]
    replicates: Option<usize>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

fn split(sub: Sub) -> (Command, Flags) {
    match sub {
        Sub::Estimate(f) => (Command::Estimate, f),
        Sub::Decompose(f) => (Command::Decompose, f),
        Sub::Simulate(f) => (Command::Simulate, f),
        Sub::Oracle(f) => (Command::Oracle, f),
        Sub::Benchmark(f) => (Command::Benchmark, f),
        Sub::Effectmod(f) => (Command::Effectmod, f),
    }
}

fn threads_from_env() -> CliResult<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(s) if !s.trim().is_empty() => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got '{s}'"))),
        _ => Ok(None),
    }
}

/// Runs `resolved` on a pool of `threads` workers (the rayon default when
/// `None`).
pub fn run_with_threads(resolved: &Resolved, threads: Option<usize>) -> CliResult<RunOutput> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run(resolved))
}

/// Rendered output bytes for `format`.
pub fn render(output: &RunOutput, format: Format) -> CliResult<String> {
    match format {
        Format::Json => Ok(canonical_json(&output.document.to_value())),
        Format::Csv => output.table.to_csv(),
    }
}

fn write_outputs(output: &RunOutput, runtime: &Runtime) -> CliResult<()> {
    let text = render(output, runtime.format)?;
    match &runtime.output {
        Some(path) => {
            std::fs::write(path, text)?;
            if let (Some(schema), Format::Csv) = (&output.schema, runtime.format) {
                let schema_text = toml::to_string(schema).map_err(|e| CliError::Data(e.to_string()))?;
                std::fs::write(schema_path(path), schema_text)?;
            }
        }
        None => print!("{text}"),
    }
    Ok(())
}

/// Where `simulate --format csv --output <path>` writes the matching schema.
pub fn schema_path(output: &Path) -> PathBuf {
    output.with_extension("schema.toml")
}

fn execute(args: Vec<OsString>) -> CliResult<()> {
    let cli = Cli::try_parse_from(args).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
            print!("{e}");
            CliError::Config(String::new())
        }
        _ => CliError::Config(e.to_string()),
    })?;
    let (command, flags) = split(cli.command);
    let mut config = match &flags.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    config.apply(Overrides {
        data: flags.data,
        schema: flags.schema,
        seed: flags.seed,
        threads: flags.threads,
        output: flags.output,
        format: flags.format.map(|f| match f {
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
        }),
        builtin: flags.builtin,
        u: flags.u,
        v: flags.v,
        n: flags.n,
        replicates: flags.replicates,
    });
    let (resolved, mut runtime) = resolve(&config, Some(command))?;
    if runtime.threads.is_none() {
        runtime.threads = threads_from_env()?;
    }
    if runtime.threads == Some(0) {
        return Err(CliError::Config("thread count must be >= 1".into()));
    }
    let output = run_with_threads(&resolved, runtime.threads)?;
    write_outputs(&output, &runtime)
}

/// Entry point; returns the process exit status.
pub fn main_with<I: IntoIterator<Item = OsString>>(args: I) -> i32 {
    match execute(args.into_iter().collect()) {
        Ok(()) => 0,
        Err(CliError::Config(msg)) if msg.is_empty() => 0,
        Err(e) => {
            eprintln!("medseq: {e}");
            e.exit_code()
        }
    }
}
