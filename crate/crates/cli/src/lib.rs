//! Command-line front end for `cavmem`: every subcommand reads one TOML run
//! config, writes its data files and a JSON report into the output
//! directory, and prints a short summary.
//!
//! Exit codes: 0 on success, 2 for configuration or input errors, 3 when a
//! computation, fit or search fails.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{Context, Format, Outcome};
pub use config::RunConfig;
pub use error::{CliError, CliResult};
pub use report::{Report, ReproRow, Tolerance};

#[derive(Debug, Parser)]
#[command(name = "cavmem", version, about = "Cavity-enhanced Raman memory models, simulations and analyses")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run config; the built-in reference setup when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "cavmem-out")]
    pub out: PathBuf,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Encoding of the data files.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Cavity design numbers: FSR ladder, suppression factors, energy reduction.
    Design,
    /// Efficiency and noise floor versus control pulse energy.
    Simulate,
    /// Cavity transmission spectrum with fitted visibilities.
    Spectrum,
    /// Length and birefringence setting for the triple-resonance condition.
    Resonance,
    /// Cavity-length lock simulation.
    Lock,
    /// Synthetic time tags and count series from known parameters.
    Synth,
    /// Efficiency, mu1, noise scaling and lifetime from recorded data.
    Analyze,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Design => "design",
            Command::Simulate => "simulate",
            Command::Spectrum => "spectrum",
            Command::Resonance => "resonance",
            Command::Lock => "lock",
            Command::Synth => "synth",
            Command::Analyze => "analyze",
        }
    }
}

/// Runs `command` on an already validated config and assembles its report.
/// Nothing but the command's data files is written.
pub fn execute(command: Command, cfg: &RunConfig, ctx: &Context) -> CliResult<Report> {
    let outcome = match command {
        Command::Design => commands::design(cfg, ctx),
        Command::Simulate => commands::simulate_cmd(cfg, ctx),
        Command::Spectrum => commands::spectrum(cfg, ctx),
        Command::Resonance => commands::resonance(cfg, ctx),
        Command::Lock => commands::lock(cfg, ctx),
        Command::Synth => commands::synth(cfg, ctx),
        Command::Analyze => commands::analyze(cfg, ctx),
    }?;
    Ok(Report {
        tool: report::TOOL.into(),
        version: report::VERSION.into(),
        command: command.name().into(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        files: outcome.files,
        outputs: outcome.outputs,
        reproduction: outcome.reproduction,
        failure: outcome.failure,
    })
}

/// Loads the config, applies the seed override, runs the command and writes
/// `<command>_report.json` next to its data.
pub fn run(cli: &Cli) -> CliResult<Report> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", cli.out.display())))?;
    let ctx = Context {
        out_dir: &cli.out,
        format: cli.format,
    };
    let report = execute(cli.command, &cfg, &ctx)?;
    let name = format!("{}_report.json", cli.command.name());
    report::write_atomic(&cli.out, &name, report.to_json().as_bytes())?;
    Ok(report)
}

/// Process entry point; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(report) => {
            print!("{}", report.summary());
            if report.failure.is_some() {
                3
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("cavmem: {e}");
            e.exit_code()
        }
    }
}
