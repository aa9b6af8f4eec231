use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use skylink::commands::{self, Command};
use skylink::config::{RawConfig, Source, Sweep};
use skylink::Error;

const DEFAULT_OUT_DIR: &str = "skylink-out";
const OUT_DIR_ENV: &str = "SKYLINK_SIM_OUT";

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Budget,
    Spectrum,
    Stokes,
    Profile,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Budget => Command::Budget,
            Cmd::Spectrum => Command::Spectrum,
            Cmd::Stokes => Command::Stokes,
            Cmd::Profile => Command::Profile,
        }
    }
}

/// Free-space channel noise-budget simulator.
///
/// Exit codes: 0 success, 2 configuration error, 3 numerical failure,
/// 1 other failures (for example unwritable output).
#[derive(Debug, Parser)]
#[command(name = "skylink-sim", version)]
struct Cli {
    /// Pipeline to run.
    #[arg(value_enum)]
    command: Cmd,

    /// Scenario file (INI).
    #[arg(long)]
    config: PathBuf,

    /// Output directory. Falls back to [run] out_dir, then $SKYLINK_SIM_OUT,
    /// then ./skylink-out.
    #[arg(long)]
    out: Option<PathBuf>,

    /// RNG seed, overriding [run] seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Parameter sweep `section.key=start:stop:count`.
    #[arg(long)]
    sweep: Option<String>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        e if e.is_numerical() => 3,
        Error::Io { .. } => 1,
        _ => 2,
    }
}

fn run(cli: &Cli) -> Result<(PathBuf, usize), Error> {
    let mut raw = RawConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        raw.set("run", "seed", &seed.to_string(), Source::CommandLine)?;
    }
    let sweep = cli.sweep.as_deref().map(str::parse::<Sweep>).transpose()?;
    let command = Command::from(cli.command);
    let outputs = commands::run(command, &raw, sweep.as_ref())?;
    let out_dir = match &cli.out {
        Some(dir) => dir.clone(),
        None => skylink::config::ScenarioConfig::from_raw(&raw)?
            .out_dir
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)),
    };
    commands::write_outputs(&out_dir, &outputs)?;
    Ok((out_dir, outputs.len()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok((dir, n)) => {
            eprintln!("wrote {n} file(s) to {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("skylink-sim: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
