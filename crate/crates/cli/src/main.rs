use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use dlm_cli::{error_line, resolve_config, run, Command};

#[derive(Parser)]
#[command(name = "dlm", version, about = "Discrete Langevin sampler experiments, written as CSV")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Free-neuron activation curves.
    Activation(Common),
    /// Clock-model magnetization and specific heat over β.
    Clock(Common),
    /// Ising magnetization and specific heat over β.
    Ising(Common),
    /// KL divergence from the Boltzmann distribution along a run.
    BmKl(Common),
    /// r(ε) and τ'(τ_ref) calibration tables.
    Calibrate(Common),
    /// OU membrane-potential trajectories.
    Trajectory(Common),
}

#[derive(Args)]
struct Common {
    /// Flat key = value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// RNG seed; overrides the config and the DLM_SEED variable.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// key=value override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

fn execute(cli: Cli) -> Result<()> {
    let (command, c) = match cli.command {
        Sub::Activation(c) => (Command::Activation, c),
        Sub::Clock(c) => (Command::Clock, c),
        Sub::Ising(c) => (Command::Ising, c),
        Sub::BmKl(c) => (Command::BmKl, c),
        Sub::Calibrate(c) => (Command::Calibrate, c),
        Sub::Trajectory(c) => (Command::Trajectory, c),
    };
    let cfg = resolve_config(c.config.as_deref(), &c.set, c.seed)?;
    let csv = run(command, &cfg, c.threads)?;
    match c.out {
        Some(path) => std::fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().lock().write_all(csv.as_bytes()).context("writing stdout")?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::FAILURE
        }
    }
}
