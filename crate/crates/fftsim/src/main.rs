use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use codedfft::FaultScenario;
use fftsim::{cmd_bounds, cmd_run, cmd_sweep, load_config, load_faults, write_bounds_csv, write_csv, ExperimentConfig};

#[derive(Parser)]
#[command(name = "fftsim", version, about = "Coded distributed FFT experiments on a simulated cluster")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Fault file (`stage,node,kind[,delay]` per line); overrides `faults` in the config.
    #[arg(long)]
    faults: Option<PathBuf>,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Closed-form cost bounds for the configured sizes.
    Bounds(Common),
    /// Run the uncoded and coded pipelines once and check them.
    Run(Common),
    /// Cost sweep over the `sweep.*` grid.
    Sweep(Common),
}

fn setup(c: &Common) -> anyhow::Result<(ExperimentConfig, FaultScenario)> {
    let cfg = match &c.config {
        Some(p) => load_config(p)?,
        None => ExperimentConfig::default(),
    };
    let cfg = cfg.with_overrides(&c.set)?;
    let faults = match c.faults.as_ref().or(cfg.faults.as_ref()) {
        Some(p) => load_faults(p)?,
        None => FaultScenario::none(),
    };
    Ok((cfg, faults))
}

fn sink(out: &Option<PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout()),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cmd: Cmd) -> anyhow::Result<u8> {
    match cmd {
        Cmd::Bounds(c) => {
            let (cfg, _) = setup(&c)?;
            write_bounds_csv(sink(&c.out)?, &cmd_bounds(&cfg)?)?;
            Ok(0)
        }
        Cmd::Run(c) => {
            let (cfg, faults) = setup(&c)?;
            let outcome = cmd_run(&cfg, &faults)?;
            print!("{}", outcome.report);
            if c.out.is_none() {
                println!();
            }
            write_csv(sink(&c.out)?, std::slice::from_ref(&outcome.row))?;
            Ok(outcome.status.exit_code() as u8)
        }
        Cmd::Sweep(c) => {
            let (cfg, faults) = setup(&c)?;
            write_csv(sink(&c.out)?, &cmd_sweep(&cfg, &faults))?;
            Ok(0)
        }
    }
}
