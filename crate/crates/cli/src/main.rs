mod args;
mod commands;
mod output;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command, Layer, RunConfig};
use output::{create, open, CliError, CliResult, Floats};

fn read_config(cli: &Cli) -> CliResult<RunConfig> {
    let Some(path) = &cli.config else {
        return Ok(RunConfig::default());
    };
    let mut text = String::new();
    std::io::Read::read_to_string(&mut open(path)?, &mut text)?;
    toml::from_str(&text).map_err(|source| CliError::Config {
        path: path.clone(),
        source,
    })
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| output::usage(format!("thread pool: {e}")))?;
    }
    let file = read_config(&cli)?;
    let floats = Floats {
        decimals: cli.round,
    };
    let bytes = match cli.command {
        Command::Simulate(a) => commands::simulate_cmd(a.layer(file.simulate.unwrap_or_default()))?,
        Command::Mle(a) => commands::mle_cmd(a.layer(file.mle.unwrap_or_default()), floats)?,
        Command::Em(a) => commands::em_cmd(a.layer(file.em.unwrap_or_default()), floats)?,
        Command::Loglik(a) => {
            commands::loglik_cmd(a.layer(file.loglik.unwrap_or_default()), floats)?
        }
        Command::Scan(a) => commands::scan_cmd(a.layer(file.scan.unwrap_or_default()), floats)?,
        Command::Bootstrap(a) => {
            commands::bootstrap_cmd(a.layer(file.bootstrap.unwrap_or_default()), floats)?
        }
        Command::Trees(a) => commands::trees_cmd(a.layer(file.trees.unwrap_or_default()))?,
    };
    match &cli.output {
        Some(path) => create(path)?.write_all(&bytes)?,
        None => std::io::stdout().lock().write_all(&bytes)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let name = cli.command.name();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cbp {name}: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
