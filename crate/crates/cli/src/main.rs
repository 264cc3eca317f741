//! `doping`: exit code 0 when nothing was found, 1 when a violation was found, 2 on
//! usage errors and 3 on data errors.

mod args;
mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command, EmissionsCommand, FairnessCommand};
use commands::{Finding, UsageError};
use manifest::RunManifest;

fn run(argv: Vec<String>) -> anyhow::Result<Finding> {
    let cli =
        Cli::try_parse_from(std::iter::once("doping".to_string()).chain(argv.iter().cloned()))?;
    if let Command::Replay(r) = &cli.command {
        let m = RunManifest::load(&r.manifest)?;
        if m.command_line.first().is_some_and(|c| c == "replay") {
            return Err(UsageError("a manifest cannot replay another replay".into()).into());
        }
        return run(m.replay_argv(cli.out_dir.as_deref()));
    }
    let out_dir: PathBuf = cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    if !matches!(cli.command, Command::Serve(_)) {
        std::fs::create_dir_all(&out_dir)?;
    }
    let report = match &cli.command {
        Command::Falsify(a) => commands::falsify_traces(a, cli.seed, &out_dir)?,
        Command::Oracle(a) => commands::run_oracle(a, &out_dir)?,
        Command::Emissions(EmissionsCommand::Predict(a)) => {
            commands::emissions_predict(a, &out_dir)?
        }
        Command::Emissions(EmissionsCommand::Falsify(a)) => {
            commands::emissions_falsify(a, cli.seed, &out_dir)?
        }
        Command::Fairness(FairnessCommand::Monitor(a)) => {
            commands::fairness_monitor(a, cli.seed, &out_dir)?
        }
        Command::Serve(a) => commands::serve(a, cli.seed)?,
        Command::Replay(_) => unreachable!("handled above"),
    };
    if let Some(primary) = &report.primary {
        let config = serde_json::to_value(&cli)?;
        let m = RunManifest::new(&argv, config, cli.seed, report.outputs.clone());
        let path = m.write(primary)?;
        if !cli.quiet {
            println!("{}", serde_json::to_string_pretty(&report.summary)?);
            println!("manifest: {}", path.display());
        }
    }
    Ok(report.finding)
}

fn main() -> ExitCode {
    match run(std::env::args().skip(1).collect()) {
        Ok(Finding::Clean) => ExitCode::SUCCESS,
        Ok(Finding::Violation) => ExitCode::from(1),
        Err(e) => {
            if let Some(c) = e.downcast_ref::<clap::Error>() {
                let _ = c.print();
                return ExitCode::from(if c.use_stderr() { 2 } else { 0 });
            }
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
