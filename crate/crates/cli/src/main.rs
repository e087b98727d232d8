use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use epihom::{emit_single_cell, execute, parse_config, run_single_cell_demo, CliError};

/// Electropermeabilization homogenization experiments.
#[derive(Parser)]
#[command(name = "epihom", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named in the config and write its outputs.
    Run { config: PathBuf },
    /// Check the config and print it with every default filled in.
    Validate { config: PathBuf },
    /// Run the single-cell demonstration.
    DemoCell { config: PathBuf },
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Run { config } => {
            let spec = parse_config(&config)?;
            for p in execute(&spec)? {
                println!("{}", p.display());
            }
        }
        Command::Validate { config } => print!("{}", parse_config(&config)?.normalized()),
        Command::DemoCell { config } => {
            let spec = parse_config(&config)?;
            let result = run_single_cell_demo(&spec)?;
            for p in emit_single_cell(&result, &spec, &spec.output_dir)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
