use std::process::ExitCode;

use clap::Parser;
use metricforge::io::write_json;
use metricforge::tolerance::Tolerance;

mod args;
mod commands;

use args::{Cli, Format};
use commands::InputError;

const HOLDS: u8 = 0;
const VIOLATED: u8 = 1;
const INPUT_ERROR: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(InputError(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(INPUT_ERROR)
        }
    }
}

fn execute(cli: &Cli) -> Result<u8, InputError> {
    let g = &cli.global;
    if !(g.tol > 0.0 && g.tol.is_finite()) {
        return Err(InputError(format!("--tol must be positive and finite, got {}", g.tol)));
    }
    if let Some(threads) = g.threads {
        if threads == 0 {
            return Err(InputError("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    let outcome = commands::run(&cli.command, Tolerance::relative(g.tol))?;
    match g.format {
        Format::Human => outcome.human.iter().for_each(|line| println!("{line}")),
        Format::Json => println!("{}", serde_json::to_string_pretty(&outcome.envelope).expect("reports serialize")),
    }
    if let Some(path) = &g.output {
        write_json(path, &outcome.envelope)?;
    }
    Ok(match outcome.envelope.holds {
        Some(false) => VIOLATED,
        _ => HOLDS,
    })
}
