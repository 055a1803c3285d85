use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use pi01_core::commands::run_command;
use pi01_core::scenario::{parse_scenario, Scenario};

/// Runs one check command against a scenario file and prints the report.
///
/// Exit status is 0 when every line passes, 1 when some check fails, and 2
/// for unreadable scenarios or unknown commands.
#[derive(Parser)]
#[command(name = "pi01", version)]
struct Cli {
    /// Scenario file; an empty scenario when absent.
    #[arg(short, long)]
    scenario: Option<PathBuf>,

    /// For example `verify twocol --n 1 --exhaustive` or `suite fast`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, required = true)]
    command: Vec<String>,
}

fn load(path: Option<&PathBuf>) -> Result<Scenario, String> {
    let Some(path) = path else {
        return Ok(Scenario::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_scenario(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let sc = match load(cli.scenario.as_ref()) {
        Ok(sc) => sc,
        Err(e) => {
            eprintln!("pi01: {e}");
            return ExitCode::from(2);
        }
    };
    match run_command(&cli.command.join(" "), &sc) {
        Ok(report) => {
            print!("{report}");
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("pi01: {e}");
            ExitCode::from(2)
        }
    }
}
