use std::process::ExitCode;

use clap::Parser;
use pauli_tomo::{run, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // Usage errors are config errors (1); exit code 2 means a broken contract.
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pauli-tomo: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
