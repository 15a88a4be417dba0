use std::process::ExitCode;

use clap::Parser;

mod args;
mod commands;
mod report;

use args::{Cli, Command};

/// Exit status: 0 pass, 1 assertion failure, 2 usage or input error.
fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Golden => commands::golden(&cli.global),
        Command::Equiv(a) => commands::equiv(&cli.global, a),
        Command::Gradcheck(a) => commands::gradcheck(&cli.global, a),
        Command::Bench(a) => commands::bench(&cli.global, a),
        Command::Forecast(a) => commands::forecast(&cli.global, a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
