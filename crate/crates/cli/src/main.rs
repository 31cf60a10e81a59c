mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { commands::EXIT_VALIDATION } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Analyze(a) => commands::analyze(&a),
        Command::Sweep(a) => commands::sweep(&a),
        Command::Table1(a) => commands::table1(&a),
        Command::Bench(a) => commands::bench(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
