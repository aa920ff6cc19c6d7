use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = brinkman_vem_cli::Cli::parse();
    match brinkman_vem_cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
