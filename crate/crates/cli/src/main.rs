use std::process::ExitCode;

use clap::Parser;
use vfdm_cli::cli::{execute, init_threads, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match init_threads().and_then(|_| execute(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vfdm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
