mod args;
mod commands;
mod config;
mod error;
mod output;

use clap::Parser;

use crate::args::Cli;
use crate::error::CliError;

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let argv = match config::expand_args(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => return report(&e),
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Err(e) = configure_threads() {
        return report(&e);
    }
    match commands::dispatch(cli) {
        Ok(()) => 0,
        Err(e) => report(&e),
    }
}

fn report(e: &CliError) -> i32 {
    eprintln!("error: {e}");
    e.exit_code()
}

/// `AUTHCAP_THREADS` caps the worker pool; unset means one worker per core.
fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("AUTHCAP_THREADS") else { return Ok(()) };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Usage(format!("AUTHCAP_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size the thread pool: {e}")))
}
