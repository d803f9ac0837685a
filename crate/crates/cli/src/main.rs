use std::process::ExitCode;

use clap::Parser;
use dfgp_cli::{configure_threads, run, Cli, CliError};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match configure_threads().and_then(|()| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::GradcheckFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{}: {e}", e.kind());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
