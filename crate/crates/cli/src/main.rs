use std::process::ExitCode;

use bmcopula_cli::{commands, init_threads, Cli, RunConfig};
use clap::Parser;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = init_threads()
        .and_then(|()| RunConfig::from_cli(&cli))
        .and_then(|cfg| commands::run(&cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bmcopula: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
