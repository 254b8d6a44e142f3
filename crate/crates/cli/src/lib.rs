//! Command-line front end: grid evaluation, sampling, verification and the
//! figure analogues, with CSV and SVG output.

pub mod commands;
pub mod config;
pub mod error;
pub mod grid;
pub mod svg;
pub mod verify;

pub use config::{Cli, Command, GridSpec, RunConfig};
pub use error::CliError;

/// Caps the global rayon pool at `BMCOPULA_THREADS` when set.
pub fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("BMCOPULA_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::Usage(format!("BMCOPULA_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}
