//! Scenario runner for the adaptive PLL simulator: configuration files,
//! trace CSV, run manifests and plot data.

pub mod commands;
pub mod config_file;
pub mod error;
pub mod manifest;
pub mod plot;
pub mod trace_csv;

pub use error::CliError;

/// Writes to stdout, ignoring a closed pipe (`apll ... | head`).
pub fn say(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}
