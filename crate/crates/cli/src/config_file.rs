//! TOML configuration and scenario files.
//!
//! Every key is optional; a missing key keeps its default and an unknown
//! key is an error. Sections mirror [`SimConfig`]:
//!
//! ```toml
//! [plant]
//! L = 9.5e-3
//! r = 0.64
//!
//! [pll]
//! detector = "atan"     # or "srf"
//! variant = "adaptive"  # or "baseline"
//!
//! [sim]
//! dt = 1e-5
//! duration = 3.0
//! ```
//!
//! A key whose name belongs to exactly one section may also be written
//! before the first section header (`L = 9.5e-3`).

use std::fs;
use std::path::Path;

use apll_core::config::SimConfig;
use apll_core::engine::Scenario;
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::error::CliError;

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::MissingFile { path: path.to_path_buf() },
        _ => CliError::io(path, e),
    })
}

/// Parses TOML, reporting errors with a 1-based line and column.
pub fn parse_toml<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T, CliError> {
    toml::from_str(text).map_err(|e| {
        let start = e.span().map(|s| s.start).unwrap_or(0).min(text.len());
        let before = &text[..start];
        let line = before.matches('\n').count() + 1;
        let column = before.len() - before.rfind('\n').map(|i| i + 1).unwrap_or(0) + 1;
        CliError::Syntax { path: path.to_path_buf(), line, column, message: e.message().trim().to_string() }
    })
}

/// 1-based line of the first `key = ...` assignment in `text`.
fn line_of_key(text: &str, key: &str) -> usize {
    text.lines()
        .position(|l| l.trim_start().strip_prefix(key).is_some_and(|r| r.trim_start().starts_with('=')))
        .map_or(1, |i| i + 1)
}

/// Moves bare top-level keys into the one section that defines them.
fn hoist_bare_keys(table: &mut toml::Table, text: &str, path: &Path) -> Result<(), CliError> {
    let defaults = toml::Table::try_from(SimConfig::default()).expect("defaults serialize");
    let bare: Vec<String> = table.iter().filter(|(_, v)| !v.is_table()).map(|(k, _)| k.clone()).collect();
    for key in bare {
        let owners: Vec<&String> = defaults
            .iter()
            .filter(|(_, sec)| sec.as_table().is_some_and(|t| t.contains_key(&key)))
            .map(|(name, _)| name)
            .collect();
        let err = |message: String| CliError::Syntax { path: path.to_path_buf(), line: line_of_key(text, &key), column: 1, message };
        let section = match owners.as_slice() {
            [one] => (*one).clone(),
            [] => return Err(err(format!("unknown key `{key}`"))),
            many => {
                let names: Vec<&str> = many.iter().map(|s| s.as_str()).collect();
                return Err(err(format!("key `{key}` is ambiguous outside a section; it exists in [{}]", names.join("], ["))));
            }
        };
        let value = table.remove(&key).expect("key present");
        let sec = table.entry(section.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        let sec = sec.as_table_mut().ok_or_else(|| err(format!("`{section}` must be a section")))?;
        if sec.contains_key(&key) {
            return Err(err(format!("key `{key}` given both bare and in [{section}]")));
        }
        sec.insert(key, value);
    }
    Ok(())
}

pub fn parse_config_str(text: &str, path: &Path) -> Result<SimConfig, CliError> {
    let mut table: toml::Table = parse_toml(text, path)?;
    let cfg: SimConfig = if table.values().all(toml::Value::is_table) {
        parse_toml(text, path)?
    } else {
        hoist_bare_keys(&mut table, text, path)?;
        SimConfig::deserialize(toml::Value::Table(table)).map_err(|e| {
            let msg = e.message().trim().to_string();
            let key = msg.split('`').nth(1).unwrap_or("");
            CliError::Syntax { path: path.to_path_buf(), line: line_of_key(text, key), column: 1, message: msg }
        })?
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Reads and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<SimConfig, CliError> {
    parse_config_str(&read(path)?, path)
}

/// The configuration from `path`, or the defaults.
pub fn load_config(path: Option<&Path>) -> Result<SimConfig, CliError> {
    match path {
        Some(p) => parse_config(p),
        None => Ok(SimConfig::default()),
    }
}

pub fn parse_scenario(path: &Path) -> Result<Scenario, CliError> {
    let sc: Scenario = parse_toml(&read(path)?, path)?;
    sc.validate().map_err(CliError::Usage)?;
    Ok(sc)
}

pub fn read_file(path: &Path) -> Result<String, CliError> {
    read(path)
}

pub fn config_to_toml(cfg: &SimConfig) -> String {
    toml::to_string_pretty(cfg).expect("configuration serializes")
}
