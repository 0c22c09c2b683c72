//! Run manifests: everything needed to repeat a run, plus content hashes of
//! the traces it produced.

use std::path::Path;

use apll_core::config::SimConfig;
use apll_core::ctrl::References;
use apll_core::engine::Scenario;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config_file::{parse_toml, read_file};
use crate::error::CliError;

pub const MANIFEST_FORMAT: &str = "apll-manifest v1";
pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub generator: String,
    pub config: SimConfig,
    pub runs: Vec<RunRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    /// Trace file name, relative to the manifest.
    pub trace: String,
    /// `sha256:` hash of the trace in git's blob encoding.
    pub trace_hash: String,
    /// How far each event was moved to land on a step boundary (s).
    pub event_snaps: Vec<f64>,
    pub scenario: Scenario,
    pub references: Vec<ReferenceEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceEntry {
    pub power: f64,
    pub references: References,
}

/// Hash of `bytes` as git stores a blob (`"blob <len>\0" + bytes`), with SHA-256.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    let hex: String = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}

impl Manifest {
    pub fn new(config: SimConfig) -> Manifest {
        Manifest {
            format: MANIFEST_FORMAT.to_string(),
            generator: format!("apll {}", env!("CARGO_PKG_VERSION")),
            config,
            runs: Vec::new(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn read(path: &Path) -> Result<Manifest, CliError> {
        let m: Manifest = parse_toml(&read_file(path)?, path)?;
        if m.format != MANIFEST_FORMAT {
            return Err(CliError::Usage(format!("{}: unsupported manifest format '{}'", path.display(), m.format)));
        }
        m.config.validate()?;
        Ok(m)
    }
}
