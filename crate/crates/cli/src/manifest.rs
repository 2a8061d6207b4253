//! Run manifests: enough provenance to re-execute a run bit-for-bit and to
//! detect when that fails. A manifest records the config file (by path and
//! content hash), the effective seed, the tool version, and a content hash
//! per emitted artifact. It deliberately contains no timestamps, so a
//! replayed run regenerates the manifest byte-identically too.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub config_path: String,
    pub config_sha256: String,
    pub seed: u64,
    pub version: String,
    /// Artifact file name → SHA-256 of its bytes.
    pub files: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

impl Manifest {
    pub fn new(
        experiment: &str,
        config_path: &str,
        config_text: &str,
        seed: u64,
        files: &[(String, String)],
    ) -> Self {
        let mut hashes = BTreeMap::new();
        for (name, content) in files {
            hashes.insert(name.clone(), sha256_hex(content.as_bytes()));
        }
        Self {
            experiment: experiment.to_string(),
            config_path: config_path.to_string(),
            config_sha256: sha256_hex(config_text.as_bytes()),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            files: hashes,
        }
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        serde_json::to_string_pretty(self)
            .map(|s| s + "\n")
            .map_err(|e| CliError::Other(format!("manifest serialization failed: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io { path: shown.clone(), source: e })?;
        serde_json::from_str(&text).map_err(|e| CliError::Config {
            path: shown,
            message: format!("not a run manifest: {e}"),
        })
    }
}

/// First place where two text artifacts differ: line and field location
/// plus both values, for actionable mismatch reports.
#[derive(Debug, Clone, PartialEq)]
pub struct Divergence {
    pub line: usize,
    pub field: usize,
    pub expected: String,
    pub got: String,
}

/// Scans two artifacts for their first divergent value. Lines are compared
/// in order; within a line, comma-separated fields are compared so CSV
/// mismatches name the exact cell.
pub fn first_divergence(expected: &str, got: &str) -> Option<Divergence> {
    let mut exp_lines = expected.lines();
    let mut got_lines = got.lines();
    let mut line_no = 0;
    loop {
        line_no += 1;
        match (exp_lines.next(), got_lines.next()) {
            (None, None) => return None,
            (e, g) => {
                let e = e.unwrap_or("<end of file>");
                let g = g.unwrap_or("<end of file>");
                if e == g {
                    continue;
                }
                let mut field_no = 0;
                let mut ef = e.split(',');
                let mut gf = g.split(',');
                loop {
                    field_no += 1;
                    match (ef.next(), gf.next()) {
                        (None, None) => break,
                        (a, b) => {
                            let a = a.unwrap_or("<missing>");
                            let b = b.unwrap_or("<missing>");
                            if a != b {
                                return Some(Divergence {
                                    line: line_no,
                                    field: field_no,
                                    expected: a.to_string(),
                                    got: b.to_string(),
                                });
                            }
                        }
                    }
                }
                return Some(Divergence {
                    line: line_no,
                    field: 1,
                    expected: e.to_string(),
                    got: g.to_string(),
                });
            }
        }
    }
}
