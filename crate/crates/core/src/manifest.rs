//! Run manifests: every output directory records the command, the hash of
//! its resolved configuration, tool version, and produced artifacts, so any
//! result can be traced back to an exact invocation.

use crate::{Error, Result};
use sha2::{Digest, Sha256};
use std::path::Path;

pub const MANIFEST_FILE: &str = "run_manifest.json";

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub tool_version: String,
    pub created_utc: String,
    pub artifacts: Vec<String>,
}

/// SHA-256 of the canonical JSON encoding of the resolved configuration.
pub fn config_hash<T: serde::Serialize>(cfg: &T) -> Result<String> {
    let bytes = serde_json::to_vec(cfg).map_err(|e| Error::Format(e.to_string()))?;
    let mut h = Sha256::new();
    h.update(&bytes);
    Ok(hex_string(&h.finalize()))
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_manifest(
    dir: &Path,
    command: &str,
    config_hash: String,
    artifacts: Vec<String>,
) -> Result<RunManifest> {
    let m = RunManifest {
        command: command.to_string(),
        config_hash,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        created_utc: now_utc(),
        artifacts,
    };
    std::fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(&m).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(dir.join(MANIFEST_FILE), json)?;
    Ok(m)
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    let bytes = std::fs::read(dir.join(MANIFEST_FILE))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Format(e.to_string()))
}

fn now_utc() -> String {
    // Epoch seconds rendered as ISO-ish UTC; avoids a date dependency.
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let days = secs / 86_400;
    let rem = secs % 86_400;
    let (h, m, s) = (rem / 3600, (rem % 3600) / 60, rem % 60);
    // Civil-from-days (Howard Hinnant's algorithm).
    let z = days as i64 + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z.rem_euclid(146_097);
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = doy - (153 * mp + 2) / 5 + 1;
    let mth = if mp < 10 { mp + 3 } else { mp - 9 };
    let y = if mth <= 2 { y + 1 } else { y };
    format!("{y:04}-{mth:02}-{d:02}T{h:02}:{m:02}:{s:02}Z")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = config_hash(&serde_json::json!({"lr": 0.01, "steps": 10})).unwrap();
        let b = config_hash(&serde_json::json!({"lr": 0.01, "steps": 10})).unwrap();
        let c = config_hash(&serde_json::json!({"lr": 0.02, "steps": 10})).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn manifest_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let m = write_manifest(
            dir.path(),
            "suite rf_stress",
            "deadbeef".into(),
            vec!["records.csv".into()],
        )
        .unwrap();
        let back = read_manifest(dir.path()).unwrap();
        assert_eq!(back.command, m.command);
        assert_eq!(back.artifacts, vec!["records.csv".to_string()]);
        assert!(back.created_utc.ends_with('Z'));
    }
}
