//! Run reports and atomic output writing.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const TOOL: &str = "strata";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub status: Status,
    /// The quantity compared against the tolerance, when there is one.
    pub residual: Option<f64>,
    pub evidence: Value,
}

impl CheckResult {
    pub fn new(name: &str, pass: bool, residual: Option<f64>, evidence: Value) -> Self {
        Self {
            name: name.to_string(),
            status: if pass { Status::Pass } else { Status::Fail },
            residual,
            evidence,
        }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

/// Run facts that legitimately differ between identical runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub wall_clock_seconds: f64,
    pub threads: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// The manifest as run, after command-line overrides.
    pub manifest: Value,
    pub checks: Vec<CheckResult>,
    pub results: Value,
    pub exit_status: Status,
    pub metadata: Metadata,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.exit_status == Status::Pass
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// The JSON form without `metadata`, which is what determinism compares.
    pub fn deterministic_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v.as_object_mut().expect("object").remove("metadata");
        serde_json::to_string_pretty(&v).expect("value serializes")
    }
}

/// Writes through a sibling temp file and a rename so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp: PathBuf = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunReport {
        RunReport {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: "strata".into(),
            manifest: serde_json::json!({"command": "strata"}),
            checks: vec![CheckResult::new(
                "dominant-stratum",
                true,
                Some(0.0),
                Value::Null,
            )],
            results: Value::Null,
            exit_status: Status::Pass,
            metadata: Metadata {
                wall_clock_seconds: 1.5,
                threads: 4,
            },
        }
    }

    #[test]
    fn deterministic_form_drops_metadata() {
        let a = sample();
        let mut b = sample();
        b.metadata.wall_clock_seconds = 99.0;
        assert_ne!(a.to_json(), b.to_json());
        assert_eq!(a.deterministic_json(), b.deterministic_json());
        assert!(!a.deterministic_json().contains("wall_clock"));
    }

    #[test]
    fn json_round_trips() {
        let a = sample();
        let back: RunReport = serde_json::from_str(&a.to_json()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = std::env::temp_dir().join(format!("strata-atomic-{}", std::process::id()));
        let path = dir.join("x.json");
        write_atomic(&path, "one").unwrap();
        write_atomic(&path, "two").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(std::fs::read_dir(&dir).unwrap().count(), 1);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
