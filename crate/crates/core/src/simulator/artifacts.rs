use std::fs;
use std::path::Path;

use super::{GameRun, SimError};

pub const STATE_FILE: &str = "state.json";
pub const TXLOG_FILE: &str = "txlog.jsonl";
pub const RELAY_FILE: &str = "relay.jsonl";
pub const REPORT_FILE: &str = "report.json";

/// The three public files, exactly as written to disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicArtifacts {
    pub state_json: String,
    pub txlog_jsonl: String,
    pub relay_jsonl: String,
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), SimError> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|source| SimError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn read(dir: &Path, name: &str) -> Result<String, SimError> {
    let path = dir.join(name);
    fs::read_to_string(&path).map_err(|source| SimError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_artifacts(dir: &Path, run: &GameRun) -> Result<(), SimError> {
    fs::create_dir_all(dir).map_err(|source| SimError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let artifacts = run.artifacts();
    write(dir, STATE_FILE, &artifacts.state_json)?;
    write(dir, TXLOG_FILE, &artifacts.txlog_jsonl)?;
    write(dir, RELAY_FILE, &artifacts.relay_jsonl)?;
    write(dir, REPORT_FILE, &run.report.to_json())
}

/// Reads the public files that sit next to a report.
pub fn load_artifacts(dir: &Path) -> Result<PublicArtifacts, SimError> {
    Ok(PublicArtifacts {
        state_json: read(dir, STATE_FILE)?,
        txlog_jsonl: read(dir, TXLOG_FILE)?,
        relay_jsonl: read(dir, RELAY_FILE)?,
    })
}
