//! Per-run output directories and their manifests.

use std::fs;
use std::path::{Path, PathBuf};

use multicalib::evolution::TraceRecord;
use multicalib::orchestrator::{CalibrationOptions, SolutionSet};
use serde::{Deserialize, Serialize};

use crate::Failure;

pub const SOLUTIONS_FILE: &str = "solutions.json";
pub const TRACE_FILE: &str = "trace.ndjson";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Link from a continued run to the run it started from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Parent {
    pub solutions: PathBuf,
    pub selection: String,
}

/// Index of one run directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub command: String,
    pub problem: String,
    pub options: CalibrationOptions,
    pub seed: u64,
    pub started_at: String,
    pub finished_at: String,
    pub elapsed_seconds: f64,
    pub evaluations: u64,
    pub set_size: usize,
    pub best_loss: f64,
    /// Free vectors placed at the front of the initial population.
    pub seeded: Vec<Vec<f64>>,
    pub parent: Option<Parent>,
    pub outputs: Outputs,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Outputs {
    pub solutions: String,
    pub trace: String,
}

/// Creates `<out>/run-NNN` with the next unused number.
pub fn create_run_dir(out: &Path) -> Result<(String, PathBuf), Failure> {
    fs::create_dir_all(out)
        .map_err(|e| Failure::Input(format!("cannot create {}: {e}", out.display())))?;
    let entries = fs::read_dir(out)
        .map_err(|e| Failure::Input(format!("cannot read {}: {e}", out.display())))?;
    let next = entries
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            e.file_name()
                .to_str()
                .and_then(|n| n.strip_prefix("run-"))
                .and_then(|n| n.parse::<u32>().ok())
        })
        .max()
        .map_or(1, |n| n + 1);
    // create_dir (not _all) fails if a concurrent run grabbed the same id
    for id in next.. {
        let run_id = format!("run-{id:03}");
        let dir = out.join(&run_id);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok((run_id, dir)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => {
                return Err(Failure::Runtime(format!(
                    "cannot create {}: {e}",
                    dir.display()
                )))
            }
        }
    }
    unreachable!("run ids exhausted")
}

pub fn write_run(
    dir: &Path,
    manifest: &RunManifest,
    set: &SolutionSet,
    trace: &[TraceRecord],
) -> Result<(), Failure> {
    set.save(dir.join(SOLUTIONS_FILE)).map_err(Failure::from)?;
    let mut ndjson = String::new();
    for t in trace {
        ndjson.push_str(&serde_json::to_string(t).map_err(|e| Failure::Runtime(e.to_string()))?);
        ndjson.push('\n');
    }
    write(&dir.join(TRACE_FILE), &ndjson)?;
    let json =
        serde_json::to_string_pretty(manifest).map_err(|e| Failure::Runtime(e.to_string()))?;
    write(&dir.join(MANIFEST_FILE), &(json + "\n"))
}

pub fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Runtime(format!("writing {}: {e}", path.display())))
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}
