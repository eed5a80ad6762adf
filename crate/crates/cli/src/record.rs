//! Run records, artifact writing and byte-exact replay.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use aqc::io::write_atomic;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::commands::{self, Outputs};
use crate::config::{Command, ExperimentConfig};
use crate::CliError;

pub const RECORD_FILE: &str = "run_record.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Timing {
    pub started_unix: u64,
    pub elapsed_seconds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: Command,
    pub config_hash: String,
    pub version: String,
    pub timing: Timing,
    pub files: Vec<FileEntry>,
    pub warnings: Vec<String>,
    pub config: ExperimentConfig,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Run a command and write its payloads and record into `out_dir`; nothing is written on failure.
pub fn execute(command: Command, cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunRecord, CliError> {
    if let Some(c) = cfg.command {
        if c != command {
            return Err(CliError::Schema(format!("config is for `{}`, not `{}`", c.name(), command.name())));
        }
    }
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let clock = Instant::now();
    let Outputs { files, warnings } = commands::run(command, cfg)?;
    let mut manifest = Vec::with_capacity(files.len());
    for (name, bytes) in &files {
        write_atomic(&out_dir.join(name), bytes)?;
        manifest.push(FileEntry { name: name.clone(), bytes: bytes.len(), sha256: sha256_hex(bytes) });
    }
    let record = RunRecord {
        command,
        config_hash: cfg.digest(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        timing: Timing { started_unix, elapsed_seconds: clock.elapsed().as_secs_f64() },
        files: manifest,
        warnings,
        config: cfg.clone(),
    };
    let mut text = serde_json::to_string_pretty(&record).expect("record serializes");
    text.push('\n');
    write_atomic(&out_dir.join(RECORD_FILE), text.as_bytes())?;
    Ok(record)
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct FileDiff {
    pub name: String,
    /// First differing line, 1-based.
    pub line: usize,
    pub prior: String,
    pub rerun: String,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct DiffReport {
    pub prior_config_hash: String,
    pub rerun_config_hash: String,
    pub identical: Vec<String>,
    pub differing: Vec<FileDiff>,
    /// CSV payloads recorded before but not produced by the rerun.
    pub missing_in_rerun: Vec<String>,
    /// CSV payloads produced by the rerun but absent from the record.
    pub new_in_rerun: Vec<String>,
    pub rerun_warnings: Vec<String>,
}

impl DiffReport {
    pub fn is_empty(&self) -> bool {
        self.differing.is_empty() && self.missing_in_rerun.is_empty() && self.new_in_rerun.is_empty()
    }
}

fn first_difference(a: &str, b: &str) -> (usize, String, String) {
    let (mut la, mut lb) = (a.lines(), b.lines());
    let mut i = 0;
    loop {
        i += 1;
        match (la.next(), lb.next()) {
            (Some(x), Some(y)) if x == y => continue,
            (None, None) => return (i, String::new(), String::new()),
            (x, y) => return (i, x.unwrap_or_default().to_string(), y.unwrap_or_default().to_string()),
        }
    }
}

fn is_payload(name: &str) -> bool {
    name.ends_with(".csv")
}

/// Rerun the recorded command (or `config` in its place) in memory and byte-compare CSV payloads
/// with the artifacts next to the record.
pub fn replay(record_path: &Path, config: Option<&ExperimentConfig>) -> Result<DiffReport, CliError> {
    let text = std::fs::read_to_string(record_path).map_err(|e| CliError::Replay(format!("{}: {e}", record_path.display())))?;
    let record: RunRecord = serde_json::from_str(&text).map_err(|e| CliError::Replay(format!("malformed record: {e}")))?;
    let dir: PathBuf = record_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut prior = Vec::new();
    for f in record.files.iter().filter(|f| is_payload(&f.name)) {
        let p = dir.join(&f.name);
        let bytes = std::fs::read(&p).map_err(|e| CliError::Replay(format!("missing artifact {}: {e}", p.display())))?;
        prior.push((f.name.clone(), bytes));
    }
    let cfg = config.unwrap_or(&record.config);
    let rerun = commands::run(record.command, cfg)?;
    let mut report = DiffReport {
        prior_config_hash: record.config_hash.clone(),
        rerun_config_hash: cfg.digest(),
        rerun_warnings: rerun.warnings.clone(),
        ..DiffReport::default()
    };
    for (name, old) in &prior {
        match rerun.files.iter().find(|(n, _)| n == name) {
            None => report.missing_in_rerun.push(name.clone()),
            Some((_, new)) if new == old => report.identical.push(name.clone()),
            Some((_, new)) => {
                let (line, a, b) = first_difference(&String::from_utf8_lossy(old), &String::from_utf8_lossy(new));
                report.differing.push(FileDiff { name: name.clone(), line, prior: a, rerun: b });
            }
        }
    }
    for (name, _) in rerun.files.iter().filter(|(n, _)| is_payload(n)) {
        if !prior.iter().any(|(p, _)| p == name) {
            report.new_in_rerun.push(name.clone());
        }
    }
    Ok(report)
}
