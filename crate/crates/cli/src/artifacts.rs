//! On-disk run artifacts: the append-only iteration log, checksummed
//! checkpoints and the final manifest.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use eqswarm_core::data::{sha256_hex, Split};
use eqswarm_core::discovery::{IterationSummary, RunState};
use eqswarm_core::metrics::MetricReport;
use serde::{Deserialize, Serialize};

use crate::config::ResolvedConfig;
use crate::error::CliError;

pub const LOG_FILE: &str = "log.jsonl";
pub const CHECKPOINT_FILE: &str = "checkpoint.ckpt";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CHECKPOINT_FORMAT: u32 = 1;
const CHECKPOINT_MAGIC: &str = "eqswarm-checkpoint";

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = File::create(&tmp).map_err(|e| CliError::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| CliError::io(&tmp, e))?;
        f.sync_all().map_err(|e| CliError::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("artifact types serialize");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub id: usize,
    pub expr_text: String,
    #[serde(with = "eqswarm_core::real")]
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationBest {
    pub id: usize,
    #[serde(with = "eqswarm_core::real")]
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveBest {
    pub expr_text: String,
    #[serde(with = "eqswarm_core::real")]
    pub score: f64,
    #[serde(with = "eqswarm_core::real::vec")]
    pub params: Vec<f64>,
    #[serde(with = "eqswarm_core::real")]
    pub sse: f64,
}

/// One line of the run log. `wall_ms` is the only field that varies
/// between identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub agents: Vec<AgentRecord>,
    pub generation_best: GenerationBest,
    pub archive_best: ArchiveBest,
    /// SHA-256 of the analysis text deposited this iteration.
    pub ck_analysis_digest: Option<String>,
    /// Iteration whose knowledge the agents read, if any.
    pub ck_read_iteration: Option<usize>,
    pub ck_reads: usize,
    pub ck_writes: usize,
    pub proposal_failures: usize,
    pub wall_ms: u64,
}

impl IterationRecord {
    pub fn from_step(summary: &IterationSummary, state: &RunState, wall_ms: u64) -> Self {
        IterationRecord {
            iteration: summary.iteration,
            agents: summary
                .agent_exprs
                .iter()
                .zip(&summary.agent_scores)
                .enumerate()
                .map(|(id, (t, &s))| AgentRecord {
                    id,
                    expr_text: t.clone(),
                    score: s,
                })
                .collect(),
            generation_best: GenerationBest {
                id: summary.generation_best_agent,
                score: summary.generation_best_score,
            },
            archive_best: ArchiveBest {
                expr_text: summary.best_text.clone(),
                score: summary.best_score,
                params: summary.best_params.clone(),
                sse: summary.best_sse,
            },
            ck_analysis_digest: state
                .shared
                .peek()
                .filter(|ck| ck.iteration == summary.iteration)
                .map(|ck| sha256_hex(ck.analysis_text.as_bytes())),
            ck_read_iteration: summary.knowledge_iteration,
            ck_reads: state.shared.reads(),
            ck_writes: state.shared.writes(),
            proposal_failures: summary.proposal_failures,
            wall_ms,
        }
    }
}

/// Append-only writer for the iteration log; every record is flushed.
pub struct LogWriter {
    path: PathBuf,
    file: File,
}

impl LogWriter {
    pub fn create(path: &Path) -> Result<Self, CliError> {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        Ok(LogWriter {
            path: path.to_path_buf(),
            file,
        })
    }

    pub fn append_to(path: &Path) -> Result<Self, CliError> {
        let file = OpenOptions::new()
            .append(true)
            .open(path)
            .map_err(|e| CliError::io(path, e))?;
        Ok(LogWriter {
            path: path.to_path_buf(),
            file,
        })
    }

    pub fn write(&mut self, rec: &IterationRecord) -> Result<(), CliError> {
        let mut line = serde_json::to_string(rec).expect("records serialize");
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.flush())
            .map_err(|e| CliError::io(&self.path, e))
    }
}

pub fn read_log(path: &Path) -> Result<Vec<IterationRecord>, CliError> {
    if !path.is_file() {
        return Err(CliError::MissingLog(path.to_path_buf()));
    }
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| {
            CliError::io(
                path,
                std::io::Error::new(std::io::ErrorKind::InvalidData, format!("line {}: {e}", i + 1)),
            )
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Keeps the first `iterations` records, dropping anything written after
/// the checkpoint being resumed.
pub fn truncate_log(path: &Path, iterations: usize) -> Result<(), CliError> {
    let text = fs::read_to_string(path).map_err(|_| CliError::MissingLog(path.to_path_buf()))?;
    let kept: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).take(iterations).collect();
    if kept.len() < iterations {
        return Err(CliError::CorruptCheckpoint {
            path: path.to_path_buf(),
            reason: format!("log holds {} records but the checkpoint is at iteration {iterations}", kept.len()),
        });
    }
    let mut body = kept.join("\n");
    if !body.is_empty() {
        body.push('\n');
    }
    write_atomic(path, body.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetChecksum {
    pub split: Split,
    pub path: PathBuf,
    pub sha256: String,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: ResolvedConfig,
    pub datasets: Vec<DatasetChecksum>,
    pub started_unix: f64,
    pub state: RunState,
}

/// Serialized as a header line `eqswarm-checkpoint <format> <sha256>`
/// followed by the JSON body the digest covers.
pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<(), CliError> {
    let body = serde_json::to_string(ckpt).expect("checkpoint serializes");
    let text = format!("{CHECKPOINT_MAGIC} {CHECKPOINT_FORMAT} {}\n{body}", sha256_hex(body.as_bytes()));
    write_atomic(path, text.as_bytes())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let corrupt = |reason: String| CliError::CorruptCheckpoint {
        path: path.to_path_buf(),
        reason,
    };
    let text = std::str::from_utf8(&bytes).map_err(|_| corrupt("not valid UTF-8".into()))?;
    let (header, body) = text.split_once('\n').ok_or_else(|| corrupt("missing header".into()))?;
    let parts: Vec<&str> = header.split(' ').collect();
    if parts.len() != 3 || parts[0] != CHECKPOINT_MAGIC {
        return Err(corrupt("malformed header".into()));
    }
    let format: u32 = parts[1].parse().map_err(|_| corrupt("malformed header".into()))?;
    if format != CHECKPOINT_FORMAT {
        return Err(CliError::VersionMismatch {
            found: format,
            expected: CHECKPOINT_FORMAT,
        });
    }
    if sha256_hex(body.as_bytes()) != parts[2] {
        return Err(corrupt("checksum mismatch".into()));
    }
    serde_json::from_str(body).map_err(|e| corrupt(format!("unreadable body: {e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub iterations: usize,
    pub best_expr: String,
    #[serde(with = "eqswarm_core::real::vec")]
    pub best_params: Vec<f64>,
    #[serde(with = "eqswarm_core::real")]
    pub best_score: f64,
    #[serde(with = "eqswarm_core::real")]
    pub best_sse: f64,
    pub best_depth: usize,
    pub best_param_count: usize,
    pub explainability: f64,
    pub ck_reads: usize,
    pub ck_writes: usize,
    pub metrics: Vec<MetricReport>,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub code_version: String,
    pub problem: String,
    pub config: ResolvedConfig,
    pub datasets: Vec<DatasetChecksum>,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub outcome: Outcome,
}

impl RunManifest {
    pub fn metric(&self, split: Split) -> Option<&MetricReport> {
        self.outcome.metrics.iter().find(|m| m.split == split)
    }
}

pub fn read_manifest(path: &Path) -> Result<RunManifest, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::io(path, std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string())))
}
