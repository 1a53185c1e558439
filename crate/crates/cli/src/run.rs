use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Instant;

use eqswarm_core::data::Split;
use eqswarm_core::discovery::{BackendKind, Discovery};
use eqswarm_core::generators::{
    AnalystBackend, GeneratorBackend, LlmAnalyst, LlmClient, LlmGenerator, MutationBackend, StructuralAnalyst,
};
use eqswarm_core::metrics::MetricReport;
use serde::{Deserialize, Serialize};

use crate::artifacts::{
    load_checkpoint, read_manifest, save_checkpoint, truncate_log, unix_now, write_json_atomic, Checkpoint,
    DatasetChecksum, IterationRecord, LogWriter, Outcome, RunManifest, CHECKPOINT_FILE, LOG_FILE, MANIFEST_FILE,
};
use crate::config::{load_config, LoadedSplit, Overrides, ResolvedConfig};
use crate::error::CliError;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Checkpoint and stop once this iteration has completed.
    pub stop_after: Option<usize>,
    /// Independent repetitions with seeds `seed, seed + 1, ...`.
    pub repeats: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Completed { run_dir: PathBuf, manifest: Box<RunManifest> },
    Stopped { run_dir: PathBuf, iteration: usize },
    AlreadyComplete { run_dir: PathBuf },
}

impl RunStatus {
    pub fn run_dir(&self) -> &Path {
        match self {
            RunStatus::Completed { run_dir, .. }
            | RunStatus::Stopped { run_dir, .. }
            | RunStatus::AlreadyComplete { run_dir } => run_dir,
        }
    }
}

struct Backends {
    gen: Box<dyn GeneratorBackend>,
    analyst: Box<dyn AnalystBackend>,
}

fn backends(cfg: &ResolvedConfig) -> Result<Backends, CliError> {
    Ok(match cfg.run.backend {
        BackendKind::Mutation => Backends {
            gen: Box::new(MutationBackend { limits: cfg.mutation }),
            analyst: Box::new(StructuralAnalyst),
        },
        BackendKind::Llm => {
            let client = Arc::new(LlmClient::new(cfg.llm.clone())?);
            Backends {
                gen: Box::new(LlmGenerator::new(client.clone())),
                analyst: Box::new(LlmAnalyst::new(client)),
            }
        }
    })
}

fn checksums(loaded: &[LoadedSplit]) -> Vec<DatasetChecksum> {
    loaded
        .iter()
        .map(|l| DatasetChecksum {
            split: l.split,
            path: l.path.clone(),
            sha256: l.checksum.clone(),
            rows: l.dataset.len(),
        })
        .collect()
}

fn train_of(loaded: &[LoadedSplit]) -> &LoadedSplit {
    loaded
        .iter()
        .find(|l| l.split == Split::Train)
        .expect("the training split is mandatory")
}

/// Runs the configured discovery experiment, once or `repeats` times.
pub fn cmd_run(
    config_path: &Path,
    overrides: &Overrides,
    opts: &RunOptions,
    stop: &AtomicBool,
) -> Result<Vec<RunStatus>, CliError> {
    let file = load_config(config_path)?;
    let base_dir = config_path.parent().unwrap_or(Path::new("."));
    let cfg = file.resolve(base_dir, overrides)?;
    let repeats = opts.repeats.max(1);
    if repeats == 1 {
        return Ok(vec![start_run(cfg, opts, stop)?]);
    }
    let mut statuses = Vec::with_capacity(repeats);
    for r in 0..repeats {
        let mut rep = cfg.clone();
        rep.run.seed = cfg.run.seed.wrapping_add(r as u64);
        rep.out_dir = cfg.out_dir.join(format!("rep-{r}"));
        log::info!("repetition {}/{repeats} with seed {}", r + 1, rep.run.seed);
        statuses.push(start_run(rep, opts, stop)?);
    }
    let manifests: Vec<&RunManifest> = statuses
        .iter()
        .filter_map(|s| match s {
            RunStatus::Completed { manifest, .. } => Some(manifest.as_ref()),
            _ => None,
        })
        .collect();
    if manifests.len() == repeats {
        write_json_atomic(&cfg.out_dir.join("aggregate.json"), &Aggregate::from_manifests(&manifests))?;
    }
    Ok(statuses)
}

fn start_run(cfg: ResolvedConfig, opts: &RunOptions, stop: &AtomicBool) -> Result<RunStatus, CliError> {
    let loaded = cfg.load_all()?;
    let backends = backends(&cfg)?;
    let train = &train_of(&loaded).dataset;
    let discovery = Discovery::new(
        cfg.run.clone(),
        cfg.spec.clone(),
        cfg.hypothesis.clone(),
        train,
        backends.gen.as_ref(),
        backends.analyst.as_ref(),
    )?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| CliError::io(&cfg.out_dir, e))?;
    let _ = std::fs::remove_file(cfg.out_dir.join(MANIFEST_FILE));
    let log = LogWriter::create(&cfg.out_dir.join(LOG_FILE))?;
    let ckpt = Checkpoint {
        datasets: checksums(&loaded),
        started_unix: unix_now(),
        state: discovery.state().clone(),
        config: cfg,
    };
    drive(ckpt, discovery, &loaded, log, opts, stop)
}

/// Continues a run from its checkpoint. The log is cut back to the
/// checkpoint's iteration first, so the resumed records replace anything
/// written after it.
pub fn cmd_resume(checkpoint_path: &Path, opts: &RunOptions, stop: &AtomicBool) -> Result<RunStatus, CliError> {
    let ckpt = load_checkpoint(checkpoint_path)?;
    let run_dir = checkpoint_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let cfg = ResolvedConfig {
        out_dir: run_dir.clone(),
        ..ckpt.config.clone()
    };
    if ckpt.state.iteration >= cfg.run.iterations && run_dir.join(MANIFEST_FILE).is_file() {
        log::info!("run in {} is already complete; nothing to resume", run_dir.display());
        return Ok(RunStatus::AlreadyComplete { run_dir });
    }

    let loaded = cfg.load_all()?;
    for (now, then) in checksums(&loaded).iter().zip(&ckpt.datasets) {
        if now.sha256 != then.sha256 || now.split != then.split {
            return Err(CliError::Config(format!(
                "{} dataset {} changed since the checkpoint was written",
                now.split,
                now.path.display()
            )));
        }
    }
    let log_path = run_dir.join(LOG_FILE);
    let log = if ckpt.state.iteration == 0 && !log_path.is_file() {
        LogWriter::create(&log_path)?
    } else {
        truncate_log(&log_path, ckpt.state.iteration)?;
        LogWriter::append_to(&log_path)?
    };
    let backends = backends(&cfg)?;
    let discovery = Discovery::from_state(
        ckpt.state.clone(),
        &train_of(&loaded).dataset,
        backends.gen.as_ref(),
        backends.analyst.as_ref(),
    )?;
    let ckpt = Checkpoint { config: cfg, ..ckpt };
    drive(ckpt, discovery, &loaded, log, opts, stop)
}

fn drive(
    mut ckpt: Checkpoint,
    mut d: Discovery<'_>,
    loaded: &[LoadedSplit],
    mut log: LogWriter,
    opts: &RunOptions,
    stop: &AtomicBool,
) -> Result<RunStatus, CliError> {
    let run_dir = ckpt.config.out_dir.clone();
    let ckpt_path = run_dir.join(CHECKPOINT_FILE);
    let every = ckpt.config.checkpoint_every;
    let save = |ckpt: &mut Checkpoint, d: &Discovery<'_>| -> Result<(), CliError> {
        ckpt.state = d.state().clone();
        save_checkpoint(&ckpt_path, ckpt)
    };

    while !d.is_done() {
        let t0 = Instant::now();
        let record = match d.step() {
            Ok(summary) => {
                let summary = summary.clone();
                IterationRecord::from_step(&summary, d.state(), t0.elapsed().as_millis() as u64)
            }
            Err(e) => {
                save(&mut ckpt, &d)?;
                return Err(e.into());
            }
        };
        log.write(&record)?;
        let it = record.iteration;
        log::debug!(
            "iteration {it}: generation best {} ({}), archive best {} ({})",
            record.generation_best.score,
            record.agents[record.generation_best.id].expr_text,
            record.archive_best.score,
            record.archive_best.expr_text
        );
        if it % every == 0 || d.is_done() {
            save(&mut ckpt, &d)?;
            log::info!("iteration {it}: checkpoint written, best {}", record.archive_best.expr_text);
        }
        if d.is_done() {
            break;
        }
        if opts.stop_after == Some(it) {
            save(&mut ckpt, &d)?;
            log::info!("stopping after iteration {it} as requested");
            return Ok(RunStatus::Stopped { run_dir, iteration: it });
        }
        if stop.load(Ordering::SeqCst) {
            save(&mut ckpt, &d)?;
            return Err(CliError::Interrupted(ckpt_path));
        }
    }

    let manifest = finish(&ckpt, &d, loaded)?;
    write_json_atomic(&run_dir.join(MANIFEST_FILE), &manifest)?;
    Ok(RunStatus::Completed {
        run_dir,
        manifest: Box::new(manifest),
    })
}

fn finish(ckpt: &Checkpoint, d: &Discovery<'_>, loaded: &[LoadedSplit]) -> Result<RunManifest, CliError> {
    let result = d.result()?;
    let cfg = &ckpt.config;
    let expr = cfg.spec.parse(&result.best.expr_text)?;
    let metrics = loaded
        .iter()
        .map(|l| MetricReport::evaluate(&expr, &result.best.params, &l.dataset))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RunManifest {
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        problem: cfg.spec.name.clone(),
        config: cfg.clone(),
        datasets: ckpt.datasets.clone(),
        started_unix: ckpt.started_unix,
        finished_unix: unix_now(),
        outcome: Outcome {
            iterations: d.state().iteration,
            best_expr: result.best.expr_text.clone(),
            best_params: result.best.params.clone(),
            best_score: result.best.score,
            best_sse: result.best.sse,
            best_depth: result.best.depth,
            best_param_count: result.best.param_count,
            explainability: result.explainability,
            ck_reads: result.knowledge_reads,
            ck_writes: result.knowledge_writes,
            metrics,
            wall_time_secs: result.wall_time_secs,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and sample standard deviation (zero for a single value).
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        MeanStd { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAggregate {
    pub split: Split,
    pub wmape: MeanStd,
    pub nmse: MeanStd,
    pub mae: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub repeats: usize,
    pub seeds: Vec<u64>,
    pub best_score: MeanStd,
    pub splits: Vec<SplitAggregate>,
}

impl Aggregate {
    pub fn from_manifests(ms: &[&RunManifest]) -> Self {
        let splits = Split::ALL
            .into_iter()
            .filter_map(|split| {
                let reports: Vec<&MetricReport> = ms.iter().filter_map(|m| m.metric(split)).collect();
                if reports.len() != ms.len() || reports.is_empty() {
                    return None;
                }
                let col = |f: fn(&MetricReport) -> f64| MeanStd::of(&reports.iter().map(|r| f(r)).collect::<Vec<_>>());
                Some(SplitAggregate {
                    split,
                    wmape: col(|r| r.wmape),
                    nmse: col(|r| r.nmse),
                    mae: col(|r| r.mae),
                })
            })
            .collect();
        Aggregate {
            repeats: ms.len(),
            seeds: ms.iter().map(|m| m.config.run.seed).collect(),
            best_score: MeanStd::of(&ms.iter().map(|m| m.outcome.best_score).collect::<Vec<_>>()),
            splits,
        }
    }
}

/// Manifest of a completed run directory.
pub fn load_run_manifest(run_dir: &Path) -> Result<RunManifest, CliError> {
    read_manifest(&run_dir.join(MANIFEST_FILE))
}
