//! Run configuration: a TOML file with `problem`, `run`, `backend`, `fit`
//! and `ablation` tables, resolved against the problem catalog.

use std::fs;
use std::path::{Path, PathBuf};

use eqswarm_core::benchmarks::{load_tabular, lookup, CatalogEntry, TabularSchema};
use eqswarm_core::data::Split;
use eqswarm_core::discovery::{Ablation, BackendKind, Hypothesis, ProblemSpec, RunConfig, ScoreMode};
use eqswarm_core::fit::FitConfig;
use eqswarm_core::generators::{LlmEndpointConfig, MutationLimits};
use eqswarm_core::Dataset;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_CHECKPOINT_EVERY: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub problem: ProblemSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub backend: BackendSection,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub ablation: AblationSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    /// Catalog name, or any name for a custom problem.
    pub name: String,
    pub train: PathBuf,
    #[serde(default)]
    pub test_id: Option<PathBuf>,
    #[serde(default)]
    pub test_ood: Option<PathBuf>,
    /// Input names; defaults to the catalog schema, or to every column
    /// but the last of the training file for custom problems.
    #[serde(default)]
    pub var_names: Option<Vec<String>>,
    #[serde(default)]
    pub target_name: Option<String>,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub domain: Option<String>,
    #[serde(default)]
    pub hypothesis: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Defaults to the catalog's agent count for the problem.
    pub agents: Option<usize>,
    /// Defaults to the catalog's iteration count for the problem.
    pub iterations: Option<usize>,
    pub seed: u64,
    pub checkpoint_every: usize,
    pub proposal_retries: usize,
    pub score_mode: ScoreMode,
    pub sse_norm: bool,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunSection {
    fn default() -> Self {
        let d = RunConfig::default();
        RunSection {
            agents: None,
            iterations: None,
            seed: d.seed,
            checkpoint_every: DEFAULT_CHECKPOINT_EVERY,
            proposal_retries: d.proposal_retries,
            score_mode: d.score_mode,
            sse_norm: d.sse_norm,
            out_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSection {
    pub kind: BackendKind,
    pub llm: LlmEndpointConfig,
    pub mutation: MutationLimits,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationSection {
    pub mode: Ablation,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub ablation: Option<Ablation>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetPaths {
    pub train: PathBuf,
    pub test_id: Option<PathBuf>,
    pub test_ood: Option<PathBuf>,
}

impl DatasetPaths {
    pub fn get(&self, split: Split) -> Option<&Path> {
        match split {
            Split::Train => Some(&self.train),
            Split::TestId => self.test_id.as_deref(),
            Split::TestOod => self.test_ood.as_deref(),
        }
    }
}

/// Fully resolved configuration, stored in checkpoints and manifests so a
/// run can be resumed and audited without the original file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub spec: ProblemSpec,
    pub hypothesis: Hypothesis,
    /// Catalog entry the datasets are checked against, if any.
    pub catalog_problem: Option<String>,
    pub datasets: DatasetPaths,
    pub run: RunConfig,
    pub checkpoint_every: usize,
    pub llm: LlmEndpointConfig,
    pub mutation: MutationLimits,
    pub out_dir: PathBuf,
}

fn resolve_path(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn csv_header(path: &Path) -> Result<Vec<String>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?;
    let h = r
        .headers()
        .map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?;
    Ok(h.iter().map(|s| s.trim().to_string()).collect())
}

pub fn load_config(path: &Path) -> Result<ConfigFile, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

impl ConfigFile {
    /// Resolves paths relative to `base_dir`, applies catalog defaults and
    /// command-line overrides, and checks that every dataset file exists.
    pub fn resolve(&self, base_dir: &Path, ov: &Overrides) -> Result<ResolvedConfig, CliError> {
        let p = &self.problem;
        let entry: Option<&CatalogEntry> = lookup(&p.name).ok();

        let datasets = DatasetPaths {
            train: resolve_path(base_dir, &p.train),
            test_id: p.test_id.as_deref().map(|q| resolve_path(base_dir, q)),
            test_ood: p.test_ood.as_deref().map(|q| resolve_path(base_dir, q)),
        };
        for split in Split::ALL {
            if let Some(path) = datasets.get(split) {
                if !path.is_file() {
                    return Err(CliError::Config(format!(
                        "{split} dataset not found: {}",
                        path.display()
                    )));
                }
            }
        }

        let (var_names, target_name) = match (&p.var_names, &p.target_name, entry) {
            (Some(v), Some(t), _) => (v.clone(), t.clone()),
            (v, t, Some(e)) => (
                v.clone().unwrap_or_else(|| e.var_names.clone()),
                t.clone().unwrap_or_else(|| e.target_name.clone()),
            ),
            (v, t, None) => {
                let mut header = csv_header(&datasets.train)?;
                let last = header
                    .pop()
                    .ok_or_else(|| CliError::Schema(format!("{} has no columns", datasets.train.display())))?;
                (v.clone().unwrap_or(header), t.clone().unwrap_or(last))
            }
        };

        let spec = ProblemSpec {
            name: p.name.clone(),
            var_names,
            output_name: target_name,
            description: p
                .description
                .clone()
                .or_else(|| entry.map(|e| e.description.clone()))
                .unwrap_or_default(),
            domain_tag: p
                .domain
                .clone()
                .or_else(|| entry.map(|e| e.domain.clone()))
                .unwrap_or_else(|| "general science".into()),
        };
        spec.validate()?;

        let hyp_text = p
            .hypothesis
            .clone()
            .or_else(|| entry.map(|e| e.hypothesis.clone()))
            .unwrap_or_else(|| "p0".into());
        let hypothesis = Hypothesis::new(&hyp_text)?;

        let run = RunConfig {
            agents: self.run.agents.or(entry.map(|e| e.agents)).unwrap_or(RunConfig::default().agents),
            iterations: self
                .run
                .iterations
                .or(entry.map(|e| e.iterations))
                .unwrap_or(RunConfig::default().iterations),
            seed: ov.seed.unwrap_or(self.run.seed),
            backend: self.backend.kind,
            ablation: ov.ablation.unwrap_or(self.ablation.mode),
            fit: self.fit,
            score_mode: self.run.score_mode,
            sse_norm: self.run.sse_norm,
            proposal_retries: self.run.proposal_retries,
        }
        .normalized()?;
        self.fit.validate()?;
        if run.iterations == 0 {
            return Err(CliError::Config("run.iterations must be positive".into()));
        }
        if self.run.checkpoint_every == 0 {
            return Err(CliError::Config("run.checkpoint_every must be positive".into()));
        }
        if run.backend == BackendKind::Llm {
            self.backend.llm.validate()?;
        }

        let out_dir = match (&ov.out_dir, &self.run.out_dir) {
            (Some(o), _) => o.clone(),
            (None, Some(o)) => resolve_path(base_dir, o),
            (None, None) => base_dir.join("runs").join(format!("{}-seed{}", p.name, run.seed)),
        };

        Ok(ResolvedConfig {
            spec,
            hypothesis,
            catalog_problem: entry.map(|e| e.name.clone()),
            datasets,
            run,
            checkpoint_every: self.run.checkpoint_every,
            llm: self.backend.llm.clone(),
            mutation: self.backend.mutation,
            out_dir,
        })
    }
}

/// A dataset together with the checksum of the file it came from.
#[derive(Debug, Clone)]
pub struct LoadedSplit {
    pub split: Split,
    pub path: PathBuf,
    pub checksum: String,
    pub dataset: Dataset,
}

impl ResolvedConfig {
    pub fn load_split(&self, split: Split) -> Result<Option<LoadedSplit>, CliError> {
        let Some(path) = self.datasets.get(split) else {
            return Ok(None);
        };
        let schema = TabularSchema {
            problem: self.catalog_problem.clone(),
            input_names: self.spec.var_names.clone(),
            target_name: self.spec.output_name.clone(),
            split,
        };
        let table = load_tabular(path, &schema).map_err(|e| match e {
            eqswarm_core::benchmarks::BenchError::Data(eqswarm_core::data::DataError::Io(source)) => {
                CliError::io(path, source)
            }
            other => other.into(),
        })?;
        if table.dataset.is_empty() {
            return Err(CliError::Schema(format!("{} has no rows", path.display())));
        }
        Ok(Some(LoadedSplit {
            split,
            path: path.to_path_buf(),
            checksum: table.checksum,
            dataset: table.dataset,
        }))
    }

    pub fn load_all(&self) -> Result<Vec<LoadedSplit>, CliError> {
        let mut out = Vec::new();
        for split in Split::ALL {
            if let Some(s) = self.load_split(split)? {
                out.push(s);
            }
        }
        Ok(out)
    }
}
