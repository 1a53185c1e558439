//! The collective discovery loop: agent population, complexity-aware
//! scoring, best-agent selection, shared knowledge and ablations.

mod engine;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::expr::{ExprError, Expression};
use crate::fit::{self, FitConfig, FitError};
use crate::generators::BackendError;

pub use engine::{run, ArchiveEntry, Discovery, IterationSummary, RunResult, RunState, SharedMemory, STATE_VERSION};

#[derive(Debug, Error)]
pub enum DiscoveryError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("backend failure: {0}")]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("invalid run state: {0}")]
    State(String),
}

/// Problem description registered in shared memory before the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub name: String,
    pub var_names: Vec<String>,
    pub output_name: String,
    #[serde(default)]
    pub description: String,
    /// Background domain of the analysing agent, e.g. "polymer science".
    pub domain_tag: String,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<(), DiscoveryError> {
        crate::expr::validate_var_names(&self.var_names)?;
        if self.domain_tag.trim().is_empty() {
            return Err(DiscoveryError::Config("domain tag is empty".into()));
        }
        Ok(())
    }

    pub fn check_dataset(&self, data: &Dataset) -> Result<(), DiscoveryError> {
        if data.input_names() != self.var_names.as_slice() {
            return Err(DiscoveryError::Config(format!(
                "dataset columns [{}] do not match problem variables [{}]",
                data.input_names().join(", "),
                self.var_names.join(", ")
            )));
        }
        Ok(())
    }

    pub fn parse(&self, text: &str) -> Result<Expression, ExprError> {
        Expression::parse(text, &self.var_names)
    }

    /// Human-readable problem statement for prompts.
    pub fn render(&self) -> String {
        let mut s = format!(
            "Problem: {}\nInputs: {}\nOutput: {}",
            self.name,
            self.var_names.join(", "),
            self.output_name
        );
        if !self.description.trim().is_empty() {
            s.push_str("\nDescription: ");
            s.push_str(self.description.trim());
        }
        s
    }
}

/// Initial frame of the equation. Lines starting with `#` are commentary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub skeleton_text: String,
}

impl Hypothesis {
    pub fn new(text: impl Into<String>) -> Result<Self, DiscoveryError> {
        let skeleton_text = text.into();
        if skeleton_text.trim().is_empty() {
            return Err(DiscoveryError::Config("hypothesis is empty".into()));
        }
        Ok(Hypothesis { skeleton_text })
    }

    /// The non-comment part, if any.
    pub fn expression_text(&self) -> String {
        self.skeleton_text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .collect::<Vec<_>>()
            .join(" ")
            .trim()
            .to_string()
    }

    pub fn parse(&self, spec: &ProblemSpec) -> Option<Expression> {
        spec.parse(&self.expression_text()).ok()
    }
}

/// One agent's local memory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub agent_id: usize,
    /// Canonical expression text.
    pub expr_text: String,
    #[serde(with = "crate::real::vec")]
    pub params: Vec<f64>,
    #[serde(with = "crate::real")]
    pub sse: f64,
    #[serde(with = "crate::real")]
    pub score: f64,
    pub depth: usize,
    pub param_count: usize,
    /// Number of proposals this agent has adopted.
    pub history_len: usize,
}

/// Group-level shared knowledge: best equation and its analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectiveKnowledge {
    pub f_best_text: String,
    pub analysis_text: String,
    #[serde(with = "crate::real")]
    pub score: f64,
    pub iteration: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Llm,
    #[default]
    Mutation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    #[default]
    None,
    /// Single agent, no shared knowledge.
    Msi,
    /// Score by SSE alone, without the structural terms.
    NoAst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    /// `-(SSE + depth + parameter count)`
    #[default]
    Mdl,
    /// `-SSE`
    SseOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ScoreOptions {
    pub mode: ScoreMode,
    /// Divide SSE by the number of rows before scoring.
    pub sse_norm: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub agents: usize,
    pub iterations: usize,
    pub seed: u64,
    pub backend: BackendKind,
    pub ablation: Ablation,
    pub fit: FitConfig,
    pub score_mode: ScoreMode,
    pub sse_norm: bool,
    /// Extra backend calls after an unparseable proposal.
    pub proposal_retries: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            agents: 50,
            iterations: 100,
            seed: 0,
            backend: BackendKind::Mutation,
            ablation: Ablation::None,
            fit: FitConfig::default(),
            score_mode: ScoreMode::Mdl,
            sse_norm: false,
            proposal_retries: 3,
        }
    }
}

impl RunConfig {
    /// Applies ablation constraints: `msi` forces one agent, `no_ast`
    /// forces SSE-only scoring.
    pub fn normalized(mut self) -> Result<Self, DiscoveryError> {
        match self.ablation {
            Ablation::Msi => self.agents = 1,
            Ablation::NoAst => self.score_mode = ScoreMode::SseOnly,
            Ablation::None => {}
        }
        if self.agents == 0 {
            return Err(DiscoveryError::Config("agent count must be at least 1".into()));
        }
        if self.iterations == 0 {
            return Err(DiscoveryError::Config("iteration count must be at least 1".into()));
        }
        self.fit.validate()?;
        Ok(self)
    }

    pub fn score_options(&self) -> ScoreOptions {
        ScoreOptions {
            mode: self.score_mode,
            sse_norm: self.sse_norm,
        }
    }

    pub fn shares_knowledge(&self) -> bool {
        self.ablation != Ablation::Msi
    }
}

/// Score of any expression whose SSE is non-finite; below every finite score.
pub const WORST_SCORE: f64 = f64::NEG_INFINITY;

/// Combines fit error and structure into a discovery score.
pub fn score_from_parts(sse: f64, depth: usize, param_count: usize, rows: usize, opts: ScoreOptions) -> f64 {
    if !sse.is_finite() {
        return WORST_SCORE;
    }
    let err = if opts.sse_norm && rows > 0 { sse / rows as f64 } else { sse };
    match opts.mode {
        ScoreMode::Mdl => -(err + depth as f64 + param_count as f64),
        ScoreMode::SseOnly => -err,
    }
}

/// Discovery score of `expr` at `params` on `data`.
pub fn discovery_score(
    expr: &Expression,
    params: &[f64],
    data: &Dataset,
    opts: ScoreOptions,
) -> Result<f64, ExprError> {
    let sse = fit::sse(expr, data, params)?;
    Ok(score_from_parts(sse, expr.depth(), expr.count_params(), data.len(), opts))
}

/// Index of the highest score; ties go to the lowest index.
pub fn select_best(scores: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in scores.iter().enumerate() {
        match best {
            None => best = Some((i, s)),
            Some((_, b)) if s > b => best = Some((i, s)),
            _ => {}
        }
    }
    best.map(|(i, _)| i)
}

/// The agent with the highest score; ties go to the lowest agent id.
pub fn select_best_agent(agents: &[AgentState]) -> Option<usize> {
    let mut best: Option<&AgentState> = None;
    for a in agents {
        match best {
            None => best = Some(a),
            Some(b) if a.score > b.score || (a.score == b.score && a.agent_id < b.agent_id) => {
                best = Some(a)
            }
            _ => {}
        }
    }
    best.map(|a| a.agent_id)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateDirection {
    Overestimation,
    Underestimation,
}

impl UpdateDirection {
    pub fn as_str(self) -> &'static str {
        match self {
            UpdateDirection::Overestimation => "overestimation",
            UpdateDirection::Underestimation => "underestimation",
        }
    }
}

/// `residuals` are predicted minus observed. A positive mean means the
/// expression overestimates; zero or undefined means underestimation.
pub fn update_direction(residuals: &[f64]) -> UpdateDirection {
    if residuals.is_empty() {
        return UpdateDirection::Underestimation;
    }
    let mean = residuals.iter().sum::<f64>() / residuals.len() as f64;
    if mean > 0.0 {
        UpdateDirection::Overestimation
    } else {
        UpdateDirection::Underestimation
    }
}
