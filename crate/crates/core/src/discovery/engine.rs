use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    discovery_score, select_best_agent, update_direction, AgentState, CollectiveKnowledge, DiscoveryError,
    Hypothesis, ProblemSpec, RunConfig, UpdateDirection,
};
use crate::data::Dataset;
use crate::expr::Expression;
use crate::fit::{self, fit_params};
use crate::generators::{AnalystBackend, BackendError, GeneratorBackend, ProposalRequest};

/// Checkpoint format version.
pub const STATE_VERSION: u32 = 1;

/// Holder of the collective knowledge, with access counters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SharedMemory {
    knowledge: Option<CollectiveKnowledge>,
    reads: usize,
    writes: usize,
}

impl SharedMemory {
    pub fn read(&mut self) -> Option<CollectiveKnowledge> {
        self.reads += 1;
        self.knowledge.clone()
    }

    pub fn write(&mut self, ck: CollectiveKnowledge) {
        self.writes += 1;
        self.knowledge = Some(ck);
    }

    /// Current content without counting an access.
    pub fn peek(&self) -> Option<&CollectiveKnowledge> {
        self.knowledge.as_ref()
    }

    pub fn reads(&self) -> usize {
        self.reads
    }

    pub fn writes(&self) -> usize {
        self.writes
    }
}

/// All-time best equation found during the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub expr_text: String,
    #[serde(with = "crate::real::vec")]
    pub params: Vec<f64>,
    #[serde(with = "crate::real")]
    pub sse: f64,
    #[serde(with = "crate::real")]
    pub score: f64,
    pub depth: usize,
    pub param_count: usize,
    pub agent_id: usize,
    pub iteration: usize,
}

impl ArchiveEntry {
    fn from_agent(a: &AgentState, iteration: usize) -> Self {
        ArchiveEntry {
            expr_text: a.expr_text.clone(),
            params: a.params.clone(),
            sse: a.sse,
            score: a.score,
            depth: a.depth,
            param_count: a.param_count,
            agent_id: a.agent_id,
            iteration,
        }
    }
}

/// Outcome of one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationSummary {
    pub iteration: usize,
    pub generation_best_agent: usize,
    #[serde(with = "crate::real")]
    pub generation_best_score: f64,
    pub generation_best_text: String,
    #[serde(with = "crate::real::vec")]
    pub agent_scores: Vec<f64>,
    pub agent_exprs: Vec<String>,
    /// Archive incumbent after this iteration.
    #[serde(with = "crate::real")]
    pub best_score: f64,
    pub best_text: String,
    #[serde(with = "crate::real::vec")]
    pub best_params: Vec<f64>,
    #[serde(with = "crate::real")]
    pub best_sse: f64,
    /// Agents whose proposals never parsed and who kept their previous state.
    pub proposal_failures: usize,
    /// Iteration at which the knowledge the agents read was deposited.
    pub knowledge_iteration: Option<usize>,
}

/// Everything needed to continue a run exactly where it stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    pub version: u32,
    pub config: RunConfig,
    pub spec: ProblemSpec,
    pub hypothesis: Hypothesis,
    /// Number of completed iterations.
    pub iteration: usize,
    pub agents: Vec<AgentState>,
    pub archive: Option<ArchiveEntry>,
    pub shared: SharedMemory,
    pub history: Vec<IterationSummary>,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub best: ArchiveEntry,
    /// Last deposited knowledge; absent when sharing is disabled.
    pub knowledge: Option<CollectiveKnowledge>,
    pub per_iteration: Vec<IterationSummary>,
    pub wall_time_secs: f64,
    pub knowledge_reads: usize,
    pub knowledge_writes: usize,
    /// Inverse depth of the best equation, a simple explainability figure.
    pub explainability: f64,
}

enum Proposal {
    Adopted(AgentState),
    Kept,
}

/// Stepwise driver of the discovery loop.
pub struct Discovery<'a> {
    state: RunState,
    train: &'a Dataset,
    gen: &'a dyn GeneratorBackend,
    analyst: &'a dyn AnalystBackend,
    checked: bool,
}

impl<'a> Discovery<'a> {
    pub fn new(
        cfg: RunConfig,
        spec: ProblemSpec,
        hyp: Hypothesis,
        train: &'a Dataset,
        gen: &'a dyn GeneratorBackend,
        analyst: &'a dyn AnalystBackend,
    ) -> Result<Self, DiscoveryError> {
        let config = cfg.normalized()?;
        let state = RunState {
            version: STATE_VERSION,
            config,
            spec,
            hypothesis: hyp,
            iteration: 0,
            agents: Vec::new(),
            archive: None,
            shared: SharedMemory::default(),
            history: Vec::new(),
            elapsed_secs: 0.0,
        };
        Self::from_state(state, train, gen, analyst)
    }

    /// Continues from a saved state.
    pub fn from_state(
        state: RunState,
        train: &'a Dataset,
        gen: &'a dyn GeneratorBackend,
        analyst: &'a dyn AnalystBackend,
    ) -> Result<Self, DiscoveryError> {
        if state.version != STATE_VERSION {
            return Err(DiscoveryError::State(format!(
                "state version {} is not supported (expected {STATE_VERSION})",
                state.version
            )));
        }
        state.spec.validate()?;
        state.spec.check_dataset(train)?;
        if train.is_empty() {
            return Err(DiscoveryError::Config("training data is empty".into()));
        }
        if state.config != state.config.clone().normalized()? {
            return Err(DiscoveryError::State("configuration violates ablation constraints".into()));
        }
        let consistent = if state.iteration == 0 {
            state.agents.is_empty() && state.history.is_empty()
        } else {
            state.agents.len() == state.config.agents
                && state.history.len() == state.iteration
                && state.archive.is_some()
                && state.iteration <= state.config.iterations
        };
        if !consistent {
            return Err(DiscoveryError::State("agent, history and iteration counts disagree".into()));
        }
        Ok(Discovery {
            state,
            train,
            gen,
            analyst,
            checked: false,
        })
    }

    pub fn state(&self) -> &RunState {
        &self.state
    }

    pub fn is_done(&self) -> bool {
        self.state.iteration >= self.state.config.iterations
    }

    fn health_check(&mut self) -> Result<(), DiscoveryError> {
        if !self.checked {
            self.gen.health()?;
            self.analyst.health()?;
            self.checked = true;
        }
        Ok(())
    }

    fn evaluate(&self, agent_id: usize, expr: &Expression, history_len: usize) -> Result<AgentState, DiscoveryError> {
        let fitted = fit_params(expr, self.train, &self.state.config.fit)?;
        let score = discovery_score(expr, &fitted.params, self.train, self.state.config.score_options())?;
        Ok(AgentState {
            agent_id,
            expr_text: expr.serialize(),
            params: fitted.params,
            sse: fitted.sse,
            score,
            depth: expr.depth(),
            param_count: expr.count_params(),
            history_len,
        })
    }

    fn direction(&self, agent: &AgentState) -> Result<UpdateDirection, DiscoveryError> {
        let expr = self.state.spec.parse(&agent.expr_text)?;
        Ok(update_direction(&fit::residuals(&expr, self.train, &agent.params)?))
    }

    fn propose(
        &self,
        agent_id: usize,
        iteration: usize,
        knowledge: Option<&CollectiveKnowledge>,
    ) -> Result<Option<Expression>, DiscoveryError> {
        let cfg = &self.state.config;
        let spec = &self.state.spec;
        let previous = self.state.agents.get(agent_id);
        let direction = match previous {
            Some(a) => Some(self.direction(a)?),
            None => None,
        };
        let mut feedback: Option<String> = None;
        for attempt in 0..=cfg.proposal_retries {
            let req = ProposalRequest {
                seed: cfg.seed,
                agent_id,
                iteration,
                attempt,
                feedback: feedback.as_deref(),
            };
            let answer = match (previous, direction) {
                (Some(a), Some(d)) => self.gen.revise(&req, spec, a, knowledge, d),
                _ => self.gen.initial(&req, spec, &self.state.hypothesis),
            };
            let text = match answer {
                Ok(t) => t,
                Err(e @ (BackendError::NoExpressionFound | BackendError::Parse(_))) => {
                    feedback = Some(e.to_string());
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            match spec.parse(&text) {
                Ok(e) => return Ok(Some(e)),
                Err(e) => feedback = Some(format!("`{}`: {e}", text.trim())),
            }
        }
        log::debug!("agent {agent_id} produced no valid proposal at iteration {iteration}");
        Ok(None)
    }

    fn fallback(&self) -> Result<Expression, DiscoveryError> {
        match self.state.hypothesis.parse(&self.state.spec) {
            Some(e) => Ok(e),
            None => Ok(self.state.spec.parse("p0")?),
        }
    }

    fn agent_step(
        &self,
        agent_id: usize,
        iteration: usize,
        knowledge: Option<&CollectiveKnowledge>,
    ) -> Result<Proposal, DiscoveryError> {
        let history_len = self.state.agents.get(agent_id).map_or(0, |a| a.history_len);
        match self.propose(agent_id, iteration, knowledge)? {
            Some(expr) => Ok(Proposal::Adopted(self.evaluate(agent_id, &expr, history_len + 1)?)),
            None if self.state.agents.is_empty() => {
                Ok(Proposal::Adopted(self.evaluate(agent_id, &self.fallback()?, history_len + 1)?))
            }
            None => Ok(Proposal::Kept),
        }
    }

    /// Runs one iteration: generation, fitting and scoring, selection,
    /// archive update and knowledge deposit.
    pub fn step(&mut self) -> Result<&IterationSummary, DiscoveryError> {
        if self.is_done() {
            return Err(DiscoveryError::State("all iterations already completed".into()));
        }
        self.health_check()?;
        let started = Instant::now();
        let iteration = self.state.iteration + 1;
        let k = self.state.config.agents;
        let shares = self.state.config.shares_knowledge();

        // Changes are staged and committed only once the whole iteration
        // has succeeded, so a failed step leaves the state resumable.
        let mut shared = self.state.shared.clone();

        // Every agent reads the knowledge deposited at the end of the
        // previous iteration; nothing written during this one is visible.
        let knowledge: Vec<Option<CollectiveKnowledge>> = (0..k)
            .map(|_| if shares && iteration > 1 { shared.read() } else { None })
            .collect();
        let knowledge_iteration = knowledge.first().and_then(|c| c.as_ref().map(|c| c.iteration));

        let this = &*self;
        let outcomes: Vec<Result<Proposal, DiscoveryError>> = (0..k)
            .into_par_iter()
            .map(|id| this.agent_step(id, iteration, knowledge[id].as_ref()))
            .collect();

        let mut failures = 0;
        let mut agents = Vec::with_capacity(k);
        for (id, outcome) in outcomes.into_iter().enumerate() {
            match outcome? {
                Proposal::Adopted(a) => agents.push(a),
                Proposal::Kept => {
                    failures += 1;
                    agents.push(self.state.agents[id].clone());
                }
            }
        }

        let best_id = select_best_agent(&agents).expect("at least one agent");
        let gen_best = &agents[best_id];
        let improved = match &self.state.archive {
            None => true,
            Some(a) => gen_best.score > a.score,
        };
        let archive = match &self.state.archive {
            Some(a) if !improved => a.clone(),
            _ => ArchiveEntry::from_agent(gen_best, iteration),
        };

        if shares {
            let analysis_text = match shared.peek() {
                Some(ck) if !improved && ck.f_best_text == archive.expr_text => ck.analysis_text.clone(),
                _ => self
                    .analyst
                    .analyze(&self.state.spec, &archive.expr_text, &self.state.spec.domain_tag)?,
            };
            shared.write(CollectiveKnowledge {
                f_best_text: archive.expr_text.clone(),
                analysis_text,
                score: archive.score,
                iteration,
            });
        }

        let summary = IterationSummary {
            iteration,
            generation_best_agent: best_id,
            generation_best_score: gen_best.score,
            generation_best_text: gen_best.expr_text.clone(),
            agent_scores: agents.iter().map(|a| a.score).collect(),
            agent_exprs: agents.iter().map(|a| a.expr_text.clone()).collect(),
            best_score: archive.score,
            best_text: archive.expr_text.clone(),
            best_params: archive.params.clone(),
            best_sse: archive.sse,
            proposal_failures: failures,
            knowledge_iteration,
        };
        self.state.archive = Some(archive);
        self.state.shared = shared;
        self.state.agents = agents;
        self.state.iteration = iteration;
        self.state.history.push(summary);
        self.state.elapsed_secs += started.elapsed().as_secs_f64();
        Ok(self.state.history.last().expect("pushed above"))
    }

    pub fn run_to_end(&mut self) -> Result<(), DiscoveryError> {
        while !self.is_done() {
            self.step()?;
        }
        Ok(())
    }

    pub fn into_state(self) -> RunState {
        self.state
    }

    /// Result so far; errors if no iteration has completed.
    pub fn result(&self) -> Result<RunResult, DiscoveryError> {
        let best = self
            .state
            .archive
            .clone()
            .ok_or_else(|| DiscoveryError::State("no iteration has completed".into()))?;
        Ok(RunResult {
            explainability: 1.0 / best.depth.max(1) as f64,
            best,
            knowledge: self.state.shared.peek().cloned(),
            per_iteration: self.state.history.clone(),
            wall_time_secs: self.state.elapsed_secs,
            knowledge_reads: self.state.shared.reads(),
            knowledge_writes: self.state.shared.writes(),
        })
    }
}

/// Runs the full loop for `cfg.iterations` iterations.
pub fn run(
    cfg: RunConfig,
    spec: ProblemSpec,
    hyp: Hypothesis,
    train: &Dataset,
    gen: &dyn GeneratorBackend,
    analyst: &dyn AnalystBackend,
) -> Result<RunResult, DiscoveryError> {
    let mut d = Discovery::new(cfg, spec, hyp, train, gen, analyst)?;
    d.run_to_end()?;
    d.result()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discovery::Ablation;
    use crate::generators::{MutationBackend, StructuralAnalyst};

    fn line_data() -> Dataset {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 / 10.0]).collect();
        let y = rows.iter().map(|r| 2.0 * r[0] + 1.0).collect();
        Dataset::from_rows(vec!["x".into()], "y", &rows, y).unwrap()
    }

    fn spec() -> ProblemSpec {
        ProblemSpec {
            name: "line".into(),
            var_names: vec!["x".into()],
            output_name: "y".into(),
            description: String::new(),
            domain_tag: "physics".into(),
        }
    }

    fn cfg(agents: usize, iterations: usize) -> RunConfig {
        RunConfig {
            agents,
            iterations,
            seed: 7,
            ..RunConfig::default()
        }
    }

    #[test]
    fn single_iteration_single_agent() {
        let data = line_data();
        let r = run(
            cfg(1, 1),
            spec(),
            Hypothesis::new("p0").unwrap(),
            &data,
            &MutationBackend::new(),
            &StructuralAnalyst,
        )
        .unwrap();
        assert_eq!(r.per_iteration.len(), 1);
        assert_eq!(r.best.expr_text, "p0");
        assert_eq!(r.best.score, r.per_iteration[0].agent_scores[0]);
    }

    #[test]
    fn msi_never_touches_shared_memory() {
        let data = line_data();
        let c = RunConfig {
            ablation: Ablation::Msi,
            ..cfg(4, 10)
        };
        let r = run(c, spec(), Hypothesis::new("p0").unwrap(), &data, &MutationBackend::new(), &StructuralAnalyst).unwrap();
        assert_eq!((r.knowledge_reads, r.knowledge_writes), (0, 0));
        assert!(r.per_iteration.iter().all(|s| s.agent_scores.len() == 1));
    }

    #[test]
    fn archive_is_monotone() {
        let data = line_data();
        let r = run(cfg(4, 30), spec(), Hypothesis::new("p0").unwrap(), &data, &MutationBackend::new(), &StructuralAnalyst).unwrap();
        for w in r.per_iteration.windows(2) {
            assert!(w[1].best_score >= w[0].best_score);
        }
        assert_eq!(r.knowledge_writes, 30);
        assert_eq!(r.knowledge_reads, 4 * 29);
    }
}
