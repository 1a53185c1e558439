//! Hypothesis-generation and analysis backends: a chat-completion client
//! driven by structured prompts, and a seeded mutation engine that follows
//! the same information flow offline.

mod analyst;
mod extract;
mod llm;
mod mutation;
mod prompt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::discovery::{AgentState, CollectiveKnowledge, Hypothesis, ProblemSpec, UpdateDirection};
use crate::expr::ExprError;

pub use analyst::{analyze_stub, LlmAnalyst, StructuralAnalyst};
pub use extract::extract_expression;
pub use llm::{llm_complete, LlmClient, LlmEndpointConfig, RequestGate};
pub use mutation::{mutate, mutate_with, random_expression, Edit, MutationBackend, MutationLimits, MAX_REDRAWS};
pub use prompt::{render_prompt, Bindings, Placeholder, PromptKind, PromptTemplate};

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("server answered with HTTP status {0}")]
    HttpStatus(u16),
    #[error("server returned an empty completion")]
    EmptyCompletion,
    #[error("malformed server response: {0}")]
    Protocol(String),
    #[error("no expression found in completion")]
    NoExpressionFound,
    #[error("prompt placeholder {{{0}}} has no binding")]
    MissingBinding(String),
    #[error("invalid prompt template: {0}")]
    Template(String),
    #[error("invalid backend configuration: {0}")]
    Config(String),
    #[error("backend health check failed: {0}")]
    Unhealthy(String),
    #[error(transparent)]
    Parse(#[from] ExprError),
}

/// Independent random stream for one backend call, derived from the run
/// seed and the call's coordinates so scheduling cannot affect results.
pub fn agent_rng(seed: u64, agent_id: usize, iteration: usize, attempt: usize) -> ChaCha8Rng {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    let mut h = mix(seed);
    for v in [agent_id as u64, iteration as u64, attempt as u64] {
        h = mix(h ^ v);
    }
    ChaCha8Rng::seed_from_u64(h)
}

/// Coordinates of one proposal request.
#[derive(Debug, Clone, Copy)]
pub struct ProposalRequest<'a> {
    pub seed: u64,
    pub agent_id: usize,
    /// One-based iteration number.
    pub iteration: usize,
    /// Zero for the first try, incremented on every re-request.
    pub attempt: usize,
    /// Parser error from the previous attempt, if any.
    pub feedback: Option<&'a str>,
}

impl ProposalRequest<'_> {
    pub fn rng(&self) -> ChaCha8Rng {
        agent_rng(self.seed, self.agent_id, self.iteration, self.attempt)
    }
}

/// Source of candidate equations. Returned text is one expression in the
/// grammar, possibly invalid; the caller parses and validates it.
pub trait GeneratorBackend: Send + Sync {
    fn health(&self) -> Result<(), BackendError> {
        Ok(())
    }

    fn initial(&self, req: &ProposalRequest<'_>, spec: &ProblemSpec, hyp: &Hypothesis) -> Result<String, BackendError>;

    fn revise(
        &self,
        req: &ProposalRequest<'_>,
        spec: &ProblemSpec,
        state: &AgentState,
        ck: Option<&CollectiveKnowledge>,
        direction: UpdateDirection,
    ) -> Result<String, BackendError>;
}

/// Produces the natural-language analysis of the best equation.
pub trait AnalystBackend: Send + Sync {
    fn health(&self) -> Result<(), BackendError> {
        Ok(())
    }

    fn analyze(&self, spec: &ProblemSpec, f_best_text: &str, domain_tag: &str) -> Result<String, BackendError>;
}

/// Generator that asks a chat-completion model using the structured prompts.
#[derive(Debug)]
pub struct LlmGenerator {
    client: std::sync::Arc<LlmClient>,
    initial: PromptTemplate,
    update: PromptTemplate,
}

impl LlmGenerator {
    pub fn new(client: std::sync::Arc<LlmClient>) -> Self {
        LlmGenerator {
            client,
            initial: PromptTemplate::builtin(PromptKind::InitialGeneration),
            update: PromptTemplate::builtin(PromptKind::AstUpdate),
        }
    }

    pub fn with_templates(mut self, initial: PromptTemplate, update: PromptTemplate) -> Result<Self, BackendError> {
        initial.validate()?;
        update.validate()?;
        self.initial = initial;
        self.update = update;
        Ok(self)
    }

    fn ask(&self, mut prompt: String, req: &ProposalRequest<'_>) -> Result<String, BackendError> {
        if let Some(fb) = req.feedback {
            prompt.push_str("\nYour previous answer could not be parsed: ");
            prompt.push_str(fb);
            prompt.push_str("\nReturn a single valid expression inside one fenced code block.\n");
        }
        let completion = self.client.complete(&prompt, self.client.cfg.temperature)?;
        extract_expression(&completion)
    }
}

const NO_SHARED_KNOWLEDGE: &str = "(no shared knowledge is available; rely on your own equation)";

/// Bindings for the initial-generation prompt.
pub fn initial_bindings(spec: &ProblemSpec, hyp: &Hypothesis) -> Bindings {
    let mut b = Bindings::new();
    b.insert(Placeholder::ProblemSpec, spec.render());
    b.insert(Placeholder::Hypothesis, hyp.skeleton_text.clone());
    b.insert(Placeholder::GrammarReference, crate::expr::GRAMMAR_REFERENCE.to_string());
    b
}

/// Bindings for the update prompt; absent shared knowledge is stated as such.
pub fn update_bindings(
    spec: &ProblemSpec,
    state: &AgentState,
    ck: Option<&CollectiveKnowledge>,
    direction: UpdateDirection,
) -> Bindings {
    let mut b = Bindings::new();
    b.insert(Placeholder::ProblemSpec, spec.render());
    b.insert(Placeholder::CurrentExpr, state.expr_text.clone());
    b.insert(Placeholder::UpdateDirection, direction.as_str().to_string());
    b.insert(
        Placeholder::BestEquation,
        ck.map_or(NO_SHARED_KNOWLEDGE.to_string(), |c| c.f_best_text.clone()),
    );
    b.insert(
        Placeholder::Analysis,
        ck.map_or(NO_SHARED_KNOWLEDGE.to_string(), |c| c.analysis_text.clone()),
    );
    b.insert(Placeholder::GrammarReference, crate::expr::GRAMMAR_REFERENCE.to_string());
    b
}

/// Bindings for the analysis prompt.
pub fn analysis_bindings(spec: &ProblemSpec, f_best_text: &str, domain_tag: &str) -> Bindings {
    let mut b = Bindings::new();
    b.insert(Placeholder::Domain, domain_tag.to_string());
    b.insert(Placeholder::ProblemSpec, spec.render());
    b.insert(Placeholder::BestEquation, f_best_text.to_string());
    b
}

impl GeneratorBackend for LlmGenerator {
    fn health(&self) -> Result<(), BackendError> {
        self.client
            .complete("Reply with the single word: ok", 0.0)
            .map(|_| ())
            .map_err(|e| BackendError::Unhealthy(e.to_string()))
    }

    fn initial(&self, req: &ProposalRequest<'_>, spec: &ProblemSpec, hyp: &Hypothesis) -> Result<String, BackendError> {
        let prompt = render_prompt(&self.initial, &initial_bindings(spec, hyp))?;
        self.ask(prompt, req)
    }

    fn revise(
        &self,
        req: &ProposalRequest<'_>,
        spec: &ProblemSpec,
        state: &AgentState,
        ck: Option<&CollectiveKnowledge>,
        direction: UpdateDirection,
    ) -> Result<String, BackendError> {
        let prompt = render_prompt(&self.update, &update_bindings(spec, state, ck, direction))?;
        self.ask(prompt, req)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_independent_and_reproducible() {
        let a: u64 = agent_rng(7, 0, 1, 0).random();
        let b: u64 = agent_rng(7, 0, 1, 0).random();
        let c: u64 = agent_rng(7, 1, 1, 0).random();
        let d: u64 = agent_rng(7, 0, 2, 0).random();
        let e: u64 = agent_rng(7, 0, 1, 1).random();
        assert_eq!(a, b);
        assert!(a != c && a != d && a != e && c != d);
    }

    fn spec() -> ProblemSpec {
        ProblemSpec {
            name: "toy".into(),
            var_names: vec!["x".into()],
            output_name: "y".into(),
            description: String::new(),
            domain_tag: "physics".into(),
        }
    }

    #[test]
    fn every_template_renders_from_run_state() {
        let state = AgentState {
            agent_id: 0,
            expr_text: "p0 * x".into(),
            params: vec![1.0],
            sse: 1.0,
            score: -4.0,
            depth: 2,
            param_count: 1,
            history_len: 1,
        };
        let ck = CollectiveKnowledge {
            f_best_text: "p0 * x + p1".into(),
            analysis_text: "linear".into(),
            score: -6.0,
            iteration: 1,
        };
        let hyp = Hypothesis::new("p0 + p1 * x").unwrap();
        render_prompt(&PromptTemplate::builtin(PromptKind::InitialGeneration), &initial_bindings(&spec(), &hyp)).unwrap();
        for c in [Some(&ck), None] {
            let r = render_prompt(
                &PromptTemplate::builtin(PromptKind::AstUpdate),
                &update_bindings(&spec(), &state, c, UpdateDirection::Overestimation),
            )
            .unwrap();
            assert!(r.contains("overestimation"));
        }
        render_prompt(
            &PromptTemplate::builtin(PromptKind::ProgramAnalysis),
            &analysis_bindings(&spec(), "p0 * x", "physics"),
        )
        .unwrap();
    }
}
