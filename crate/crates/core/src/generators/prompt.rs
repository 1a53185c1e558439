use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::BackendError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Placeholder {
    ProblemSpec,
    Hypothesis,
    Domain,
    BestEquation,
    Analysis,
    CurrentExpr,
    UpdateDirection,
    GrammarReference,
}

impl Placeholder {
    pub const ALL: [Placeholder; 8] = [
        Placeholder::ProblemSpec,
        Placeholder::Hypothesis,
        Placeholder::Domain,
        Placeholder::BestEquation,
        Placeholder::Analysis,
        Placeholder::CurrentExpr,
        Placeholder::UpdateDirection,
        Placeholder::GrammarReference,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Placeholder::ProblemSpec => "PROBLEM_SPEC",
            Placeholder::Hypothesis => "HYPOTHESIS",
            Placeholder::Domain => "DOMAIN",
            Placeholder::BestEquation => "BEST_EQUATION",
            Placeholder::Analysis => "ANALYSIS",
            Placeholder::CurrentExpr => "CURRENT_EXPR",
            Placeholder::UpdateDirection => "UPDATE_DIRECTION",
            Placeholder::GrammarReference => "GRAMMAR_REFERENCE",
        }
    }

    fn from_name(s: &str) -> Option<Placeholder> {
        Placeholder::ALL.into_iter().find(|p| p.name() == s)
    }
}

impl fmt::Display for Placeholder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    InitialGeneration,
    ProgramAnalysis,
    AstUpdate,
}

const INITIAL_GENERATION: &str = "\
You are a scientist proposing a governing equation from data.

{PROBLEM_SPEC}

Initial hypothesis (a frame of the equation that you may refine):
{HYPOTHESIS}

Write one candidate equation for the output as a single expression in the grammar below.
{GRAMMAR_REFERENCE}
Answer with the expression only, inside one fenced code block.
";

const PROGRAM_ANALYSIS: &str = "\
You are an expert in {DOMAIN}.

{PROBLEM_SPEC}

The best equation discovered so far is:
{BEST_EQUATION}

Analyse the logical structure of this equation: explain what each term represents, \
which parts look physically plausible, and which parts are likely missing or spurious. \
Write a concise natural-language analysis. If you restate the equation, put it inside one fenced code block.
";

const AST_UPDATE: &str = "\
You are a scientist refining a governing equation.

{PROBLEM_SPEC}

Your current equation:
{CURRENT_EXPR}
On the training data it shows {UPDATE_DIRECTION} of the output on average.

The best equation shared by the group:
{BEST_EQUATION}
Shared analysis of that equation:
{ANALYSIS}

Revise your equation's structure (add, remove or replace terms) to correct the bias and \
incorporate useful insight from the shared knowledge. Use the grammar below.
{GRAMMAR_REFERENCE}
Answer with the revised expression only, inside one fenced code block.
";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub kind: PromptKind,
    pub text: String,
}

impl PromptTemplate {
    pub fn builtin(kind: PromptKind) -> Self {
        let text = match kind {
            PromptKind::InitialGeneration => INITIAL_GENERATION,
            PromptKind::ProgramAnalysis => PROGRAM_ANALYSIS,
            PromptKind::AstUpdate => AST_UPDATE,
        };
        PromptTemplate {
            kind,
            text: text.to_string(),
        }
    }

    /// Placeholders a template of this kind must contain.
    pub fn required(kind: PromptKind) -> &'static [Placeholder] {
        use Placeholder::*;
        match kind {
            PromptKind::InitialGeneration => &[ProblemSpec, Hypothesis, GrammarReference],
            PromptKind::ProgramAnalysis => &[Domain, ProblemSpec, BestEquation],
            PromptKind::AstUpdate => &[
                ProblemSpec,
                CurrentExpr,
                UpdateDirection,
                BestEquation,
                Analysis,
                GrammarReference,
            ],
        }
    }

    /// Placeholders appearing in the text, in order of appearance.
    pub fn placeholders(&self) -> Vec<Placeholder> {
        tokens(&self.text)
            .into_iter()
            .filter_map(|t| match t {
                Token::Slot(p) => Some(p),
                Token::Text(_) => None,
            })
            .collect()
    }

    /// Every required placeholder appears exactly once and nothing else does.
    pub fn validate(&self) -> Result<(), BackendError> {
        let found = self.placeholders();
        for p in Self::required(self.kind) {
            let n = found.iter().filter(|q| *q == p).count();
            if n != 1 {
                return Err(BackendError::Template(format!(
                    "{p} must appear exactly once in a {:?} template, found {n}",
                    self.kind
                )));
            }
        }
        if let Some(extra) = found.iter().find(|p| !Self::required(self.kind).contains(p)) {
            return Err(BackendError::Template(format!(
                "{extra} is not used by {:?} templates",
                self.kind
            )));
        }
        Ok(())
    }
}

enum Token<'a> {
    Text(&'a str),
    Slot(Placeholder),
}

fn tokens(text: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find('}').and_then(|close| Placeholder::from_name(&after[..close]).map(|p| (close, p))) {
            Some((close, p)) => {
                out.push(Token::Text(&rest[..open]));
                out.push(Token::Slot(p));
                rest = &after[close + 1..];
            }
            None => {
                out.push(Token::Text(&rest[..=open]));
                rest = after;
            }
        }
    }
    out.push(Token::Text(rest));
    out
}

pub type Bindings = BTreeMap<Placeholder, String>;

/// Substitutes every placeholder in one pass; bound values are never
/// re-scanned. A missing or blank binding is an error.
pub fn render_prompt(tmpl: &PromptTemplate, bindings: &Bindings) -> Result<String, BackendError> {
    let mut out = String::with_capacity(tmpl.text.len() + 256);
    for tok in tokens(&tmpl.text) {
        match tok {
            Token::Text(t) => out.push_str(t),
            Token::Slot(p) => match bindings.get(&p) {
                Some(v) if !v.trim().is_empty() => out.push_str(v),
                _ => return Err(BackendError::MissingBinding(p.name().to_string())),
            },
        }
    }
    Ok(out)
}
