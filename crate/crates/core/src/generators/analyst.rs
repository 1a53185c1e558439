use std::collections::BTreeMap;
use std::sync::Arc;

use super::{analysis_bindings, render_prompt, AnalystBackend, BackendError, LlmClient, PromptKind, PromptTemplate};
use crate::discovery::ProblemSpec;
use crate::expr::{is_identifier, is_reserved, parse_syntax, Expression, Node};

fn census(root: &Node) -> (BTreeMap<&'static str, usize>, BTreeMap<&'static str, usize>) {
    let mut ops = BTreeMap::new();
    let mut funcs = BTreeMap::new();
    root.walk(&mut |n| match n {
        Node::Binary(op, ..) => *ops.entry(op.symbol()).or_insert(0) += 1,
        Node::Neg(_) => *ops.entry("neg").or_insert(0) += 1,
        Node::Call(f, _) => *funcs.entry(f.name()).or_insert(0) += 1,
        _ => {}
    });
    (ops, funcs)
}

fn fmt_counts(m: &BTreeMap<&str, usize>) -> String {
    if m.is_empty() {
        return "none".into();
    }
    m.iter().map(|(k, v)| format!("{k}:{v}")).collect::<Vec<_>>().join(", ")
}

/// Deterministic structural summary of an equation: operator and function
/// census, depth, parameter count, variable usage and the domain.
///
/// Identifiers are taken from the text itself, so any syntactically valid
/// expression is accepted.
pub fn analyze_stub(f_best_text: &str, domain_tag: &str) -> Result<String, BackendError> {
    parse_syntax(f_best_text)?;
    let mut vars: Vec<String> = Vec::new();
    for tok in f_best_text.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_')) {
        if is_identifier(tok) && !is_reserved(tok) && !vars.iter().any(|v| v == tok) {
            vars.push(tok.to_string());
        }
    }
    if vars.is_empty() {
        vars.push("unused_".to_string());
    }
    let expr = Expression::parse(f_best_text, &vars)?;
    let (ops, funcs) = census(expr.root());
    let mut used: Vec<&str> = Vec::new();
    expr.root().walk(&mut |n| {
        if let Node::Var(i) = n {
            let name = expr.var_names()[*i].as_str();
            if !used.contains(&name) {
                used.push(name);
            }
        }
    });
    used.sort_unstable();
    Ok(format!(
        "Structure of `{}`: depth={}, params={}; operators: {}; functions: {}; variables used: {}; domain: {}.",
        expr.serialize(),
        expr.depth(),
        expr.param_count(),
        fmt_counts(&ops),
        fmt_counts(&funcs),
        if used.is_empty() { "none".to_string() } else { used.join(", ") },
        domain_tag
    ))
}

/// Analyst producing [`analyze_stub`] summaries.
#[derive(Debug, Clone, Copy, Default)]
pub struct StructuralAnalyst;

impl AnalystBackend for StructuralAnalyst {
    fn analyze(&self, _spec: &ProblemSpec, f_best_text: &str, domain_tag: &str) -> Result<String, BackendError> {
        analyze_stub(f_best_text, domain_tag)
    }
}

/// Analyst asking a chat-completion model with the analysis prompt.
#[derive(Debug)]
pub struct LlmAnalyst {
    client: Arc<LlmClient>,
    template: PromptTemplate,
}

impl LlmAnalyst {
    pub fn new(client: Arc<LlmClient>) -> Self {
        LlmAnalyst {
            client,
            template: PromptTemplate::builtin(PromptKind::ProgramAnalysis),
        }
    }

    pub fn with_template(mut self, template: PromptTemplate) -> Result<Self, BackendError> {
        template.validate()?;
        self.template = template;
        Ok(self)
    }
}

impl AnalystBackend for LlmAnalyst {
    fn analyze(&self, spec: &ProblemSpec, f_best_text: &str, domain_tag: &str) -> Result<String, BackendError> {
        let prompt = render_prompt(&self.template, &analysis_bindings(spec, f_best_text, domain_tag))?;
        let text = self.client.complete(&prompt, self.client.cfg.analysis_temperature)?;
        Ok(text.trim().to_string())
    }
}
