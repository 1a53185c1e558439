//! Closed expression grammar: AST, parser, canonical printer and evaluator.
//!
//! Grammar (loosest to tightest binding):
//!
//! | level | operators        | associativity |
//! |-------|------------------|---------------|
//! | 1     | `+` `-`          | left          |
//! | 2     | `*` `/`          | left          |
//! | 3     | unary `-`        | prefix        |
//! | 4     | `^` (also `**`)  | right         |
//!
//! Atoms are decimal literals, variable identifiers from the problem schema,
//! parameter slots `p0..pN`, the constant `pi`, parenthesised expressions and
//! calls to the unary built-ins listed in [`Func`]. `pow(a, b)` is accepted as
//! an alias for `a ^ b`.

mod eval;
mod parse;
mod print;
pub mod special;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;

pub use eval::{eval_node, evaluate_columns};
pub use parse::{parse_syntax, ParseOptions};
pub(crate) use parse::{is_identifier, is_reserved};

/// Operator precedence table, embedded in prompts.
pub const GRAMMAR_REFERENCE: &str = "\
Write exactly one expression using only:
  - binary operators + - * / ^ (precedence: ^ binds tightest and is right-associative, \
then unary minus, then * and /, then + and -)
  - parentheses
  - functions: sin cos tan tanh exp log sqrt abs gamma sigmoid clip01 (one argument each)
  - the input variables listed in the problem description
  - learnable parameters p0, p1, p2, ... (fitted automatically to the data)
  - decimal literals such as 2 or 0.5, and the constant pi
No assignments, no statements, no other identifiers.";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("arity mismatch for {what}: expected {expected}, got {got}")]
    Arity {
        what: &'static str,
        expected: usize,
        got: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    pub const ALL: [BinOp; 5] = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow];

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

/// Unary built-in functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Tanh,
    Exp,
    Log,
    Sqrt,
    Abs,
    Gamma,
    Sigmoid,
    /// Clamps its argument to `[0, 1]`.
    Clip01,
}

impl Func {
    pub const ALL: [Func; 11] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Tanh,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Abs,
        Func::Gamma,
        Func::Sigmoid,
        Func::Clip01,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Tanh => "tanh",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Gamma => "gamma",
            Func::Sigmoid => "sigmoid",
            Func::Clip01 => "clip01",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Tanh => x.tanh(),
            Func::Exp => x.exp(),
            Func::Log => {
                if x > 0.0 {
                    x.ln()
                } else {
                    f64::NAN
                }
            }
            Func::Sqrt => {
                if x >= 0.0 {
                    x.sqrt()
                } else {
                    f64::NAN
                }
            }
            Func::Abs => x.abs(),
            Func::Gamma => special::gamma(x),
            Func::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Func::Clip01 => x.clamp(0.0, 1.0),
        }
    }
}

/// Expression tree node. Literal constants are finite and non-negative;
/// negative values are written with unary minus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Const(f64),
    Param(usize),
    Var(usize),
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

impl Node {
    pub fn binary(op: BinOp, l: Node, r: Node) -> Node {
        Node::Binary(op, Box::new(l), Box::new(r))
    }

    pub fn call(f: Func, arg: Node) -> Node {
        Node::Call(f, Box::new(arg))
    }

    pub fn neg(child: Node) -> Node {
        Node::Neg(Box::new(child))
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Node::Const(_) | Node::Param(_) | Node::Var(_))
    }

    /// Longest root-to-leaf path counted in nodes; a leaf has depth 1.
    pub fn depth(&self) -> usize {
        match self {
            Node::Const(_) | Node::Param(_) | Node::Var(_) => 1,
            Node::Neg(c) | Node::Call(_, c) => 1 + c.depth(),
            Node::Binary(_, l, r) => 1 + l.depth().max(r.depth()),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Node::Const(_) | Node::Param(_) | Node::Var(_) => 1,
            Node::Neg(c) | Node::Call(_, c) => 1 + c.size(),
            Node::Binary(_, l, r) => 1 + l.size() + r.size(),
        }
    }

    pub fn children(&self) -> Vec<&Node> {
        match self {
            Node::Const(_) | Node::Param(_) | Node::Var(_) => Vec::new(),
            Node::Neg(c) | Node::Call(_, c) => vec![c.as_ref()],
            Node::Binary(_, l, r) => vec![l.as_ref(), r.as_ref()],
        }
    }

    /// Pre-order traversal.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Node)) {
        f(self);
        match self {
            Node::Const(_) | Node::Param(_) | Node::Var(_) => {}
            Node::Neg(c) | Node::Call(_, c) => c.walk(f),
            Node::Binary(_, l, r) => {
                l.walk(f);
                r.walk(f);
            }
        }
    }

    pub fn param_indices(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.walk(&mut |n| {
            if let Node::Param(i) = n {
                out.insert(*i);
            }
        });
        out
    }

    pub fn max_var_index(&self) -> Option<usize> {
        let mut max = None;
        self.walk(&mut |n| {
            if let Node::Var(i) = n {
                max = Some(max.map_or(*i, |m: usize| m.max(*i)));
            }
        });
        max
    }

    /// Renumbers parameter slots to `0..k` preserving their relative order.
    pub fn reindex_params(&mut self) -> usize {
        let used: Vec<usize> = self.param_indices().into_iter().collect();
        if used.iter().enumerate().all(|(i, &p)| i == p) {
            return used.len();
        }
        self.map_params(&mut |p| used.binary_search(&p).expect("collected above"));
        used.len()
    }

    pub fn map_params(&mut self, f: &mut impl FnMut(usize) -> usize) {
        match self {
            Node::Param(i) => *i = f(*i),
            Node::Const(_) | Node::Var(_) => {}
            Node::Neg(c) | Node::Call(_, c) => c.map_params(f),
            Node::Binary(_, l, r) => {
                l.map_params(f);
                r.map_params(f);
            }
        }
    }

    /// Structural equality that ignores which parameter slot a `Param` uses.
    pub fn same_shape(&self, other: &Node) -> bool {
        match (self, other) {
            (Node::Param(_), Node::Param(_)) => true,
            (Node::Const(a), Node::Const(b)) => a.to_bits() == b.to_bits(),
            (Node::Var(a), Node::Var(b)) => a == b,
            (Node::Neg(a), Node::Neg(b)) => a.same_shape(b),
            (Node::Call(f, a), Node::Call(g, b)) => f == g && a.same_shape(b),
            (Node::Binary(o1, l1, r1), Node::Binary(o2, l2, r2)) => {
                o1 == o2 && l1.same_shape(l2) && r1.same_shape(r2)
            }
            _ => false,
        }
    }

    pub fn contains_shape(&self, needle: &Node) -> bool {
        let mut found = false;
        self.walk(&mut |n| {
            if !found && n.same_shape(needle) {
                found = true;
            }
        });
        found
    }
}

/// A validated expression bound to an ordered variable schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    root: Node,
    var_names: Arc<[String]>,
    param_count: usize,
    source_text: String,
}

impl Expression {
    /// Validates `root` against `var_names`. Parameter slots are renumbered
    /// to a contiguous range.
    pub fn new(mut root: Node, var_names: Arc<[String]>) -> Result<Self, ExprError> {
        validate_node(&root, var_names.len())?;
        let param_count = root.reindex_params();
        let mut e = Expression {
            root,
            var_names,
            param_count,
            source_text: String::new(),
        };
        e.source_text = e.to_string();
        Ok(e)
    }

    pub fn parse(text: &str, var_names: &[String]) -> Result<Self, ExprError> {
        parse::parse(text, var_names, ParseOptions::default())
    }

    pub fn parse_with(
        text: &str,
        var_names: &[String],
        opts: ParseOptions,
    ) -> Result<Self, ExprError> {
        parse::parse(text, var_names, opts)
    }

    pub(crate) fn with_source(mut self, source: &str) -> Self {
        self.source_text = source.to_string();
        self
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn var_names(&self) -> &[String] {
        &self.var_names
    }

    pub fn schema(&self) -> Arc<[String]> {
        Arc::clone(&self.var_names)
    }

    /// Number of distinct learnable parameter slots.
    pub fn param_count(&self) -> usize {
        self.param_count
    }

    /// Text the expression was parsed from (canonical text when built from a tree).
    pub fn source_text(&self) -> &str {
        &self.source_text
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn count_params(&self) -> usize {
        self.root.param_indices().len()
    }

    /// Canonical text; `parse(serialize(e))` is structurally identical to `e`.
    pub fn serialize(&self) -> String {
        print::to_canonical(&self.root, &self.var_names)
    }

    pub fn evaluate(&self, row: &[f64], params: &[f64]) -> Result<f64, ExprError> {
        self.check_arity(row.len(), params.len())?;
        Ok(eval_node(&self.root, row, params))
    }

    /// Column-major evaluation; `columns[j][i]` is variable `j` at row `i`.
    pub fn evaluate_columns(
        &self,
        columns: &[Vec<f64>],
        params: &[f64],
    ) -> Result<Vec<f64>, ExprError> {
        self.check_arity(columns.len(), params.len())?;
        let n = columns.first().map_or(0, Vec::len);
        Ok(evaluate_columns(&self.root, columns, n, params))
    }

    /// Evaluates every row of `data`; output length equals the row count.
    pub fn evaluate_batch(&self, data: &Dataset, params: &[f64]) -> Result<Vec<f64>, ExprError> {
        self.check_arity(data.columns().len(), params.len())?;
        Ok(evaluate_columns(&self.root, data.columns(), data.len(), params))
    }

    pub fn check_arity(&self, n_vars: usize, n_params: usize) -> Result<(), ExprError> {
        if n_vars != self.var_names.len() {
            return Err(ExprError::Arity {
                what: "variables",
                expected: self.var_names.len(),
                got: n_vars,
            });
        }
        if n_params != self.param_count {
            return Err(ExprError::Arity {
                what: "parameters",
                expected: self.param_count,
                got: n_params,
            });
        }
        Ok(())
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print::to_canonical(&self.root, &self.var_names))
    }
}

fn validate_node(node: &Node, n_vars: usize) -> Result<(), ExprError> {
    let mut err = None;
    node.walk(&mut |n| {
        if err.is_some() {
            return;
        }
        match n {
            Node::Const(c) if !c.is_finite() || *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => {
                err = Some(ExprError::Validation(format!(
                    "literal {c} must be finite and non-negative"
                )));
            }
            Node::Var(i) if *i >= n_vars => {
                err = Some(ExprError::Validation(format!(
                    "variable index {i} out of range for {n_vars} variables"
                )));
            }
            _ => {}
        }
    });
    err.map_or(Ok(()), Err)
}

/// Checks that a variable name list is usable as a schema.
pub fn validate_var_names(names: &[String]) -> Result<(), ExprError> {
    if names.is_empty() {
        return Err(ExprError::Validation("variable list is empty".into()));
    }
    let mut seen = BTreeSet::new();
    for name in names {
        if !parse::is_identifier(name) {
            return Err(ExprError::Validation(format!(
                "`{name}` is not a valid identifier"
            )));
        }
        if parse::is_reserved(name) {
            return Err(ExprError::Validation(format!(
                "`{name}` collides with a reserved name"
            )));
        }
        if !seen.insert(name.as_str()) {
            return Err(ExprError::Validation(format!("duplicate variable `{name}`")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn linear_model_tree() {
        let e = Expression::parse("p0 * x + p1", &vars(&["x"])).unwrap();
        assert_eq!(
            e.root(),
            &Node::binary(
                BinOp::Add,
                Node::binary(BinOp::Mul, Node::Param(0), Node::Var(0)),
                Node::Param(1)
            )
        );
        assert_eq!(e.param_count(), 2);
        assert_eq!(e.depth(), 3);
    }

    #[test]
    fn single_leaf() {
        let e = Expression::parse("x", &vars(&["x"])).unwrap();
        assert_eq!(e.root(), &Node::Var(0));
        assert_eq!(e.depth(), 1);
    }

    #[test]
    fn unknown_variable_rejected() {
        let err = Expression::parse("sin(y)", &vars(&["x"])).unwrap_err();
        assert!(matches!(err, ExprError::Validation(ref m) if m.contains('y')), "{err}");
    }

    #[test]
    fn serialize_examples() {
        let v: Arc<[String]> = vars(&["x"]).into();
        let e = Expression::new(
            Node::binary(BinOp::Add, Node::Var(0), Node::Param(0)),
            v.clone(),
        )
        .unwrap();
        assert_eq!(e.serialize(), "x + p0");
        let e = Expression::new(Node::neg(Node::Var(0)), v).unwrap();
        assert_eq!(e.serialize(), "-x");
    }

    #[test]
    fn evaluate_examples() {
        let v = vars(&["x"]);
        let e = Expression::parse("p0 * x + p1", &v).unwrap();
        assert_eq!(e.evaluate(&[3.0], &[2.0, 1.0]).unwrap(), 7.0);
        let e = Expression::parse("log(x)", &v).unwrap();
        assert!(!e.evaluate(&[-1.0], &[]).unwrap().is_finite());
        let e = Expression::parse("gamma(x)", &v).unwrap();
        let g = e.evaluate(&[5.0], &[]).unwrap();
        assert!((g - 24.0).abs() / 24.0 < 1e-12);
    }

    #[test]
    fn evaluate_arity_errors() {
        let e = Expression::parse("p0 * x", &vars(&["x"])).unwrap();
        assert!(matches!(e.evaluate(&[1.0, 2.0], &[1.0]), Err(ExprError::Arity { .. })));
        assert!(matches!(e.evaluate(&[1.0], &[]), Err(ExprError::Arity { .. })));
    }

    #[test]
    fn depth_examples() {
        let v = vars(&["x"]);
        assert_eq!(Expression::parse("sin(exp(x))", &v).unwrap().depth(), 3);
        assert_eq!(Expression::parse("p0 * x + p1", &v).unwrap().depth(), 3);
    }

    #[test]
    fn count_params_examples() {
        let v = vars(&["x"]);
        assert_eq!(Expression::parse("x + 1", &v).unwrap().count_params(), 0);
        assert_eq!(Expression::parse("p0*x + p1", &v).unwrap().count_params(), 2);
        assert_eq!(Expression::parse("p0*x + p0", &v).unwrap().count_params(), 1);
    }

    #[test]
    fn params_are_reindexed_in_order() {
        let e = Expression::parse("p3*x + p7", &vars(&["x"])).unwrap();
        assert_eq!(e.serialize(), "p0 * x + p1");
        let e = Expression::parse("p1*x + p0", &vars(&["x"])).unwrap();
        assert_eq!(e.serialize(), "p1 * x + p0");
    }

    #[test]
    fn negative_literal_rejected_in_tree() {
        let v: Arc<[String]> = vars(&["x"]).into();
        assert!(Expression::new(Node::Const(-1.0), v).is_err());
    }

    #[test]
    fn var_name_checks() {
        assert!(validate_var_names(&vars(&["x", "y"])).is_ok());
        assert!(validate_var_names(&vars(&["x", "x"])).is_err());
        assert!(validate_var_names(&vars(&["sin"])).is_err());
        assert!(validate_var_names(&vars(&["p3"])).is_err());
        assert!(validate_var_names(&vars(&["pH", "I_ext"])).is_ok());
        assert!(validate_var_names(&[]).is_err());
    }

    #[test]
    fn shape_matching_ignores_param_slots() {
        let v = vars(&["x"]);
        let a = Expression::parse("p0*x + p1", &v).unwrap();
        let needle = Expression::parse("p5*x", &v).unwrap();
        assert!(a.root().contains_shape(needle.root()));
    }
}
