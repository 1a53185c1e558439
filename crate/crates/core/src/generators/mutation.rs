use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BackendError, GeneratorBackend, ProposalRequest};
use crate::discovery::{AgentState, CollectiveKnowledge, Hypothesis, ProblemSpec, UpdateDirection};
use crate::expr::{BinOp, Expression, Func, Node};

/// Structural limits a mutated expression must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MutationLimits {
    pub max_depth: usize,
    pub max_size: usize,
    pub max_params: usize,
}

impl Default for MutationLimits {
    fn default() -> Self {
        MutationLimits {
            max_depth: 8,
            max_size: 40,
            max_params: 8,
        }
    }
}

/// Maximum number of re-draws before the input is returned unchanged.
pub const MAX_REDRAWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Edit {
    ReplaceSubtree,
    Crossover,
    WrapUnwrap,
    InsertParam,
    Prune,
}

fn pick_weighted<T: Copy>(rng: &mut ChaCha8Rng, items: &[(T, f64)]) -> T {
    let total: f64 = items.iter().map(|(_, w)| w).sum();
    let mut u = rng.random::<f64>() * total;
    for &(item, w) in items {
        if u < w {
            return item;
        }
        u -= w;
    }
    items.last().expect("non-empty choice").0
}

fn node_mut<'a>(node: &'a mut Node, target: usize, counter: &mut usize) -> Option<&'a mut Node> {
    if *counter == target {
        return Some(node);
    }
    *counter += 1;
    match node {
        Node::Const(_) | Node::Param(_) | Node::Var(_) => None,
        Node::Neg(c) | Node::Call(_, c) => node_mut(c, target, counter),
        Node::Binary(_, l, r) => match node_mut(l, target, counter) {
            Some(n) => Some(n),
            None => node_mut(r, target, counter),
        },
    }
}

/// The `index`-th node in pre-order.
fn nth_mut(root: &mut Node, index: usize) -> &mut Node {
    let mut c = 0;
    node_mut(root, index, &mut c).expect("index within tree size")
}

fn nth(root: &Node, index: usize) -> &Node {
    let mut all = Vec::new();
    root.walk(&mut |n| all.push(n));
    all[index]
}

fn next_param(node: &Node) -> usize {
    node.param_indices().last().map_or(0, |m| m + 1)
}

struct TreeGen<'a> {
    rng: &'a mut ChaCha8Rng,
    n_vars: usize,
    next_param: usize,
}

impl TreeGen<'_> {
    fn leaf(&mut self) -> Node {
        let u = self.rng.random::<f64>();
        if u < 0.5 {
            Node::Var(self.rng.random_range(0..self.n_vars))
        } else if u < 0.85 {
            let p = self.next_param;
            self.next_param += 1;
            Node::Param(p)
        } else {
            const CONSTS: [f64; 4] = [1.0, 2.0, 3.0, 0.5];
            Node::Const(CONSTS[self.rng.random_range(0..CONSTS.len())])
        }
    }

    /// Random tree of depth at most `depth`.
    fn tree(&mut self, depth: usize) -> Node {
        if depth <= 1 || self.rng.random::<f64>() < 0.3 {
            return self.leaf();
        }
        let u = self.rng.random::<f64>();
        if u < 0.7 {
            let op = pick_weighted(
                self.rng,
                &[
                    (BinOp::Add, 3.0),
                    (BinOp::Sub, 2.0),
                    (BinOp::Mul, 3.0),
                    (BinOp::Div, 1.5),
                    (BinOp::Pow, 0.5),
                ],
            );
            let l = self.tree(depth - 1);
            let r = if op == BinOp::Pow {
                Node::Const(if self.rng.random::<bool>() { 2.0 } else { 3.0 })
            } else {
                self.tree(depth - 1)
            };
            Node::binary(op, l, r)
        } else if u < 0.9 {
            let f = random_func(self.rng);
            Node::call(f, self.tree(depth - 1))
        } else {
            Node::neg(self.tree(depth - 1))
        }
    }
}

fn random_func(rng: &mut ChaCha8Rng) -> Func {
    Func::ALL[rng.random_range(0..Func::ALL.len())]
}

fn random_tree(rng: &mut ChaCha8Rng, n_vars: usize, next_param: usize, max_depth: usize) -> Node {
    let depth = rng.random_range(1..=max_depth);
    TreeGen {
        rng,
        n_vars,
        next_param,
    }
    .tree(depth)
}

fn apply_edit(
    edit: Edit,
    root: &Node,
    ck: Option<&Expression>,
    direction: UpdateDirection,
    n_vars: usize,
    rng: &mut ChaCha8Rng,
) -> Option<Node> {
    let mut out = root.clone();
    let size = root.size();
    match edit {
        Edit::ReplaceSubtree => {
            let i = rng.random_range(0..size);
            let fresh = random_tree(rng, n_vars, next_param(root), 3);
            *nth_mut(&mut out, i) = fresh;
        }
        Edit::Crossover => {
            let donor_root = ck?.root();
            let j = rng.random_range(0..donor_root.size());
            let mut donor = nth(donor_root, j).clone();
            let base = next_param(root);
            donor.map_params(&mut |p| p + base);
            let i = rng.random_range(0..size);
            *nth_mut(&mut out, i) = donor;
        }
        Edit::WrapUnwrap => {
            let mut calls = Vec::new();
            let mut k = 0;
            root.walk(&mut |n| {
                if matches!(n, Node::Call(..) | Node::Neg(_)) {
                    calls.push(k);
                }
                k += 1;
            });
            if !calls.is_empty() && rng.random::<bool>() {
                let i = calls[rng.random_range(0..calls.len())];
                let slot = nth_mut(&mut out, i);
                if let Node::Call(_, c) | Node::Neg(c) = slot {
                    let child = std::mem::replace(c.as_mut(), Node::Const(0.0));
                    *slot = child;
                }
            } else {
                let i = rng.random_range(0..size);
                let f = random_func(rng);
                let slot = nth_mut(&mut out, i);
                let inner = std::mem::replace(slot, Node::Const(0.0));
                *slot = Node::call(f, inner);
            }
        }
        Edit::InsertParam => {
            let i = rng.random_range(0..size);
            let p = Node::Param(next_param(root));
            let (add_w, sub_w) = match direction {
                UpdateDirection::Overestimation => (0.25, 0.75),
                UpdateDirection::Underestimation => (0.75, 0.25),
            };
            let form = pick_weighted(rng, &[(BinOp::Mul, 1.0), (BinOp::Add, add_w), (BinOp::Sub, sub_w)]);
            let slot = nth_mut(&mut out, i);
            let inner = std::mem::replace(slot, Node::Const(0.0));
            *slot = match form {
                BinOp::Mul => Node::binary(BinOp::Mul, p, inner),
                op => Node::binary(op, inner, p),
            };
        }
        Edit::Prune => {
            let mut internal = Vec::new();
            let mut k = 0;
            root.walk(&mut |n| {
                if !n.is_leaf() {
                    internal.push(k);
                }
                k += 1;
            });
            if internal.is_empty() {
                return None;
            }
            let i = internal[rng.random_range(0..internal.len())];
            let slot = nth_mut(&mut out, i);
            let child = match slot {
                Node::Neg(c) | Node::Call(_, c) => c.as_ref().clone(),
                Node::Binary(_, l, r) => {
                    if rng.random::<bool>() {
                        l.as_ref().clone()
                    } else {
                        r.as_ref().clone()
                    }
                }
                _ => unreachable!("internal node"),
            };
            *slot = child;
        }
    }
    Some(out)
}

fn draw_edit(rng: &mut ChaCha8Rng, has_ck: bool) -> Edit {
    let crossover = if has_ck { 2.0 } else { 0.0 };
    pick_weighted(
        rng,
        &[
            (Edit::ReplaceSubtree, 1.0),
            (Edit::Crossover, crossover),
            (Edit::WrapUnwrap, 1.0),
            (Edit::InsertParam, 1.0),
            (Edit::Prune, 1.0),
        ],
    )
}

fn accept(candidate: Node, input: &Expression, limits: MutationLimits) -> Option<Expression> {
    if candidate.depth() > limits.max_depth || candidate.size() > limits.max_size {
        return None;
    }
    let e = Expression::new(candidate, input.schema()).ok()?;
    if e.param_count() > limits.max_params || e.root() == input.root() {
        return None;
    }
    Some(e)
}

/// Applies one seeded structural edit to `expr`. Invalid or unchanged
/// results are re-drawn; after [`MAX_REDRAWS`] failures the input is
/// returned as is.
pub fn mutate_with(
    expr: &Expression,
    ck: Option<&Expression>,
    direction: UpdateDirection,
    rng: &mut ChaCha8Rng,
    limits: MutationLimits,
) -> Expression {
    let n_vars = expr.var_names().len();
    for _ in 0..MAX_REDRAWS {
        let edit = draw_edit(rng, ck.is_some());
        if let Some(candidate) = apply_edit(edit, expr.root(), ck, direction, n_vars, rng) {
            if let Some(e) = accept(candidate, expr, limits) {
                return e;
            }
        }
    }
    expr.clone()
}

/// [`mutate_with`] under default limits, with the shared knowledge given
/// as text. Unparseable shared knowledge is treated as absent.
pub fn mutate(
    expr: &Expression,
    ck: Option<&CollectiveKnowledge>,
    direction: UpdateDirection,
    rng: &mut ChaCha8Rng,
) -> Expression {
    let donor = ck.and_then(|c| Expression::parse(&c.f_best_text, expr.var_names()).ok());
    mutate_with(expr, donor.as_ref(), direction, rng, MutationLimits::default())
}

/// Random expression over `var_names` of depth at most `max_depth`.
pub fn random_expression(var_names: &Arc<[String]>, rng: &mut ChaCha8Rng, max_depth: usize) -> Expression {
    loop {
        let root = random_tree(rng, var_names.len(), 0, max_depth.max(1));
        if let Ok(e) = Expression::new(root, var_names.clone()) {
            return e;
        }
    }
}

/// Offline generator: seeded structural mutations in place of a language
/// model, following the same information flow.
#[derive(Debug, Clone, Default)]
pub struct MutationBackend {
    pub limits: MutationLimits,
}

impl MutationBackend {
    pub fn new() -> Self {
        MutationBackend::default()
    }
}

impl GeneratorBackend for MutationBackend {
    fn initial(&self, req: &ProposalRequest<'_>, spec: &ProblemSpec, hyp: &Hypothesis) -> Result<String, BackendError> {
        let mut rng = req.rng();
        let schema: Arc<[String]> = spec.var_names.clone().into();
        let out = match hyp.parse(spec) {
            Some(h) if req.agent_id == 0 => h,
            Some(h) => mutate_with(&h, None, UpdateDirection::Underestimation, &mut rng, self.limits),
            None => random_expression(&schema, &mut rng, 3),
        };
        Ok(out.serialize())
    }

    fn revise(
        &self,
        req: &ProposalRequest<'_>,
        spec: &ProblemSpec,
        state: &AgentState,
        ck: Option<&CollectiveKnowledge>,
        direction: UpdateDirection,
    ) -> Result<String, BackendError> {
        let mut rng = req.rng();
        let current = spec.parse(&state.expr_text)?;
        let donor = ck.and_then(|c| spec.parse(&c.f_best_text).ok());
        Ok(mutate_with(&current, donor.as_ref(), direction, &mut rng, self.limits).serialize())
    }
}
