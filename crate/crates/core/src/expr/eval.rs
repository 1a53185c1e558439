//! Real-valued evaluation. Every domain violation collapses to NaN, and NaN
//! is absorbing: once a subtree is non-finite the whole expression is.

use super::{BinOp, Func, Node};

#[inline]
fn clean(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::NAN
    }
}

#[inline]
pub(crate) fn apply_binary(op: BinOp, a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        return f64::NAN;
    }
    let v = match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        BinOp::Mul => a * b,
        BinOp::Div => {
            if b == 0.0 {
                return f64::NAN;
            }
            a / b
        }
        BinOp::Pow => {
            if a < 0.0 && b.fract() != 0.0 {
                return f64::NAN;
            }
            if a == 0.0 && b < 0.0 {
                return f64::NAN;
            }
            a.powf(b)
        }
    };
    clean(v)
}

#[inline]
pub(crate) fn apply_call(f: Func, a: f64) -> f64 {
    if a.is_nan() {
        return f64::NAN;
    }
    clean(f.apply(a))
}

/// Evaluates one row. Callers are responsible for arity checks.
pub fn eval_node(node: &Node, row: &[f64], params: &[f64]) -> f64 {
    match node {
        Node::Const(c) => *c,
        Node::Param(i) => clean(params[*i]),
        Node::Var(i) => clean(row[*i]),
        Node::Neg(c) => -eval_node(c, row, params),
        Node::Call(f, a) => apply_call(*f, eval_node(a, row, params)),
        Node::Binary(op, l, r) => {
            apply_binary(*op, eval_node(l, row, params), eval_node(r, row, params))
        }
    }
}

/// Evaluates `n` rows at once over column-major inputs. Produces the same
/// bits as calling [`eval_node`] row by row.
pub fn evaluate_columns(node: &Node, columns: &[Vec<f64>], n: usize, params: &[f64]) -> Vec<f64> {
    match node {
        Node::Const(c) => vec![*c; n],
        Node::Param(i) => vec![clean(params[*i]); n],
        Node::Var(i) => columns[*i][..n].iter().map(|&v| clean(v)).collect(),
        Node::Neg(c) => {
            let mut v = evaluate_columns(c, columns, n, params);
            v.iter_mut().for_each(|x| *x = -*x);
            v
        }
        Node::Call(f, a) => {
            let mut v = evaluate_columns(a, columns, n, params);
            v.iter_mut().for_each(|x| *x = apply_call(*f, *x));
            v
        }
        Node::Binary(op, l, r) => {
            let mut lv = evaluate_columns(l, columns, n, params);
            let rv = evaluate_columns(r, columns, n, params);
            lv.iter_mut()
                .zip(rv)
                .for_each(|(a, b)| *a = apply_binary(*op, *a, b));
            lv
        }
    }
}
