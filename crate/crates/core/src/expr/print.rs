use std::fmt::Write;

use super::{BinOp, Node};

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

fn prec(node: &Node) -> u8 {
    match node {
        Node::Binary(BinOp::Add | BinOp::Sub, ..) => PREC_ADD,
        Node::Binary(BinOp::Mul | BinOp::Div, ..) => PREC_MUL,
        Node::Neg(_) => PREC_NEG,
        Node::Binary(BinOp::Pow, ..) => PREC_POW,
        Node::Const(_) | Node::Param(_) | Node::Var(_) | Node::Call(..) => PREC_ATOM,
    }
}

pub(super) fn to_canonical(node: &Node, vars: &[String]) -> String {
    let mut out = String::new();
    write_node(&mut out, node, vars);
    out
}

fn write_wrapped(out: &mut String, node: &Node, vars: &[String], parens: bool) {
    if parens {
        out.push('(');
        write_node(out, node, vars);
        out.push(')');
    } else {
        write_node(out, node, vars);
    }
}

fn write_node(out: &mut String, node: &Node, vars: &[String]) {
    match node {
        // f64 Display is the shortest text that parses back to the same bits.
        Node::Const(v) => write!(out, "{v}").expect("string write"),
        Node::Param(i) => write!(out, "p{i}").expect("string write"),
        Node::Var(i) => out.push_str(&vars[*i]),
        Node::Neg(child) => {
            out.push('-');
            write_wrapped(out, child, vars, prec(child) < PREC_NEG);
        }
        Node::Call(f, arg) => {
            out.push_str(f.name());
            out.push('(');
            write_node(out, arg, vars);
            out.push(')');
        }
        Node::Binary(BinOp::Pow, base, exp) => {
            write_wrapped(out, base, vars, prec(base) <= PREC_POW);
            out.push('^');
            write_wrapped(out, exp, vars, prec(exp) < PREC_NEG);
        }
        Node::Binary(op, l, r) => {
            let p = prec(node);
            write_wrapped(out, l, vars, prec(l) < p);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            write_wrapped(out, r, vars, prec(r) <= p);
        }
    }
}
