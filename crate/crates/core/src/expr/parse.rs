use std::sync::Arc;

use super::{validate_var_names, BinOp, ExprError, Expression, Func, Node};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Turn every numeric literal into a fresh learnable parameter slot.
    pub promote_literals: bool,
}

// Literal slots are numbered from here so that they sort after explicit
// `pN` tokens when the tree is reindexed.
const PROMOTED_BASE: usize = 1 << 40;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => out.push((Tok::Plus, start)),
            b'-' => out.push((Tok::Minus, start)),
            b'*' => {
                if bytes.get(i + 1) == Some(&b'*') {
                    i += 1;
                    out.push((Tok::Caret, start));
                } else {
                    out.push((Tok::Star, start));
                }
            }
            b'/' => out.push((Tok::Slash, start)),
            b'^' => out.push((Tok::Caret, start)),
            b'(' => out.push((Tok::LParen, start)),
            b')' => out.push((Tok::RParen, start)),
            b',' => out.push((Tok::Comma, start)),
            b'0'..=b'9' | b'.' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_digit() || bytes[j] == b'.') {
                    j += 1;
                }
                if j < bytes.len() && (bytes[j] == b'e' || bytes[j] == b'E') {
                    let mut k = j + 1;
                    if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                        k += 1;
                    }
                    if k < bytes.len() && bytes[k].is_ascii_digit() {
                        while k < bytes.len() && bytes[k].is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let lit = &text[i..j];
                let value: f64 = lit.parse().map_err(|_| ExprError::Syntax {
                    pos: start,
                    msg: format!("malformed number `{lit}`"),
                })?;
                if !value.is_finite() {
                    return Err(ExprError::Syntax {
                        pos: start,
                        msg: format!("number `{lit}` is out of range"),
                    });
                }
                out.push((Tok::Num(value), start));
                i = j;
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                    j += 1;
                }
                out.push((Tok::Ident(text[i..j].to_string()), start));
                i = j;
                continue;
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(ExprError::Syntax {
                    pos: start,
                    msg: format!("unexpected character `{ch}`"),
                });
            }
        }
        i += 1;
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn param_slot(s: &str) -> Option<usize> {
    let digits = s.strip_prefix('p')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

pub(crate) fn is_reserved(s: &str) -> bool {
    s == "pi" || s == "pow" || Func::from_name(s).is_some() || param_slot(s).is_some()
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    at: usize,
    // None: syntax-only mode, any free identifier is accepted.
    vars: Option<&'a [String]>,
    opts: ParseOptions,
    promoted: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn syntax<T>(&self, msg: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Syntax {
            pos: self.pos(),
            msg: msg.into(),
        })
    }

    fn expect(&mut self, want: Tok) -> Result<(), ExprError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            self.syntax(format!(
                "expected {}, found {}",
                want.describe(),
                self.peek().describe()
            ))
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Node::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Node::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            Tok::Minus => {
                self.bump();
                Ok(Node::neg(self.unary()?))
            }
            Tok::Plus => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.primary()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            // Right operand is parsed at unary level, which makes `^` right-associative.
            let exp = self.unary()?;
            return Ok(Node::binary(BinOp::Pow, base, exp));
        }
        Ok(base)
    }

    fn literal(&mut self, v: f64) -> Node {
        if self.opts.promote_literals {
            self.promoted += 1;
            Node::Param(PROMOTED_BASE + self.promoted - 1)
        } else {
            Node::Const(v)
        }
    }

    fn primary(&mut self) -> Result<Node, ExprError> {
        let pos = self.pos();
        match self.bump() {
            Tok::Num(v) => Ok(self.literal(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if *self.peek() == Tok::LParen {
                    self.bump();
                    return self.call(&name, pos);
                }
                self.identifier(&name)
            }
            other => Err(ExprError::Syntax {
                pos,
                msg: format!("expected an operand, found {}", other.describe()),
            }),
        }
    }

    fn call(&mut self, name: &str, pos: usize) -> Result<Node, ExprError> {
        let mut args = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                args.push(self.expr()?);
                if *self.peek() == Tok::Comma {
                    self.bump();
                    continue;
                }
                break;
            }
        }
        self.expect(Tok::RParen)?;
        if name == "pow" {
            if args.len() != 2 {
                return Err(ExprError::Validation(format!(
                    "pow takes 2 arguments, got {} (at {pos})",
                    args.len()
                )));
            }
            let exp = args.pop().expect("len checked");
            let base = args.pop().expect("len checked");
            return Ok(Node::binary(BinOp::Pow, base, exp));
        }
        let Some(func) = Func::from_name(name) else {
            return Err(ExprError::Validation(format!(
                "unknown function `{name}` (at {pos})"
            )));
        };
        if args.len() != 1 {
            return Err(ExprError::Validation(format!(
                "{name} takes 1 argument, got {} (at {pos})",
                args.len()
            )));
        }
        Ok(Node::call(func, args.pop().expect("len checked")))
    }

    fn identifier(&mut self, name: &str) -> Result<Node, ExprError> {
        if let Some(slot) = param_slot(name) {
            if slot >= PROMOTED_BASE {
                return Err(ExprError::Validation(format!("parameter index {name} too large")));
            }
            return Ok(Node::Param(slot));
        }
        if let Some(vars) = self.vars {
            if let Some(i) = vars.iter().position(|v| v == name) {
                return Ok(Node::Var(i));
            }
        }
        if name == "pi" {
            return Ok(self.literal(std::f64::consts::PI));
        }
        if Func::from_name(name).is_some() {
            return Err(ExprError::Validation(format!(
                "function `{name}` used without arguments"
            )));
        }
        match self.vars {
            Some(_) => Err(ExprError::Validation(format!("unknown variable `{name}`"))),
            None => Ok(Node::Var(0)),
        }
    }
}

fn parse_node(text: &str, vars: Option<&[String]>, opts: ParseOptions) -> Result<Node, ExprError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        at: 0,
        vars,
        opts,
        promoted: 0,
    };
    if *p.peek() == Tok::End {
        return p.syntax("empty expression");
    }
    let node = p.expr()?;
    if *p.peek() != Tok::End {
        return p.syntax(format!("unexpected {}", p.peek().describe()));
    }
    Ok(node)
}

pub(crate) fn parse(
    text: &str,
    var_names: &[String],
    opts: ParseOptions,
) -> Result<Expression, ExprError> {
    validate_var_names(var_names)?;
    let node = parse_node(text, Some(var_names), opts)?;
    let schema: Arc<[String]> = var_names.to_vec().into();
    Ok(Expression::new(node, schema)?.with_source(text))
}

/// Checks grammar conformance without a variable schema: any free
/// identifier is accepted as a variable.
pub fn parse_syntax(text: &str) -> Result<(), ExprError> {
    parse_node(text, None, ParseOptions::default()).map(|_| ())
}
