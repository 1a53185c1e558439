use super::BackendError;
use crate::expr::parse_syntax;

/// Removes common wrappers around an expression line: `return`, an
/// assignment target, numeric-library prefixes and a trailing semicolon.
fn normalize_line(line: &str) -> String {
    let mut s = line.trim();
    if let Some(i) = s.find('#') {
        s = s[..i].trim();
    }
    s = s.trim_end_matches(';').trim();
    if let Some(rest) = s.strip_prefix("return ") {
        s = rest.trim();
    }
    if let Some(eq) = s.find('=') {
        let lhs = s[..eq].trim();
        let next = s[eq + 1..].chars().next();
        let is_target = !lhs.is_empty()
            && next != Some('=')
            && lhs.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '(' || c == ')' || c == ',' || c == ' ');
        if is_target {
            s = s[eq + 1..].trim();
        }
    }
    let mut out = s.to_string();
    for prefix in ["np.", "numpy.", "math."] {
        out = out.replace(prefix, "");
    }
    out
}

fn parses(line: &str) -> bool {
    !line.is_empty() && parse_syntax(line).is_ok()
}

fn first_fenced_block(text: &str) -> Option<&str> {
    let open = text.find("```")?;
    let body = &text[open + 3..];
    let close = body.find("```")?;
    Some(&body[..close])
}

fn strip_language_tag(block: &str) -> &str {
    if let Some(nl) = block.find('\n') {
        let first = block[..nl].trim();
        if !first.is_empty() && first.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '+') && !parses_as_expr_line(block, nl) {
            return &block[nl + 1..];
        }
    }
    block
}

// A one-word first line is an expression (a bare variable) only when
// nothing else in the block is.
fn parses_as_expr_line(block: &str, nl: usize) -> bool {
    block[nl + 1..].lines().all(|l| l.trim().is_empty())
}

/// Pulls the candidate expression out of a completion: the content of the
/// first fenced block if there is one, otherwise the first line that parses.
pub fn extract_expression(completion: &str) -> Result<String, BackendError> {
    if let Some(block) = first_fenced_block(completion) {
        let body = strip_language_tag(block);
        let lines: Vec<String> = body
            .lines()
            .map(normalize_line)
            .filter(|l| !l.is_empty())
            .collect();
        if let Some(l) = lines.iter().rev().find(|l| parses(l)) {
            return Ok(l.clone());
        }
        let joined = lines.join(" ");
        if !joined.is_empty() {
            return Ok(joined);
        }
    }
    completion
        .lines()
        .map(normalize_line)
        .find(|l| parses(l))
        .ok_or(BackendError::NoExpressionFound)
}
