use alloc::string::String;
use core::fmt;

use crate::expr::{Expression, FunctionWhitelist, ParseError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rejection {
    Empty,
    Unparseable(ParseError),
    NonWhitelisted(String),
    BadIndex { index: usize, dimension: usize },
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rejection::Empty => f.write_str("empty response"),
            Rejection::Unparseable(e) => write!(f, "unparseable response: {e}"),
            Rejection::NonWhitelisted(name) => write!(f, "non-whitelisted function \"{name}\""),
            Rejection::BadIndex { index, dimension } => {
                write!(f, "variable x[{index}] out of range for dimension {dimension}")
            }
        }
    }
}

impl From<ParseError> for Rejection {
    fn from(e: ParseError) -> Self {
        match e {
            ParseError::Empty => Rejection::Empty,
            ParseError::UnknownFunction { name, .. } => Rejection::NonWhitelisted(name),
            ParseError::IndexOutOfRange { index, dimension, .. } => Rejection::BadIndex { index, dimension },
            e @ ParseError::Syntax { .. } => Rejection::Unparseable(e),
        }
    }
}

fn is_fence(line: &str) -> bool {
    line.trim_start().starts_with("```")
}

/// Text after an `f(x) =` marker, if the line has one.
fn after_marker(line: &str) -> Option<&str> {
    let at = line.find("f(x)")?;
    let rest = line[at + 4..].trim_start();
    rest.strip_prefix('=').map(str::trim)
}

/// Picks the candidate line: the first one with an `f(x) =` marker, else the
/// first line inside a code fence, else the first nonempty line.
fn candidate_line(raw: &str) -> Option<&str> {
    if let Some(found) = raw.lines().find_map(after_marker) {
        return Some(found);
    }
    let mut in_fence = false;
    for line in raw.lines() {
        if is_fence(line) {
            in_fence = !in_fence;
            continue;
        }
        if in_fence && !line.trim().is_empty() {
            return Some(line.trim());
        }
    }
    raw.lines()
        .filter(|l| !is_fence(l))
        .map(str::trim)
        .find(|l| !l.is_empty())
}

fn clean(line: &str) -> String {
    let mut s = line.trim();
    s = s.trim_matches(|c| c == '`' || c == '\'' || c == '"').trim();
    s = s.trim_end_matches(';').trim();
    let mut out = String::from(s);
    for prefix in ["numpy.", "np.", "math."] {
        out = out.replace(prefix, "");
    }
    out
}

/// Extracts a single expression from a raw model response.
pub fn sanitize_response(raw: &str, dimension: usize, whitelist: &FunctionWhitelist) -> Result<Expression, Rejection> {
    let line = candidate_line(raw).ok_or(Rejection::Empty)?;
    let text = clean(line);
    if text.is_empty() {
        return Err(Rejection::Empty);
    }
    Ok(Expression::parse(&text, dimension, whitelist)?)
}
