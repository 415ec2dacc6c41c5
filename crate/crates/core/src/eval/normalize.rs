//! Token-level normalization used by exact match.

use crate::syntax::lexer::split_string_literal;
use crate::syntax::{tokenize_lenient, Token, TokenKind};

const CLOSERS: [&str; 3] = [")", "]", "}"];

/// Canonical token texts grouped into logical lines, each with its block
/// depth. Comments are gone, strings use double quotes where that needs no
/// escaping, and commas directly before a closing bracket are dropped.
pub fn normalized_lines(text: &str) -> Vec<(usize, Vec<String>)> {
    let tokens: Vec<Token> = tokenize_lenient(text)
        .into_iter()
        .filter(|t| match t.kind {
            TokenKind::Comment | TokenKind::Nl | TokenKind::EndMarker => false,
            TokenKind::Indent | TokenKind::Dedent => false,
            TokenKind::Newline => true,
            // A stray backslash would read back as a line continuation.
            TokenKind::Error => !t.text(text).is_empty() && t.text(text).trim() != "\\",
            _ => true,
        })
        .collect();
    let mut lines = Vec::new();
    // Block depth comes from the columns of the lines that survive, so lines
    // made only of dropped tokens leave no trace.
    let mut columns: Vec<usize> = Vec::new();
    let mut logical_start = true;
    let mut current: Vec<String> = Vec::new();
    let mut current_depth = 0;
    for (i, t) in tokens.iter().enumerate() {
        match t.kind {
            TokenKind::Newline => {
                if !current.is_empty() {
                    lines.push((current_depth, std::mem::take(&mut current)));
                }
                logical_start = true;
            }
            _ => {
                let raw = t.text(text);
                if t.is_op(text, ",") {
                    let next = tokens[i + 1..]
                        .iter()
                        .find(|n| !n.is_op(text, ","));
                    if next.is_some_and(|n| n.kind == TokenKind::Op && CLOSERS.contains(&n.text(text))) {
                        continue;
                    }
                }
                if logical_start {
                    logical_start = false;
                    let col = indent_width(text, t.start);
                    if columns.is_empty() {
                        columns.push(col);
                    }
                    while columns.len() > 1 && col < *columns.last().unwrap() {
                        columns.pop();
                    }
                    if col > *columns.last().unwrap() {
                        columns.push(col);
                    }
                    current_depth = columns.len() - 1;
                }
                let mut canon = if t.kind == TokenKind::String { canonical_string(raw) } else { raw.to_string() };
                // An unterminated string runs to the end of its line, so
                // nothing may follow it on a rendered line, and a final
                // backslash must not escape the line break.
                if t.kind == TokenKind::Error && raw.trim_start_matches(char::is_alphabetic).starts_with(['\'', '"']) {
                    canon.truncate(canon.trim_end().len());
                    if (canon.len() - canon.trim_end_matches('\\').len()) % 2 == 1 {
                        canon.push(' ');
                    }
                    current.push(canon);
                    lines.push((current_depth, std::mem::take(&mut current)));
                } else {
                    current.push(canon);
                }
            }
        }
    }
    if !current.is_empty() {
        lines.push((current_depth, current));
    }
    lines
}

/// Width of the whitespace before `offset` on its line, tabs to multiples
/// of eight.
fn indent_width(text: &str, offset: usize) -> usize {
    let line_start = text[..offset].rfind(['\n', '\r']).map(|i| i + 1).unwrap_or(0);
    text[line_start..offset].chars().fold(0, |w, c| if c == '\t' { (w / 8 + 1) * 8 } else { w + 1 })
}

fn canonical_string(raw: &str) -> String {
    let Some((prefix, quote, body)) = split_string_literal(raw) else { return raw.to_string() };
    if quote.starts_with('"') || body.contains('"') || body.contains('\'') {
        return raw.to_string();
    }
    let q = if quote.len() == 3 { "\"\"\"" } else { "\"" };
    format!("{prefix}{q}{body}{q}")
}

/// Normalized text: one logical line per row, four spaces per block level,
/// tokens separated by single spaces.
pub fn normalize(text: &str) -> String {
    let mut out = String::new();
    for (depth, tokens) in normalized_lines(text) {
        out.push_str(&"    ".repeat(depth));
        out.push_str(&tokens.join(" "));
        out.push('\n');
    }
    out
}

/// Whether two texts have the same normalized token sequence.
pub fn exact_match(candidate: &str, reference: &str) -> bool {
    normalized_lines(candidate) == normalized_lines(reference)
}
