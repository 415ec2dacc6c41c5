//! Tokenizer for the supported Python 3 subset.
//!
//! Produces a flat token stream with byte spans into the source, including
//! `Indent`/`Dedent`/`Newline` structure tokens. Comments and non-logical
//! line breaks (`Nl`) are kept in the stream; the parser skips them.
//!
//! Two modes exist. [`tokenize`] is strict and stops at the first lexical
//! error. [`tokenize_lenient`] never fails: malformed input produces
//! [`TokenKind::Error`] tokens so that text normalization can still work on
//! broken snippets.

use super::SyntaxError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Name,
    Number,
    String,
    Op,
    Comment,
    /// End of a logical line.
    Newline,
    /// Line break that does not end a logical line (blank line, comment-only
    /// line, or a break inside brackets).
    Nl,
    Indent,
    Dedent,
    EndMarker,
    /// Lenient mode only: an unexpected character, an unterminated string,
    /// or an indentation inconsistency (zero-width).
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub start: usize,
    pub end: usize,
    /// 1-based line of `start`.
    pub line: u32,
    /// 0-based column (in chars) of `start`.
    pub col: u32,
}

impl Token {
    pub fn text<'a>(&self, src: &'a str) -> &'a str {
        &src[self.start..self.end]
    }

    pub fn is_op(&self, src: &str, op: &str) -> bool {
        self.kind == TokenKind::Op && self.text(src) == op
    }
}

pub const KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class",
    "continue", "def", "del", "elif", "else", "except", "finally", "for", "from", "global",
    "if", "import", "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return",
    "try", "while", "with", "yield",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

const OPERATORS: &[&str] = &[
    "**=", "//=", ">>=", "<<=", "...", "->", ":=", "**", "//", "<<", ">>", "<=", ">=", "==",
    "!=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "@=", "+", "-", "*", "/", "%", "@",
    "&", "|", "^", "~", "<", ">", "(", ")", "[", "]", "{", "}", ",", ":", ";", ".", "=",
];

pub fn tokenize(src: &str) -> Result<Vec<Token>, SyntaxError> {
    let mut lexer = Lexer::new(src, false);
    lexer.run()?;
    Ok(lexer.tokens)
}

pub fn tokenize_lenient(src: &str) -> Vec<Token> {
    let mut lexer = Lexer::new(src, true);
    // Lenient mode records problems as Error tokens instead of failing.
    let _ = lexer.run();
    lexer.tokens
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    line: u32,
    line_start: usize,
    lenient: bool,
    tokens: Vec<Token>,
    indents: Vec<usize>,
    brackets: Vec<(u8, usize, u32, u32)>,
    at_line_start: bool,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str, lenient: bool) -> Self {
        Self {
            src,
            bytes: src.as_bytes(),
            pos: 0,
            line: 1,
            line_start: 0,
            lenient,
            tokens: Vec::new(),
            indents: vec![0],
            brackets: Vec::new(),
            at_line_start: true,
        }
    }

    fn col_of(&self, offset: usize) -> u32 {
        self.src[self.line_start..offset].chars().count() as u32
    }

    fn push(&mut self, kind: TokenKind, start: usize, end: usize) {
        let col = self.col_of(start.max(self.line_start));
        self.tokens.push(Token { kind, start, end, line: self.line, col });
    }

    fn error_at(&self, offset: usize, message: impl Into<String>) -> SyntaxError {
        SyntaxError::new(self.line, self.col_of(offset.max(self.line_start)), message)
    }

    fn newline(&mut self, end: usize) {
        self.pos = end;
        self.line += 1;
        self.line_start = end;
    }

    fn run(&mut self) -> Result<(), SyntaxError> {
        while self.pos < self.bytes.len() {
            if self.at_line_start {
                // Lines that start inside brackets carry no indentation.
                self.at_line_start = false;
                if self.brackets.is_empty() {
                    self.indentation()?;
                    continue;
                }
            }
            let c = self.bytes[self.pos];
            match c {
                b' ' | b'\t' | b'\x0c' => self.pos += 1,
                b'\r' | b'\n' => {
                    let start = self.pos;
                    let end = if c == b'\r' && self.bytes.get(start + 1) == Some(&b'\n') {
                        start + 2
                    } else {
                        start + 1
                    };
                    let logical = self.brackets.is_empty()
                        && !matches!(
                            self.tokens.last().map(|t| t.kind),
                            None | Some(TokenKind::Newline | TokenKind::Nl | TokenKind::Indent | TokenKind::Dedent)
                        );
                    let kind = if logical { TokenKind::Newline } else { TokenKind::Nl };
                    // A comment-only line still ends with Nl, not Newline.
                    let kind = if logical && self.last_significant_is_comment_line() {
                        TokenKind::Nl
                    } else {
                        kind
                    };
                    self.push(kind, start, end);
                    self.newline(end);
                    self.at_line_start = true;
                }
                b'#' => {
                    let start = self.pos;
                    while self.pos < self.bytes.len() && !matches!(self.bytes[self.pos], b'\n' | b'\r') {
                        self.pos += 1;
                    }
                    self.push(TokenKind::Comment, start, self.pos);
                }
                b'\\' => {
                    let next = self.bytes.get(self.pos + 1).copied();
                    match next {
                        Some(b'\n') => self.newline(self.pos + 2),
                        Some(b'\r') => {
                            let end = if self.bytes.get(self.pos + 2) == Some(&b'\n') { self.pos + 3 } else { self.pos + 2 };
                            self.newline(end);
                        }
                        _ => {
                            if !self.lenient {
                                return Err(self.error_at(self.pos, "unexpected character after line continuation character"));
                            }
                            self.push(TokenKind::Error, self.pos, self.pos + 1);
                            self.pos += 1;
                        }
                    }
                }
                b'0'..=b'9' => self.number(),
                b'.' if self.bytes.get(self.pos + 1).is_some_and(u8::is_ascii_digit) => self.number(),
                b'\'' | b'"' => self.string(self.pos)?,
                _ => {
                    if let Some(prefix_len) = self.string_prefix() {
                        let start = self.pos;
                        self.pos += prefix_len;
                        self.string(start)?;
                        continue;
                    }
                    let ch = self.src[self.pos..].chars().next().unwrap();
                    if ch == '_' || ch.is_alphabetic() {
                        self.name();
                    } else {
                        self.operator(ch)?;
                    }
                }
            }
        }
        self.finish()
    }

    fn last_significant_is_comment_line(&self) -> bool {
        // True when the current physical line holds only a comment.
        let mut iter = self.tokens.iter().rev();
        match iter.next() {
            Some(t) if t.kind == TokenKind::Comment => {}
            _ => return false,
        }
        matches!(
            iter.next().map(|t| t.kind),
            None | Some(TokenKind::Newline | TokenKind::Nl | TokenKind::Indent | TokenKind::Dedent)
        )
    }

    fn indentation(&mut self) -> Result<(), SyntaxError> {
        let mut width = 0usize;
        let mut p = self.pos;
        while p < self.bytes.len() {
            match self.bytes[p] {
                b' ' => width += 1,
                b'\t' => width = (width / 8 + 1) * 8,
                b'\x0c' => width = 0,
                _ => break,
            }
            p += 1;
        }
        self.pos = p;
        // Blank and comment-only lines do not affect indentation.
        match self.bytes.get(p) {
            None | Some(b'\n' | b'\r' | b'#') => return Ok(()),
            Some(b'\\') if matches!(self.bytes.get(p + 1), Some(b'\n' | b'\r')) => return Ok(()),
            _ => {}
        }
        let current = *self.indents.last().unwrap();
        if width > current {
            self.indents.push(width);
            self.push(TokenKind::Indent, p, p);
        } else if width < current {
            while *self.indents.last().unwrap() > width {
                self.indents.pop();
                self.push(TokenKind::Dedent, p, p);
            }
            if *self.indents.last().unwrap() != width {
                if !self.lenient {
                    return Err(self.error_at(p, "unindent does not match any outer indentation level"));
                }
                // Keep the depth where it landed and flag the line.
                self.push(TokenKind::Error, p, p);
            }
        }
        Ok(())
    }

    fn name(&mut self) {
        let start = self.pos;
        for (i, ch) in self.src[start..].char_indices() {
            if !(ch == '_' || ch.is_alphanumeric()) {
                self.pos = start + i;
                self.push(TokenKind::Name, start, self.pos);
                return;
            }
        }
        self.pos = self.bytes.len();
        self.push(TokenKind::Name, start, self.pos);
    }

    fn number(&mut self) {
        let start = self.pos;
        let b = self.bytes;
        let mut p = self.pos;
        let is_digit_or_us = |c: u8| c.is_ascii_digit() || c == b'_';
        if b[p] == b'0' && matches!(b.get(p + 1), Some(b'x' | b'X' | b'o' | b'O' | b'b' | b'B')) {
            p += 2;
            while p < b.len() && (b[p].is_ascii_hexdigit() || b[p] == b'_') {
                p += 1;
            }
        } else {
            while p < b.len() && is_digit_or_us(b[p]) {
                p += 1;
            }
            if p < b.len() && b[p] == b'.' {
                p += 1;
                while p < b.len() && is_digit_or_us(b[p]) {
                    p += 1;
                }
            }
            if p < b.len() && matches!(b[p], b'e' | b'E') {
                let mut q = p + 1;
                if q < b.len() && matches!(b[q], b'+' | b'-') {
                    q += 1;
                }
                if q < b.len() && b[q].is_ascii_digit() {
                    p = q;
                    while p < b.len() && is_digit_or_us(b[p]) {
                        p += 1;
                    }
                }
            }
            if p < b.len() && matches!(b[p], b'j' | b'J') {
                p += 1;
            }
        }
        self.pos = p;
        self.push(TokenKind::Number, start, p);
    }

    /// Length of a string prefix (`r`, `b`, `f`, `rb`, ...) when one starts a
    /// string literal at the current position.
    fn string_prefix(&self) -> Option<usize> {
        let b = self.bytes;
        let p = self.pos;
        let is_prefix_char = |c: u8| matches!(c.to_ascii_lowercase(), b'r' | b'b' | b'u' | b'f');
        if p < b.len() && is_prefix_char(b[p]) {
            if matches!(b.get(p + 1), Some(b'\'' | b'"')) {
                return Some(1);
            }
            if b.get(p + 1).copied().is_some_and(is_prefix_char) && matches!(b.get(p + 2), Some(b'\'' | b'"')) {
                let pair = [b[p].to_ascii_lowercase(), b[p + 1].to_ascii_lowercase()];
                if matches!(&pair, b"rb" | b"br" | b"rf" | b"fr") {
                    return Some(2);
                }
            }
        }
        None
    }

    fn string(&mut self, start: usize) -> Result<(), SyntaxError> {
        let b = self.bytes;
        let quote = b[self.pos];
        let triple = b.get(self.pos + 1) == Some(&quote) && b.get(self.pos + 2) == Some(&quote);
        let (start_line, start_line_start) = (self.line, self.line_start);
        let mut p = self.pos + if triple { 3 } else { 1 };
        loop {
            if p >= b.len() {
                if !self.lenient {
                    return Err(SyntaxError::new(
                        start_line,
                        self.src[start_line_start..start].chars().count() as u32,
                        "unterminated string literal",
                    ));
                }
                self.emit_spanning(TokenKind::Error, start, b.len(), start_line, start_line_start);
                self.pos = b.len();
                return Ok(());
            }
            match b[p] {
                b'\\' => {
                    // Escaped line breaks still advance the line counter.
                    if matches!(b.get(p + 1), Some(b'\n')) {
                        self.line += 1;
                        self.line_start = p + 2;
                    } else if matches!(b.get(p + 1), Some(b'\r')) {
                        let skip = if b.get(p + 2) == Some(&b'\n') { 3 } else { 2 };
                        self.line += 1;
                        self.line_start = p + skip;
                        p += skip;
                        continue;
                    }
                    p += 2;
                }
                b'\n' | b'\r' if !triple => {
                    if !self.lenient {
                        return Err(SyntaxError::new(
                            start_line,
                            self.src[start_line_start..start].chars().count() as u32,
                            "unterminated string literal",
                        ));
                    }
                    self.emit_spanning(TokenKind::Error, start, p, start_line, start_line_start);
                    self.pos = p;
                    return Ok(());
                }
                b'\n' => {
                    self.line += 1;
                    self.line_start = p + 1;
                    p += 1;
                }
                b'\r' => {
                    let skip = if b.get(p + 1) == Some(&b'\n') { 2 } else { 1 };
                    self.line += 1;
                    self.line_start = p + skip;
                    p += skip;
                }
                c if c == quote => {
                    if !triple {
                        p += 1;
                        break;
                    }
                    if b.get(p + 1) == Some(&quote) && b.get(p + 2) == Some(&quote) {
                        p += 3;
                        break;
                    }
                    p += 1;
                }
                _ => p += 1,
            }
        }
        let p = p.min(b.len());
        self.emit_spanning(TokenKind::String, start, p, start_line, start_line_start);
        self.pos = p;
        Ok(())
    }

    fn emit_spanning(&mut self, kind: TokenKind, start: usize, end: usize, line: u32, line_start: usize) {
        let col = self.src[line_start..start].chars().count() as u32;
        self.tokens.push(Token { kind, start, end, line, col });
    }

    fn operator(&mut self, ch: char) -> Result<(), SyntaxError> {
        let rest = &self.src[self.pos..];
        if let Some(op) = OPERATORS.iter().find(|op| rest.starts_with(**op)) {
            let start = self.pos;
            self.pos += op.len();
            let opened = op.as_bytes()[0];
            match *op {
                "(" | "[" | "{" => {
                    let col = self.col_of(start);
                    self.brackets.push((opened, start, self.line, col));
                }
                ")" | "]" | "}" => {
                    let expected = match opened {
                        b')' => b'(',
                        b']' => b'[',
                        _ => b'{',
                    };
                    match self.brackets.last() {
                        Some(&(open, ..)) if open == expected => {
                            self.brackets.pop();
                        }
                        _ if self.lenient => {
                            // Leave the stack alone; mismatches are tolerated.
                            if self.brackets.last().is_some() {
                                self.brackets.pop();
                            }
                        }
                        Some(_) => {
                            return Err(self.error_at(start, format!("closing parenthesis '{op}' does not match")));
                        }
                        None => return Err(self.error_at(start, format!("unmatched '{op}'"))),
                    }
                }
                _ => {}
            }
            self.push(TokenKind::Op, start, self.pos);
            return Ok(());
        }
        if !self.lenient {
            return Err(self.error_at(self.pos, format!("invalid character '{ch}'")));
        }
        let start = self.pos;
        self.pos += ch.len_utf8();
        self.push(TokenKind::Error, start, self.pos);
        Ok(())
    }

    fn finish(&mut self) -> Result<(), SyntaxError> {
        if let Some(&(open, _, line, col)) = self.brackets.last() {
            if !self.lenient {
                return Err(SyntaxError::new(line, col, format!("'{}' was never closed", open as char)));
            }
        }
        let end = self.bytes.len();
        let needs_newline = !matches!(
            self.tokens.last().map(|t| t.kind),
            None | Some(TokenKind::Newline | TokenKind::Nl | TokenKind::Dedent | TokenKind::Indent)
        ) && !self.last_significant_is_comment_line();
        if needs_newline {
            self.push(TokenKind::Newline, end, end);
        }
        while self.indents.len() > 1 {
            self.indents.pop();
            self.push(TokenKind::Dedent, end, end);
        }
        self.push(TokenKind::EndMarker, end, end);
        Ok(())
    }
}

/// Splits a string literal token into `(prefix, quote, body)`. The quote is
/// one of `'`, `"`, `'''`, `"""`.
pub fn split_string_literal(text: &str) -> Option<(&str, &str, &str)> {
    let quote_at = text.find(['\'', '"'])?;
    let (prefix, rest) = text.split_at(quote_at);
    let q = &rest[..1];
    let quote = if rest.len() >= 6 && rest.starts_with(&q.repeat(3)) && rest.ends_with(&q.repeat(3)) {
        &rest[..3]
    } else {
        q
    };
    if rest.len() < 2 * quote.len() || !rest.ends_with(quote) {
        return None;
    }
    let body = &rest[quote.len()..rest.len() - quote.len()];
    Some((prefix, quote, body))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<(TokenKind, String)> {
        tokenize(src)
            .unwrap()
            .into_iter()
            .map(|t| (t.kind, t.text(src).to_string()))
            .collect()
    }

    #[test]
    fn simple_def_structure() {
        let toks = kinds("def f(a):\n    return a\n");
        let k: Vec<TokenKind> = toks.iter().map(|t| t.0).collect();
        use TokenKind::*;
        assert_eq!(
            k,
            vec![Name, Name, Op, Name, Op, Op, Newline, Indent, Name, Name, Newline, Dedent, EndMarker]
        );
    }

    #[test]
    fn brackets_suppress_newlines() {
        let toks = kinds("f(a,\n  b)\n");
        assert_eq!(toks.iter().filter(|t| t.0 == TokenKind::Newline).count(), 1);
        assert!(toks.iter().any(|t| t.0 == TokenKind::Nl));
    }

    #[test]
    fn strings_and_prefixes() {
        let toks = kinds("x = rb'a\\'b' + \"\"\"multi\nline\"\"\" + f'{y}'\n");
        let strings: Vec<&str> = toks.iter().filter(|t| t.0 == TokenKind::String).map(|t| t.1.as_str()).collect();
        assert_eq!(strings, vec!["rb'a\\'b'", "\"\"\"multi\nline\"\"\"", "f'{y}'"]);
    }

    #[test]
    fn numbers() {
        let toks = kinds("a = 1e-6 + 0x1F + 1_000.5j + .5\n");
        let nums: Vec<&str> = toks.iter().filter(|t| t.0 == TokenKind::Number).map(|t| t.1.as_str()).collect();
        assert_eq!(nums, vec!["1e-6", "0x1F", "1_000.5j", ".5"]);
    }

    #[test]
    fn comment_only_lines_are_nl() {
        let toks = kinds("# hi\nx = 1  # tail\n");
        assert_eq!(toks.iter().filter(|t| t.0 == TokenKind::Newline).count(), 1);
        assert_eq!(toks.iter().filter(|t| t.0 == TokenKind::Comment).count(), 2);
    }

    #[test]
    fn strict_errors_carry_positions() {
        let err = tokenize("x = 'abc\n").unwrap_err();
        assert_eq!((err.line, err.column), (1, 4));
        let err = tokenize("if x:\n    a\n  b\n").unwrap_err();
        assert_eq!(err.line, 3);
        let err = tokenize("f(a\n").unwrap_err();
        assert_eq!((err.line, err.column), (1, 1));
        assert!(tokenize("a ? b\n").is_err());
    }

    #[test]
    fn lenient_never_fails() {
        let toks = tokenize_lenient("x = 'abc\nif y:\n    a\n  b $ )\n");
        assert!(toks.iter().filter(|t| t.kind == TokenKind::Error).count() >= 3);
        assert_eq!(toks.last().unwrap().kind, TokenKind::EndMarker);
    }

    #[test]
    fn string_literal_split() {
        assert_eq!(split_string_literal("'a'"), Some(("", "'", "a")));
        assert_eq!(split_string_literal("rb\"x\""), Some(("rb", "\"", "x")));
        assert_eq!(split_string_literal("'''doc'''"), Some(("", "'''", "doc")));
        assert_eq!(split_string_literal("''"), Some(("", "'", "")));
        assert_eq!(split_string_literal("''''''"), Some(("", "'''", "")));
    }
}
