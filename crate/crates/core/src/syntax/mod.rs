//! Python subset front end: tokenizer, syntax tree and parser.

pub mod ast;
pub mod lexer;
pub mod parser;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use ast::*;
pub use lexer::{tokenize, tokenize_lenient, Token, TokenKind};
pub use parser::parse_module;

/// Parse failure with a 1-based line and 0-based column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntaxError {
    pub line: u32,
    pub column: u32,
    pub message: String,
}

impl SyntaxError {
    pub fn new(line: u32, column: u32, message: impl Into<String>) -> Self {
        Self { line, column, message: message.into() }
    }

    pub(crate) fn with_context(mut self, found: String) -> Self {
        self.message = format!("{}, found {found}", self.message);
        self
    }
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for SyntaxError {}
