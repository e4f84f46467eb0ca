//! Solidity front end: tokenizer, syntax tree and parser.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod span;

pub use ast::*;
pub use parser::parse_source;
pub use span::Span;

use serde::Serialize;

/// Fatal parse failure with location and the set of tokens that would have been accepted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, thiserror::Error)]
#[error("{path}:{line}:{column}: {message}")]
pub struct SyntaxError {
    pub path: String,
    pub line: u32,
    pub column: u32,
    pub message: String,
    pub expected: Vec<String>,
}

impl SyntaxError {
    pub fn new(path: &str, line: u32, column: u32, message: &str, expected: Vec<String>) -> Self {
        SyntaxError { path: path.to_string(), line, column, message: message.to_string(), expected }
    }
}

/// Every function of every contract in the unit, in source order.
pub fn enumerate_functions(unit: &SourceUnit) -> Vec<(&ContractDef, &FunctionDef)> {
    unit.contracts.iter().flat_map(|c| c.functions.iter().map(move |f| (c, f))).collect()
}
