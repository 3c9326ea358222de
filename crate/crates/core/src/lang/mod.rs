//! The agent language: Jason-style beliefs, rules and plans.
//!
//! ```text
//! project_url("https://github.com/codebase.git").
//! incomplete_task(T) :- task_status(T, adopted).
//! +!prepare_project : project_repo(URL) <-
//!     clone_repo(URL);
//!     get_backlog_item(T);
//!     +current_task(T).
//! ```
//!
//! Prompts for `query_LLM` / `ask_LLM` may be built with `+`; everywhere
//! else string building goes through `.concat(A, B, ..., Out)`. Comments
//! run from `//` to end of line. `∧` and `←` are accepted as spellings of
//! `&` and `<-`.

mod ast;
mod lexer;
mod parser;
mod pretty;

pub use ast::*;
pub use parser::{parse_agent_source, parse_body, parse_conjunction, parse_literal, parse_term, MAX_TERM_DEPTH};
pub use pretty::pretty_print;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("{line}:{column}: expected {}, found {found}", expected.join(" or "))]
    Syntax {
        line: usize,
        column: usize,
        expected: Vec<String>,
        found: String,
    },
    #[error("{line}:{column}: variable {variable} in rule head `{head}` does not occur in the rule body")]
    RangeRestriction {
        line: usize,
        column: usize,
        variable: String,
        head: String,
    },
    #[error("{line}:{column}: ask_LLM result variable {variable} is already bound")]
    AskResultBound {
        line: usize,
        column: usize,
        variable: String,
    },
    #[error("{line}:{column}: {message}")]
    Invalid {
        line: usize,
        column: usize,
        message: String,
    },
}

impl ParseError {
    pub fn position(&self) -> (usize, usize) {
        match self {
            ParseError::Syntax { line, column, .. }
            | ParseError::RangeRestriction { line, column, .. }
            | ParseError::AskResultBound { line, column, .. }
            | ParseError::Invalid { line, column, .. } => (*line, *column),
        }
    }
}

#[cfg(test)]
mod tests;
