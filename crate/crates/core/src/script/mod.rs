//! The edit-script language: parse, validate against a session, execute
//! atomically, invert.

use alloc::string::String;

use thiserror::Error;

pub mod ast;
pub mod execute;
mod lexer;
pub mod parser;
pub mod validate;

pub use ast::*;
pub use execute::{execute, execute_with_hook, ExecuteError, ExecutionReport};
pub use parser::{parse, MAX_SCRIPT_BYTES};
pub use validate::{
    describe_gain_change, invert, BeatAsset, ResolvedPlan, StatementError, UiHint, ValidationError, Validator,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {col}: expected {expected}, found {found}")]
pub struct ParseError {
    pub line: u32,
    pub col: u32,
    pub expected: String,
    pub found: String,
}
