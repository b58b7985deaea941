//! The visual-program language: `VAR=MODULE(key=value,...)`, one statement per
//! line, ending in a single RESULT statement.

mod analysis;
mod ast;
mod parse;
mod print;

pub use analysis::{count_visual_steps, detect_shared_latents, latent_ancestors, SharedLatent};
pub use ast::{Arg, ArgKind, ModuleKind, Program, Statement, VarType};
pub use parse::parse_program;
pub use print::quote_literal;

use crate::evalexpr::EvalError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("line {line}, column {col}: syntax error: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("line {line}, column {col}: unknown module `{name}`")]
    UnknownModule { line: usize, col: usize, name: String },
    #[error("line {line}, column {col}: `{name}` is assigned more than once")]
    DuplicateAssignment { line: usize, col: usize, name: String },
    #[error("line {line}: `{name}` is used before it is defined")]
    UseBeforeDefine { line: usize, name: String },
    #[error("program has no RESULT statement")]
    MissingResult,
    #[error("line {line}: RESULT must be the last statement")]
    ResultNotLast { line: usize },
    #[error("line {line}: `{name}` is a predefined input and cannot be assigned")]
    ReservedName { line: usize, name: String },
    #[error("line {line}, column {col}: {module} has no argument `{arg}`")]
    UnknownArgument {
        line: usize,
        col: usize,
        module: ModuleKind,
        arg: String,
    },
    #[error("line {line}, column {col}: argument `{arg}` given twice")]
    DuplicateArgument { line: usize, col: usize, arg: String },
    #[error("line {line}: {module} is missing argument `{arg}`")]
    MissingArgument {
        line: usize,
        module: ModuleKind,
        arg: String,
    },
    #[error("line {line}: bad argument `{arg}`: {msg}")]
    ArgumentType { line: usize, arg: String, msg: String },
    #[error("line {line}: in EVAL expression: {source}")]
    Eval { line: usize, source: EvalError },
}

impl ParseError {
    /// Source line of the diagnostic, when it has one.
    pub fn line(&self) -> Option<usize> {
        match self {
            ParseError::MissingResult => None,
            ParseError::Syntax { line, .. }
            | ParseError::UnknownModule { line, .. }
            | ParseError::DuplicateAssignment { line, .. }
            | ParseError::UseBeforeDefine { line, .. }
            | ParseError::ResultNotLast { line }
            | ParseError::ReservedName { line, .. }
            | ParseError::UnknownArgument { line, .. }
            | ParseError::DuplicateArgument { line, .. }
            | ParseError::MissingArgument { line, .. }
            | ParseError::ArgumentType { line, .. }
            | ParseError::Eval { line, .. } => Some(*line),
        }
    }

    /// Short machine-readable name of the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            ParseError::Syntax { .. } => "SyntaxError",
            ParseError::UnknownModule { .. } => "UnknownModule",
            ParseError::DuplicateAssignment { .. } => "DuplicateAssignment",
            ParseError::UseBeforeDefine { .. } => "UseBeforeDefine",
            ParseError::MissingResult => "MissingResult",
            ParseError::ResultNotLast { .. } => "ResultNotLast",
            ParseError::ReservedName { .. } => "ReservedName",
            ParseError::UnknownArgument { .. } => "UnknownArgument",
            ParseError::DuplicateArgument { .. } => "DuplicateArgument",
            ParseError::MissingArgument { .. } => "MissingArgument",
            ParseError::ArgumentType { .. } => "ArgumentType",
            ParseError::Eval { .. } => "EvalSyntaxError",
        }
    }
}
