//! Lexing, parsing, and shape checking of the tensor DSL.

pub mod ast;
pub mod check;
pub mod error;
pub mod lexer;
pub mod parser;
pub mod pretty;

pub use ast::{Declaration, Direction, Expr, ExprKind, Extent, Program, Span, Statement};
pub use check::{check, check_with, Params, TypedDecl, TypedExpr, TypedKind, TypedProgram, TypedStatement};
pub use error::{FrontendError, FrontendErrorKind};
pub use parser::parse;
pub use pretty::pretty;

/// Parse and check in one step.
pub fn load(src: &str, params: &Params) -> Result<TypedProgram, FrontendError> {
    check_with(&parse(src)?, params)
}
