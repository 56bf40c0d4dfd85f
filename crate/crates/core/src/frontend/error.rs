use thiserror::Error;

use super::ast::Span;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrontendErrorKind {
    #[error("unexpected character '{0}'")]
    UnexpectedChar(char),
    #[error("integer literal '{0}' out of range")]
    BadInteger(String),
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("undefined identifier '{0}'")]
    UndefinedIdentifier(String),
    #[error("unbound shape parameter '{0}'")]
    UnboundParam(String),
    #[error("extent of '{0}' must be at least 1")]
    ZeroExtent(String),
    #[error("'{0}' is declared more than once")]
    DuplicateDeclaration(String),
    #[error("input '{0}' cannot be assigned")]
    InputReassigned(String),
    #[error("'{0}' is assigned more than once")]
    Reassigned(String),
    #[error("output '{0}' is never assigned")]
    OutputNotAssigned(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("contraction position {pos} out of range for rank {rank}")]
    ContractionOutOfRange { pos: usize, rank: usize },
    #[error("contraction positions are not distinct (position {0} repeated)")]
    NonDistinctPositions(usize),
    #[error("contraction extents {0} vs {1} at positions {2} and {3}")]
    ContractionExtentMismatch(usize, usize, usize, usize),
}

/// A frontend diagnostic anchored at a source position.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{span}: {kind}")]
pub struct FrontendError {
    pub span: Span,
    pub kind: FrontendErrorKind,
}

impl FrontendError {
    pub fn new(span: Span, kind: FrontendErrorKind) -> Self {
        FrontendError { span, kind }
    }

    /// `file:line:col: message`
    pub fn render(&self, file: &str) -> String {
        format!("{file}:{self}")
    }
}
