use std::collections::{BTreeMap, BTreeSet};

use super::ast::{Direction, Expr, ExprKind, Extent, Program, Span};
use super::error::{FrontendError, FrontendErrorKind};

/// Values for symbolic extents such as `p`.
pub type Params = BTreeMap<String, usize>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypedDecl {
    pub name: String,
    pub direction: Direction,
    pub shape: Vec<usize>,
    pub span: Span,
    /// Introduced by assignment rather than written in the source.
    pub implicit: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypedExpr {
    pub kind: TypedKind,
    pub shape: Vec<usize>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TypedKind {
    Ident(String),
    Product(Box<TypedExpr>, Box<TypedExpr>),
    Contract(Box<TypedExpr>, Vec<(usize, usize)>),
    ElemMul(Box<TypedExpr>, Box<TypedExpr>),
    ElemAdd(Box<TypedExpr>, Box<TypedExpr>),
    Paren(Box<TypedExpr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypedStatement {
    pub target: String,
    pub expr: TypedExpr,
    pub span: Span,
}

/// A shape-checked program. Declarations include implicit temporaries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypedProgram {
    pub declarations: Vec<TypedDecl>,
    pub statements: Vec<TypedStatement>,
}

impl TypedProgram {
    pub fn declaration(&self, name: &str) -> Option<&TypedDecl> {
        self.declarations.iter().find(|d| d.name == name)
    }

    pub fn inputs(&self) -> impl Iterator<Item = &TypedDecl> {
        self.declarations.iter().filter(|d| d.direction == Direction::Input)
    }

    pub fn outputs(&self) -> impl Iterator<Item = &TypedDecl> {
        self.declarations.iter().filter(|d| d.direction == Direction::Output)
    }
}

pub fn check(program: &Program) -> Result<TypedProgram, FrontendError> {
    check_with(program, &Params::new())
}

pub fn check_with(program: &Program, params: &Params) -> Result<TypedProgram, FrontendError> {
    let mut declarations: Vec<TypedDecl> = Vec::new();
    for decl in &program.declarations {
        if declarations.iter().any(|d| d.name == decl.name) {
            return Err(FrontendError::new(decl.span, FrontendErrorKind::DuplicateDeclaration(decl.name.clone())));
        }
        let mut shape = Vec::with_capacity(decl.shape.len());
        for extent in &decl.shape {
            let v = match extent {
                Extent::Const(v) => *v,
                Extent::Param(name) => {
                    *params.get(name).ok_or_else(|| FrontendError::new(decl.span, FrontendErrorKind::UnboundParam(name.clone())))?
                }
            };
            if v == 0 {
                return Err(FrontendError::new(decl.span, FrontendErrorKind::ZeroExtent(decl.name.clone())));
            }
            shape.push(v);
        }
        declarations.push(TypedDecl { name: decl.name.clone(), direction: decl.direction, shape, span: decl.span, implicit: false });
    }

    let mut defined: BTreeMap<String, Vec<usize>> =
        declarations.iter().filter(|d| d.direction == Direction::Input).map(|d| (d.name.clone(), d.shape.clone())).collect();
    let mut assigned = BTreeSet::new();
    let mut statements = Vec::with_capacity(program.statements.len());

    for stmt in &program.statements {
        let expr = infer(&stmt.expr, &defined)?;
        match declarations.iter().find(|d| d.name == stmt.target) {
            Some(d) if d.direction == Direction::Input => {
                return Err(FrontendError::new(stmt.span, FrontendErrorKind::InputReassigned(stmt.target.clone())))
            }
            Some(d) => {
                if d.shape != expr.shape {
                    return Err(FrontendError::new(
                        stmt.span,
                        FrontendErrorKind::ShapeMismatch(format!("'{}' declared {:?} but assigned {:?}", d.name, d.shape, expr.shape)),
                    ));
                }
            }
            None => declarations.push(TypedDecl {
                name: stmt.target.clone(),
                direction: Direction::Temporary,
                shape: expr.shape.clone(),
                span: stmt.span,
                implicit: true,
            }),
        }
        if !assigned.insert(stmt.target.clone()) {
            return Err(FrontendError::new(stmt.span, FrontendErrorKind::Reassigned(stmt.target.clone())));
        }
        defined.insert(stmt.target.clone(), expr.shape.clone());
        statements.push(TypedStatement { target: stmt.target.clone(), expr, span: stmt.span });
    }

    for d in declarations.iter().filter(|d| d.direction == Direction::Output) {
        if !assigned.contains(&d.name) {
            return Err(FrontendError::new(d.span, FrontendErrorKind::OutputNotAssigned(d.name.clone())));
        }
    }

    Ok(TypedProgram { declarations, statements })
}

fn infer(expr: &Expr, env: &BTreeMap<String, Vec<usize>>) -> Result<TypedExpr, FrontendError> {
    let span = expr.span;
    let (kind, shape) = match &expr.kind {
        ExprKind::Ident(name) => {
            let shape =
                env.get(name).cloned().ok_or_else(|| FrontendError::new(span, FrontendErrorKind::UndefinedIdentifier(name.clone())))?;
            (TypedKind::Ident(name.clone()), shape)
        }
        ExprKind::Paren(inner) => {
            let inner = infer(inner, env)?;
            let shape = inner.shape.clone();
            (TypedKind::Paren(Box::new(inner)), shape)
        }
        ExprKind::Product(a, b) => {
            let (a, b) = (infer(a, env)?, infer(b, env)?);
            let shape = [a.shape.as_slice(), b.shape.as_slice()].concat();
            (TypedKind::Product(Box::new(a), Box::new(b)), shape)
        }
        ExprKind::ElemMul(a, b) | ExprKind::ElemAdd(a, b) => {
            let (a, b) = (infer(a, env)?, infer(b, env)?);
            if a.shape != b.shape {
                return Err(FrontendError::new(
                    span,
                    FrontendErrorKind::ShapeMismatch(format!("elementwise operands {:?} and {:?}", a.shape, b.shape)),
                ));
            }
            let shape = a.shape.clone();
            let kind = if matches!(expr.kind, ExprKind::ElemMul(..)) {
                TypedKind::ElemMul(Box::new(a), Box::new(b))
            } else {
                TypedKind::ElemAdd(Box::new(a), Box::new(b))
            };
            (kind, shape)
        }
        ExprKind::Contract(operand, pairs) => {
            let operand = infer(operand, env)?;
            let shape = contracted_shape(&operand.shape, pairs).map_err(|k| FrontendError::new(span, k))?;
            (TypedKind::Contract(Box::new(operand), pairs.clone()), shape)
        }
    };
    Ok(TypedExpr { kind, shape, span })
}

/// Shape after removing the paired positions; validates the pairs.
pub fn contracted_shape(shape: &[usize], pairs: &[(usize, usize)]) -> Result<Vec<usize>, FrontendErrorKind> {
    let rank = shape.len();
    let mut seen = BTreeSet::new();
    for &(a, b) in pairs {
        for pos in [a, b] {
            if pos >= rank {
                return Err(FrontendErrorKind::ContractionOutOfRange { pos, rank });
            }
            if !seen.insert(pos) {
                return Err(FrontendErrorKind::NonDistinctPositions(pos));
            }
        }
        if shape[a] != shape[b] {
            return Err(FrontendErrorKind::ContractionExtentMismatch(shape[a], shape[b], a, b));
        }
    }
    Ok(shape.iter().enumerate().filter(|(i, _)| !seen.contains(i)).map(|(_, &e)| e).collect())
}
