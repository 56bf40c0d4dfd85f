use std::fmt;

/// 1-based source position.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Self {
        Span { line, col }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Input,
    Output,
    Temporary,
}

/// A shape extent, either literal or a named parameter bound at check time.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Extent {
    Const(usize),
    Param(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Declaration {
    pub name: String,
    pub direction: Direction,
    pub shape: Vec<Extent>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Statement {
    pub target: String,
    pub expr: Expr,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprKind {
    Ident(String),
    /// Tensor (outer) product.
    Product(Box<Expr>, Box<Expr>),
    /// Contraction over 0-based index-position pairs of the operand.
    Contract(Box<Expr>, Vec<(usize, usize)>),
    ElemMul(Box<Expr>, Box<Expr>),
    ElemAdd(Box<Expr>, Box<Expr>),
    Paren(Box<Expr>),
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Expr { kind, span }
    }

    fn strip_spans(&mut self) {
        self.span = Span::default();
        match &mut self.kind {
            ExprKind::Ident(_) => {}
            ExprKind::Contract(e, _) | ExprKind::Paren(e) => e.strip_spans(),
            ExprKind::Product(a, b) | ExprKind::ElemMul(a, b) | ExprKind::ElemAdd(a, b) => {
                a.strip_spans();
                b.strip_spans();
            }
        }
    }

    /// Every identifier referenced by this expression, in source order.
    pub fn identifiers(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_identifiers(&mut out);
        out
    }

    fn collect_identifiers<'a>(&'a self, out: &mut Vec<&'a str>) {
        match &self.kind {
            ExprKind::Ident(n) => out.push(n),
            ExprKind::Contract(e, _) | ExprKind::Paren(e) => e.collect_identifiers(out),
            ExprKind::Product(a, b) | ExprKind::ElemMul(a, b) | ExprKind::ElemAdd(a, b) => {
                a.collect_identifiers(out);
                b.collect_identifiers(out);
            }
        }
    }
}

/// Parsed program: declarations and statements in source order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Program {
    pub declarations: Vec<Declaration>,
    pub statements: Vec<Statement>,
}

impl Program {
    /// Copy of the program with all source locations zeroed, for structural comparison.
    pub fn without_spans(&self) -> Program {
        let mut p = self.clone();
        for d in &mut p.declarations {
            d.span = Span::default();
        }
        for s in &mut p.statements {
            s.span = Span::default();
            s.expr.strip_spans();
        }
        p
    }

    pub fn declaration(&self, name: &str) -> Option<&Declaration> {
        self.declarations.iter().find(|d| d.name == name)
    }
}
