//! Recursive-descent parser for the tensor DSL.
//!
//! ```text
//! program := (decl | stmt)*
//! decl    := "var" ("input" | "output")? ident ":" "[" extent+ "]"
//! stmt    := ident "=" expr
//! expr    := mul ("+" mul)*
//! mul     := prod ("*" prod)*
//! prod    := postfix ("#" postfix)*
//! postfix := primary ("." "[" ("[" nat nat "]")+ "]")*
//! primary := ident | "(" expr ")"
//! ```

use super::ast::{Declaration, Direction, Expr, ExprKind, Extent, Program, Span, Statement};
use super::error::{FrontendError, FrontendErrorKind};
use super::lexer::{tokenize, Spanned, Token};

pub fn parse(src: &str) -> Result<Program, FrontendError> {
    let tokens = tokenize(src)?;
    Parser { tokens, pos: 0 }.program()
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Spanned {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, at: &Spanned, expected: &str) -> Result<T, FrontendError> {
        Err(FrontendError::new(at.span, FrontendErrorKind::Syntax(format!("expected {expected}, found {}", at.token.describe()))))
    }

    fn expect(&mut self, token: Token, what: &str) -> Result<Span, FrontendError> {
        let t = self.next();
        if t.token == token {
            Ok(t.span)
        } else {
            self.error(&t, what)
        }
    }

    fn ident(&mut self) -> Result<(String, Span), FrontendError> {
        let t = self.next();
        match t.token {
            Token::Ident(name) => Ok((name, t.span)),
            _ => self.error(&t, "identifier"),
        }
    }

    fn nat(&mut self) -> Result<usize, FrontendError> {
        let t = self.next();
        match t.token {
            Token::Nat(v) => Ok(v),
            _ => self.error(&t, "integer"),
        }
    }

    fn program(mut self) -> Result<Program, FrontendError> {
        let mut program = Program::default();
        loop {
            match &self.peek().token {
                Token::Eof => return Ok(program),
                Token::Var => program.declarations.push(self.declaration()?),
                Token::Ident(_) => program.statements.push(self.statement()?),
                _ => {
                    let t = self.peek().clone();
                    return self.error(&t, "declaration or statement");
                }
            }
        }
    }

    fn declaration(&mut self) -> Result<Declaration, FrontendError> {
        let span = self.expect(Token::Var, "'var'")?;
        let direction = match self.peek().token {
            Token::Input => {
                self.next();
                Direction::Input
            }
            Token::Output => {
                self.next();
                Direction::Output
            }
            _ => Direction::Temporary,
        };
        let (name, _) = self.ident()?;
        self.expect(Token::Colon, "':'")?;
        self.expect(Token::LBracket, "'['")?;
        let mut shape = Vec::new();
        loop {
            let t = self.next();
            match t.token {
                Token::Nat(v) => shape.push(Extent::Const(v)),
                Token::Ident(p) => shape.push(Extent::Param(p)),
                Token::RBracket if !shape.is_empty() => break,
                _ => return self.error(&t, "extent"),
            }
        }
        Ok(Declaration { name, direction, shape, span })
    }

    fn statement(&mut self) -> Result<Statement, FrontendError> {
        let (target, span) = self.ident()?;
        self.expect(Token::Assign, "'='")?;
        let expr = self.expr()?;
        Ok(Statement { target, expr, span })
    }

    fn expr(&mut self) -> Result<Expr, FrontendError> {
        let mut lhs = self.mul()?;
        while self.peek().token == Token::Plus {
            self.next();
            let rhs = self.mul()?;
            let span = lhs.span;
            lhs = Expr::new(ExprKind::ElemAdd(Box::new(lhs), Box::new(rhs)), span);
        }
        Ok(lhs)
    }

    fn mul(&mut self) -> Result<Expr, FrontendError> {
        let mut lhs = self.prod()?;
        while self.peek().token == Token::Star {
            self.next();
            let rhs = self.prod()?;
            let span = lhs.span;
            lhs = Expr::new(ExprKind::ElemMul(Box::new(lhs), Box::new(rhs)), span);
        }
        Ok(lhs)
    }

    fn prod(&mut self) -> Result<Expr, FrontendError> {
        let mut lhs = self.postfix()?;
        while self.peek().token == Token::Hash {
            self.next();
            let rhs = self.postfix()?;
            let span = lhs.span;
            lhs = Expr::new(ExprKind::Product(Box::new(lhs), Box::new(rhs)), span);
        }
        Ok(lhs)
    }

    fn postfix(&mut self) -> Result<Expr, FrontendError> {
        let mut e = self.primary()?;
        while self.peek().token == Token::Dot {
            self.next();
            self.expect(Token::LBracket, "'[' after '.'")?;
            let mut pairs = Vec::new();
            loop {
                let t = self.next();
                match t.token {
                    Token::LBracket => {
                        let a = self.nat()?;
                        let b = self.nat()?;
                        self.expect(Token::RBracket, "']' closing index pair")?;
                        pairs.push((a, b));
                    }
                    Token::RBracket if !pairs.is_empty() => break,
                    _ => return self.error(&t, "index pair '[i j]'"),
                }
            }
            let span = e.span;
            e = Expr::new(ExprKind::Contract(Box::new(e), pairs), span);
        }
        Ok(e)
    }

    fn primary(&mut self) -> Result<Expr, FrontendError> {
        let t = self.next();
        match t.token {
            Token::Ident(name) => Ok(Expr::new(ExprKind::Ident(name), t.span)),
            Token::LParen => {
                let inner = self.expr()?;
                self.expect(Token::RParen, "')'")?;
                Ok(Expr::new(ExprKind::Paren(Box::new(inner)), t.span))
            }
            _ => self.error(&t, "expression"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn minimal_matrix_vector_product() {
        let src = "var input S : [3 3]\nvar input u : [3]\nvar output v : [3]\nv = (S # u) . [[1 2]]";
        let p = parse(src).unwrap();
        assert_eq!(p.declarations.len(), 3);
        assert_eq!(p.statements.len(), 1);
        let ExprKind::Contract(inner, pairs) = &p.statements[0].expr.kind else {
            panic!("expected contraction");
        };
        assert_eq!(pairs, &vec![(1, 2)]);
        assert!(matches!(inner.kind, ExprKind::Paren(_)));
    }

    #[test]
    fn helmholtz_fixture_shape() {
        let p = parse(fixtures::HELMHOLTZ).unwrap();
        assert_eq!(p.declarations.len(), 4);
        let targets: Vec<_> = p.statements.iter().map(|s| s.target.as_str()).collect();
        assert_eq!(targets, ["t", "r", "v"]);
        assert_eq!(p.declarations[0].shape, vec![Extent::Param("p".into()); 2]);
    }

    #[test]
    fn truncated_input_is_a_syntax_error_on_line_one() {
        let err = parse("v = (").unwrap_err();
        assert_eq!(err.span.line, 1);
        assert!(matches!(err.kind, FrontendErrorKind::Syntax(_)));
    }

    #[test]
    fn precedence_and_associativity() {
        let p = parse("v = a + b * c # d # e").unwrap();
        let ExprKind::ElemAdd(_, rhs) = &p.statements[0].expr.kind else { panic!() };
        let ExprKind::ElemMul(_, prod) = &rhs.kind else { panic!() };
        let ExprKind::Product(left, _) = &prod.kind else { panic!() };
        assert!(matches!(left.kind, ExprKind::Product(_, _)));
    }

    #[test]
    fn empty_shape_and_pair_lists_are_rejected() {
        assert!(parse("var input a : []").is_err());
        assert!(parse("v = a . []").is_err());
        assert!(parse("v = a . [[1]]").is_err());
    }
}
