use std::fmt::Write;

use super::ast::{Direction, Expr, ExprKind, Extent, Program};

/// Canonical source text. Parenthesization comes only from `Paren` nodes, so
/// `parse(pretty(p))` reproduces `p` structurally.
pub fn pretty(program: &Program) -> String {
    let mut out = String::new();
    for d in &program.declarations {
        let dir = match d.direction {
            Direction::Input => "input ",
            Direction::Output => "output ",
            Direction::Temporary => "",
        };
        let shape: Vec<String> = d
            .shape
            .iter()
            .map(|e| match e {
                Extent::Const(v) => v.to_string(),
                Extent::Param(p) => p.clone(),
            })
            .collect();
        let _ = writeln!(out, "var {dir}{} : [{}]", d.name, shape.join(" "));
    }
    for s in &program.statements {
        let _ = writeln!(out, "{} = {}", s.target, pretty_expr(&s.expr));
    }
    out
}

pub fn pretty_expr(expr: &Expr) -> String {
    let mut out = String::new();
    write_expr(expr, &mut out);
    out
}

fn write_expr(expr: &Expr, out: &mut String) {
    match &expr.kind {
        ExprKind::Ident(n) => out.push_str(n),
        ExprKind::Paren(e) => {
            out.push('(');
            write_expr(e, out);
            out.push(')');
        }
        ExprKind::Product(a, b) => binary(a, " # ", b, out),
        ExprKind::ElemMul(a, b) => binary(a, " * ", b, out),
        ExprKind::ElemAdd(a, b) => binary(a, " + ", b, out),
        ExprKind::Contract(e, pairs) => {
            write_expr(e, out);
            out.push_str(" . [");
            for (i, (a, b)) in pairs.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "[{a} {b}]");
            }
            out.push(']');
        }
    }
}

fn binary(a: &Expr, op: &str, b: &Expr, out: &mut String) {
    write_expr(a, out);
    out.push_str(op);
    write_expr(b, out);
}
