use std::fmt::Write;

use super::ast::*;

fn precedence(expr: &Expr) -> u8 {
    match expr {
        Expr::Or(..) => 1,
        Expr::And(..) => 2,
        Expr::Not(..) => 3,
        Expr::Cmp { .. } => 4,
        _ => 5,
    }
}

fn write_expr(out: &mut String, expr: &Expr, min_prec: u8) {
    let parens = precedence(expr) < min_prec;
    if parens {
        out.push('(');
    }
    match expr {
        Expr::Bool(b, _) => out.push_str(if *b { "true" } else { "false" }),
        Expr::Int(n, _) => {
            let _ = write!(out, "{n}");
        }
        Expr::Var(id) => out.push_str(&id.name),
        Expr::Elapsed(_) => out.push_str("elapsed"),
        Expr::Cmp { op, lhs, rhs, .. } => {
            write_expr(out, lhs, 5);
            let _ = write!(out, " {} ", op.symbol());
            write_expr(out, rhs, 5);
        }
        Expr::And(l, r, _) => {
            write_expr(out, l, 2);
            out.push_str(" and ");
            write_expr(out, r, 3);
        }
        Expr::Or(l, r, _) => {
            write_expr(out, l, 1);
            out.push_str(" or ");
            write_expr(out, r, 2);
        }
        Expr::Not(e, _) => {
            out.push_str("not ");
            write_expr(out, e, 3);
        }
    }
    if parens {
        out.push(')');
    }
}

pub fn expr_to_string(expr: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, expr, 0);
    out
}

/// Canonical source text for a program.
pub fn pretty(program: &FsmProgram) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "controller {} {{", program.name.name);
    for input in &program.inputs {
        let _ = writeln!(out, "    input {}: {};", input.name.name, input.ty.keyword());
    }
    for state in &program.states {
        out.push('\n');
        let prefix = if state.initial { "initial " } else { "" };
        if state.outputs.is_empty() && state.transitions.is_empty() {
            let _ = writeln!(out, "    {prefix}state {} {{ }}", state.name.name);
            continue;
        }
        let _ = writeln!(out, "    {prefix}state {} {{", state.name.name);
        for o in &state.outputs {
            let _ = writeln!(out, "        set {} = {};", o.signal.keyword(), o.color.keyword());
        }
        for t in &state.transitions {
            let _ = writeln!(out, "        when {} -> {};", expr_to_string(&t.guard), t.target.name);
        }
        out.push_str("    }\n");
    }
    out.push_str("}\n");
    out
}
