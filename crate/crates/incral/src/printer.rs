//! Canonical printing. `parse(print(p))` yields the same AST, and the output
//! is deterministic, so derivations can be compared byte-for-byte.

use std::fmt::Write;

use crate::ast::*;

/// Prints a whole program, one declaration per line (blocks span several).
pub fn print(p: &Program) -> String {
    let mut out = String::new();
    for d in &p.decls {
        print_decl(&mut out, d);
    }
    out
}

pub fn print_decl_str(d: &Decl) -> String {
    let mut out = String::new();
    print_decl(&mut out, d);
    out
}

pub fn print_expr(e: &Expr) -> String {
    let mut out = String::new();
    expr(&mut out, e, 0);
    out
}

pub fn print_stmt(s: &Stmt) -> String {
    let mut out = String::new();
    stmt(&mut out, s, 0);
    // drop the trailing newline for single-statement rendering
    out.truncate(out.trim_end().len());
    out
}

fn print_decl(out: &mut String, d: &Decl) {
    match d {
        Decl::Sets(names) => {
            let _ = writeln!(out, "set {};", names.join(", "));
        }
        Decl::Vars(names) => {
            let _ = writeln!(out, "var {};", names.join(", "));
        }
        Decl::Inv { name, expr: e } => {
            let _ = writeln!(out, "inv {name} = {};", print_expr(e));
        }
        Decl::Func(f) => {
            let _ = writeln!(
                out,
                "def {}({}) = {};",
                f.name,
                f.params.join(", "),
                print_expr(&f.body)
            );
        }
        Decl::Rule(r) => {
            out.push_str(&atom_str(&r.head));
            if !r.body.is_empty() {
                out.push_str(" :- ");
                let body: Vec<String> = r.body.iter().map(atom_str).collect();
                out.push_str(&body.join(", "));
            }
            out.push_str(".\n");
        }
        Decl::Update(u) => {
            let kind = match &u.kind {
                UpdateKind::AddElem => format!("add({})", u.params.join(", ")),
                UpdateKind::DelElem => format!("del({})", u.params.join(", ")),
                UpdateKind::IncrBy(c) => format!("incr({c})"),
                UpdateKind::ConsElem => format!("cons({})", u.params.join(", ")),
                UpdateKind::Custom(f) => format!("{f}({})", u.params.join(", ")),
            };
            let _ = writeln!(out, "update {} on {}: {kind};", u.name, u.target);
        }
        Decl::Aux(a) => {
            let spec = match &a.spec {
                AuxSpec::Index {
                    source,
                    key_col,
                    val_col,
                } => format!("index({source}, {key_col}, {val_col})"),
                AuxSpec::Count { inv } => format!("count({inv})"),
            };
            let _ = writeln!(out, "aux {} = {spec};", a.name);
        }
        Decl::On(b) => {
            let _ = writeln!(
                out,
                "on {}({}, {}) {{",
                b.event.keyword(),
                b.target,
                b.param
            );
            for s in &b.body {
                stmt(out, s, 1);
            }
            out.push_str("}\n");
        }
    }
}

fn atom_str(a: &Atom) -> String {
    let args: Vec<String> = a
        .args
        .iter()
        .map(|t| match t {
            Term::Var(v) => v.clone(),
            Term::Const(c) => c.to_string(),
        })
        .collect();
    format!("{}({})", a.pred, args.join(", "))
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn stmt(out: &mut String, s: &Stmt, depth: usize) {
    indent(out, depth);
    match s {
        Stmt::Add(v, e) => {
            let _ = writeln!(out, "add({v}, {})", print_expr(e));
        }
        Stmt::Del(v, e) => {
            let _ = writeln!(out, "del({v}, {})", print_expr(e));
        }
        Stmt::Assign(v, e) => {
            let _ = writeln!(out, "{v} := {}", print_expr(e));
        }
        Stmt::If(c, body) => {
            let _ = writeln!(out, "if {} {{", print_expr(c));
            for s in body {
                stmt(out, s, depth + 1);
            }
            indent(out, depth);
            out.push_str("}\n");
        }
        Stmt::For(v, src, body) => {
            let _ = writeln!(out, "for {v} in {} {{", print_expr(src));
            for s in body {
                stmt(out, s, depth + 1);
            }
            indent(out, depth);
            out.push_str("}\n");
        }
        Stmt::MapInc(m, k, v) => {
            let _ = writeln!(out, "mapinc({m}, {}, {})", print_expr(k), print_expr(v));
        }
        Stmt::MapDec(m, k, v) => {
            let _ = writeln!(out, "mapdec({m}, {}, {})", print_expr(k), print_expr(v));
        }
    }
}

// Binding levels; parenthesize whenever an operand's level is below the
// level its position requires.
const L_IF: u8 = 0;
const L_OR: u8 = 1;
const L_AND: u8 = 2;
const L_NOT: u8 = 3;
const L_CMP: u8 = 4;
const L_UNION: u8 = 5;
const L_INTERDIFF: u8 = 6;
const L_ADD: u8 = 7;
const L_MUL: u8 = 8;
const L_NEG: u8 = 9;
const L_ATOM: u8 = 10;

fn level(e: &Expr) -> u8 {
    match e {
        Expr::If(..) => L_IF,
        Expr::Binop(op, ..) => match op {
            BinOp::Or => L_OR,
            BinOp::And => L_AND,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => L_CMP,
            BinOp::Add | BinOp::Sub => L_ADD,
            BinOp::Mul | BinOp::Div => L_MUL,
        },
        Expr::Not(_) => L_NOT,
        Expr::Member(..) => L_CMP,
        Expr::SetBin(SetOp::Union, ..) => L_UNION,
        Expr::SetBin(..) => L_INTERDIFF,
        Expr::Neg(_) => L_NEG,
        Expr::Int(n) => {
            if n.sign() == num_bigint::Sign::Minus {
                L_NEG
            } else {
                L_ATOM
            }
        }
        _ => L_ATOM,
    }
}

fn expr(out: &mut String, e: &Expr, min: u8) {
    let lv = level(e);
    if lv < min {
        out.push('(');
        expr(out, e, 0);
        out.push(')');
        return;
    }
    match e {
        Expr::Int(n) => {
            let _ = write!(out, "{n}");
        }
        Expr::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        Expr::Var(v) => out.push_str(v),
        Expr::Neg(a) => {
            out.push('-');
            expr(out, a, L_ATOM);
        }
        Expr::Not(a) => {
            out.push_str("not ");
            expr(out, a, L_ATOM);
        }
        Expr::Binop(op, a, b) => {
            let (la, lb) = match level(e) {
                l if matches!(op, BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge) => {
                    (l + 1, l + 1)
                }
                l => (l, l + 1),
            };
            expr(out, a, la);
            let _ = write!(out, " {} ", op.symbol());
            expr(out, b, lb);
        }
        Expr::Member(a, b) => {
            expr(out, a, L_CMP + 1);
            out.push_str(" in ");
            expr(out, b, L_CMP + 1);
        }
        Expr::SetBin(op, a, b) => {
            let l = level(e);
            expr(out, a, l);
            let _ = write!(out, " {} ", op.keyword());
            expr(out, b, l + 1);
        }
        Expr::If(c, t, f) => {
            out.push_str("if ");
            expr(out, c, 0);
            out.push_str(" then ");
            expr(out, t, 0);
            out.push_str(" else ");
            expr(out, f, 0);
        }
        Expr::Tuple(es) => {
            out.push('(');
            for (i, e) in es.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                expr(out, e, 0);
            }
            out.push(')');
        }
        Expr::Proj(a, k) => {
            expr(out, a, L_ATOM);
            let _ = write!(out, ".{k}");
        }
        Expr::Nil => out.push_str("nil"),
        Expr::Cons(h, t) => {
            out.push_str("cons(");
            expr(out, h, 0);
            out.push_str(", ");
            expr(out, t, 0);
            out.push(')');
        }
        Expr::Head(a) => call_like(out, "head", a),
        Expr::Tail(a) => call_like(out, "tail", a),
        Expr::IsEmpty(a) => call_like(out, "empty", a),
        Expr::EmptySet => out.push_str("{}"),
        Expr::SetLit(es) => {
            out.push('{');
            for (i, e) in es.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                expr(out, e, 0);
            }
            out.push('}');
        }
        Expr::Comp {
            image,
            pat,
            source,
            filter,
        } => {
            out.push_str("{ ");
            expr(out, image, 0);
            out.push_str(" : ");
            pattern(out, pat);
            out.push_str(" in ");
            expr(out, source, L_UNION);
            if let Some(p) = filter {
                out.push_str(" | ");
                expr(out, p, 0);
            }
            out.push_str(" }");
        }
        Expr::Join {
            image,
            pat1,
            src1,
            pat2,
            src2,
        } => {
            out.push_str("{ ");
            expr(out, image, 0);
            out.push_str(" : ");
            pattern(out, pat1);
            out.push_str(" in ");
            expr(out, src1, L_UNION);
            out.push_str(", ");
            pattern(out, pat2);
            out.push_str(" in ");
            expr(out, src2, L_UNION);
            out.push_str(" }");
        }
        Expr::Agg(op, a) => call_like(out, op.keyword(), a),
        Expr::Call(name, args) => {
            out.push_str(name);
            out.push('(');
            for (i, e) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                expr(out, e, 0);
            }
            out.push(')');
        }
        Expr::MapGet(m, k) => {
            expr(out, m, L_ATOM);
            out.push('[');
            expr(out, k, 0);
            out.push(']');
        }
    }
}

fn call_like(out: &mut String, name: &str, a: &Expr) {
    out.push_str(name);
    out.push('(');
    expr(out, a, 0);
    out.push(')');
}

fn pattern(out: &mut String, p: &Pattern) {
    match p {
        Pattern::Var(v) => out.push_str(v),
        Pattern::Tuple(vs) => {
            out.push('(');
            out.push_str(&vs.join(", "));
            out.push(')');
        }
    }
}
