//! Well-formedness checking and fresh-name generation.
//!
//! `check` returns diagnostics rather than failing: an empty list means the
//! program satisfies every structural invariant the transformations assume.

use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::ast::*;
use crate::lexer::is_keyword;

/// A well-formedness violation, naming the declaration it occurred in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    /// Index of the offending declaration within the program.
    pub decl: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "decl {}: {}", self.decl + 1, self.message)
    }
}

struct Ctx<'p> {
    sets: HashSet<&'p str>,
    scalars: HashSet<&'p str>,
    invs: HashSet<&'p str>,
    auxes: HashSet<&'p str>,
    funcs: HashMap<&'p str, &'p FuncDef>,
    /// Functions whose bodies (transitively) read declared state.
    impure_funcs: HashSet<&'p str>,
}

impl<'p> Ctx<'p> {
    fn stateful(&self, name: &str) -> bool {
        self.sets.contains(name)
            || self.scalars.contains(name)
            || self.invs.contains(name)
            || self.auxes.contains(name)
    }
}

/// Checks every structural invariant; an empty result means well-formed.
pub fn check(p: &Program) -> Vec<Diagnostic> {
    let mut diags = Vec::new();

    let mut ctx = Ctx {
        sets: HashSet::new(),
        scalars: HashSet::new(),
        invs: HashSet::new(),
        auxes: HashSet::new(),
        funcs: HashMap::new(),
        impure_funcs: HashSet::new(),
    };
    for d in &p.decls {
        match d {
            Decl::Sets(ns) => ctx.sets.extend(ns.iter().map(|s| s.as_str())),
            Decl::Vars(ns) => ctx.scalars.extend(ns.iter().map(|s| s.as_str())),
            Decl::Inv { name, .. } => {
                ctx.invs.insert(name);
            }
            Decl::Func(f) => {
                ctx.funcs.insert(&f.name, f);
            }
            Decl::Aux(a) => {
                ctx.auxes.insert(&a.name);
            }
            _ => {}
        }
    }
    compute_impurity(&mut ctx);

    // duplicate top-level names
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for (i, d) in p.decls.iter().enumerate() {
        for name in decl_names(d) {
            if seen.insert(name, i).is_some() {
                diags.push(Diagnostic {
                    decl: i,
                    message: format!("duplicate declaration of `{name}`"),
                });
            }
        }
    }

    // update targets may not hit invariant variables
    for (i, d) in p.decls.iter().enumerate() {
        if let Decl::Update(u) = d {
            if ctx.invs.contains(u.target.as_str()) {
                diags.push(Diagnostic {
                    decl: i,
                    message: format!("invariant variable `{}` reassigned by update", u.target),
                });
            }
        }
    }

    let mut earlier_invs: HashSet<&str> = HashSet::new();
    let mut pred_arity: HashMap<String, usize> = HashMap::new();
    for (i, d) in p.decls.iter().enumerate() {
        match d {
            Decl::Sets(_) | Decl::Vars(_) => {}
            Decl::Inv { name, expr } => {
                let mut bound: HashSet<&str> = HashSet::new();
                bound.extend(ctx.sets.iter());
                bound.extend(ctx.scalars.iter());
                bound.extend(earlier_invs.iter());
                check_expr(&ctx, expr, &bound, i, &mut diags);
                check_elementary_operands(expr, name, i, &mut diags);
                earlier_invs.insert(name);
            }
            Decl::Func(f) => {
                let mut params: HashSet<&str> = HashSet::new();
                for param in &f.params {
                    if !params.insert(param) {
                        diags.push(Diagnostic {
                            decl: i,
                            message: format!(
                                "duplicate parameter `{param}` in function `{}`",
                                f.name
                            ),
                        });
                    }
                }
                let mut bound = params;
                bound.extend(ctx.sets.iter());
                bound.extend(ctx.scalars.iter());
                bound.extend(ctx.invs.iter());
                check_expr(&ctx, &f.body, &bound, i, &mut diags);
            }
            Decl::Rule(r) => {
                check_rule(r, &mut pred_arity, i, &mut diags);
            }
            Decl::Update(u) => {
                match &u.kind {
                    UpdateKind::AddElem | UpdateKind::DelElem => {
                        if !ctx.sets.contains(u.target.as_str()) {
                            diags.push(Diagnostic {
                                decl: i,
                                message: format!(
                                    "update target `{}` is not a declared set",
                                    u.target
                                ),
                            });
                        }
                    }
                    UpdateKind::IncrBy(_) | UpdateKind::ConsElem => {
                        if !ctx.scalars.contains(u.target.as_str()) {
                            diags.push(Diagnostic {
                                decl: i,
                                message: format!(
                                    "update target `{}` is not a declared scalar variable",
                                    u.target
                                ),
                            });
                        }
                    }
                    UpdateKind::Custom(f) => {
                        if !ctx.funcs.contains_key(f.as_str()) {
                            diags.push(Diagnostic {
                                decl: i,
                                message: format!("unknown change function `{f}`"),
                            });
                        }
                        if !ctx.scalars.contains(u.target.as_str())
                            && !ctx.sets.contains(u.target.as_str())
                        {
                            diags.push(Diagnostic {
                                decl: i,
                                message: format!("update target `{}` is not declared", u.target),
                            });
                        }
                    }
                }
                let mut params: HashSet<&str> = HashSet::new();
                for param in &u.params {
                    if !params.insert(param) {
                        diags.push(Diagnostic {
                            decl: i,
                            message: format!("duplicate update parameter `{param}`"),
                        });
                    }
                }
            }
            Decl::Aux(a) => match &a.spec {
                AuxSpec::Index { source, .. } => {
                    if !ctx.stateful(source) {
                        diags.push(Diagnostic {
                            decl: i,
                            message: format!("index source `{source}` is not declared"),
                        });
                    }
                }
                AuxSpec::Count { inv } => {
                    if !ctx.invs.contains(inv.as_str()) {
                        diags.push(Diagnostic {
                            decl: i,
                            message: format!("count map refers to unknown invariant `{inv}`"),
                        });
                    }
                }
            },
            Decl::On(b) => {
                if !ctx.stateful(&b.target) {
                    diags.push(Diagnostic {
                        decl: i,
                        message: format!("maintenance target `{}` is not declared", b.target),
                    });
                }
                let mut bound: HashSet<&str> = HashSet::new();
                bound.insert(&b.param);
                bound.extend(ctx.sets.iter());
                bound.extend(ctx.scalars.iter());
                bound.extend(ctx.invs.iter());
                bound.extend(ctx.auxes.iter());
                check_stmts(&ctx, &b.body, &bound, i, &mut diags);
            }
        }
    }

    diags
}

fn decl_names(d: &Decl) -> Vec<&str> {
    match d {
        Decl::Sets(ns) | Decl::Vars(ns) => ns.iter().map(|s| s.as_str()).collect(),
        Decl::Inv { name, .. } => vec![name],
        Decl::Func(f) => vec![&f.name],
        Decl::Update(u) => vec![&u.name],
        Decl::Aux(a) => vec![&a.name],
        Decl::Rule(_) | Decl::On(_) => Vec::new(),
    }
}

/// Marks functions that (transitively) read declared state as impure, so
/// that filters and images can be rejected when they reach state.
fn compute_impurity(ctx: &mut Ctx<'_>) {
    loop {
        let mut changed = false;
        for (name, f) in &ctx.funcs {
            if ctx.impure_funcs.contains(*name) {
                continue;
            }
            let params: HashSet<&str> = f.params.iter().map(|s| s.as_str()).collect();
            let mut impure = false;
            f.body.visit(&mut |e| match e {
                Expr::Var(v) if !params.contains(v.as_str()) && ctx.stateful(v) => impure = true,
                Expr::Call(callee, _) if ctx.impure_funcs.contains(callee.as_str()) => {
                    impure = true
                }
                _ => {}
            });
            if impure {
                ctx.impure_funcs.insert(name);
                changed = true;
            }
        }
        if !changed {
            return;
        }
    }
}

fn check_rule(
    r: &Rule,
    pred_arity: &mut HashMap<String, usize>,
    decl: usize,
    diags: &mut Vec<Diagnostic>,
) {
    let mut note_arity = |atom: &Atom, diags: &mut Vec<Diagnostic>| {
        match pred_arity.get(atom.pred.as_str()) {
            Some(&a) if a != atom.args.len() => diags.push(Diagnostic {
                decl,
                message: format!(
                    "predicate `{}` used with arity {} and {}",
                    atom.pred,
                    a,
                    atom.args.len()
                ),
            }),
            Some(_) => {}
            None => {
                pred_arity.insert(atom.pred.clone(), atom.args.len());
            }
        }
    };
    note_arity(&r.head, diags);
    for a in &r.body {
        note_arity(a, diags);
    }

    let mut body_vars: HashSet<&str> = HashSet::new();
    for a in &r.body {
        for t in &a.args {
            if let Term::Var(v) = t {
                body_vars.insert(v);
            }
        }
    }
    for t in &r.head.args {
        if let Term::Var(v) = t {
            if !body_vars.contains(v.as_str()) {
                diags.push(Diagnostic {
                    decl,
                    message: format!("head variable {v} unbound"),
                });
            }
        }
    }
}

fn check_stmts(
    ctx: &Ctx<'_>,
    stmts: &[Stmt],
    bound: &HashSet<&str>,
    decl: usize,
    diags: &mut Vec<Diagnostic>,
) {
    for s in stmts {
        match s {
            Stmt::Add(v, e) | Stmt::Del(v, e) => {
                if !ctx.sets.contains(v.as_str()) && !ctx.invs.contains(v.as_str()) {
                    diags.push(Diagnostic {
                        decl,
                        message: format!("`{v}` is not a declared set or invariant"),
                    });
                }
                check_expr(ctx, e, bound, decl, diags);
            }
            Stmt::Assign(v, e) => {
                if !ctx.invs.contains(v.as_str()) && !ctx.scalars.contains(v.as_str()) {
                    diags.push(Diagnostic {
                        decl,
                        message: format!("assignment to undeclared variable `{v}`"),
                    });
                }
                check_expr(ctx, e, bound, decl, diags);
            }
            Stmt::If(c, body) => {
                check_expr(ctx, c, bound, decl, diags);
                check_stmts(ctx, body, bound, decl, diags);
            }
            Stmt::For(v, src, body) => {
                check_expr(ctx, src, bound, decl, diags);
                let mut inner = bound.clone();
                inner.insert(v);
                check_stmts(ctx, body, &inner, decl, diags);
            }
            Stmt::MapInc(m, k, v) | Stmt::MapDec(m, k, v) => {
                if !ctx.auxes.contains(m.as_str()) {
                    diags.push(Diagnostic {
                        decl,
                        message: format!("`{m}` is not a declared auxiliary map"),
                    });
                }
                check_expr(ctx, k, bound, decl, diags);
                check_expr(ctx, v, bound, decl, diags);
            }
        }
    }
}

fn check_expr(
    ctx: &Ctx<'_>,
    e: &Expr,
    bound: &HashSet<&str>,
    decl: usize,
    diags: &mut Vec<Diagnostic>,
) {
    match e {
        Expr::Var(v) => {
            if !bound.contains(v.as_str()) {
                diags.push(Diagnostic {
                    decl,
                    message: format!("unbound variable `{v}`"),
                });
            }
        }
        Expr::Call(name, args) => {
            match ctx.funcs.get(name.as_str()) {
                Some(f) if f.params.len() != args.len() => diags.push(Diagnostic {
                    decl,
                    message: format!(
                        "function `{name}` expects {} arguments, got {}",
                        f.params.len(),
                        args.len()
                    ),
                }),
                Some(_) => {}
                None => diags.push(Diagnostic {
                    decl,
                    message: format!("call to undefined function `{name}`"),
                }),
            }
            for a in args {
                check_expr(ctx, a, bound, decl, diags);
            }
        }
        Expr::Comp {
            image,
            pat,
            source,
            filter,
        } => {
            check_expr(ctx, source, bound, decl, diags);
            check_pattern(pat, decl, diags);
            let mut inner = bound.clone();
            inner.extend(pat.vars());
            check_expr(ctx, image, &inner, decl, diags);
            check_pure(ctx, image, pat.vars(), "image", decl, diags);
            if let Some(f) = filter {
                check_expr(ctx, f, &inner, decl, diags);
                check_pure(ctx, f, pat.vars(), "filter", decl, diags);
            }
        }
        Expr::Join {
            image,
            pat1,
            src1,
            pat2,
            src2,
        } => {
            check_expr(ctx, src1, bound, decl, diags);
            check_expr(ctx, src2, bound, decl, diags);
            check_pattern(pat1, decl, diags);
            check_pattern(pat2, decl, diags);
            let v1: HashSet<&str> = pat1.vars().into_iter().collect();
            let v2: HashSet<&str> = pat2.vars().into_iter().collect();
            let shared = v1.intersection(&v2).count();
            if shared != 1 {
                diags.push(Diagnostic {
                    decl,
                    message: format!(
                        "join generators must share exactly one variable, found {shared}"
                    ),
                });
            }
            let mut inner = bound.clone();
            inner.extend(pat1.vars());
            inner.extend(pat2.vars());
            check_expr(ctx, image, &inner, decl, diags);
            let mut gen_vars = pat1.vars();
            gen_vars.extend(pat2.vars());
            check_pure(ctx, image, gen_vars, "image", decl, diags);
        }
        other => {
            // generic recursion over remaining children
            let mut children: Vec<&Expr> = Vec::new();
            match other {
                Expr::Neg(a) | Expr::Not(a) | Expr::Proj(a, _) | Expr::Head(a)
                | Expr::Tail(a) | Expr::IsEmpty(a) | Expr::Agg(_, a) => children.push(a),
                Expr::Binop(_, a, b)
                | Expr::Cons(a, b)
                | Expr::SetBin(_, a, b)
                | Expr::Member(a, b)
                | Expr::MapGet(a, b) => {
                    children.push(a);
                    children.push(b);
                }
                Expr::If(c, t, e2) => {
                    children.push(c);
                    children.push(t);
                    children.push(e2);
                }
                Expr::Tuple(es) | Expr::SetLit(es) => children.extend(es.iter()),
                _ => {}
            }
            for c in children {
                check_expr(ctx, c, bound, decl, diags);
            }
        }
    }
}

fn check_pattern(pat: &Pattern, decl: usize, diags: &mut Vec<Diagnostic>) {
    let vars = pat.vars();
    let mut seen = HashSet::new();
    for v in vars {
        if !seen.insert(v) {
            diags.push(Diagnostic {
                decl,
                message: format!("repeated variable `{v}` in generator pattern"),
            });
        }
    }
}

/// Filters and images must not read declared state, directly or through
/// function calls.
fn check_pure(
    ctx: &Ctx<'_>,
    e: &Expr,
    gen_vars: Vec<&str>,
    role: &str,
    decl: usize,
    diags: &mut Vec<Diagnostic>,
) {
    let gen_vars: HashSet<&str> = gen_vars.into_iter().collect();
    e.visit(&mut |node| match node {
        Expr::Var(v) if !gen_vars.contains(v.as_str()) && ctx.stateful(v) => {
            diags.push(Diagnostic {
                decl,
                message: format!("{role} references declared variable `{v}` and is not pure"),
            });
        }
        Expr::Call(name, _) if ctx.impure_funcs.contains(name.as_str()) => {
            diags.push(Diagnostic {
                decl,
                message: format!("{role} calls `{name}`, which reaches declared state"),
            });
        }
        _ => {}
    });
}

/// Flags `u = s union s` style operands: the differencing rules assume the
/// two operands of one elementary expression are distinct variables.
fn check_elementary_operands(e: &Expr, inv: &str, decl: usize, diags: &mut Vec<Diagnostic>) {
    e.visit(&mut |node| match node {
        Expr::SetBin(_, a, b) => {
            if let (Expr::Var(x), Expr::Var(y)) = (a.as_ref(), b.as_ref()) {
                if x == y {
                    diags.push(Diagnostic {
                        decl,
                        message: format!(
                            "duplicate operand variable in elementary expression of `{inv}` (`{x}`)"
                        ),
                    });
                }
            }
        }
        Expr::Join { src1, src2, .. } => {
            if let (Expr::Var(x), Expr::Var(y)) = (src1.as_ref(), src2.as_ref()) {
                if x == y {
                    diags.push(Diagnostic {
                        decl,
                        message: format!(
                            "duplicate operand variable in elementary expression of `{inv}` (`{x}`)"
                        ),
                    });
                }
            }
        }
        _ => {}
    });
}

/// Deterministic collision-free identifier supply.
#[derive(Debug, Clone)]
pub struct FreshNames {
    prefix: String,
    next: usize,
}

impl FreshNames {
    /// Seeds a generator over `p`: the first fresh name never collides with
    /// any identifier already in the program. A keyword prefix is rewritten
    /// with a trailing underscore.
    pub fn seeded(p: &Program, prefix: &str) -> FreshNames {
        let prefix = if is_keyword(prefix) {
            format!("{prefix}_")
        } else {
            prefix.to_string()
        };
        let mut max = 0usize;
        for ident in collect_idents(p) {
            if let Some(rest) = ident.strip_prefix(&prefix) {
                if !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()) {
                    if let Ok(n) = rest.parse::<usize>() {
                        max = max.max(n);
                    }
                }
            }
        }
        FreshNames {
            prefix,
            next: max + 1,
        }
    }

    pub fn fresh(&mut self) -> String {
        let name = format!("{}{}", self.prefix, self.next);
        self.next += 1;
        name
    }
}

fn collect_idents(p: &Program) -> HashSet<String> {
    let mut out: HashSet<String> = HashSet::new();
    let mut from_expr = |e: &Expr, out: &mut HashSet<String>| {
        e.visit(&mut |node| match node {
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Call(f, _) => {
                out.insert(f.clone());
            }
            Expr::Comp { pat, .. } => out.extend(pat.vars().iter().map(|s| s.to_string())),
            Expr::Join { pat1, pat2, .. } => {
                out.extend(pat1.vars().iter().map(|s| s.to_string()));
                out.extend(pat2.vars().iter().map(|s| s.to_string()));
            }
            _ => {}
        });
    };
    fn from_stmts(stmts: &[Stmt], out: &mut HashSet<String>, from_expr: &mut dyn FnMut(&Expr, &mut HashSet<String>)) {
        for s in stmts {
            match s {
                Stmt::Add(v, e) | Stmt::Del(v, e) | Stmt::Assign(v, e) => {
                    out.insert(v.clone());
                    from_expr(e, out);
                }
                Stmt::If(c, body) => {
                    from_expr(c, out);
                    from_stmts(body, out, from_expr);
                }
                Stmt::For(v, src, body) => {
                    out.insert(v.clone());
                    from_expr(src, out);
                    from_stmts(body, out, from_expr);
                }
                Stmt::MapInc(m, k, v) | Stmt::MapDec(m, k, v) => {
                    out.insert(m.clone());
                    from_expr(k, out);
                    from_expr(v, out);
                }
            }
        }
    }
    for d in &p.decls {
        for n in decl_names(d) {
            out.insert(n.to_string());
        }
        match d {
            Decl::Inv { expr, .. } => from_expr(expr, &mut out),
            Decl::Func(f) => {
                out.extend(f.params.iter().cloned());
                from_expr(&f.body, &mut out);
            }
            Decl::Rule(r) => {
                for a in std::iter::once(&r.head).chain(r.body.iter()) {
                    out.insert(a.pred.clone());
                    for t in &a.args {
                        if let Term::Var(v) = t {
                            out.insert(v.clone());
                        }
                    }
                }
            }
            Decl::Update(u) => {
                out.insert(u.target.clone());
                out.extend(u.params.iter().cloned());
            }
            Decl::On(b) => {
                out.insert(b.target.clone());
                out.insert(b.param.clone());
                from_stmts(&b.body, &mut out, &mut from_expr);
            }
            Decl::Aux(a) => match &a.spec {
                AuxSpec::Index { source, .. } => {
                    out.insert(source.clone());
                }
                AuxSpec::Count { inv } => {
                    out.insert(inv.clone());
                }
            },
            _ => {}
        }
    }
    out
}
