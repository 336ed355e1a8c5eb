//! Recursive-descent parser for the core language, including the derived-code
//! syntax (`on` blocks, maintenance statements, `aux` declarations) emitted by
//! the transformations.
//!
//! Precedence, loosest to tightest:
//! `or` < `and` < `not` < comparisons / `in` < `union` < `inter`/`diff`
//! < `+`/`-` < `*`/`/` < unary `-` < postfix (`.k`, `[e]`, call).

use num_bigint::BigInt;
use num_traits::ToPrimitive;

use crate::ast::*;
use crate::error::ParseError;
use crate::lexer::{is_keyword, tokenize, Spanned, Tok};

/// Parses a complete program.
pub fn parse(text: &str) -> Result<Program, ParseError> {
    let mut p = Parser::new(text)?;
    let mut decls = Vec::new();
    while !p.at(&Tok::Eof) {
        decls.push(p.decl()?);
    }
    Ok(Program::new(decls))
}

/// Parses a single expression (used by `poly-diff --expr` and tests).
pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser::new(text)?;
    let e = p.expr()?;
    p.expect(Tok::Eof)?;
    Ok(e)
}

/// Parses an entry call-spec such as `fib(25)`. Arguments must be literals.
pub fn parse_call_spec(text: &str) -> Result<(String, Vec<Expr>), ParseError> {
    let mut p = Parser::new(text)?;
    let e = p.expr()?;
    p.expect(Tok::Eof)?;
    match e {
        Expr::Call(name, args) => Ok((name, args)),
        _ => Err(ParseError::new(1, 1, "entry must be a call like `fib(25)`")),
    }
}

/// Parses a facts file: one ground atom per `.`-terminated entry.
pub fn parse_facts(text: &str) -> Result<Vec<Atom>, ParseError> {
    let mut p = Parser::new(text)?;
    let mut facts = Vec::new();
    while !p.at(&Tok::Eof) {
        let atom = p.atom()?;
        for t in &atom.args {
            if let Term::Var(v) = t {
                return Err(p.err_here(format!("fact argument `{v}` is not a constant")));
            }
        }
        p.expect(Tok::Dot)?;
        facts.push(atom);
    }
    Ok(facts)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn new(text: &str) -> Result<Parser, ParseError> {
        Ok(Parser {
            toks: tokenize(text)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.pos + 1).min(self.toks.len() - 1)].tok
    }

    fn at(&self, t: &Tok) -> bool {
        self.peek() == t
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.at(t) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn here(&self) -> (usize, usize) {
        let s = &self.toks[self.pos];
        (s.line, s.col)
    }

    fn err_here(&self, msg: impl Into<String>) -> ParseError {
        let (l, c) = self.here();
        ParseError::new(l, c, msg)
    }

    fn expect(&mut self, t: Tok) -> Result<(), ParseError> {
        if self.eat(&t) {
            Ok(())
        } else {
            Err(self.err_here(format!("expected {t}, found {}", self.peek())))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            t => {
                let display = t.to_string();
                let msg = if is_keyword(display.trim_matches('`')) {
                    format!("reserved word {t} cannot be used as an identifier")
                } else {
                    format!("expected identifier, found {t}")
                };
                Err(self.err_here(msg))
            }
        }
    }

    fn ident_list(&mut self) -> Result<Vec<String>, ParseError> {
        let mut names = vec![self.ident()?];
        while self.eat(&Tok::Comma) {
            names.push(self.ident()?);
        }
        Ok(names)
    }

    fn int(&mut self) -> Result<BigInt, ParseError> {
        let neg = self.eat(&Tok::Minus);
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(if neg { -n } else { n })
            }
            t => Err(self.err_here(format!("expected integer, found {t}"))),
        }
    }

    // ---- declarations ----

    fn decl(&mut self) -> Result<Decl, ParseError> {
        match self.peek().clone() {
            Tok::Set => {
                self.bump();
                let names = self.ident_list()?;
                self.expect(Tok::Semi)?;
                Ok(Decl::Sets(names))
            }
            Tok::Var => {
                self.bump();
                let names = self.ident_list()?;
                self.expect(Tok::Semi)?;
                Ok(Decl::Vars(names))
            }
            Tok::Inv => {
                self.bump();
                let name = self.ident()?;
                self.expect(Tok::Eq)?;
                let expr = self.expr()?;
                self.expect(Tok::Semi)?;
                Ok(Decl::Inv { name, expr })
            }
            Tok::Def => {
                self.bump();
                let name = self.ident()?;
                self.expect(Tok::LParen)?;
                let params = if self.at(&Tok::RParen) {
                    Vec::new()
                } else {
                    self.ident_list()?
                };
                self.expect(Tok::RParen)?;
                self.expect(Tok::Eq)?;
                let body = self.expr()?;
                self.expect(Tok::Semi)?;
                Ok(Decl::Func(FuncDef { name, params, body }))
            }
            Tok::Update => {
                self.bump();
                let name = self.ident()?;
                self.expect(Tok::On)?;
                let target = self.ident()?;
                self.expect(Tok::Colon)?;
                let (kind, params) = self.update_kind()?;
                self.expect(Tok::Semi)?;
                Ok(Decl::Update(UpdateOp {
                    name,
                    target,
                    kind,
                    params,
                }))
            }
            Tok::Aux => {
                self.bump();
                let name = self.ident()?;
                self.expect(Tok::Eq)?;
                let spec = self.aux_spec()?;
                self.expect(Tok::Semi)?;
                Ok(Decl::Aux(AuxDecl { name, spec }))
            }
            Tok::On => {
                self.bump();
                let event = match self.bump() {
                    Tok::Add => EventKind::Add,
                    Tok::Del => EventKind::Del,
                    t => return Err(self.err_here(format!("expected `add` or `del`, found {t}"))),
                };
                self.expect(Tok::LParen)?;
                let target = self.ident()?;
                self.expect(Tok::Comma)?;
                let param = self.ident()?;
                self.expect(Tok::RParen)?;
                let body = self.block()?;
                Ok(Decl::On(OnBlock {
                    event,
                    target,
                    param,
                    body,
                }))
            }
            Tok::Ident(_) => {
                let rule = self.rule()?;
                Ok(Decl::Rule(rule))
            }
            t => Err(self.err_here(format!("expected a declaration, found {t}"))),
        }
    }

    fn update_kind(&mut self) -> Result<(UpdateKind, Vec<String>), ParseError> {
        match self.peek().clone() {
            Tok::Add => {
                self.bump();
                self.expect(Tok::LParen)?;
                let params = self.ident_list()?;
                self.expect(Tok::RParen)?;
                Ok((UpdateKind::AddElem, params))
            }
            Tok::Del => {
                self.bump();
                self.expect(Tok::LParen)?;
                let params = self.ident_list()?;
                self.expect(Tok::RParen)?;
                Ok((UpdateKind::DelElem, params))
            }
            Tok::Incr => {
                self.bump();
                self.expect(Tok::LParen)?;
                let c = self.int()?;
                self.expect(Tok::RParen)?;
                Ok((UpdateKind::IncrBy(c), Vec::new()))
            }
            Tok::Cons => {
                self.bump();
                self.expect(Tok::LParen)?;
                let params = self.ident_list()?;
                self.expect(Tok::RParen)?;
                Ok((UpdateKind::ConsElem, params))
            }
            Tok::Ident(f) => {
                self.bump();
                self.expect(Tok::LParen)?;
                let params = if self.at(&Tok::RParen) {
                    Vec::new()
                } else {
                    self.ident_list()?
                };
                self.expect(Tok::RParen)?;
                Ok((UpdateKind::Custom(f), params))
            }
            t => Err(self.err_here(format!("expected an update kind, found {t}"))),
        }
    }

    fn aux_spec(&mut self) -> Result<AuxSpec, ParseError> {
        match self.bump() {
            Tok::Index => {
                self.expect(Tok::LParen)?;
                let source = self.ident()?;
                self.expect(Tok::Comma)?;
                let key_col = self.col_index()?;
                self.expect(Tok::Comma)?;
                let val_col = self.col_index()?;
                self.expect(Tok::RParen)?;
                Ok(AuxSpec::Index {
                    source,
                    key_col,
                    val_col,
                })
            }
            Tok::Count => {
                self.expect(Tok::LParen)?;
                let inv = self.ident()?;
                self.expect(Tok::RParen)?;
                Ok(AuxSpec::Count { inv })
            }
            t => Err(self.err_here(format!("expected `index` or `count`, found {t}"))),
        }
    }

    fn col_index(&mut self) -> Result<usize, ParseError> {
        let n = self.int()?;
        n.to_usize()
            .filter(|&k| k >= 1)
            .ok_or_else(|| self.err_here("column index must be a positive integer"))
    }

    fn rule(&mut self) -> Result<Rule, ParseError> {
        let head = self.atom()?;
        let mut body = Vec::new();
        if self.eat(&Tok::ColonDash) {
            body.push(self.atom()?);
            while self.eat(&Tok::Comma) {
                body.push(self.atom()?);
            }
        }
        self.expect(Tok::Dot)?;
        Ok(Rule { head, body })
    }

    fn atom(&mut self) -> Result<Atom, ParseError> {
        let pred = self.ident()?;
        self.expect(Tok::LParen)?;
        let mut args = vec![self.term()?];
        while self.eat(&Tok::Comma) {
            args.push(self.term()?);
        }
        self.expect(Tok::RParen)?;
        Ok(Atom { pred, args })
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        match self.peek().clone() {
            Tok::Ident(v) => {
                self.bump();
                Ok(Term::Var(v))
            }
            Tok::Int(_) | Tok::Minus => Ok(Term::Const(self.int()?)),
            t => Err(self.err_here(format!("expected a term, found {t}"))),
        }
    }

    // ---- statements ----

    fn block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.expect(Tok::LBrace)?;
        let mut stmts = Vec::new();
        while !self.eat(&Tok::RBrace) {
            stmts.push(self.stmt()?);
        }
        Ok(stmts)
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        match self.peek().clone() {
            Tok::Add => {
                self.bump();
                self.expect(Tok::LParen)?;
                let var = self.ident()?;
                self.expect(Tok::Comma)?;
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(Stmt::Add(var, e))
            }
            Tok::Del => {
                self.bump();
                self.expect(Tok::LParen)?;
                let var = self.ident()?;
                self.expect(Tok::Comma)?;
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(Stmt::Del(var, e))
            }
            Tok::If => {
                self.bump();
                let cond = self.expr()?;
                let body = self.block()?;
                Ok(Stmt::If(cond, body))
            }
            Tok::For => {
                self.bump();
                let var = self.ident()?;
                self.expect(Tok::In)?;
                let source = self.expr()?;
                let body = self.block()?;
                Ok(Stmt::For(var, source, body))
            }
            Tok::MapInc | Tok::MapDec => {
                let inc = self.bump() == Tok::MapInc;
                self.expect(Tok::LParen)?;
                let m = self.ident()?;
                self.expect(Tok::Comma)?;
                let k = self.expr()?;
                self.expect(Tok::Comma)?;
                let v = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(if inc {
                    Stmt::MapInc(m, k, v)
                } else {
                    Stmt::MapDec(m, k, v)
                })
            }
            Tok::Ident(v) => {
                self.bump();
                self.expect(Tok::ColonEq)?;
                let e = self.expr()?;
                Ok(Stmt::Assign(v, e))
            }
            t => Err(self.err_here(format!("expected a statement, found {t}"))),
        }
    }

    // ---- expressions ----

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.and_expr()?;
        while self.eat(&Tok::Or) {
            let rhs = self.and_expr()?;
            e = Expr::binop(BinOp::Or, e, rhs);
        }
        Ok(e)
    }

    fn and_expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.not_expr()?;
        while self.eat(&Tok::And) {
            let rhs = self.not_expr()?;
            e = Expr::binop(BinOp::And, e, rhs);
        }
        Ok(e)
    }

    fn not_expr(&mut self) -> Result<Expr, ParseError> {
        if self.eat(&Tok::Not) {
            Ok(Expr::Not(Box::new(self.not_expr()?)))
        } else {
            self.cmp_expr()
        }
    }

    fn cmp_expr(&mut self) -> Result<Expr, ParseError> {
        let e = self.union_expr()?;
        let op = match self.peek() {
            Tok::EqEq => Some(BinOp::Eq),
            Tok::Ne => Some(BinOp::Ne),
            Tok::Lt => Some(BinOp::Lt),
            Tok::Le => Some(BinOp::Le),
            Tok::Gt => Some(BinOp::Gt),
            Tok::Ge => Some(BinOp::Ge),
            Tok::In => {
                self.bump();
                let rhs = self.union_expr()?;
                return Ok(Expr::Member(Box::new(e), Box::new(rhs)));
            }
            _ => None,
        };
        if let Some(op) = op {
            self.bump();
            let rhs = self.union_expr()?;
            Ok(Expr::binop(op, e, rhs))
        } else {
            Ok(e)
        }
    }

    fn union_expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.interdiff_expr()?;
        while self.eat(&Tok::Union) {
            let rhs = self.interdiff_expr()?;
            e = Expr::SetBin(SetOp::Union, Box::new(e), Box::new(rhs));
        }
        Ok(e)
    }

    fn interdiff_expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.add_expr()?;
        loop {
            if self.eat(&Tok::Inter) {
                let rhs = self.add_expr()?;
                e = Expr::SetBin(SetOp::Inter, Box::new(e), Box::new(rhs));
            } else if self.eat(&Tok::Diff) {
                let rhs = self.add_expr()?;
                e = Expr::SetBin(SetOp::Diff, Box::new(e), Box::new(rhs));
            } else {
                return Ok(e);
            }
        }
    }

    fn add_expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.mul_expr()?;
        loop {
            if self.eat(&Tok::Plus) {
                let rhs = self.mul_expr()?;
                e = Expr::binop(BinOp::Add, e, rhs);
            } else if self.eat(&Tok::Minus) {
                let rhs = self.mul_expr()?;
                e = Expr::binop(BinOp::Sub, e, rhs);
            } else {
                return Ok(e);
            }
        }
    }

    fn mul_expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.unary()?;
        loop {
            if self.eat(&Tok::Star) {
                let rhs = self.unary()?;
                e = Expr::binop(BinOp::Mul, e, rhs);
            } else if self.eat(&Tok::Slash) {
                let rhs = self.unary()?;
                e = Expr::binop(BinOp::Div, e, rhs);
            } else {
                return Ok(e);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(&Tok::Minus) {
            let e = self.unary()?;
            // fold unary minus into integer literals for a clean round-trip
            Ok(match e {
                Expr::Int(n) => Expr::Int(-n),
                e => Expr::Neg(Box::new(e)),
            })
        } else {
            self.postfix()
        }
    }

    fn postfix(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.atom_expr()?;
        loop {
            if self.at(&Tok::Dot) {
                // `.k` projection only when followed by an integer; a bare
                // dot after an expression belongs to a rule terminator
                if let Tok::Int(_) = self.peek2() {
                    self.bump();
                    let k = match self.bump() {
                        Tok::Int(n) => n,
                        _ => unreachable!(),
                    };
                    let k = k
                        .to_usize()
                        .filter(|&k| k >= 1)
                        .ok_or_else(|| self.err_here("component index must be >= 1"))?;
                    e = Expr::Proj(Box::new(e), k);
                    continue;
                }
                return Ok(e);
            }
            if self.eat(&Tok::LBracket) {
                let k = self.expr()?;
                self.expect(Tok::RBracket)?;
                e = Expr::MapGet(Box::new(e), Box::new(k));
                continue;
            }
            return Ok(e);
        }
    }

    fn atom_expr(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Expr::Int(n))
            }
            Tok::True => {
                self.bump();
                Ok(Expr::Bool(true))
            }
            Tok::False => {
                self.bump();
                Ok(Expr::Bool(false))
            }
            Tok::Nil => {
                self.bump();
                Ok(Expr::Nil)
            }
            Tok::Cons => {
                self.bump();
                self.expect(Tok::LParen)?;
                let h = self.expr()?;
                self.expect(Tok::Comma)?;
                let t = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(Expr::Cons(Box::new(h), Box::new(t)))
            }
            Tok::Head | Tok::Tail | Tok::Empty => {
                let t = self.bump();
                self.expect(Tok::LParen)?;
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(match t {
                    Tok::Head => Expr::Head(Box::new(e)),
                    Tok::Tail => Expr::Tail(Box::new(e)),
                    _ => Expr::IsEmpty(Box::new(e)),
                })
            }
            Tok::Sum | Tok::Count => {
                let t = self.bump();
                self.expect(Tok::LParen)?;
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                let op = if t == Tok::Sum { AggOp::Sum } else { AggOp::Count };
                Ok(Expr::Agg(op, Box::new(e)))
            }
            Tok::If => {
                self.bump();
                let c = self.expr()?;
                self.expect(Tok::Then)?;
                let t = self.expr()?;
                self.expect(Tok::Else)?;
                let e = self.expr()?;
                Ok(Expr::If(Box::new(c), Box::new(t), Box::new(e)))
            }
            Tok::Ident(name) => {
                self.bump();
                if self.eat(&Tok::LParen) {
                    let mut args = Vec::new();
                    if !self.at(&Tok::RParen) {
                        args.push(self.expr()?);
                        while self.eat(&Tok::Comma) {
                            args.push(self.expr()?);
                        }
                    }
                    self.expect(Tok::RParen)?;
                    Ok(Expr::Call(name, args))
                } else {
                    Ok(Expr::Var(name))
                }
            }
            Tok::LParen => {
                self.bump();
                let first = self.expr()?;
                if self.eat(&Tok::Comma) {
                    let mut parts = vec![first, self.expr()?];
                    while self.eat(&Tok::Comma) {
                        parts.push(self.expr()?);
                    }
                    self.expect(Tok::RParen)?;
                    Ok(Expr::Tuple(parts))
                } else {
                    self.expect(Tok::RParen)?;
                    Ok(first)
                }
            }
            Tok::LBrace => {
                self.bump();
                self.braced_set()
            }
            t => Err(self.err_here(format!("expected an expression, found {t}"))),
        }
    }

    /// Parses the inside of `{ ... }`: empty set, set literal, comprehension,
    /// or join. The opening brace is already consumed.
    fn braced_set(&mut self) -> Result<Expr, ParseError> {
        if self.eat(&Tok::RBrace) {
            return Ok(Expr::EmptySet);
        }
        let first = self.expr()?;
        if self.eat(&Tok::Colon) {
            let (pat1, src1) = self.generator()?;
            if self.eat(&Tok::Comma) {
                let (pat2, src2) = self.generator()?;
                self.expect(Tok::RBrace)?;
                return Ok(Expr::Join {
                    image: Box::new(first),
                    pat1,
                    src1: Box::new(src1),
                    pat2,
                    src2: Box::new(src2),
                });
            }
            let filter = if self.eat(&Tok::Pipe) {
                Some(Box::new(self.expr()?))
            } else {
                None
            };
            self.expect(Tok::RBrace)?;
            return Ok(Expr::Comp {
                image: Box::new(first),
                pat: pat1,
                source: Box::new(src1),
                filter,
            });
        }
        let mut elems = vec![first];
        while self.eat(&Tok::Comma) {
            elems.push(self.expr()?);
        }
        self.expect(Tok::RBrace)?;
        Ok(Expr::SetLit(elems))
    }

    fn generator(&mut self) -> Result<(Pattern, Expr), ParseError> {
        let pat = if self.eat(&Tok::LParen) {
            let vars = self.ident_list()?;
            self.expect(Tok::RParen)?;
            if vars.len() < 2 {
                return Err(self.err_here("tuple pattern needs at least two variables"));
            }
            Pattern::Tuple(vars)
        } else {
            Pattern::Var(self.ident()?)
        };
        self.expect(Tok::In)?;
        let src = self.union_expr()?;
        Ok((pat, src))
    }
}
