//! Abstract syntax of the core language.
//!
//! A [`Program`] is a flat list of declarations: set/scalar variables,
//! invariants, function definitions, rules, update operations, and the
//! maintenance constructs emitted by the transformations (auxiliary
//! structures and `on add/del` event blocks).

use num_bigint::BigInt;

/// Binary operators over integers and booleans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge
        )
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "and",
            BinOp::Or => "or",
        }
    }
}

/// Binary operators over sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SetOp {
    Union,
    Inter,
    Diff,
}

impl SetOp {
    pub fn keyword(self) -> &'static str {
        match self {
            SetOp::Union => "union",
            SetOp::Inter => "inter",
            SetOp::Diff => "diff",
        }
    }
}

/// Aggregates over a set expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AggOp {
    Sum,
    Count,
}

impl AggOp {
    pub fn keyword(self) -> &'static str {
        match self {
            AggOp::Sum => "sum",
            AggOp::Count => "count",
        }
    }
}

/// A generator pattern: a single variable or a tuple of distinct variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Pattern {
    Var(String),
    Tuple(Vec<String>),
}

impl Pattern {
    pub fn vars(&self) -> Vec<&str> {
        match self {
            Pattern::Var(v) => vec![v.as_str()],
            Pattern::Tuple(vs) => vs.iter().map(|s| s.as_str()).collect(),
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            Pattern::Var(_) => 1,
            Pattern::Tuple(vs) => vs.len(),
        }
    }
}

/// Core-language expressions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Int(BigInt),
    Bool(bool),
    Var(String),
    Neg(Box<Expr>),
    Not(Box<Expr>),
    Binop(BinOp, Box<Expr>, Box<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
    Tuple(Vec<Expr>),
    /// 1-based tuple component selection.
    Proj(Box<Expr>, usize),
    Nil,
    Cons(Box<Expr>, Box<Expr>),
    Head(Box<Expr>),
    Tail(Box<Expr>),
    /// Empty-test on a list.
    IsEmpty(Box<Expr>),
    EmptySet,
    /// Set literal `{ e1, e2, ... }`.
    SetLit(Vec<Expr>),
    SetBin(SetOp, Box<Expr>, Box<Expr>),
    /// `e in s` — set membership, or key presence when `s` is a map.
    Member(Box<Expr>, Box<Expr>),
    /// `{ image : pat in source | filter }` with a single generator.
    Comp {
        image: Box<Expr>,
        pat: Pattern,
        source: Box<Expr>,
        filter: Option<Box<Expr>>,
    },
    /// `{ image : pat1 in src1, pat2 in src2 }` — a join over two generators.
    Join {
        image: Box<Expr>,
        pat1: Pattern,
        src1: Box<Expr>,
        pat2: Pattern,
        src2: Box<Expr>,
    },
    Agg(AggOp, Box<Expr>),
    Call(String, Vec<Expr>),
    /// `m[k]` — auxiliary-map lookup; absent keys yield the map's neutral
    /// value (empty set for index maps, 0 for count maps).
    MapGet(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn int(n: i64) -> Expr {
        Expr::Int(BigInt::from(n))
    }

    pub fn binop(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binop(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn call(name: impl Into<String>, args: Vec<Expr>) -> Expr {
        Expr::Call(name.into(), args)
    }

    /// Applies `f` to every node bottom-up, rebuilding the tree.
    pub fn rewrite(self, f: &mut impl FnMut(Expr) -> Expr) -> Expr {
        let e = match self {
            Expr::Neg(a) => Expr::Neg(Box::new(a.rewrite(f))),
            Expr::Not(a) => Expr::Not(Box::new(a.rewrite(f))),
            Expr::Binop(op, a, b) => Expr::Binop(op, Box::new(a.rewrite(f)), Box::new(b.rewrite(f))),
            Expr::If(c, t, e2) => Expr::If(
                Box::new(c.rewrite(f)),
                Box::new(t.rewrite(f)),
                Box::new(e2.rewrite(f)),
            ),
            Expr::Tuple(es) => Expr::Tuple(es.into_iter().map(|e| e.rewrite(f)).collect()),
            Expr::Proj(a, k) => Expr::Proj(Box::new(a.rewrite(f)), k),
            Expr::Cons(a, b) => Expr::Cons(Box::new(a.rewrite(f)), Box::new(b.rewrite(f))),
            Expr::Head(a) => Expr::Head(Box::new(a.rewrite(f))),
            Expr::Tail(a) => Expr::Tail(Box::new(a.rewrite(f))),
            Expr::IsEmpty(a) => Expr::IsEmpty(Box::new(a.rewrite(f))),
            Expr::SetLit(es) => Expr::SetLit(es.into_iter().map(|e| e.rewrite(f)).collect()),
            Expr::SetBin(op, a, b) => {
                Expr::SetBin(op, Box::new(a.rewrite(f)), Box::new(b.rewrite(f)))
            }
            Expr::Member(a, b) => Expr::Member(Box::new(a.rewrite(f)), Box::new(b.rewrite(f))),
            Expr::Comp {
                image,
                pat,
                source,
                filter,
            } => Expr::Comp {
                image: Box::new(image.rewrite(f)),
                pat,
                source: Box::new(source.rewrite(f)),
                filter: filter.map(|p| Box::new(p.rewrite(f))),
            },
            Expr::Join {
                image,
                pat1,
                src1,
                pat2,
                src2,
            } => Expr::Join {
                image: Box::new(image.rewrite(f)),
                pat1,
                src1: Box::new(src1.rewrite(f)),
                pat2,
                src2: Box::new(src2.rewrite(f)),
            },
            Expr::Agg(op, a) => Expr::Agg(op, Box::new(a.rewrite(f))),
            Expr::Call(name, args) => {
                Expr::Call(name, args.into_iter().map(|e| e.rewrite(f)).collect())
            }
            Expr::MapGet(m, k) => Expr::MapGet(Box::new(m.rewrite(f)), Box::new(k.rewrite(f))),
            leaf => leaf,
        };
        f(e)
    }

    /// Visits every node top-down.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Neg(a) | Expr::Not(a) | Expr::Proj(a, _) | Expr::Head(a) | Expr::Tail(a)
            | Expr::IsEmpty(a) | Expr::Agg(_, a) => a.visit(f),
            Expr::Binop(_, a, b)
            | Expr::Cons(a, b)
            | Expr::SetBin(_, a, b)
            | Expr::Member(a, b)
            | Expr::MapGet(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Expr::If(c, t, e) => {
                c.visit(f);
                t.visit(f);
                e.visit(f);
            }
            Expr::Tuple(es) | Expr::SetLit(es) | Expr::Call(_, es) => {
                for e in es {
                    e.visit(f);
                }
            }
            Expr::Comp {
                image,
                source,
                filter,
                ..
            } => {
                image.visit(f);
                source.visit(f);
                if let Some(p) = filter {
                    p.visit(f);
                }
            }
            Expr::Join {
                image, src1, src2, ..
            } => {
                image.visit(f);
                src1.visit(f);
                src2.visit(f);
            }
            _ => {}
        }
    }

    /// Substitutes `replacement` for every free occurrence of variable `name`.
    /// Generator patterns shadow the substituted variable.
    pub fn subst(self, name: &str, replacement: &Expr) -> Expr {
        match self {
            Expr::Var(v) if v == name => replacement.clone(),
            Expr::Comp {
                image,
                pat,
                source,
                filter,
            } => {
                let source = Box::new(source.subst(name, replacement));
                if pat.vars().contains(&name) {
                    Expr::Comp {
                        image,
                        pat,
                        source,
                        filter,
                    }
                } else {
                    Expr::Comp {
                        image: Box::new(image.subst(name, replacement)),
                        pat,
                        source,
                        filter: filter.map(|p| Box::new(p.subst(name, replacement))),
                    }
                }
            }
            Expr::Join {
                image,
                pat1,
                src1,
                pat2,
                src2,
            } => {
                let src1 = Box::new(src1.subst(name, replacement));
                let src2 = Box::new(src2.subst(name, replacement));
                let shadowed =
                    pat1.vars().contains(&name) || pat2.vars().contains(&name);
                let image = if shadowed {
                    image
                } else {
                    Box::new(image.subst(name, replacement))
                };
                Expr::Join {
                    image,
                    pat1,
                    src1,
                    pat2,
                    src2,
                }
            }
            other => other.rewrite(&mut |e| match e {
                Expr::Var(v) if v == name => replacement.clone(),
                e => e,
            }),
        }
    }
}

/// Kinds of input-change operations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UpdateKind {
    /// Add an element to a set (precondition: absent).
    AddElem,
    /// Delete an element from a set (precondition: present).
    DelElem,
    /// Increment an integer variable by a constant.
    IncrBy(BigInt),
    /// Cons an element onto the front of a list.
    ConsElem,
    /// Apply a user-defined change function: `x := f(x, params...)`.
    Custom(String),
}

/// A named input-change operation with its parameter list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpdateOp {
    pub name: String,
    pub target: String,
    pub kind: UpdateKind,
    pub params: Vec<String>,
}

/// A function definition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FuncDef {
    pub name: String,
    pub params: Vec<String>,
    pub body: Expr,
}

/// An atom `pred(t1, ..., tk)` in a rule head or body.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub pred: String,
    pub args: Vec<Term>,
}

/// A term in an atom: a variable or an integer constant.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(String),
    Const(BigInt),
}

/// A positive rule `head :- body.` An empty body is a ground fact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub head: Atom,
    pub body: Vec<Atom>,
}

/// Maintenance-event kinds for `on` blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Add,
    Del,
}

impl EventKind {
    pub fn keyword(self) -> &'static str {
        match self {
            EventKind::Add => "add",
            EventKind::Del => "del",
        }
    }
}

/// Statements in derived maintenance code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    /// `add(u, e)` — strict set insertion, firing downstream `on add(u, _)`.
    Add(String, Expr),
    /// `del(u, e)` — strict set removal, firing downstream `on del(u, _)`.
    Del(String, Expr),
    /// `c := e` — scalar assignment.
    Assign(String, Expr),
    If(Expr, Vec<Stmt>),
    For(String, Expr, Vec<Stmt>),
    /// `mapinc(m, k, v)` — count map: add integer `v` at key `k`;
    /// index map: insert `v` into the bucket at key `k`.
    MapInc(String, Expr, Expr),
    /// `mapdec(m, k, v)` — inverse of `mapinc`; entries vanish at zero.
    MapDec(String, Expr, Expr),
}

/// A maintenance block `on add(target, param) { body }`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OnBlock {
    pub event: EventKind,
    pub target: String,
    pub param: String,
    pub body: Vec<Stmt>,
}

/// What an auxiliary map contains, and how to rebuild it from scratch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AuxSpec {
    /// `index(R, key_col, val_col)` — maps each key-column value of the
    /// tuples in `R` to the bucket of their value-column values.
    Index {
        source: String,
        key_col: usize,
        val_col: usize,
    },
    /// `count(u)` — multiplicity of each element of the invariant `u`,
    /// counting how many source elements (or joined pairs) produce it.
    Count { inv: String },
}

/// An auxiliary-structure declaration `aux m = ...;`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuxDecl {
    pub name: String,
    pub spec: AuxSpec,
}

/// Top-level declarations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decl {
    /// `set s, t;`
    Sets(Vec<String>),
    /// `var x, y;` — scalar (integer or list) state variables.
    Vars(Vec<String>),
    /// `inv u = E;`
    Inv { name: String, expr: Expr },
    Func(FuncDef),
    Rule(Rule),
    Update(UpdateOp),
    Aux(AuxDecl),
    On(OnBlock),
}

/// A source program: an ordered list of declarations.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Program {
    pub decls: Vec<Decl>,
}

impl Program {
    pub fn new(decls: Vec<Decl>) -> Program {
        Program { decls }
    }

    pub fn set_vars(&self) -> impl Iterator<Item = &str> {
        self.decls.iter().flat_map(|d| match d {
            Decl::Sets(names) => names.iter().map(|s| s.as_str()).collect::<Vec<_>>(),
            _ => Vec::new(),
        })
    }

    pub fn scalar_vars(&self) -> impl Iterator<Item = &str> {
        self.decls.iter().flat_map(|d| match d {
            Decl::Vars(names) => names.iter().map(|s| s.as_str()).collect::<Vec<_>>(),
            _ => Vec::new(),
        })
    }

    pub fn invariants(&self) -> impl Iterator<Item = (&str, &Expr)> {
        self.decls.iter().filter_map(|d| match d {
            Decl::Inv { name, expr } => Some((name.as_str(), expr)),
            _ => None,
        })
    }

    pub fn funcs(&self) -> impl Iterator<Item = &FuncDef> {
        self.decls.iter().filter_map(|d| match d {
            Decl::Func(f) => Some(f),
            _ => None,
        })
    }

    pub fn func(&self, name: &str) -> Option<&FuncDef> {
        self.funcs().find(|f| f.name == name)
    }

    pub fn rules(&self) -> impl Iterator<Item = &Rule> {
        self.decls.iter().filter_map(|d| match d {
            Decl::Rule(r) => Some(r),
            _ => None,
        })
    }

    pub fn updates(&self) -> impl Iterator<Item = &UpdateOp> {
        self.decls.iter().filter_map(|d| match d {
            Decl::Update(u) => Some(u),
            _ => None,
        })
    }

    pub fn update(&self, name: &str) -> Option<&UpdateOp> {
        self.updates().find(|u| u.name == name)
    }

    pub fn aux_decls(&self) -> impl Iterator<Item = &AuxDecl> {
        self.decls.iter().filter_map(|d| match d {
            Decl::Aux(a) => Some(a),
            _ => None,
        })
    }

    pub fn on_blocks(&self) -> impl Iterator<Item = &OnBlock> {
        self.decls.iter().filter_map(|d| match d {
            Decl::On(b) => Some(b),
            _ => None,
        })
    }

    /// All identifiers introduced by any declaration.
    pub fn declared_names(&self) -> Vec<&str> {
        let mut out = Vec::new();
        for d in &self.decls {
            match d {
                Decl::Sets(ns) | Decl::Vars(ns) => out.extend(ns.iter().map(|s| s.as_str())),
                Decl::Inv { name, .. } => out.push(name),
                Decl::Func(f) => out.push(&f.name),
                Decl::Update(u) => out.push(&u.name),
                Decl::Aux(a) => out.push(&a.name),
                Decl::Rule(_) | Decl::On(_) => {}
            }
        }
        out
    }
}
