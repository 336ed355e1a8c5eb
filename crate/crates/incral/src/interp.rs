//! Reference interpreter with the charged-unit cost model.
//!
//! A [`State`] holds the declared variables, maintained invariants, and
//! auxiliary structures of one program. Updates are applied through a
//! pending-change queue: each add/del is applied to its variable and the
//! registered `on` blocks for that variable run immediately afterwards;
//! changes they emit join the queue. The queue discipline (FIFO by default)
//! makes every change a single-operand update with post-update guard
//! semantics, which is what the differencing rules assume.

use std::collections::{HashMap, VecDeque};

use indexmap::{IndexMap, IndexSet};
use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::ast::*;
use crate::cost::{Charge, CostReport};
use crate::error::EvalError;
use crate::value::Value;

pub const DEFAULT_STEP_LIMIT: u64 = 100_000_000;
const DEPTH_LIMIT: usize = 10_000;

/// Queue discipline for pending changes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Discipline {
    #[default]
    Fifo,
    Lifo,
}

/// Runtime interpretation of an auxiliary map.
#[derive(Debug, Clone)]
enum AuxKind {
    Index { key_col: usize, val_col: usize },
    Count,
}

/// Interpreter state: base variables, maintained invariants, auxiliary
/// structures, and the registered maintenance code.
#[derive(Debug, Clone)]
pub struct State {
    pub env: IndexMap<String, Value>,
    pub invs: IndexMap<String, Value>,
    pub aux: IndexMap<String, Value>,
    funcs: IndexMap<String, FuncDef>,
    inv_decls: Vec<(String, Expr)>,
    aux_decls: Vec<AuxDecl>,
    aux_kinds: HashMap<String, AuxKind>,
    blocks: Vec<OnBlock>,
    handlers: HashMap<(EventKind, String), Vec<usize>>,
    pub discipline: Discipline,
    pub step_limit: u64,
}

impl State {
    /// Builds a state from a program: empty sets, zeroed scalars, invariants
    /// evaluated from scratch in declaration order, auxiliary maps rebuilt
    /// from their specifications, and `on` blocks registered.
    pub fn new(p: &Program) -> Result<State, EvalError> {
        let mut st = State {
            env: IndexMap::new(),
            invs: IndexMap::new(),
            aux: IndexMap::new(),
            funcs: IndexMap::new(),
            inv_decls: Vec::new(),
            aux_decls: Vec::new(),
            aux_kinds: HashMap::new(),
            blocks: Vec::new(),
            handlers: HashMap::new(),
            discipline: Discipline::Fifo,
            step_limit: DEFAULT_STEP_LIMIT,
        };
        for d in &p.decls {
            match d {
                Decl::Sets(ns) => {
                    for n in ns {
                        st.env.insert(n.clone(), Value::empty_set());
                    }
                }
                Decl::Vars(ns) => {
                    for n in ns {
                        st.env.insert(n.clone(), Value::int(0));
                    }
                }
                Decl::Func(f) => {
                    st.funcs.insert(f.name.clone(), f.clone());
                }
                Decl::Inv { name, expr } => {
                    st.inv_decls.push((name.clone(), expr.clone()));
                }
                Decl::Aux(a) => {
                    st.aux_decls.push(a.clone());
                }
                Decl::On(b) => {
                    let idx = st.blocks.len();
                    st.blocks.push(b.clone());
                    st.handlers
                        .entry((b.event, b.target.clone()))
                        .or_default()
                        .push(idx);
                }
                Decl::Rule(_) | Decl::Update(_) => {}
            }
        }
        st.init_derived()?;
        Ok(st)
    }

    /// Recomputes every invariant and auxiliary map from scratch.
    pub fn init_derived(&mut self) -> Result<(), EvalError> {
        for (name, expr) in self.inv_decls.clone() {
            let (v, _) = self.recompute_expr(&expr)?;
            self.invs.insert(name, v);
        }
        for a in self.aux_decls.clone() {
            let kind = match &a.spec {
                AuxSpec::Index { key_col, val_col, .. } => AuxKind::Index {
                    key_col: *key_col,
                    val_col: *val_col,
                },
                AuxSpec::Count { .. } => AuxKind::Count,
            };
            self.aux_kinds.insert(a.name.clone(), kind);
            let v = self.recompute_aux(&a)?;
            self.aux.insert(a.name.clone(), v);
        }
        Ok(())
    }

    /// All invariant declarations, in rank order.
    pub fn invariant_decls(&self) -> &[(String, Expr)] {
        &self.inv_decls
    }

    pub fn aux_specs(&self) -> &[AuxDecl] {
        &self.aux_decls
    }

    fn lookup(&self, name: &str) -> Result<&Value, EvalError> {
        self.env
            .get(name)
            .or_else(|| self.invs.get(name))
            .or_else(|| self.aux.get(name))
            .ok_or_else(|| EvalError::Unbound(name.to_string()))
    }

    /// Evaluates `f(args)` against the current state.
    pub fn call(&mut self, name: &str, args: &[Value]) -> Result<(Value, CostReport), EvalError> {
        let mut m = Machine::new(self);
        let v = m.call_fn(name, args.to_vec(), 0)?;
        Ok((v, m.meter.cost))
    }

    /// Evaluates an expression from scratch against the current state.
    pub fn recompute_expr(&mut self, e: &Expr) -> Result<(Value, CostReport), EvalError> {
        let mut m = Machine::new(self);
        let mut locals = Locals::new();
        let v = m.eval(e, &mut locals, 0)?;
        Ok((v, m.meter.cost))
    }

    /// From-scratch value of a maintained invariant's defining expression.
    pub fn recompute(&mut self, inv: &str) -> Result<(Value, CostReport), EvalError> {
        let expr = self
            .inv_decls
            .iter()
            .find(|(n, _)| n == inv)
            .map(|(_, e)| e.clone())
            .ok_or_else(|| EvalError::Unbound(inv.to_string()))?;
        self.recompute_expr(&expr)
    }

    /// From-scratch contents of an auxiliary map.
    pub fn recompute_aux(&mut self, a: &AuxDecl) -> Result<Value, EvalError> {
        match &a.spec {
            AuxSpec::Index {
                source,
                key_col,
                val_col,
            } => {
                let src = self.lookup(source)?.clone();
                let set = src
                    .as_set()
                    .ok_or_else(|| EvalError::Type(format!("index source `{source}` is not a set")))?;
                let mut map: IndexMap<Value, Value> = IndexMap::new();
                for t in set {
                    let (k, v) = match t {
                        Value::Tuple(fields)
                            if fields.len() >= *key_col && fields.len() >= *val_col =>
                        {
                            (fields[key_col - 1].clone(), fields[val_col - 1].clone())
                        }
                        _ => {
                            return Err(EvalError::Type(format!(
                                "index source `{source}` holds non-tuple or short tuple"
                            )))
                        }
                    };
                    match map.entry(k).or_insert_with(Value::empty_set) {
                        Value::Set(bucket) => {
                            bucket.insert(v);
                        }
                        _ => unreachable!(),
                    }
                }
                Ok(Value::Map(map))
            }
            AuxSpec::Count { inv } => {
                let expr = self
                    .inv_decls
                    .iter()
                    .find(|(n, _)| n == inv)
                    .map(|(_, e)| e.clone())
                    .ok_or_else(|| EvalError::Unbound(inv.clone()))?;
                let mut m = Machine::new(self);
                let counts = m.image_multiplicities(&expr)?;
                Ok(Value::Map(counts))
            }
        }
    }

    /// Applies an update operation. If maintenance blocks are registered for
    /// the touched variables they run as part of the same call; the returned
    /// report covers the update and all triggered maintenance.
    pub fn apply_update(
        &mut self,
        op: &UpdateOp,
        args: &[Value],
    ) -> Result<CostReport, EvalError> {
        if args.len() != op.params.len() {
            return Err(EvalError::Arity {
                name: op.name.clone(),
                expected: op.params.len(),
                got: args.len(),
            });
        }
        match &op.kind {
            UpdateKind::AddElem => self.apply_change(Change::Add(op.target.clone(), args[0].clone())),
            UpdateKind::DelElem => self.apply_change(Change::Del(op.target.clone(), args[0].clone())),
            UpdateKind::IncrBy(c) => {
                let mut m = Machine::new(self);
                m.meter.charge(Charge::Arith)?;
                let cost = m.meter.cost;
                let slot = self
                    .env
                    .get_mut(&op.target)
                    .ok_or_else(|| EvalError::Unbound(op.target.clone()))?;
                match slot {
                    Value::Int(n) => *n += c,
                    other => {
                        return Err(EvalError::Type(format!(
                            "incr target holds a {}",
                            other.kind_name()
                        )))
                    }
                }
                Ok(cost)
            }
            UpdateKind::ConsElem => {
                let mut m = Machine::new(self);
                m.meter.charge(Charge::ConsHeadTail)?;
                let cost = m.meter.cost;
                let slot = self
                    .env
                    .get_mut(&op.target)
                    .ok_or_else(|| EvalError::Unbound(op.target.clone()))?;
                match slot {
                    Value::List(items) => items.insert(0, args[0].clone()),
                    other => {
                        return Err(EvalError::Type(format!(
                            "cons target holds a {}",
                            other.kind_name()
                        )))
                    }
                }
                Ok(cost)
            }
            UpdateKind::Custom(f) => {
                let old = self.lookup(&op.target)?.clone();
                let mut call_args = vec![old];
                call_args.extend(args.iter().cloned());
                let (new, cost) = self.call(&f.clone(), &call_args)?;
                *self
                    .env
                    .get_mut(&op.target)
                    .ok_or_else(|| EvalError::Unbound(op.target.clone()))? = new;
                Ok(cost)
            }
        }
    }

    /// Applies a single strict add/del and drains all triggered maintenance.
    pub fn apply_change(&mut self, change: Change) -> Result<CostReport, EvalError> {
        // reject before mutating so a failed update leaves the state intact
        let (var, elem, adding) = match &change {
            Change::Add(v, e) => (v, e, true),
            Change::Del(v, e) => (v, e, false),
        };
        let target = self
            .env
            .get(var)
            .or_else(|| self.invs.get(var))
            .ok_or_else(|| EvalError::Unbound(var.clone()))?;
        match target {
            Value::Set(s) => {
                if adding && s.contains(elem) {
                    return Err(EvalError::StrictAdd(var.clone()));
                }
                if !adding && !s.contains(elem) {
                    return Err(EvalError::StrictDel(var.clone()));
                }
            }
            other => {
                return Err(EvalError::Type(format!(
                    "add/del target `{var}` holds a {}",
                    other.kind_name()
                )))
            }
        }
        let mut m = Machine::new(self);
        m.queue.push_back(change);
        m.drain()?;
        Ok(m.meter.cost)
    }

    /// Executes maintenance-style statements directly (used by tabulation
    /// and by tests); emitted changes propagate as usual.
    pub fn exec(&mut self, stmts: &[Stmt]) -> Result<CostReport, EvalError> {
        let mut m = Machine::new(self);
        let mut locals = Locals::new();
        m.exec_stmts(stmts, &mut locals, 0)?;
        m.drain()?;
        Ok(m.meter.cost)
    }
}

/// A strict pending change on a set-valued variable.
#[derive(Debug, Clone)]
pub enum Change {
    Add(String, Value),
    Del(String, Value),
}

/// Evaluates `entry` (a defined function applied to literal values) in a
/// fresh state for `p`.
pub fn eval(p: &Program, entry: &str, args: &[Value]) -> Result<(Value, CostReport), EvalError> {
    let mut st = State::new(p)?;
    st.call(entry, args)
}

struct CostMeter {
    cost: CostReport,
    total: u64,
    limit: u64,
}

impl CostMeter {
    fn charge(&mut self, c: Charge) -> Result<(), EvalError> {
        self.cost.charge(c);
        self.total += 1;
        if self.total > self.limit {
            Err(EvalError::StepLimit(self.limit))
        } else {
            Ok(())
        }
    }
}

struct Locals {
    scope: Vec<(String, Value)>,
}

impl Locals {
    fn new() -> Locals {
        Locals { scope: Vec::new() }
    }

    fn get(&self, name: &str) -> Option<&Value> {
        self.scope
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v)
    }

    fn push(&mut self, name: &str, v: Value) {
        self.scope.push((name.to_string(), v));
    }

    fn pop(&mut self, n: usize) {
        for _ in 0..n {
            self.scope.pop();
        }
    }
}

struct Machine<'s> {
    state: &'s mut State,
    meter: CostMeter,
    queue: VecDeque<Change>,
}

impl<'s> Machine<'s> {
    fn new(state: &'s mut State) -> Machine<'s> {
        let limit = state.step_limit;
        Machine {
            state,
            meter: CostMeter {
                cost: CostReport::default(),
                total: 0,
                limit,
            },
            queue: VecDeque::new(),
        }
    }

    // ---- pending-change propagation ----

    fn drain(&mut self) -> Result<(), EvalError> {
        while let Some(change) = match self.state.discipline {
            Discipline::Fifo => self.queue.pop_front(),
            Discipline::Lifo => self.queue.pop_back(),
        } {
            let (var, elem, event) = match change {
                Change::Add(v, e) => (v, e, EventKind::Add),
                Change::Del(v, e) => (v, e, EventKind::Del),
            };
            self.apply_to_var(&var, &elem, event)?;
            let handler_ids = self
                .state
                .handlers
                .get(&(event, var.clone()))
                .cloned()
                .unwrap_or_default();
            for id in handler_ids {
                let block = self.state.blocks[id].clone();
                let mut locals = Locals::new();
                locals.push(&block.param, elem.clone());
                self.exec_stmts(&block.body, &mut locals, 0)?;
            }
        }
        Ok(())
    }

    fn apply_to_var(&mut self, var: &str, elem: &Value, event: EventKind) -> Result<(), EvalError> {
        let slot = self
            .state
            .env
            .get_mut(var)
            .or_else(|| self.state.invs.get_mut(var))
            .ok_or_else(|| EvalError::Unbound(var.to_string()))?;
        let set = match slot {
            Value::Set(s) => s,
            other => {
                return Err(EvalError::Type(format!(
                    "add/del target `{var}` holds a {}",
                    other.kind_name()
                )))
            }
        };
        match event {
            EventKind::Add => {
                if !set.insert(elem.clone()) {
                    return Err(EvalError::StrictAdd(var.to_string()));
                }
                self.meter.charge(Charge::SetAdd)
            }
            EventKind::Del => {
                if !set.swap_remove(elem) {
                    return Err(EvalError::StrictDel(var.to_string()));
                }
                self.meter.charge(Charge::SetDel)
            }
        }
    }

    // ---- statements ----

    fn exec_stmts(
        &mut self,
        stmts: &[Stmt],
        locals: &mut Locals,
        depth: usize,
    ) -> Result<(), EvalError> {
        if depth > DEPTH_LIMIT {
            return Err(EvalError::StepLimit(self.meter.limit));
        }
        for s in stmts {
            match s {
                Stmt::Add(var, e) => {
                    let v = self.eval(e, locals, depth)?;
                    self.queue.push_back(Change::Add(var.clone(), v));
                }
                Stmt::Del(var, e) => {
                    let v = self.eval(e, locals, depth)?;
                    self.queue.push_back(Change::Del(var.clone(), v));
                }
                Stmt::Assign(var, e) => {
                    let v = self.eval(e, locals, depth)?;
                    let slot = self
                        .state
                        .invs
                        .get_mut(var)
                        .or_else(|| self.state.env.get_mut(var))
                        .ok_or_else(|| EvalError::Unbound(var.clone()))?;
                    *slot = v;
                }
                Stmt::If(c, body) => {
                    let cond = self.eval(c, locals, depth)?;
                    match cond {
                        Value::Bool(true) => self.exec_stmts(body, locals, depth + 1)?,
                        Value::Bool(false) => {}
                        other => {
                            return Err(EvalError::Type(format!(
                                "if condition is a {}",
                                other.kind_name()
                            )))
                        }
                    }
                }
                Stmt::For(x, src, body) => {
                    let set = self.eval_set(src, locals, depth)?;
                    for elem in set {
                        self.meter.charge(Charge::IterStep)?;
                        locals.push(x, elem);
                        self.exec_stmts(body, locals, depth + 1)?;
                        locals.pop(1);
                    }
                }
                Stmt::MapInc(m, k, v) => {
                    let key = self.eval(k, locals, depth)?;
                    let val = self.eval(v, locals, depth)?;
                    self.map_adjust(m, key, val, true)?;
                }
                Stmt::MapDec(m, k, v) => {
                    let key = self.eval(k, locals, depth)?;
                    let val = self.eval(v, locals, depth)?;
                    self.map_adjust(m, key, val, false)?;
                }
            }
        }
        Ok(())
    }

    fn map_adjust(&mut self, name: &str, key: Value, val: Value, inc: bool) -> Result<(), EvalError> {
        self.meter.charge(Charge::MapGet)?;
        self.meter.charge(Charge::MapPut)?;
        let kind = self
            .state
            .aux_kinds
            .get(name)
            .cloned()
            .ok_or_else(|| EvalError::Unbound(name.to_string()))?;
        let map = match self.state.aux.get_mut(name) {
            Some(Value::Map(m)) => m,
            Some(other) => {
                return Err(EvalError::Type(format!(
                    "auxiliary `{name}` holds a {}",
                    other.kind_name()
                )))
            }
            None => return Err(EvalError::Unbound(name.to_string())),
        };
        match kind {
            AuxKind::Count => {
                let delta = match &val {
                    Value::Int(n) => n.clone(),
                    other => {
                        return Err(EvalError::Type(format!(
                            "count-map delta is a {}",
                            other.kind_name()
                        )))
                    }
                };
                let delta = if inc { delta } else { -delta };
                let entry = map.entry(key).or_insert_with(|| Value::int(0));
                let n = match entry {
                    Value::Int(n) => n,
                    _ => unreachable!(),
                };
                *n += &delta;
                if n.is_negative() {
                    return Err(EvalError::Type("count map underflow".to_string()));
                }
                if n.is_zero() {
                    // remove the key we just zeroed
                    let zero_key = map
                        .iter()
                        .find(|(_, v)| matches!(v, Value::Int(n) if n.is_zero()))
                        .map(|(k, _)| k.clone());
                    if let Some(k) = zero_key {
                        map.swap_remove(&k);
                    }
                }
            }
            AuxKind::Index { .. } => {
                if inc {
                    let bucket = map.entry(key).or_insert_with(Value::empty_set);
                    match bucket {
                        Value::Set(s) => {
                            if !s.insert(val) {
                                return Err(EvalError::Type(format!(
                                    "index `{name}` double insert"
                                )));
                            }
                        }
                        _ => unreachable!(),
                    }
                } else {
                    let emptied = match map.get_mut(&key) {
                        Some(Value::Set(s)) => {
                            if !s.swap_remove(&val) {
                                return Err(EvalError::Type(format!(
                                    "index `{name}` removes absent entry"
                                )));
                            }
                            s.is_empty()
                        }
                        _ => {
                            return Err(EvalError::Type(format!(
                                "index `{name}` removes from absent bucket"
                            )))
                        }
                    };
                    if emptied {
                        map.swap_remove(&key);
                    }
                }
            }
        }
        Ok(())
    }

    // ---- expressions ----

    fn call_fn(&mut self, name: &str, args: Vec<Value>, depth: usize) -> Result<Value, EvalError> {
        if depth > DEPTH_LIMIT {
            return Err(EvalError::StepLimit(self.meter.limit));
        }
        self.meter.charge(Charge::Call)?;
        let f = self
            .state
            .funcs
            .get(name)
            .cloned()
            .ok_or_else(|| EvalError::UnknownFunction(name.to_string()))?;
        if f.params.len() != args.len() {
            return Err(EvalError::Arity {
                name: name.to_string(),
                expected: f.params.len(),
                got: args.len(),
            });
        }
        let mut locals = Locals::new();
        for (p, a) in f.params.iter().zip(args) {
            locals.push(p, a);
        }
        self.eval(&f.body, &mut locals, depth + 1)
    }

    fn eval(&mut self, e: &Expr, locals: &mut Locals, depth: usize) -> Result<Value, EvalError> {
        if depth > DEPTH_LIMIT {
            return Err(EvalError::StepLimit(self.meter.limit));
        }
        match e {
            Expr::Int(n) => Ok(Value::Int(n.clone())),
            Expr::Bool(b) => Ok(Value::Bool(*b)),
            Expr::Var(v) => {
                if let Some(val) = locals.get(v) {
                    return Ok(val.clone());
                }
                self.state.lookup(v).cloned()
            }
            Expr::Neg(a) => {
                let v = self.eval(a, locals, depth + 1)?;
                self.meter.charge(Charge::Arith)?;
                match v {
                    Value::Int(n) => Ok(Value::Int(-n)),
                    other => Err(EvalError::Type(format!("negating a {}", other.kind_name()))),
                }
            }
            Expr::Not(a) => {
                let v = self.eval(a, locals, depth + 1)?;
                self.meter.charge(Charge::Compare)?;
                match v {
                    Value::Bool(b) => Ok(Value::Bool(!b)),
                    other => Err(EvalError::Type(format!("not of a {}", other.kind_name()))),
                }
            }
            Expr::Binop(op, a, b) => self.eval_binop(*op, a, b, locals, depth),
            Expr::If(c, t, f) => {
                let cond = self.eval(c, locals, depth + 1)?;
                match cond {
                    Value::Bool(true) => self.eval(t, locals, depth + 1),
                    Value::Bool(false) => self.eval(f, locals, depth + 1),
                    other => Err(EvalError::Type(format!(
                        "if condition is a {}",
                        other.kind_name()
                    ))),
                }
            }
            Expr::Tuple(es) => {
                let mut vs = Vec::with_capacity(es.len());
                for e in es {
                    vs.push(self.eval(e, locals, depth + 1)?);
                }
                self.meter.charge(Charge::ConsHeadTail)?;
                Ok(Value::Tuple(vs))
            }
            Expr::Proj(a, k) => {
                let v = self.eval(a, locals, depth + 1)?;
                self.meter.charge(Charge::ConsHeadTail)?;
                match v {
                    Value::Tuple(fields) => fields
                        .get(*k - 1)
                        .cloned()
                        .ok_or(EvalError::ProjRange {
                            index: *k,
                            arity: 0,
                        })
                        .map_err(|_| EvalError::ProjRange {
                            index: *k,
                            arity: 0,
                        }),
                    other => Err(EvalError::Type(format!(
                        "projecting from a {}",
                        other.kind_name()
                    ))),
                }
            }
            Expr::Nil => Ok(Value::List(Vec::new())),
            Expr::Cons(h, t) => {
                let hv = self.eval(h, locals, depth + 1)?;
                let tv = self.eval(t, locals, depth + 1)?;
                self.meter.charge(Charge::ConsHeadTail)?;
                match tv {
                    Value::List(mut items) => {
                        items.insert(0, hv);
                        Ok(Value::List(items))
                    }
                    other => Err(EvalError::Type(format!(
                        "cons onto a {}",
                        other.kind_name()
                    ))),
                }
            }
            Expr::Head(a) => {
                let v = self.eval(a, locals, depth + 1)?;
                self.meter.charge(Charge::ConsHeadTail)?;
                match v {
                    Value::List(items) => items.first().cloned().ok_or(EvalError::HeadOfEmpty),
                    other => Err(EvalError::Type(format!(
                        "head of a {}",
                        other.kind_name()
                    ))),
                }
            }
            Expr::Tail(a) => {
                let v = self.eval(a, locals, depth + 1)?;
                self.meter.charge(Charge::ConsHeadTail)?;
                match v {
                    Value::List(items) => {
                        if items.is_empty() {
                            Err(EvalError::TailOfEmpty)
                        } else {
                            Ok(Value::List(items[1..].to_vec()))
                        }
                    }
                    other => Err(EvalError::Type(format!(
                        "tail of a {}",
                        other.kind_name()
                    ))),
                }
            }
            Expr::IsEmpty(a) => {
                let v = self.eval(a, locals, depth + 1)?;
                self.meter.charge(Charge::ConsHeadTail)?;
                match v {
                    Value::List(items) => Ok(Value::Bool(items.is_empty())),
                    other => Err(EvalError::Type(format!(
                        "empty-test of a {}",
                        other.kind_name()
                    ))),
                }
            }
            Expr::EmptySet => Ok(Value::empty_set()),
            Expr::SetLit(es) => {
                let mut out = IndexSet::new();
                for e in es {
                    let v = self.eval(e, locals, depth + 1)?;
                    self.meter.charge(Charge::SetAdd)?;
                    out.insert(v);
                }
                Ok(Value::Set(out))
            }
            Expr::SetBin(op, a, b) => {
                let lhs = self.eval_set(a, locals, depth)?;
                match op {
                    SetOp::Union => {
                        let rhs = self.eval_set(b, locals, depth)?;
                        let mut out = IndexSet::new();
                        for v in lhs {
                            self.meter.charge(Charge::IterStep)?;
                            self.meter.charge(Charge::SetAdd)?;
                            out.insert(v);
                        }
                        for v in rhs {
                            self.meter.charge(Charge::IterStep)?;
                            self.meter.charge(Charge::SetAdd)?;
                            out.insert(v);
                        }
                        Ok(Value::Set(out))
                    }
                    SetOp::Inter | SetOp::Diff => {
                        let want_in = *op == SetOp::Inter;
                        let mut out = IndexSet::new();
                        for v in lhs {
                            self.meter.charge(Charge::IterStep)?;
                            let hit = self.member_of(&v, b, locals, depth)?;
                            if hit == want_in {
                                self.meter.charge(Charge::SetAdd)?;
                                out.insert(v);
                            }
                        }
                        Ok(Value::Set(out))
                    }
                }
            }
            Expr::Member(a, b) => {
                let v = self.eval(a, locals, depth + 1)?;
                let hit = self.member_of(&v, b, locals, depth)?;
                Ok(Value::Bool(hit))
            }
            Expr::Comp {
                image,
                pat,
                source,
                filter,
            } => {
                let src = self.eval_set(source, locals, depth)?;
                let mut out = IndexSet::new();
                for elem in src {
                    self.meter.charge(Charge::IterStep)?;
                    let n = self.bind_pattern(pat, elem, locals)?;
                    let keep = match filter {
                        Some(p) => match self.eval(p, locals, depth + 1)? {
                            Value::Bool(b) => b,
                            other => {
                                locals.pop(n);
                                return Err(EvalError::Type(format!(
                                    "filter is a {}",
                                    other.kind_name()
                                )));
                            }
                        },
                        None => true,
                    };
                    if keep {
                        let img = self.eval(image, locals, depth + 1)?;
                        self.meter.charge(Charge::SetAdd)?;
                        out.insert(img);
                    }
                    locals.pop(n);
                }
                Ok(Value::Set(out))
            }
            Expr::Join { .. } => {
                let mut out = IndexSet::new();
                self.join_matches(e, locals, depth, &mut |m, img| {
                    m.meter.charge(Charge::SetAdd)?;
                    out.insert(img);
                    Ok(())
                })?;
                Ok(Value::Set(out))
            }
            Expr::Agg(op, a) => {
                match op {
                    AggOp::Count => {
                        let set = self.eval_set(a, locals, depth)?;
                        self.meter.charge(Charge::Arith)?;
                        Ok(Value::Int(BigInt::from(set.len())))
                    }
                    AggOp::Sum => {
                        let set = self.eval_set(a, locals, depth)?;
                        let mut acc = BigInt::from(0);
                        for v in set {
                            self.meter.charge(Charge::IterStep)?;
                            self.meter.charge(Charge::Arith)?;
                            match v {
                                Value::Int(n) => acc += n,
                                other => {
                                    return Err(EvalError::Type(format!(
                                        "sum over a set containing a {}",
                                        other.kind_name()
                                    )))
                                }
                            }
                        }
                        Ok(Value::Int(acc))
                    }
                }
            }
            Expr::Call(name, args) => {
                let mut vs = Vec::with_capacity(args.len());
                for a in args {
                    vs.push(self.eval(a, locals, depth + 1)?);
                }
                self.call_fn(name, vs, depth + 1)
            }
            Expr::MapGet(m, k) => {
                let key = self.eval(k, locals, depth + 1)?;
                self.meter.charge(Charge::MapGet)?;
                let (map_val, default) = match m.as_ref() {
                    Expr::Var(name) => {
                        let default = match self.state.aux_kinds.get(name.as_str()) {
                            Some(AuxKind::Index { .. }) | None => Value::empty_set(),
                            Some(AuxKind::Count) => Value::int(0),
                        };
                        (self.state.lookup(name)?, default)
                    }
                    _ => {
                        return Err(EvalError::Type(
                            "map lookup requires a named map".to_string(),
                        ))
                    }
                };
                match map_val {
                    Value::Map(map) => Ok(map.get(&key).cloned().unwrap_or(default)),
                    other => Err(EvalError::Type(format!(
                        "indexing into a {}",
                        other.kind_name()
                    ))),
                }
            }
        }
    }

    fn eval_binop(
        &mut self,
        op: BinOp,
        a: &Expr,
        b: &Expr,
        locals: &mut Locals,
        depth: usize,
    ) -> Result<Value, EvalError> {
        // short-circuit boolean connectives
        if matches!(op, BinOp::And | BinOp::Or) {
            let lhs = self.eval(a, locals, depth + 1)?;
            self.meter.charge(Charge::Compare)?;
            let lb = lhs
                .as_bool()
                .ok_or_else(|| EvalError::Type(format!("{} of a {}", op.symbol(), lhs.kind_name())))?;
            if (op == BinOp::And && !lb) || (op == BinOp::Or && lb) {
                return Ok(Value::Bool(lb));
            }
            let rhs = self.eval(b, locals, depth + 1)?;
            let rb = rhs
                .as_bool()
                .ok_or_else(|| EvalError::Type(format!("{} of a {}", op.symbol(), rhs.kind_name())))?;
            return Ok(Value::Bool(rb));
        }

        let lhs = self.eval(a, locals, depth + 1)?;
        let rhs = self.eval(b, locals, depth + 1)?;
        match op {
            BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div => {
                self.meter.charge(Charge::Arith)?;
                let (x, y) = match (&lhs, &rhs) {
                    (Value::Int(x), Value::Int(y)) => (x, y),
                    _ => {
                        return Err(EvalError::Type(format!(
                            "arithmetic on {} and {}",
                            lhs.kind_name(),
                            rhs.kind_name()
                        )))
                    }
                };
                let r = match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y.is_zero() {
                            return Err(EvalError::DivByZero);
                        }
                        x / y
                    }
                    _ => unreachable!(),
                };
                Ok(Value::Int(r))
            }
            BinOp::Eq | BinOp::Ne => {
                self.meter.charge(Charge::Compare)?;
                let eq = lhs == rhs;
                Ok(Value::Bool(if op == BinOp::Eq { eq } else { !eq }))
            }
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                self.meter.charge(Charge::Compare)?;
                let (x, y) = match (&lhs, &rhs) {
                    (Value::Int(x), Value::Int(y)) => (x, y),
                    _ => {
                        return Err(EvalError::Type(format!(
                            "ordering {} and {}",
                            lhs.kind_name(),
                            rhs.kind_name()
                        )))
                    }
                };
                let r = match op {
                    BinOp::Lt => x < y,
                    BinOp::Le => x <= y,
                    BinOp::Gt => x > y,
                    BinOp::Ge => x >= y,
                    _ => unreachable!(),
                };
                Ok(Value::Bool(r))
            }
            BinOp::And | BinOp::Or => unreachable!(),
        }
    }

    /// Membership with exactly one charged unit; a variable container is
    /// probed in place, anything else is evaluated first.
    fn member_of(
        &mut self,
        elem: &Value,
        container: &Expr,
        locals: &mut Locals,
        depth: usize,
    ) -> Result<bool, EvalError> {
        if let Expr::Var(name) = container {
            if locals.get(name).is_none() {
                let v = self.state.lookup(name)?;
                return match v {
                    Value::Set(s) => {
                        self.meter.charge(Charge::Membership)?;
                        Ok(s.contains(elem))
                    }
                    Value::Map(m) => {
                        self.meter.charge(Charge::MapGet)?;
                        Ok(m.contains_key(elem))
                    }
                    other => Err(EvalError::Type(format!(
                        "membership test in a {}",
                        other.kind_name()
                    ))),
                };
            }
        }
        let v = self.eval(container, locals, depth + 1)?;
        match v {
            Value::Set(s) => {
                self.meter.charge(Charge::Membership)?;
                Ok(s.contains(elem))
            }
            Value::Map(m) => {
                self.meter.charge(Charge::MapGet)?;
                Ok(m.contains_key(elem))
            }
            other => Err(EvalError::Type(format!(
                "membership test in a {}",
                other.kind_name()
            ))),
        }
    }

    /// Evaluates an expression that must produce a set, returning it owned.
    fn eval_set(
        &mut self,
        e: &Expr,
        locals: &mut Locals,
        depth: usize,
    ) -> Result<IndexSet<Value>, EvalError> {
        let v = self.eval(e, locals, depth + 1)?;
        match v {
            Value::Set(s) => Ok(s),
            other => Err(EvalError::Type(format!(
                "expected a set, found a {}",
                other.kind_name()
            ))),
        }
    }

    fn bind_pattern(
        &mut self,
        pat: &Pattern,
        elem: Value,
        locals: &mut Locals,
    ) -> Result<usize, EvalError> {
        match pat {
            Pattern::Var(v) => {
                locals.push(v, elem);
                Ok(1)
            }
            Pattern::Tuple(vars) => match elem {
                Value::Tuple(fields) if fields.len() == vars.len() => {
                    for (v, f) in vars.iter().zip(fields) {
                        locals.push(v, f);
                    }
                    Ok(vars.len())
                }
                other => Err(EvalError::Type(format!(
                    "pattern of arity {} over a {}",
                    vars.len(),
                    other.kind_name()
                ))),
            },
        }
    }

    /// Enumerates matching pairs of a join, invoking `emit` with each image
    /// value (with multiplicity).
    fn join_matches(
        &mut self,
        join: &Expr,
        locals: &mut Locals,
        depth: usize,
        emit: &mut impl FnMut(&mut Machine<'s>, Value) -> Result<(), EvalError>,
    ) -> Result<(), EvalError> {
        let (image, pat1, src1, pat2, src2) = match join {
            Expr::Join {
                image,
                pat1,
                src1,
                pat2,
                src2,
            } => (image, pat1, src1, pat2, src2),
            _ => return Err(EvalError::Type("not a join".to_string())),
        };
        let shared = shared_var(pat1, pat2)
            .ok_or_else(|| EvalError::Type("join generators share no variable".to_string()))?;
        let left = self.eval_set(src1, locals, depth)?;
        let right = self.eval_set(src2, locals, depth)?;
        for t1 in &left {
            self.meter.charge(Charge::IterStep)?;
            let n1 = self.bind_pattern(pat1, t1.clone(), locals)?;
            let key = locals.get(&shared).cloned().expect("shared var bound");
            for t2 in &right {
                self.meter.charge(Charge::IterStep)?;
                self.meter.charge(Charge::Compare)?;
                // the shared column must agree
                let candidate_fields = match t2 {
                    Value::Tuple(fs) if fs.len() == pat2.arity() => fs.clone(),
                    other if pat2.arity() == 1 => vec![other.clone()],
                    other => {
                        locals.pop(n1);
                        return Err(EvalError::Type(format!(
                            "pattern of arity {} over a {}",
                            pat2.arity(),
                            other.kind_name()
                        )));
                    }
                };
                let shared_pos = pat2
                    .vars()
                    .iter()
                    .position(|v| *v == shared)
                    .expect("shared var in pat2");
                if candidate_fields[shared_pos] != key {
                    continue;
                }
                let n2 = self.bind_pattern(pat2, t2.clone(), locals)?;
                let img = self.eval(image, locals, depth + 1)?;
                locals.pop(n2);
                emit(self, img)?;
            }
            locals.pop(n1);
        }
        Ok(())
    }

    /// Multiset of image values of a comprehension or join, used to rebuild
    /// multiplicity count maps from scratch.
    fn image_multiplicities(&mut self, e: &Expr) -> Result<IndexMap<Value, Value>, EvalError> {
        let mut counts: IndexMap<Value, Value> = IndexMap::new();
        let mut bump = |counts: &mut IndexMap<Value, Value>, img: Value| {
            let entry = counts.entry(img).or_insert_with(|| Value::int(0));
            if let Value::Int(n) = entry {
                *n += 1;
            }
        };
        let mut locals = Locals::new();
        match e {
            Expr::Comp {
                image,
                pat,
                source,
                filter,
            } => {
                let src = self.eval_set(source, &mut locals, 0)?;
                for elem in src {
                    self.meter.charge(Charge::IterStep)?;
                    let n = self.bind_pattern(pat, elem, &mut locals)?;
                    let keep = match filter {
                        Some(p) => self
                            .eval(p, &mut locals, 0)?
                            .as_bool()
                            .ok_or_else(|| EvalError::Type("filter is not boolean".into()))?,
                        None => true,
                    };
                    if keep {
                        let img = self.eval(image, &mut locals, 0)?;
                        bump(&mut counts, img);
                    }
                    locals.pop(n);
                }
            }
            Expr::Join { .. } => {
                self.join_matches(e, &mut locals, 0, &mut |_, img| {
                    bump(&mut counts, img);
                    Ok(())
                })?;
            }
            _ => {
                return Err(EvalError::Type(
                    "multiplicities only apply to comprehensions and joins".to_string(),
                ))
            }
        }
        Ok(counts)
    }
}

fn shared_var(pat1: &Pattern, pat2: &Pattern) -> Option<String> {
    let v2: Vec<&str> = pat2.vars();
    pat1.vars()
        .into_iter()
        .find(|v| v2.contains(v))
        .map(|s| s.to_string())
}
