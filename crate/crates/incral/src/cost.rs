//! The charged-unit cost model. Each elementary operation costs exactly one
//! unit; the counters below are the stable reporting interface.

use std::fmt;

use serde_json::json;

/// Which counter an elementary operation charges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Charge {
    SetAdd,
    SetDel,
    Membership,
    MapGet,
    MapPut,
    Arith,
    Compare,
    Call,
    ConsHeadTail,
    IterStep,
}

/// Elementary-operation counters for one run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CostReport {
    pub set_add: u64,
    pub set_del: u64,
    pub membership: u64,
    pub map_get: u64,
    pub map_put: u64,
    pub arith: u64,
    pub compare: u64,
    pub call: u64,
    pub cons_head_tail: u64,
    pub iter_step: u64,
}

impl CostReport {
    pub fn charge(&mut self, c: Charge) {
        let counter = match c {
            Charge::SetAdd => &mut self.set_add,
            Charge::SetDel => &mut self.set_del,
            Charge::Membership => &mut self.membership,
            Charge::MapGet => &mut self.map_get,
            Charge::MapPut => &mut self.map_put,
            Charge::Arith => &mut self.arith,
            Charge::Compare => &mut self.compare,
            Charge::Call => &mut self.call,
            Charge::ConsHeadTail => &mut self.cons_head_tail,
            Charge::IterStep => &mut self.iter_step,
        };
        *counter += 1;
    }

    pub fn total(&self) -> u64 {
        self.set_add
            + self.set_del
            + self.membership
            + self.map_get
            + self.map_put
            + self.arith
            + self.compare
            + self.call
            + self.cons_head_tail
            + self.iter_step
    }

    /// Counters accumulated since `earlier` (which must be a prefix of this
    /// run).
    pub fn since(&self, earlier: &CostReport) -> CostReport {
        CostReport {
            set_add: self.set_add - earlier.set_add,
            set_del: self.set_del - earlier.set_del,
            membership: self.membership - earlier.membership,
            map_get: self.map_get - earlier.map_get,
            map_put: self.map_put - earlier.map_put,
            arith: self.arith - earlier.arith,
            compare: self.compare - earlier.compare,
            call: self.call - earlier.call,
            cons_head_tail: self.cons_head_tail - earlier.cons_head_tail,
            iter_step: self.iter_step - earlier.iter_step,
        }
    }

    pub fn add(&mut self, other: &CostReport) {
        self.set_add += other.set_add;
        self.set_del += other.set_del;
        self.membership += other.membership;
        self.map_get += other.map_get;
        self.map_put += other.map_put;
        self.arith += other.arith;
        self.compare += other.compare;
        self.call += other.call;
        self.cons_head_tail += other.cons_head_tail;
        self.iter_step += other.iter_step;
    }

    fn entries(&self) -> [(&'static str, u64); 10] {
        [
            ("set_add", self.set_add),
            ("set_del", self.set_del),
            ("membership", self.membership),
            ("map_get", self.map_get),
            ("map_put", self.map_put),
            ("arith", self.arith),
            ("compare", self.compare),
            ("call", self.call),
            ("cons_head_tail", self.cons_head_tail),
            ("iter_step", self.iter_step),
        ]
    }

    /// Flat `key=value` block, one counter per line, `total` last.
    pub fn as_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            out.push_str(&format!("{k}={v}\n"));
        }
        out.push_str(&format!("total={}\n", self.total()));
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut obj = serde_json::Map::new();
        for (k, v) in self.entries() {
            obj.insert(k.to_string(), json!(v));
        }
        obj.insert("total".to_string(), json!(self.total()));
        serde_json::Value::Object(obj)
    }
}

impl fmt::Display for CostReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_text())
    }
}
