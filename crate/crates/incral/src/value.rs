//! Runtime values: integers, booleans, tuples, lists, finite sets, and
//! finite maps.
//!
//! Sets and maps iterate in insertion order (so traces are deterministic
//! without sorting), compare order-independently, and print in the canonical
//! value order: integers < booleans < tuples < lists < sets < maps,
//! lexicographic within a kind.

use std::cmp::Ordering;
use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::{Hash, Hasher};

use indexmap::{IndexMap, IndexSet};
use num_bigint::BigInt;

#[derive(Debug, Clone)]
pub enum Value {
    Int(BigInt),
    Bool(bool),
    Tuple(Vec<Value>),
    List(Vec<Value>),
    Set(IndexSet<Value>),
    Map(IndexMap<Value, Value>),
}

impl Value {
    pub fn int(n: i64) -> Value {
        Value::Int(BigInt::from(n))
    }

    pub fn set(elems: impl IntoIterator<Item = Value>) -> Value {
        Value::Set(elems.into_iter().collect())
    }

    pub fn pair(a: Value, b: Value) -> Value {
        Value::Tuple(vec![a, b])
    }

    pub fn empty_set() -> Value {
        Value::Set(IndexSet::new())
    }

    pub fn empty_map() -> Value {
        Value::Map(IndexMap::new())
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Value::Int(_) => "integer",
            Value::Bool(_) => "boolean",
            Value::Tuple(_) => "tuple",
            Value::List(_) => "list",
            Value::Set(_) => "set",
            Value::Map(_) => "map",
        }
    }

    pub fn as_int(&self) -> Option<&BigInt> {
        match self {
            Value::Int(n) => Some(n),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_set(&self) -> Option<&IndexSet<Value>> {
        match self {
            Value::Set(s) => Some(s),
            _ => None,
        }
    }

    fn kind_rank(&self) -> u8 {
        match self {
            Value::Int(_) => 0,
            Value::Bool(_) => 1,
            Value::Tuple(_) => 2,
            Value::List(_) => 3,
            Value::Set(_) => 4,
            Value::Map(_) => 5,
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Tuple(a), Value::Tuple(b)) | (Value::List(a), Value::List(b)) => a == b,
            // IndexSet/IndexMap equality is order-independent
            (Value::Set(a), Value::Set(b)) => a == b,
            (Value::Map(a), Value::Map(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Value {}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u8(self.kind_rank());
        match self {
            Value::Int(n) => n.hash(state),
            Value::Bool(b) => b.hash(state),
            Value::Tuple(vs) | Value::List(vs) => {
                for v in vs {
                    v.hash(state);
                }
            }
            // order-independent combination, consistent with set equality
            Value::Set(s) => {
                let mut acc = 0u64;
                for v in s {
                    let mut h = DefaultHasher::new();
                    v.hash(&mut h);
                    acc = acc.wrapping_add(h.finish());
                }
                state.write_u64(acc);
            }
            Value::Map(m) => {
                let mut acc = 0u64;
                for (k, v) in m {
                    let mut h = DefaultHasher::new();
                    k.hash(&mut h);
                    v.hash(&mut h);
                    acc = acc.wrapping_add(h.finish());
                }
                state.write_u64(acc);
            }
        }
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Value) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Value) -> Ordering {
        match self.kind_rank().cmp(&other.kind_rank()) {
            Ordering::Equal => {}
            o => return o,
        }
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Bool(a), Value::Bool(b)) => a.cmp(b),
            (Value::Tuple(a), Value::Tuple(b)) | (Value::List(a), Value::List(b)) => a.cmp(b),
            (Value::Set(a), Value::Set(b)) => {
                let mut xa: Vec<&Value> = a.iter().collect();
                let mut xb: Vec<&Value> = b.iter().collect();
                xa.sort();
                xb.sort();
                xa.cmp(&xb)
            }
            (Value::Map(a), Value::Map(b)) => {
                let mut xa: Vec<(&Value, &Value)> = a.iter().collect();
                let mut xb: Vec<(&Value, &Value)> = b.iter().collect();
                xa.sort();
                xb.sort();
                xa.cmp(&xb)
            }
            _ => unreachable!("kind ranks equal"),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Tuple(vs) => {
                write!(f, "(")?;
                for (i, v) in vs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, ")")
            }
            Value::List(vs) => {
                write!(f, "[")?;
                for (i, v) in vs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, "]")
            }
            Value::Set(s) => {
                let mut elems: Vec<&Value> = s.iter().collect();
                elems.sort();
                write!(f, "{{")?;
                for (i, v) in elems.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, "}}")
            }
            Value::Map(m) => {
                let mut entries: Vec<(&Value, &Value)> = m.iter().collect();
                entries.sort();
                write!(f, "{{")?;
                for (i, (k, v)) in entries.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{k}: {v}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_equality_ignores_insertion_order() {
        let a = Value::set([Value::int(1), Value::int(2)]);
        let b = Value::set([Value::int(2), Value::int(1)]);
        assert_eq!(a, b);

        let mut ha = DefaultHasher::new();
        a.hash(&mut ha);
        let mut hb = DefaultHasher::new();
        b.hash(&mut hb);
        assert_eq!(ha.finish(), hb.finish());
    }

    #[test]
    fn printing_sorts_by_value_order() {
        let s = Value::set([Value::int(3), Value::Bool(false), Value::int(-1)]);
        assert_eq!(s.to_string(), "{-1, 3, false}");
    }

    #[test]
    fn kind_order() {
        assert!(Value::int(99) < Value::Bool(false));
        assert!(Value::Bool(true) < Value::Tuple(vec![]));
        assert!(Value::Tuple(vec![]) < Value::List(vec![]));
        assert!(Value::List(vec![]) < Value::empty_set());
        assert!(Value::empty_set() < Value::empty_map());
    }
}
