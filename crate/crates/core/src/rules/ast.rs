use std::fmt;

use serde::{Deserialize, Serialize};

use crate::events::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Comparator {
    Eq,
    Ne,
    Ge,
    Le,
    Gt,
    Lt,
}

impl Comparator {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Eq => "==",
            Comparator::Ne => "!=",
            Comparator::Ge => ">=",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Lt => "<",
        }
    }

    /// Compares a known state against a literal. Values of different types
    /// are unequal; ordering applies to numbers and strings only.
    pub fn apply(self, state: &Value, literal: &Value) -> bool {
        use std::cmp::Ordering;
        let ord = match (state, literal) {
            (Value::Number(a), Value::Number(b)) => a.partial_cmp(b),
            (Value::Text(a), Value::Text(b)) => Some(a.cmp(b)),
            (Value::Bool(a), Value::Bool(b)) if a == b => Some(Ordering::Equal),
            _ => None,
        };
        match self {
            Comparator::Eq => ord == Some(Ordering::Equal),
            Comparator::Ne => ord != Some(Ordering::Equal),
            _ if matches!((state, literal), (Value::Bool(_), _) | (_, Value::Bool(_))) => false,
            Comparator::Ge => matches!(ord, Some(Ordering::Greater | Ordering::Equal)),
            Comparator::Le => matches!(ord, Some(Ordering::Less | Ordering::Equal)),
            Comparator::Gt => ord == Some(Ordering::Greater),
            Comparator::Lt => ord == Some(Ordering::Less),
        }
    }
}

/// Minutes after midnight, `0..1440`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Clock(pub u16);

impl Clock {
    pub const MINUTES_PER_DAY: u16 = 1440;

    pub fn new(hour: u16, minute: u16) -> Option<Self> {
        (hour < 24 && minute < 60).then_some(Clock(hour * 60 + minute))
    }

    pub fn ms_of_day(self) -> i64 {
        i64::from(self.0) * 60_000
    }
}

impl fmt::Display for Clock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}:{:02}", self.0 / 60, self.0 % 60)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TriggerExpr {
    Const(bool),
    Predicate {
        entity: String,
        attribute: String,
        cmp: Comparator,
        value: Value,
    },
    /// Every predicate sibling in the enclosing And group has held for at
    /// least this many milliseconds.
    DurationAtLeast(i64),
    /// Local clock in `[start, end)`, wrapping midnight when `start > end`.
    TimeWindow { start: Clock, end: Clock },
    Not(Box<TriggerExpr>),
    And(Vec<TriggerExpr>),
    Or(Vec<TriggerExpr>),
}

impl TriggerExpr {
    pub fn predicate(entity: &str, attribute: &str, cmp: Comparator, value: impl Into<Value>) -> Self {
        TriggerExpr::Predicate {
            entity: entity.to_string(),
            attribute: attribute.to_string(),
            cmp,
            value: value.into(),
        }
    }

    /// Visits every node, parents before children.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a TriggerExpr)) {
        f(self);
        match self {
            TriggerExpr::Not(x) => x.walk(f),
            TriggerExpr::And(xs) | TriggerExpr::Or(xs) => xs.iter().for_each(|x| x.walk(f)),
            _ => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Action {
    /// Appends a (complex activity) event to the timeline.
    Emit {
        entity: String,
        attribute: String,
        value: Value,
    },
    /// Sets an actuator; recorded on the timeline as an actuation event.
    Set {
        entity: String,
        attribute: String,
        value: Value,
    },
    Alert(String),
}

impl Action {
    pub fn type_name(&self) -> &'static str {
        match self {
            Action::Emit { .. } => "emit_event",
            Action::Set { .. } => "set_entity",
            Action::Alert(_) => "send_alert",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub name: String,
    pub trigger: TriggerExpr,
    pub actions: Vec<Action>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RuleSet {
    pub rules: Vec<Rule>,
}

impl RuleSet {
    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.name == name)
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !super::parser::is_reserved(s)
}

fn write_literal(f: &mut fmt::Formatter<'_>, v: &Value) -> fmt::Result {
    match v {
        Value::Bool(b) => write!(f, "{b}"),
        Value::Number(n) => write!(f, "{n}"),
        Value::Text(s) => write_string(f, s),
    }
}

fn write_string(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("\"")?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str("\"")
}

fn write_name(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    if is_identifier(s) {
        f.write_str(s)
    } else {
        write_string(f, s)
    }
}

fn write_duration(f: &mut fmt::Formatter<'_>, ms: i64) -> fmt::Result {
    if ms % 3_600_000 == 0 && ms != 0 {
        write!(f, "{}h", ms / 3_600_000)
    } else if ms % 60_000 == 0 && ms != 0 {
        write!(f, "{}min", ms / 60_000)
    } else {
        write!(f, "{}s", ms as f64 / 1000.0)
    }
}

impl TriggerExpr {
    fn write_child(&self, f: &mut fmt::Formatter<'_>, parent_is_and: bool) -> fmt::Result {
        let needs_parens = match self {
            TriggerExpr::Or(_) => true,
            TriggerExpr::And(_) => parent_is_and,
            _ => false,
        };
        if needs_parens {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl fmt::Display for TriggerExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TriggerExpr::Const(true) => f.write_str("True"),
            TriggerExpr::Const(false) => f.write_str("False"),
            TriggerExpr::Predicate {
                entity,
                attribute,
                cmp,
                value,
            } => {
                write_name(f, entity)?;
                f.write_str(".")?;
                write_name(f, attribute)?;
                write!(f, " {} ", cmp.symbol())?;
                write_literal(f, value)
            }
            TriggerExpr::DurationAtLeast(ms) => {
                f.write_str("Duration >= ")?;
                write_duration(f, *ms)
            }
            TriggerExpr::TimeWindow { start, end } => write!(f, "Time in [{start} {end}]"),
            TriggerExpr::Not(x) => {
                f.write_str("NOT ")?;
                match **x {
                    TriggerExpr::And(_) | TriggerExpr::Or(_) => write!(f, "({x})"),
                    _ => write!(f, "{x}"),
                }
            }
            TriggerExpr::And(xs) | TriggerExpr::Or(xs) => {
                let is_and = matches!(self, TriggerExpr::And(_));
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(if is_and { " AND " } else { " OR " })?;
                    }
                    x.write_child(f, is_and)?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Emit {
                entity,
                attribute,
                value,
            }
            | Action::Set {
                entity,
                attribute,
                value,
            } => {
                f.write_str(if matches!(self, Action::Emit { .. }) { "EMIT " } else { "SET " })?;
                write_name(f, entity)?;
                f.write_str(".")?;
                write_name(f, attribute)?;
                f.write_str(" = ")?;
                write_literal(f, value)
            }
            Action::Alert(msg) => {
                f.write_str("ALERT ")?;
                write_string(f, msg)
            }
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("RULE ")?;
        write_name(f, &self.name)?;
        writeln!(f, ":")?;
        writeln!(f, "  WHEN {}", self.trigger)?;
        f.write_str("  THEN ")?;
        for (i, a) in self.actions.iter().enumerate() {
            if i > 0 {
                f.write_str(",\n       ")?;
            }
            write!(f, "{a}")?;
        }
        writeln!(f)
    }
}

impl fmt::Display for RuleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, r) in self.rules.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{r}")?;
        }
        Ok(())
    }
}
