//! Trigger-action rules over the event timeline.

mod ast;
mod engine;
mod eval;
mod parser;

pub use ast::{Action, Clock, Comparator, Rule, RuleSet, TriggerExpr};
pub use engine::{
    read_action_log, run, write_action_log, ActionRecord, Engine, EngineConfig, Payload,
    DEFAULT_EMISSION_CAP,
};
pub use eval::{evaluate, evaluate_at, next_wakeup, DAY_MS};
pub use parser::{parse_rules, parse_trigger};
