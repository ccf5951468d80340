//! Rule-engine test support: a naive re-evaluate-everything oracle, a
//! randomized event generator and golden traces for the example home rules.

#![allow(dead_code)]

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wits_core::events::{ContextEvent, EventKind, Value};
use wits_core::rules::{parse_rules, Action, ActionRecord, Payload, RuleSet, TriggerExpr, DAY_MS};

pub const MIN: i64 = 60_000;
pub const HOUR: i64 = 60 * MIN;

pub const HOME_RULES: &str = include_str!("../../../../rules/home.wits");

pub fn home_rules() -> RuleSet {
    parse_rules(HOME_RULES).expect("example rules parse")
}

/// Evaluates every rule at every minute and after every event, keeping only
/// a per-key value history. Event and clock boundaries must lie on the
/// minute grid.
pub struct NaiveOracle<'a> {
    rules: &'a RuleSet,
    tz_offset_ms: i64,
    history: HashMap<(String, String), Vec<(i64, Value)>>,
    state: Vec<bool>,
    log: Vec<ActionRecord>,
}

impl<'a> NaiveOracle<'a> {
    pub fn new(rules: &'a RuleSet, tz_offset_ms: i64) -> Self {
        Self {
            rules,
            tz_offset_ms,
            history: HashMap::new(),
            state: vec![false; rules.rules.len()],
            log: Vec::new(),
        }
    }

    fn current(&self, entity: &str, attribute: &str) -> Option<&Value> {
        self.history
            .get(&(entity.to_string(), attribute.to_string()))
            .and_then(|h| h.last())
            .map(|(_, v)| v)
    }

    /// Start of the current stretch over which the predicate has held.
    fn holding_since(&self, expr: &TriggerExpr) -> Option<i64> {
        let TriggerExpr::Predicate { entity, attribute, cmp, value } = expr else {
            unreachable!()
        };
        let h = self.history.get(&(entity.clone(), attribute.clone()))?;
        let mut since = None;
        for (ts, v) in h.iter().rev() {
            if !cmp.apply(v, value) {
                break;
            }
            since = Some(*ts);
        }
        since
    }

    fn eval(&self, expr: &TriggerExpr, now: i64) -> bool {
        match expr {
            TriggerExpr::Const(b) => *b,
            TriggerExpr::Predicate { entity, attribute, cmp, value } => {
                self.current(entity, attribute).is_some_and(|s| cmp.apply(s, value))
            }
            TriggerExpr::DurationAtLeast(_) => unreachable!("handled by the enclosing And"),
            TriggerExpr::TimeWindow { start, end } => {
                let local = (now + self.tz_offset_ms).rem_euclid(DAY_MS);
                let (s, e) = (start.0 as i64 * MIN, end.0 as i64 * MIN);
                if s <= e {
                    s <= local && local < e
                } else {
                    local >= s || local < e
                }
            }
            TriggerExpr::Not(x) => !self.eval(x, now),
            TriggerExpr::Or(xs) => xs.iter().any(|x| self.eval(x, now)),
            TriggerExpr::And(xs) => {
                let plain = xs
                    .iter()
                    .filter(|x| !matches!(x, TriggerExpr::DurationAtLeast(_)))
                    .all(|x| self.eval(x, now));
                if !plain {
                    return false;
                }
                xs.iter().all(|x| match x {
                    TriggerExpr::DurationAtLeast(d) => {
                        let since = xs
                            .iter()
                            .filter(|p| matches!(p, TriggerExpr::Predicate { .. }))
                            .map(|p| self.holding_since(p))
                            .try_fold(i64::MIN, |acc, s| s.map(|s| acc.max(s)));
                        since.is_some_and(|s| now - s >= *d)
                    }
                    _ => true,
                })
            }
        }
    }

    fn record(&mut self, ts: i64, entity: &str, attribute: &str, value: &Value) {
        self.history
            .entry((entity.to_string(), attribute.to_string()))
            .or_default()
            .push((ts, value.clone()));
    }

    fn settle(&mut self, now: i64) {
        for _ in 0..1000 {
            let mut emitted = false;
            for (i, rule) in self.rules.rules.iter().enumerate() {
                let v = self.eval(&rule.trigger, now);
                let fire = v && !self.state[i];
                self.state[i] = v;
                if !fire {
                    continue;
                }
                for a in &rule.actions {
                    let payload = match a {
                        Action::Emit { entity, attribute, value } | Action::Set { entity, attribute, value } => {
                            self.record(now, entity, attribute, value);
                            emitted = true;
                            Payload::Entity {
                                entity: entity.clone(),
                                attribute: attribute.clone(),
                                value: value.clone(),
                            }
                        }
                        Action::Alert(m) => Payload::Message { message: m.clone() },
                    };
                    self.log.push(ActionRecord {
                        ts: now,
                        rule: rule.name.clone(),
                        action_type: a.type_name().to_string(),
                        payload,
                    });
                }
            }
            if !emitted {
                return;
            }
        }
        panic!("oracle: rules do not settle at t={now}");
    }

    /// Processes `events` (sorted, minute-aligned) and ticks every minute up
    /// to `until`.
    pub fn run(mut self, events: &[ContextEvent], until: i64) -> Vec<ActionRecord> {
        let Some(first) = events.first() else {
            return Vec::new();
        };
        let end = until.max(events.last().expect("nonempty").ts);
        let mut t = first.ts.div_euclid(MIN) * MIN;
        let mut i = 0;
        while t <= end {
            if i < events.len() && events[i].ts == t {
                while i < events.len() && events[i].ts == t {
                    let e = &events[i];
                    self.record(e.ts, &e.entity, &e.attribute, &e.value);
                    self.settle(t);
                    i += 1;
                }
            } else {
                self.settle(t);
            }
            t += MIN;
        }
        self.log
    }
}

/// Rules over a small vocabulary, with chained EMIT/SET, durations, clock
/// windows (one wrapping midnight), negation and numeric comparisons.
/// Emitted keys form no cycle.
pub const RANDOM_RULES: &str = r#"
RULE Cooking:
  WHEN Kitchen.Presence == True AND Stove.ON == True
  THEN EMIT Activity.Cooking = true
RULE StopCooking:
  WHEN Kitchen.Presence == False
  THEN EMIT Activity.Cooking = false
RULE LongCooking:
  WHEN Cooking == True AND Duration >= 20min
  THEN ALERT "cooking for a while"
RULE Ventilate:
  WHEN Temp.Level > 30 OR (Door.Open == True AND Time in [10:00pm 6:00am])
  THEN SET Fan.ON = true, ALERT "fan on"
RULE QuietSleep:
  WHEN NOT Fan.ON == True AND Sleeping == True AND Duration >= 45min
  THEN ALERT "sleeping quietly"
RULE ColdDraft:
  WHEN Door.Open == True AND Temp.Level <= 15 AND Duration >= 10min
  THEN SET Heater.ON = true
RULE MorningHeat:
  WHEN Heater.ON == True AND Time in [7:00am 9:30am]
  THEN ALERT "heater in the morning"
RULE OddTemp:
  WHEN Temp.Level != 20 AND NOT Door.Open == True
  THEN ALERT "temperature off target"
RULE Always:
  WHEN True
  THEN ALERT "start"
"#;

/// `n` minute-aligned events over the random-rule vocabulary. Several events
/// may share a timestamp.
pub fn random_stream(seed: u64, n: usize) -> Vec<ContextEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = rng.random_range(0..DAY_MS / MIN) * MIN;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        t += MIN * [0, 1, 1, 2, 3, 5, 15][rng.random_range(0..7)];
        let flag = rng.random_bool(0.5);
        let e = match rng.random_range(0..7) {
            0 => ContextEvent::new(t, EventKind::Location, "Kitchen", "Presence", flag),
            1 => ContextEvent::new(t, EventKind::ObjectUse, "Stove", "ON", flag),
            2 => ContextEvent::new(t, EventKind::ObjectUse, "Temp", "Level", rng.random_range(10..35) as f64),
            3 => ContextEvent::new(t, EventKind::ObjectUse, "Door", "Open", flag),
            4 => ContextEvent::new(t, EventKind::Activity, "Activity", "Sleeping", flag),
            5 => ContextEvent::new(t, EventKind::Actuation, "Fan", "ON", flag),
            _ => ContextEvent::new(t, EventKind::Actuation, "Heater", "ON", flag),
        };
        out.push(e);
    }
    out
}

pub struct GoldenTrace {
    pub name: &'static str,
    pub events: Vec<ContextEvent>,
    pub until: i64,
    pub expected: Vec<ActionRecord>,
}

fn loc(ts: i64, entity: &str, attribute: &str, v: bool) -> ContextEvent {
    ContextEvent::new(ts, EventKind::Location, entity, attribute, v)
}

fn obj(ts: i64, entity: &str, attribute: &str, v: bool) -> ContextEvent {
    ContextEvent::new(ts, EventKind::ObjectUse, entity, attribute, v)
}

fn act(ts: i64, label: &str, v: bool) -> ContextEvent {
    ContextEvent::new(ts, EventKind::Activity, "Activity", label, v)
}

fn entity(ts: i64, rule: &str, action_type: &str, e: &str, a: &str, v: bool) -> ActionRecord {
    ActionRecord {
        ts,
        rule: rule.into(),
        action_type: action_type.into(),
        payload: Payload::Entity {
            entity: e.into(),
            attribute: a.into(),
            value: Value::Bool(v),
        },
    }
}

fn alert(ts: i64, rule: &str) -> ActionRecord {
    ActionRecord {
        ts,
        rule: rule.into(),
        action_type: "send_alert".into(),
        payload: Payload::Message {
            message: "Sending an alarm to caregiver".into(),
        },
    }
}

fn at(h: i64, m: i64) -> i64 {
    h * HOUR + m * MIN
}

/// One trace per example rule, run against the whole example rule set.
pub fn golden_traces() -> Vec<GoldenTrace> {
    let sandwich = |ts| entity(ts, "MakingSandwich", "emit_event", "Activity", "MakingSandwich", true);
    let lights = |ts| entity(ts, "LightsOffWhenSleeping", "set_entity", "Lights", "ON", false);
    let porch = |ts| entity(ts, "PorchLightAtNight", "set_entity", "FrontDoorLight", "ON", true);
    let tv = |ts| entity(ts, "WatchingTV", "emit_event", "Activity", "WatchingTV", true);
    vec![
        GoldenTrace {
            name: "making sandwich fires on each completion of the conjunction",
            events: vec![
                loc(at(12, 0), "Kitchen", "Presence", true),
                obj(at(12, 1), "Cooktop", "ON", true),
                obj(at(12, 2), "Choptable", "Use", true),
                obj(at(12, 5), "Choptable", "Use", false),
                obj(at(12, 6), "Choptable", "Use", true),
                loc(at(12, 8), "Kitchen", "Presence", false),
                obj(at(12, 9), "Choptable", "Use", false),
                obj(at(12, 10), "Choptable", "Use", true),
            ],
            until: at(13, 0),
            expected: vec![sandwich(at(12, 2)), sandwich(at(12, 6))],
        },
        GoldenTrace {
            name: "lights off once per sleep onset",
            events: vec![
                act(at(22, 0), "Sleeping", true),
                act(at(22, 30), "Sleeping", true),
                act(DAY_MS + at(7, 0), "Sleeping", false),
                act(DAY_MS + at(23, 0), "Sleeping", true),
            ],
            until: DAY_MS + at(23, 30),
            expected: vec![lights(at(22, 0)), lights(DAY_MS + at(23, 0))],
        },
        GoldenTrace {
            name: "toilet alert at exactly thirty minutes",
            events: vec![
                loc(at(10, 0), "Toilet", "Occupied", true),
                loc(at(10, 29), "Toilet", "Occupied", false),
                loc(at(11, 0), "Toilet", "Occupied", true),
                // A repeated true does not restart the stretch.
                loc(at(11, 10), "Toilet", "Occupied", true),
                obj(at(11, 30), "Fridge", "Open", true),
                loc(at(11, 45), "Toilet", "Occupied", false),
                loc(at(13, 0), "Toilet", "Occupied", true),
                // Leaving at the threshold instant ends the stretch first.
                loc(at(13, 30), "Toilet", "Occupied", false),
                loc(at(14, 0), "Toilet", "Occupied", true),
                loc(at(14, 31), "Toilet", "Occupied", false),
            ],
            until: at(16, 0),
            expected: vec![alert(at(11, 30), "LongToiletVisit"), alert(at(14, 30), "LongToiletVisit")],
        },
        GoldenTrace {
            name: "fall alert on each fall",
            events: vec![
                act(at(9, 0), "Falling", true),
                act(at(9, 1), "Falling", true),
                act(at(9, 2), "Falling", false),
                act(at(9, 5), "Falling", true),
            ],
            until: at(10, 0),
            expected: vec![alert(at(9, 0), "FallAlert"), alert(at(9, 5), "FallAlert")],
        },
        GoldenTrace {
            name: "porch light window wraps midnight",
            events: vec![
                loc(at(19, 0), "Porch", "Presence", true),
                loc(at(21, 0), "Porch", "Presence", false),
                loc(at(23, 30), "Porch", "Presence", true),
                loc(DAY_MS + at(1, 0), "Porch", "Presence", false),
                loc(DAY_MS + at(7, 59), "Porch", "Presence", true),
            ],
            until: DAY_MS + at(20, 0),
            expected: vec![
                porch(at(20, 0)),
                porch(at(23, 30)),
                porch(DAY_MS + at(7, 59)),
                porch(DAY_MS + at(20, 0)),
            ],
        },
        GoldenTrace {
            name: "watching tv needs couch and tv together",
            events: vec![
                loc(at(19, 0), "Couch", "Occupied", true),
                obj(at(19, 5), "TV", "ON", true),
                obj(at(19, 30), "TV", "ON", false),
                obj(at(19, 40), "TV", "ON", true),
                loc(at(20, 0), "Couch", "Occupied", false),
                obj(at(20, 10), "TV", "ON", true),
            ],
            until: at(21, 0),
            expected: vec![tv(at(19, 5)), tv(at(19, 40))],
        },
    ]
}
