//! Edge-triggered rule execution in event time.
//!
//! Each external event is appended to the timeline and every rule is then
//! evaluated at the event's timestamp, in declaration order. A rule fires
//! when its trigger goes from false to true. Events emitted by actions are
//! appended at the same timestamp and are visible to the rules evaluated
//! after them; evaluation passes repeat until no action emits anything.
//! Duration thresholds and clock-window boundaries are handled by timers
//! that evaluate the rules at the exact instant the trigger can change.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Result, WitsError};
use crate::events::{ContextEvent, EventKind, EventTimeline, Value};

use super::ast::{Action, RuleSet};
use super::eval::{evaluate_at, next_wakeup};

pub const DEFAULT_EMISSION_CAP: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineConfig {
    /// Most events actions may emit while settling one instant.
    pub emission_cap: usize,
    /// Added to event time before reading clock windows.
    pub tz_offset_ms: i64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            emission_cap: DEFAULT_EMISSION_CAP,
            tz_offset_ms: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Payload {
    Entity {
        entity: String,
        attribute: String,
        value: Value,
    },
    Message {
        message: String,
    },
}

/// One line of the action log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub ts: i64,
    pub rule: String,
    pub action_type: String,
    pub payload: Payload,
}

#[derive(Debug, Clone)]
pub struct Engine {
    rules: RuleSet,
    timeline: EventTimeline,
    /// Trigger value at the last evaluation, per rule.
    state: Vec<bool>,
    wakeup: Option<i64>,
    config: EngineConfig,
}

impl Engine {
    pub fn new(rules: RuleSet, config: EngineConfig) -> Self {
        let n = rules.len();
        Self {
            rules,
            timeline: EventTimeline::new(),
            state: vec![false; n],
            wakeup: None,
            config,
        }
    }

    pub fn timeline(&self) -> &EventTimeline {
        &self.timeline
    }

    pub fn rules(&self) -> &RuleSet {
        &self.rules
    }

    /// Pending timer, if any.
    pub fn next_timer(&self) -> Option<i64> {
        self.wakeup
    }

    /// Fires timers due strictly before the event, then ingests it and
    /// evaluates every rule at its timestamp.
    pub fn step(&mut self, event: ContextEvent) -> Result<Vec<ActionRecord>> {
        let mut log = Vec::new();
        self.run_timers(|due| due < event.ts, &mut log)?;
        let ts = event.ts;
        self.timeline.ingest(event)?;
        self.settle(ts, &mut log)?;
        Ok(log)
    }

    /// Fires every timer due at or before `until`.
    pub fn advance_to(&mut self, until: i64) -> Result<Vec<ActionRecord>> {
        let mut log = Vec::new();
        self.run_timers(|due| due <= until, &mut log)?;
        Ok(log)
    }

    fn run_timers(&mut self, due_ok: impl Fn(i64) -> bool, log: &mut Vec<ActionRecord>) -> Result<()> {
        while let Some(due) = self.wakeup.filter(|&d| due_ok(d)) {
            self.settle(due, log)?;
        }
        Ok(())
    }

    /// Evaluates all rules at `t` until no more events are emitted.
    fn settle(&mut self, t: i64, log: &mut Vec<ActionRecord>) -> Result<()> {
        let tz = self.config.tz_offset_ms;
        let mut emitted = 0usize;
        let mut emitters: Vec<&str> = Vec::new();
        loop {
            let mut pass_emitted = 0usize;
            for (i, rule) in self.rules.rules.iter().enumerate() {
                let value = evaluate_at(&rule.trigger, &self.timeline, t, tz);
                let fire = value && !self.state[i];
                self.state[i] = value;
                if !fire {
                    continue;
                }
                for action in &rule.actions {
                    let payload = match action {
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
                            let kind = if matches!(action, Action::Emit { .. }) {
                                EventKind::Activity
                            } else {
                                EventKind::Actuation
                            };
                            self.timeline.ingest(ContextEvent {
                                ts: t,
                                kind,
                                entity: entity.clone(),
                                attribute: attribute.clone(),
                                value: value.clone(),
                            })?;
                            pass_emitted += 1;
                            if !emitters.contains(&rule.name.as_str()) {
                                emitters.push(&rule.name);
                            }
                            Payload::Entity {
                                entity: entity.clone(),
                                attribute: attribute.clone(),
                                value: value.clone(),
                            }
                        }
                        Action::Alert(message) => Payload::Message {
                            message: message.clone(),
                        },
                    };
                    log.push(ActionRecord {
                        ts: t,
                        rule: rule.name.clone(),
                        action_type: action.type_name().to_string(),
                        payload,
                    });
                }
            }
            if pass_emitted == 0 {
                break;
            }
            emitted += pass_emitted;
            if emitted > self.config.emission_cap {
                return Err(WitsError::Rule(format!(
                    "more than {} events emitted at t={t}; rule cycle through: {}",
                    self.config.emission_cap,
                    emitters.join(", ")
                )));
            }
        }
        self.wakeup = self
            .rules
            .rules
            .iter()
            .filter_map(|r| next_wakeup(&r.trigger, &self.timeline, t, tz))
            .min();
        Ok(())
    }
}

/// Runs a rule set over an ordered event stream. With `until`, timers up to
/// and including that instant fire after the last event.
pub fn run(
    rules: &RuleSet,
    events: impl IntoIterator<Item = ContextEvent>,
    until: Option<i64>,
    config: EngineConfig,
) -> Result<Vec<ActionRecord>> {
    let mut engine = Engine::new(rules.clone(), config);
    let mut log = Vec::new();
    for e in events {
        log.extend(engine.step(e)?);
    }
    if let Some(u) = until {
        log.extend(engine.advance_to(u)?);
    }
    Ok(log)
}

pub fn write_action_log<W: Write>(mut writer: W, log: &[ActionRecord]) -> Result<()> {
    for r in log {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_action_log<R: BufRead>(reader: R) -> Result<Vec<ActionRecord>> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}
