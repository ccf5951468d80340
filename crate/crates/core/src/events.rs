//! Timestamped context events and the timeline that answers state queries.
//!
//! Events are change records: an event sets the value of one
//! `(entity, attribute)` key from its timestamp on. A key with no event at or
//! before a query time is unknown, which is distinct from `false`.

use std::collections::{BinaryHeap, HashMap};
use std::cmp::Reverse;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Result, WitsError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Activity,
    Location,
    ObjectUse,
    Actuation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Number(f64),
    Text(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Number(n) => write!(f, "{n}"),
            Value::Text(s) => write!(f, "{s:?}"),
        }
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

impl From<f64> for Value {
    fn from(n: f64) -> Self {
        Value::Number(n)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextEvent {
    pub ts: i64,
    pub kind: EventKind,
    pub entity: String,
    pub attribute: String,
    pub value: Value,
}

impl ContextEvent {
    pub fn new(
        ts: i64,
        kind: EventKind,
        entity: impl Into<String>,
        attribute: impl Into<String>,
        value: impl Into<Value>,
    ) -> Self {
        Self {
            ts,
            kind,
            entity: entity.into(),
            attribute: attribute.into(),
            value: value.into(),
        }
    }

    pub fn key(&self) -> (&str, &str) {
        (&self.entity, &self.attribute)
    }

    fn validate(&self) -> Result<()> {
        if self.entity.is_empty() || self.attribute.is_empty() {
            return Err(WitsError::Event("entity and attribute must be nonempty".into()));
        }
        if let Value::Number(n) = self.value {
            if !n.is_finite() {
                return Err(WitsError::Event("numeric values must be finite".into()));
            }
        }
        Ok(())
    }
}

/// Append-only event store with a per-key index.
#[derive(Debug, Clone, Default)]
pub struct EventTimeline {
    events: Vec<ContextEvent>,
    /// Positions in `events` of each key's events, in order.
    index: HashMap<(String, String), Vec<usize>>,
    /// Per event: timestamp at which the run of its (unchanged) value began.
    run_start: Vec<i64>,
}

impl EventTimeline {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn events(&self) -> &[ContextEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn last_ts(&self) -> Option<i64> {
        self.events.last().map(|e| e.ts)
    }

    /// Appends an event. Timestamps must not decrease; equal timestamps keep
    /// insertion order.
    pub fn ingest(&mut self, event: ContextEvent) -> Result<()> {
        event.validate()?;
        if let Some(last) = self.last_ts() {
            if event.ts < last {
                return Err(WitsError::Event(format!(
                    "out-of-order event at {} (timeline is at {last})",
                    event.ts
                )));
            }
        }
        let pos = self.events.len();
        let key = (event.entity.clone(), event.attribute.clone());
        let positions = self.index.entry(key).or_default();
        let start = match positions.last() {
            Some(&prev) if self.events[prev].value == event.value => self.run_start[prev],
            _ => event.ts,
        };
        positions.push(pos);
        self.run_start.push(start);
        self.events.push(event);
        Ok(())
    }

    fn key_positions(&self, entity: &str, attribute: &str) -> &[usize] {
        self.index
            .get(&(entity.to_string(), attribute.to_string()))
            .map_or(&[], Vec::as_slice)
    }

    /// Position in `events` of the key's latest event at or before `t`.
    fn latest_at(&self, entity: &str, attribute: &str, t: i64) -> Option<usize> {
        let positions = self.key_positions(entity, attribute);
        let n = positions.partition_point(|&p| self.events[p].ts <= t);
        n.checked_sub(1).map(|i| positions[i])
    }

    /// Value of the key at time `t`, or `None` when unknown.
    pub fn state_at(&self, entity: &str, attribute: &str, t: i64) -> Option<&Value> {
        self.latest_at(entity, attribute, t).map(|p| &self.events[p].value)
    }

    /// How long the key has continuously held `value` at time `t`.
    pub fn held_since(&self, entity: &str, attribute: &str, value: &Value, t: i64) -> Option<i64> {
        let p = self.latest_at(entity, attribute, t)?;
        (self.events[p].value == *value).then(|| t - self.run_start[p])
    }

    /// Start of the unbroken stretch, ending at `t`, over which the key's
    /// value satisfies `pred`. `None` when it does not hold at `t`.
    pub fn satisfied_since(
        &self,
        entity: &str,
        attribute: &str,
        t: i64,
        pred: impl Fn(&Value) -> bool,
    ) -> Option<i64> {
        let positions = self.key_positions(entity, attribute);
        let n = positions.partition_point(|&p| self.events[p].ts <= t);
        let mut start = None;
        for &p in positions[..n].iter().rev() {
            if !pred(&self.events[p].value) {
                break;
            }
            start = Some(self.events[p].ts);
        }
        start
    }
}

/// Holds events back for up to `max_delay_ms` so slightly late arrivals can
/// be put in order. An event older than something already released is an
/// error.
#[derive(Debug, Clone)]
pub struct ReorderBuffer {
    max_delay_ms: i64,
    heap: BinaryHeap<Reverse<(i64, u64)>>,
    pending: HashMap<u64, ContextEvent>,
    seq: u64,
    newest: Option<i64>,
    released: Option<i64>,
}

impl ReorderBuffer {
    pub fn new(max_delay_ms: i64) -> Self {
        Self {
            max_delay_ms: max_delay_ms.max(0),
            heap: BinaryHeap::new(),
            pending: HashMap::new(),
            seq: 0,
            newest: None,
            released: None,
        }
    }

    /// Accepts an event and returns every event now older than the delay
    /// horizon, in timestamp order.
    pub fn push(&mut self, event: ContextEvent) -> Result<Vec<ContextEvent>> {
        if let Some(r) = self.released {
            if event.ts < r {
                return Err(WitsError::Event(format!(
                    "event at {} arrived after the buffer released {r}",
                    event.ts
                )));
            }
        }
        self.newest = Some(self.newest.map_or(event.ts, |n| n.max(event.ts)));
        self.heap.push(Reverse((event.ts, self.seq)));
        self.pending.insert(self.seq, event);
        self.seq += 1;
        let horizon = self.newest.expect("just set") - self.max_delay_ms;
        Ok(self.drain_while(|ts| ts <= horizon))
    }

    /// Releases everything still buffered.
    pub fn flush(&mut self) -> Vec<ContextEvent> {
        self.drain_while(|_| true)
    }

    fn drain_while(&mut self, ready: impl Fn(i64) -> bool) -> Vec<ContextEvent> {
        let mut out = Vec::new();
        while let Some(&Reverse((ts, seq))) = self.heap.peek() {
            if !ready(ts) {
                break;
            }
            self.heap.pop();
            self.released = Some(ts);
            out.push(self.pending.remove(&seq).expect("pending entry"));
        }
        out
    }
}

/// Change events for a sequence of `(ts, label)` activity observations: when
/// the label changes, the old activity turns false and the new one true.
pub fn activity_events<'a>(labels: impl IntoIterator<Item = (i64, &'a str)>) -> Vec<ContextEvent> {
    let mut out = Vec::new();
    let mut current: Option<&str> = None;
    for (ts, label) in labels {
        if current == Some(label) {
            continue;
        }
        if let Some(old) = current {
            out.push(ContextEvent::new(ts, EventKind::Activity, "Activity", old, false));
        }
        out.push(ContextEvent::new(ts, EventKind::Activity, "Activity", label, true));
        current = Some(label);
    }
    out
}

pub fn write_events_jsonl<W: Write>(mut writer: W, events: &[ContextEvent]) -> Result<()> {
    for e in events {
        serde_json::to_writer(&mut writer, e)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_events_jsonl<R: BufRead>(reader: R) -> Result<Vec<ContextEvent>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let e: ContextEvent = serde_json::from_str(&line)
            .map_err(|err| WitsError::Event(format!("line {}: {err}", i + 1)))?;
        e.validate()
            .map_err(|err| WitsError::Event(format!("line {}: {err}", i + 1)))?;
        out.push(e);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const MIN: i64 = 60_000;

    fn ev(ts: i64, entity: &str, attr: &str, v: impl Into<Value>) -> ContextEvent {
        ContextEvent::new(ts, EventKind::Location, entity, attr, v)
    }

    #[test]
    fn unknown_and_single() {
        let mut tl = EventTimeline::new();
        assert_eq!(tl.state_at("Toilet", "Occupied", 5), None);
        tl.ingest(ev(10, "Toilet", "Occupied", true)).unwrap();
        assert_eq!(tl.state_at("Toilet", "Occupied", 10), Some(&Value::Bool(true)));
        assert_eq!(tl.state_at("Toilet", "Occupied", 9), None);
    }

    #[test]
    fn equal_timestamps_keep_insertion_order() {
        let mut tl = EventTimeline::new();
        tl.ingest(ev(5, "A", "x", 1.0)).unwrap();
        tl.ingest(ev(5, "A", "x", 2.0)).unwrap();
        assert_eq!(tl.state_at("A", "x", 5), Some(&Value::Number(2.0)));
        assert!(tl.ingest(ev(4, "A", "x", 3.0)).is_err());
    }

    #[test]
    fn held_since_examples() {
        let mut tl = EventTimeline::new();
        let ten = 10 * 60 * MIN;
        tl.ingest(ev(ten, "Toilet", "Occupied", true)).unwrap();
        let v = Value::Bool(true);
        assert_eq!(tl.held_since("Toilet", "Occupied", &v, ten + 31 * MIN), Some(31 * MIN));
        tl.ingest(ev(ten + 15 * MIN, "Toilet", "Occupied", false)).unwrap();
        tl.ingest(ev(ten + 16 * MIN, "Toilet", "Occupied", true)).unwrap();
        tl.ingest(ev(ten + 20 * MIN, "Toilet", "Occupied", true)).unwrap();
        assert_eq!(tl.held_since("Toilet", "Occupied", &v, ten + 31 * MIN), Some(15 * MIN));
        assert_eq!(tl.held_since("Toilet", "Occupied", &Value::Bool(false), ten + 31 * MIN), None);
    }

    fn naive_state(events: &[ContextEvent], e: &str, a: &str, t: i64) -> Option<Value> {
        events
            .iter()
            .filter(|x| x.entity == e && x.attribute == a && x.ts <= t)
            .last()
            .map(|x| x.value.clone())
    }

    fn naive_held(events: &[ContextEvent], e: &str, a: &str, v: &Value, t: i64) -> Option<i64> {
        let mine: Vec<&ContextEvent> = events
            .iter()
            .filter(|x| x.entity == e && x.attribute == a && x.ts <= t)
            .collect();
        if mine.last()?.value != *v {
            return None;
        }
        let mut start = mine.last().unwrap().ts;
        for x in mine.iter().rev() {
            if x.value != *v {
                break;
            }
            start = x.ts;
        }
        Some(t - start)
    }

    #[test]
    fn matches_linear_scan_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut tl = EventTimeline::new();
        let mut ts = 0;
        let ents = ["A", "B", "C"];
        for _ in 0..10_000 {
            ts += rng.random_range(0..3);
            let e = ents[rng.random_range(0..3)];
            tl.ingest(ev(ts, e, "on", rng.random_bool(0.5))).unwrap();
        }
        let events = tl.events().to_vec();
        for _ in 0..300 {
            let t = rng.random_range(-5..ts + 5);
            let e = ents[rng.random_range(0..3)];
            assert_eq!(tl.state_at(e, "on", t).cloned(), naive_state(&events, e, "on", t));
            for v in [Value::Bool(true), Value::Bool(false)] {
                assert_eq!(tl.held_since(e, "on", &v, t), naive_held(&events, e, "on", &v, t));
                assert_eq!(
                    tl.satisfied_since(e, "on", t, |x| *x == v).map(|s| t - s),
                    naive_held(&events, e, "on", &v, t)
                );
            }
        }
    }

    #[test]
    fn later_ingest_does_not_change_earlier_answers() {
        let mut tl = EventTimeline::new();
        tl.ingest(ev(0, "A", "x", true)).unwrap();
        let before = tl.state_at("A", "x", 50).cloned();
        tl.ingest(ev(100, "A", "x", false)).unwrap();
        assert_eq!(tl.state_at("A", "x", 50).cloned(), before);
    }

    #[test]
    fn reorder_buffer() {
        let mut buf = ReorderBuffer::new(10);
        assert!(buf.push(ev(5, "A", "x", 1.0)).unwrap().is_empty());
        assert!(buf.push(ev(3, "A", "x", 2.0)).unwrap().is_empty());
        let out = buf.push(ev(14, "A", "x", 3.0)).unwrap();
        assert_eq!(out.iter().map(|e| e.ts).collect::<Vec<_>>(), vec![3]);
        assert!(buf.push(ev(2, "A", "x", 4.0)).is_err());
        let rest = buf.flush();
        assert_eq!(rest.iter().map(|e| e.ts).collect::<Vec<_>>(), vec![5, 14]);
    }

    #[test]
    fn jsonl_round_trip_is_exact() {
        let events = vec![
            ev(1, "Kitchen", "Presence", true),
            ContextEvent::new(2, EventKind::ObjectUse, "Choptable", "Use", 0.1 + 0.2),
            ContextEvent::new(3, EventKind::Actuation, "TV", "Channel", "news"),
            ContextEvent::new(-4, EventKind::Activity, "Activity", "Sitting", 1e-300),
        ];
        let mut buf = Vec::new();
        write_events_jsonl(&mut buf, &events).unwrap();
        let back = read_events_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back, events);
        let mut again = Vec::new();
        write_events_jsonl(&mut again, &back).unwrap();
        assert_eq!(buf, again);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(r#"{"ts":1,"kind":"location","entity":"Kitchen""#));
    }

    #[test]
    fn activity_changes_only() {
        let evs = activity_events([(0, "Sitting"), (10, "Sitting"), (20, "Walking")]);
        let summary: Vec<_> = evs
            .iter()
            .map(|e| (e.ts, e.attribute.as_str(), e.value.clone()))
            .collect();
        assert_eq!(
            summary,
            vec![
                (0, "Sitting", Value::Bool(true)),
                (20, "Sitting", Value::Bool(false)),
                (20, "Walking", Value::Bool(true)),
            ]
        );
    }
}
