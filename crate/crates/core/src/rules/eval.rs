use crate::events::EventTimeline;

use super::ast::TriggerExpr;

pub const DAY_MS: i64 = 86_400_000;

/// Evaluates a trigger at event time `now`, with clock windows read in UTC.
pub fn evaluate(expr: &TriggerExpr, timeline: &EventTimeline, now: i64) -> bool {
    evaluate_at(expr, timeline, now, 0)
}

/// Like [`evaluate`], with local clock time `now + tz_offset_ms`.
pub fn evaluate_at(expr: &TriggerExpr, timeline: &EventTimeline, now: i64, tz_offset_ms: i64) -> bool {
    match expr {
        TriggerExpr::Const(b) => *b,
        TriggerExpr::Predicate {
            entity,
            attribute,
            cmp,
            value,
        } => timeline
            .state_at(entity, attribute, now)
            .is_some_and(|s| cmp.apply(s, value)),
        // Only meaningful inside an And group, which handles it.
        TriggerExpr::DurationAtLeast(_) => false,
        TriggerExpr::TimeWindow { start, end } => {
            in_window(local_ms(now, tz_offset_ms), start.ms_of_day(), end.ms_of_day())
        }
        TriggerExpr::Not(x) => !evaluate_at(x, timeline, now, tz_offset_ms),
        TriggerExpr::Or(xs) => xs.iter().any(|x| evaluate_at(x, timeline, now, tz_offset_ms)),
        TriggerExpr::And(xs) => {
            let mut group_start: Option<Option<i64>> = None;
            xs.iter().all(|x| match x {
                TriggerExpr::DurationAtLeast(t) => {
                    let start = *group_start.get_or_insert_with(|| held_from(xs, timeline, now));
                    start.is_some_and(|s| now.saturating_sub(s) >= *t)
                }
                other => evaluate_at(other, timeline, now, tz_offset_ms),
            })
        }
    }
}

fn local_ms(now: i64, tz_offset_ms: i64) -> i64 {
    (now + tz_offset_ms).rem_euclid(DAY_MS)
}

fn in_window(local: i64, start: i64, end: i64) -> bool {
    if start <= end {
        start <= local && local < end
    } else {
        local >= start || local < end
    }
}

/// Latest start among the predicate siblings' current runs: the instant
/// from which all of them have held together. `None` if any does not hold.
fn held_from(group: &[TriggerExpr], timeline: &EventTimeline, now: i64) -> Option<i64> {
    let mut latest = i64::MIN;
    for x in group {
        if let TriggerExpr::Predicate {
            entity,
            attribute,
            cmp,
            value,
        } = x
        {
            let s = timeline.satisfied_since(entity, attribute, now, |v| cmp.apply(v, value))?;
            latest = latest.max(s);
        }
    }
    Some(latest)
}

/// Earliest instant after `now` at which the trigger could change value
/// without a new event: a duration threshold being crossed or a clock
/// window boundary.
pub fn next_wakeup(expr: &TriggerExpr, timeline: &EventTimeline, now: i64, tz_offset_ms: i64) -> Option<i64> {
    let mut best: Option<i64> = None;
    let mut offer = |t: i64| {
        if t > now {
            best = Some(best.map_or(t, |b| b.min(t)));
        }
    };
    expr.walk(&mut |node| match node {
        TriggerExpr::And(xs) => {
            let durations = xs.iter().filter_map(|x| match x {
                TriggerExpr::DurationAtLeast(t) => Some(*t),
                _ => None,
            });
            let mut start = None;
            for t in durations {
                let s = *start.get_or_insert_with(|| held_from(xs, timeline, now));
                if let Some(s) = s {
                    offer(s.saturating_add(t));
                }
            }
        }
        TriggerExpr::TimeWindow { start, end } => {
            let local = local_ms(now, tz_offset_ms);
            for b in [start.ms_of_day(), end.ms_of_day()] {
                let mut delta = (b - local).rem_euclid(DAY_MS);
                if delta == 0 {
                    delta = DAY_MS;
                }
                offer(now + delta);
            }
        }
        _ => {}
    });
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::{ContextEvent, EventKind};
    use crate::rules::parse_trigger;

    const MIN: i64 = 60_000;
    const HOUR: i64 = 60 * MIN;

    fn timeline(events: &[(i64, &str, &str, bool)]) -> EventTimeline {
        let mut tl = EventTimeline::new();
        for &(ts, e, a, v) in events {
            tl.ingest(ContextEvent::new(ts, EventKind::Location, e, a, v)).unwrap();
        }
        tl
    }

    #[test]
    fn toilet_duration_boundary() {
        let rule = parse_trigger("Toilet.Occupied == true AND Duration >= 30min").unwrap();
        let t0 = 7 * HOUR;
        let tl = timeline(&[(t0, "Toilet", "Occupied", true)]);
        assert!(evaluate(&rule, &tl, t0 + 30 * MIN));
        assert!(!evaluate(&rule, &tl, t0 + 29 * MIN));
        assert!(!evaluate(&rule, &tl, t0 + 30 * MIN - 1));
        assert_eq!(next_wakeup(&rule, &tl, t0, 0), Some(t0 + 30 * MIN));
    }

    #[test]
    fn porch_window_wraps_midnight() {
        let rule = parse_trigger("Porch.Presence == true AND Time in [8:00pm 8:00am]").unwrap();
        let tl = timeline(&[(0, "Porch", "Presence", true)]);
        assert!(evaluate(&rule, &tl, 21 * HOUR));
        assert!(!evaluate(&rule, &tl, 12 * HOUR));
        assert!(evaluate(&rule, &tl, DAY_MS + 3 * HOUR));
        assert!(evaluate(&rule, &tl, 20 * HOUR));
        assert!(!evaluate(&rule, &tl, 8 * HOUR));
        assert_eq!(next_wakeup(&rule, &tl, 12 * HOUR, 0), Some(20 * HOUR));
        assert_eq!(next_wakeup(&rule, &tl, 21 * HOUR, 0), Some(DAY_MS + 8 * HOUR));
        // Local time two hours ahead of UTC.
        assert!(evaluate_at(&rule, &tl, 18 * HOUR, 2 * HOUR));
    }

    #[test]
    fn unknown_is_false_and_not_flips_it() {
        let tl = EventTimeline::new();
        let p = parse_trigger("Door.Open == true").unwrap();
        assert!(!evaluate(&p, &tl, 0));
        assert!(evaluate(&TriggerExpr::Not(Box::new(p)), &tl, 0));
        let ne = parse_trigger("Door.Open != true").unwrap();
        assert!(!evaluate(&ne, &tl, 0));
    }

    #[test]
    fn duration_counts_from_latest_sibling() {
        let rule = parse_trigger("Couch.Occupied == true AND TV.ON == true AND Duration >= 1h").unwrap();
        let tl = timeline(&[(0, "Couch", "Occupied", true), (20 * MIN, "TV", "ON", true)]);
        assert!(!evaluate(&rule, &tl, HOUR));
        assert!(evaluate(&rule, &tl, HOUR + 20 * MIN));
    }

    #[test]
    fn constants() {
        let tl = EventTimeline::new();
        assert!(evaluate(&TriggerExpr::Const(true), &tl, 0));
        assert!(!evaluate(&TriggerExpr::Const(false), &tl, 0));
    }
}
