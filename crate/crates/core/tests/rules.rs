mod support;

use support::rules::*;
use wits_core::rules::{parse_rules, run, EngineConfig, Engine};

#[test]
fn golden_traces_for_example_rules() {
    let rules = home_rules();
    assert_eq!(rules.len(), 6);
    for trace in golden_traces() {
        let log = run(&rules, trace.events.clone(), Some(trace.until), EngineConfig::default()).unwrap();
        assert_eq!(log, trace.expected, "{}", trace.name);
        let naive = NaiveOracle::new(&rules, 0).run(&trace.events, trace.until);
        assert_eq!(naive, trace.expected, "oracle disagrees on {}", trace.name);
    }
}

#[test]
fn random_streams_match_naive_oracle() {
    let rules = parse_rules(RANDOM_RULES).unwrap();
    for (seed, tz) in [(1, 0), (2, 90 * MIN), (3, -5 * HOUR)] {
        let events = random_stream(seed, 10_000);
        let until = events.last().unwrap().ts + 2 * HOUR;
        let config = EngineConfig { tz_offset_ms: tz, ..EngineConfig::default() };
        let log = run(&rules, events.clone(), Some(until), config).unwrap();
        let naive = NaiveOracle::new(&rules, tz).run(&events, until);
        assert!(log.len() > 1000, "seed {seed}: only {} actions", log.len());
        let first_diff = log.iter().zip(&naive).position(|(a, b)| a != b);
        assert_eq!(log.len(), naive.len(), "seed {seed}: first difference at {first_diff:?}");
        assert_eq!(first_diff, None, "seed {seed}");
    }
}

#[test]
fn stepping_matches_batch_run() {
    let rules = home_rules();
    for trace in golden_traces() {
        let mut engine = Engine::new(rules.clone(), EngineConfig::default());
        let mut log = Vec::new();
        for e in trace.events {
            log.extend(engine.step(e).unwrap());
        }
        log.extend(engine.advance_to(trace.until).unwrap());
        assert_eq!(log, trace.expected, "{}", trace.name);
    }
}

#[test]
fn oracle_notices_a_shifted_clock() {
    let rules = parse_rules(RANDOM_RULES).unwrap();
    let events = random_stream(4, 2_000);
    let until = events.last().unwrap().ts;
    let config = EngineConfig { tz_offset_ms: 30 * MIN, ..EngineConfig::default() };
    let log = run(&rules, events.clone(), Some(until), config).unwrap();
    assert_ne!(log, NaiveOracle::new(&rules, 0).run(&events, until));
}
