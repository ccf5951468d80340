"""Smoke test for the `wits` Python extension."""

import csv
import io
import json
import pathlib

import wits

ROOT = pathlib.Path(__file__).resolve().parent.parent


def main():
    line = [3.0 + 0.5 * i for i in range(50)]
    growth, cyclical = wits.hp_filter(line, 100.0)
    assert all(abs(c) < 1e-9 for c in cyclical), "a line has no cycle"
    assert all(abs(g - v) < 1e-9 for g, v in zip(growth, line))

    sensors, labels_csv, events = wits.simulate(seed=7)
    columns, rows, spans = wits.featurize(sensors, 10_000)
    assert rows and len(rows[0]) == len(columns) and len(rows) == len(spans)

    by_start = {}
    for rec in csv.DictReader(io.StringIO(labels_csv)):
        if rec["outlier"] == "0":
            by_start[int(rec["start_ms"])] = rec["label"]
    pairs = [(r, by_start[s]) for r, (s, _) in zip(rows, spans) if s in by_start]
    x = [r for r, _ in pairs]
    y = [l for _, l in pairs]
    hyper = json.dumps({"d": 8, "sd": 3, "max_sweeps": 4, "seed": 1})
    model = wits.train(x, y, hyper=hyper, quantile=0.99, folds=2)
    assert model.epsilon is not None
    trace = model.j_trace
    assert all(b <= a + 1e-10 * max(abs(a), 1.0) for a, b in zip(trace, trace[1:]))
    model = wits.Model.from_json(model.to_json())
    results = model.classify(x)
    accuracy = sum(r["label"] == t for r, t in zip(results, y)) / len(y)
    print(f"train accuracy {accuracy:.3f} over {len(y)} windows, classes {model.labels}")
    assert accuracy > 0.5

    rules_text = (ROOT / "rules" / "home.wits").read_text()
    normalized = wits.check_rules(rules_text)
    assert normalized.count("RULE") == 6
    actions = [json.loads(a) for a in wits.run_rules(rules_text, events)]
    fired = {a["rule"] for a in actions}
    print(f"{len(actions)} actions from rules {sorted(fired)}")
    assert {"LongToiletVisit", "FallAlert", "LightsOffWhenSleeping"} <= fired

    try:
        wits.check_rules("RULE Broken WHEN")
    except ValueError:
        pass
    else:
        raise AssertionError("malformed rules must raise ValueError")
    print("smoke test passed")


if __name__ == "__main__":
    main()
