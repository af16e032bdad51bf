#!/usr/bin/env python3
"""Independently recompute accuracy and mean maple score from a run's record
store and compare them against the emitted CSV reports.

The recount deliberately shares no code with the pipeline: it re-reads the
raw JSONL lines, regroups them by (model, level) and (model, topic), and
recomputes the two CSV statistics from scratch. Counts must match exactly;
reals must match to half an ulp of the CSV's printed precision (6 decimals).
"""

import argparse
import csv
import json
import sys
from collections import defaultdict

# %.6f rounds to the nearest 1e-6, so a faithful recount can differ from the
# printed value by at most 5e-7 (plus binary-rounding dust).
PRINT_TOLERANCE = 5e-7 + 1e-9


def load_records(path):
    """Folds JSONL stage lines back into per-(model, problem) state."""
    state = {}
    run_ids = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                sys.exit(f"{path}:{line_no}: bad JSON: {exc}")
            run_ids.add(row["run_id"])
            key = (row["model_id"], row["problem_id"])
            rec = state.setdefault(
                key, {"level": None, "topic": None, "correct": None, "score": None}
            )
            stage = row["stage"]
            if stage == "generation":
                rec["level"] = row.get("level")
                rec["topic"] = row.get("topic")
            elif stage == "verification":
                rec["correct"] = bool(row["payload"]["correct"])
            elif stage == "scoring":
                rec["score"] = float(row["payload"]["score"])
    if len(run_ids) != 1:
        sys.exit(f"{path}: expected exactly one run id, found {sorted(run_ids)}")
    return state


def recount(state, group_field):
    groups = defaultdict(lambda: {"n": 0, "correct": 0, "scores": []})
    for (model_id, _), rec in state.items():
        if rec["correct"] is None:
            continue  # unverified records are excluded from reports
        group_key = str(rec[group_field])
        acc = groups[(model_id, group_key)]
        acc["n"] += 1
        acc["correct"] += 1 if rec["correct"] else 0
        if rec["score"] is not None:
            acc["scores"].append(rec["score"])
    out = {}
    for key, acc in groups.items():
        mean = sum(acc["scores"]) / len(acc["scores"]) if acc["scores"] else None
        out[key] = {
            "n": acc["n"],
            "accuracy": acc["correct"] / acc["n"],
            "mean_maple": mean,
        }
    return out


def load_csv(path):
    rows = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            key = (row["model_id"], row["group_key"])
            mean = row["mean_maple"]
            rows[key] = {
                "n": int(row["n"]),
                "accuracy": float(row["accuracy"]),
                "mean_maple": float(mean) if mean != "" else None,
            }
    return rows


def compare(name, expected, actual):
    problems = []
    if set(expected) != set(actual):
        missing = sorted(set(expected) - set(actual))
        extra = sorted(set(actual) - set(expected))
        problems.append(f"{name}: group sets differ (missing={missing}, extra={extra})")
        return problems
    for key in sorted(expected):
        want, got = expected[key], actual[key]
        if want["n"] != got["n"]:
            problems.append(f"{name} {key}: n {got['n']} != recount {want['n']}")
        if abs(want["accuracy"] - got["accuracy"]) > PRINT_TOLERANCE:
            problems.append(
                f"{name} {key}: accuracy {got['accuracy']} != recount {want['accuracy']}"
            )
        if (want["mean_maple"] is None) != (got["mean_maple"] is None):
            problems.append(
                f"{name} {key}: mean_maple presence mismatch "
                f"(csv={got['mean_maple']}, recount={want['mean_maple']})"
            )
        elif want["mean_maple"] is not None and abs(
            want["mean_maple"] - got["mean_maple"]
        ) > PRINT_TOLERANCE:
            problems.append(
                f"{name} {key}: mean_maple {got['mean_maple']} != recount {want['mean_maple']}"
            )
    return problems


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--records", required=True, help="records.jsonl of the run")
    parser.add_argument("--level-csv", required=True, help="by-level CSV report")
    parser.add_argument("--topic-csv", required=True, help="by-topic CSV report")
    args = parser.parse_args()

    state = load_records(args.records)
    if not state:
        sys.exit(f"{args.records}: no records")

    problems = []
    problems += compare("by_level", recount(state, "level"), load_csv(args.level_csv))
    problems += compare("by_topic", recount(state, "topic"), load_csv(args.topic_csv))

    if problems:
        for p in problems:
            print(f"MISMATCH: {p}", file=sys.stderr)
        sys.exit(1)
    print(f"recount OK: {len(state)} records agree with both reports")


if __name__ == "__main__":
    main()
