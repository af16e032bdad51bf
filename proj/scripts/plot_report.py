#!/usr/bin/env python3
"""Render a report CSV as per-model charts.

Reads the CSV contract emitted by `maple report` (model_id, group_key, n,
accuracy, mean_maple, <label counts>). Prints ASCII bar charts; with
matplotlib installed and --png given, also writes a grouped bar chart.
"""

import argparse
import csv
import sys
from collections import defaultdict

BAR_WIDTH = 40


def load(path):
    by_model = defaultdict(list)
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            by_model[row["model_id"]].append(row)
    if not by_model:
        sys.exit(f"{path}: no rows")
    return by_model


def bar(value):
    filled = int(round(value * BAR_WIDTH))
    return "#" * filled + "." * (BAR_WIDTH - filled)


def render_ascii(by_model, metric):
    for model_id in sorted(by_model):
        print(f"\n{model_id}  ({metric})")
        for row in by_model[model_id]:
            raw = row[metric]
            if raw == "":
                print(f"  {row['group_key']:>22}  (no scored solutions)")
                continue
            value = float(raw)
            print(f"  {row['group_key']:>22}  {bar(value)}  {value:.3f}  n={row['n']}")


def render_png(by_model, metric, path):
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib not available; skipping PNG output", file=sys.stderr)
        return

    fig, ax = plt.subplots(figsize=(10, 5))
    models = sorted(by_model)
    groups = [row["group_key"] for row in by_model[models[0]]]
    width = 0.8 / max(1, len(models))
    for i, model_id in enumerate(models):
        values = []
        for g in groups:
            match = [r for r in by_model[model_id] if r["group_key"] == g]
            raw = match[0][metric] if match else ""
            values.append(float(raw) if raw != "" else 0.0)
        ax.bar([x + i * width for x in range(len(groups))], values, width, label=model_id)
    ax.set_xticks([x + 0.4 - width / 2 for x in range(len(groups))])
    ax.set_xticklabels(groups, rotation=20, ha="right")
    ax.set_ylabel(metric)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    print(f"wrote {path}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("csv", help="report CSV (by_level.csv or by_topic.csv)")
    parser.add_argument(
        "--metric", default="accuracy", choices=["accuracy", "mean_maple"],
        help="column to chart",
    )
    parser.add_argument("--png", help="also write a PNG chart to this path")
    args = parser.parse_args()

    by_model = load(args.csv)
    render_ascii(by_model, args.metric)
    if args.png:
        render_png(by_model, args.metric, args.png)


if __name__ == "__main__":
    main()
