#!/usr/bin/env python3
"""Per-mode summary of run directories produced by run_experiments.py.

Prints the final aggregate reward and the first evaluation episode after which
the mean reward stays >= 0.95 for three consecutive evaluations.
"""
import argparse
import csv
from pathlib import Path


def first_sustained(rows, k=3):
    for i in range(len(rows) - k + 1):
        if all(float(r["eval_reward_mean"]) >= 0.95 for r in rows[i:i + k]):
            return rows[i]["episode"]
    return "never"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out", nargs="?", default="runs")
    args = ap.parse_args()
    print(f"{'run':28} {'final reward':>14} {'final steps':>12} {'sustained from':>15}")
    for agg in sorted(Path(args.out).glob("*/metrics_aggregate.csv")):
        with open(agg, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            continue
        last = rows[-1]
        print(f"{agg.parent.name:28} {float(last['eval_reward_mean']):>14.3f} "
              f"{float(last['eval_steps_mean']):>12.1f} {first_sustained(rows):>15}")


if __name__ == "__main__":
    main()
