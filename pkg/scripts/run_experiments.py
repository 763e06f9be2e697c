#!/usr/bin/env python3
"""Run every task and mode with the default setup, one output directory each.

    python3 scripts/run_experiments.py --out runs --seeds 5 --episodes 2000
"""
import argparse
import sys

from coop_rm.cli import main as cli_main


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs")
    ap.add_argument("--seeds", default="5")
    ap.add_argument("--episodes", default="2000")
    ap.add_argument("--tasks", default="three_buttons,rendezvous")
    ap.add_argument("--modes", default="provided,learn,flat")
    args = ap.parse_args()
    status = 0
    for task in args.tasks.split(","):
        for mode in args.modes.split(","):
            print(f"== {task} / {mode}", flush=True)
            code = cli_main(["run", "--task", task, "--mode", mode, "--seeds", args.seeds,
                             "--episodes", args.episodes, "--out", f"{args.out}/{task}_{mode}"])
            status = status or code
    return status


if __name__ == "__main__":
    sys.exit(main())
