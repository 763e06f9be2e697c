#!/usr/bin/env python3
"""Re-check logged induction calls against the SAT oracle.

Reads every ``induction/*.trace`` file below the given run directories and
compares the learned state count in its header with ``oracle_minimal``.
"""
import argparse
import re
import sys
from pathlib import Path

from coop_rm.induction import read_traces
from coop_rm.oracle import oracle_minimal

HEADER = re.compile(r"learned_states (\d+)")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("runs", nargs="+")
    ap.add_argument("--n-max", type=int, default=5)
    args = ap.parse_args()
    checked = bad = 0
    for root in args.runs:
        for path in sorted(Path(root).rglob("induction/*.trace")):
            text = path.read_text()
            learned = int(HEADER.search(text.splitlines()[0]).group(1))
            if learned > args.n_max:
                continue
            ex, props = read_traces(text)
            n = oracle_minimal(props, ex.goals, ex.incompletes, args.n_max)
            checked += 1
            if n != learned:
                bad += 1
                print(f"MISMATCH {path}: learned {learned}, oracle {n}")
    print(f"{checked} calls checked, {bad} mismatches")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
