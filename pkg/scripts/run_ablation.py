#!/usr/bin/env python3
"""Reproduce the benchmark ablation on the frozen noisy planted suite.

Generates the suite, runs every ablation arm through `codec bench`, and
leaves the suite, gold sidecar, and JSON report in the output directory.
"""

import argparse
import subprocess
import sys
from pathlib import Path

DEFAULT_CONFIGS = ("exact,exact+rerank,delta=1,delta=3,"
                   "delta=1+prune,delta=3+prune,csbs=2,csbs=4,csbs=8,csbs=16")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=1234)
    parser.add_argument("--count", type=int, default=300)
    parser.add_argument("--noise", type=float, default=3.0)
    parser.add_argument("--n-min", type=int, default=4)
    parser.add_argument("--n-max", type=int, default=10)
    parser.add_argument("--configs", default=DEFAULT_CONFIGS)
    parser.add_argument("--out", type=Path, default=Path("ablation_out"))
    args = parser.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    suite = args.out / "suite.jsonl"
    report = args.out / "report.json"
    subprocess.run(
        ["codec", "gen", "--seed", str(args.seed), "--count",
         str(args.count), "--noise", str(args.noise),
         "--n-min", str(args.n_min), "--n-max", str(args.n_max),
         "-o", str(suite)],
        check=True)
    subprocess.run(
        ["codec", "bench", "--suite", str(suite),
         "--gold", str(suite) + ".gold",
         "--scorer", f"planted:{args.seed}:{args.noise}",
         "--configs", args.configs, "-o", str(report)],
        check=True)
    print(f"\nreport written to {report}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
