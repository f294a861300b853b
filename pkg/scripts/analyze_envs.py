#!/usr/bin/env python3
"""Emit gradient-existence reports for every bundled environment."""

import argparse
import sys

from gdpg_lab.harness import analyze, default_out_dir

GRID = [round(0.05 * k, 2) for k in range(1, 10)]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=None)
    args = parser.parse_args(argv)
    out = args.out if args.out is not None else default_out_dir()

    for env_id in ("linear_example1", "complex_point", "quadratic_convex", "pendulum"):
        result = analyze(env_id, GRID, out)
        rep = result.report
        print(f"== {env_id}: n={rep.n} c={rep.c:.4g} threshold={rep.gamma_threshold:.4g} "
              f"A.1={rep.cond_a1} A.2={rep.cond_a2}")
        for gamma, verdict in result.verdicts:
            print(f"   gamma={gamma:g}: {verdict}")
    print(f"reports in {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
