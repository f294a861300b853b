#!/usr/bin/env python3
"""Reproduce the ComplexPoint weight ablation at desk scale.

Runs the full weight grid over shared seeds and writes per-run CSVs, per-alpha
summaries and the alpha comparison table. Expect roughly half an hour at the
default 50k steps x 5 seeds x 6 alphas on two workers.
"""

import argparse
import sys

from gdpg_lab.agent import GdpgConfig
from gdpg_lab.harness import ExperimentConfig, default_out_dir, sweep_alpha


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--alphas", default="0,0.25,0.5,0.75,1,2")
    parser.add_argument("--seeds", default="0,1,2,3,4")
    parser.add_argument("--steps", type=int, default=50_000)
    parser.add_argument("--out", default=None)
    parser.add_argument("--workers", type=int, default=2)
    args = parser.parse_args(argv)

    config = ExperimentConfig(
        env_id="complex_point",
        seeds=tuple(int(s) for s in args.seeds.split(",")),
        out_dir=args.out if args.out is not None else default_out_dir(),
        workers=args.workers,
        gdpg=GdpgConfig(mode="gdpg", total_steps=args.steps),
    )
    sweep = sweep_alpha(config, [float(a) for a in args.alphas.split(",")])
    for alpha, result in sorted(sweep.runs.items()):
        finals = ", ".join(f"{s}:{v:.1f}" for s, v in sorted(result.final_rolling100.items()))
        print(f"alpha={alpha:g} final rolling100 per seed: {finals}")
    print(f"comparison table: {sweep.comparison_file}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
