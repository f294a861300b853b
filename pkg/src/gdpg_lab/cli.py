"""Command-line front end: run / sweep-alpha / analyze.

Configuration precedence: built-in defaults, then a --config key=value file,
then explicit command-line flags. The default output directory comes from
the GDPG_LAB_OUT environment variable.
"""

from __future__ import annotations

import argparse
import sys

from .envs import ENV_IDS
from .harness import analyze, build_experiment_config, default_out_dir, parse_config_file, \
    run, sweep_alpha


def _parse_gammas(spec: str) -> list[float]:
    """Comma list ("0.2,0.3") or start:stop:step range, stop inclusive."""
    if ":" in spec:
        start, stop, step = (float(x) for x in spec.split(":"))
        out = []
        g = start
        while g <= stop + 1e-12:
            out.append(round(g, 12))
            g += step
        return out
    return [float(x) for x in spec.split(",") if x.strip()]


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--env", choices=ENV_IDS, help="environment id")
    p.add_argument("--mode", choices=("gdpg", "ddpg", "mdpg", "augmented_only"))
    p.add_argument("--alpha", type=float, help="weight on the model-free critic route")
    p.add_argument("--gamma", type=float, help="discount factor")
    p.add_argument("--steps", type=int, help="environment steps per seed")
    p.add_argument("--seeds", help="comma-separated list of distinct seeds")
    p.add_argument("--out", help=f"output directory (default ${{GDPG_LAB_OUT}} "
                                 f"or {default_out_dir()!r})")
    p.add_argument("--workers", type=int, help="parallel seed workers")
    p.add_argument("--config", help="flat key=value configuration file")


def _collect_mapping(args: argparse.Namespace) -> dict[str, str]:
    mapping: dict[str, str] = {}
    if args.config:
        mapping.update(parse_config_file(args.config))
    for key in ("env", "mode", "alpha", "gamma", "steps", "seeds", "out", "workers"):
        value = getattr(args, key, None)
        if value is not None:
            mapping[key] = str(value)
    return mapping


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="gdpg-lab",
                                     description="deterministic-policy-gradient laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="train one configuration over its seeds")
    _add_run_flags(p_run)

    p_sweep = sub.add_parser("sweep-alpha", help="run once per alpha, shared seeds")
    _add_run_flags(p_sweep)
    p_sweep.add_argument("--alphas", required=True,
                         help="comma-separated alpha values, e.g. 0,0.5,1,2")

    p_an = sub.add_parser("analyze", help="gradient-existence report for an environment")
    p_an.add_argument("--env", choices=ENV_IDS, required=True)
    p_an.add_argument("--gammas", default="0.05:0.45:0.05",
                      help="comma list or start:stop:step range")
    p_an.add_argument("--out", default=None)
    p_an.add_argument("--theta", default="1,1",
                      help="constant policy for linear_example1, comma pair")
    p_an.add_argument("--seed", type=int, default=0)
    p_an.add_argument("--samples", type=int, default=32, help="sampled start states")
    p_an.add_argument("--chain-length", type=int, default=8)

    args = parser.parse_args(argv)

    try:
        if args.command == "analyze":
            out_dir = args.out if args.out is not None else default_out_dir()
            theta = tuple(float(x) for x in args.theta.split(","))
            result = analyze(args.env, _parse_gammas(args.gammas), out_dir,
                             theta=theta, seed=args.seed, state_samples=args.samples,
                             chain_length=args.chain_length)
            sys.stdout.write(f"env={args.env}\n" + result.report.as_kv_text())
            for gamma, verdict in result.verdicts:
                sys.stdout.write(f"gamma={gamma:g} verdict={verdict}\n")
            sys.stdout.write(f"report written to {result.report_file}\n")
            return 0

        config = build_experiment_config(_collect_mapping(args))
        if args.command == "run":
            result = run(config)
            for seed, path in sorted(result.seed_files.items()):
                status = f"halted at step {result.halted[seed]}" if seed in result.halted \
                    else "ok"
                sys.stdout.write(f"seed {seed}: {status} -> {path}\n")
            sys.stdout.write(f"summary -> {result.summary_file}\n")
            return 1 if result.halted else 0

        if args.command == "sweep-alpha":
            alphas = [float(x) for x in args.alphas.split(",") if x.strip()]
            sweep = sweep_alpha(config, alphas)
            for alpha in alphas:
                rr = sweep.runs[float(alpha)]
                final = rr.summary_rows[-1] if rr.summary_rows else None
                desc = f"final mean rolling100 {final[1]:.6g}" if final else "no summary"
                sys.stdout.write(f"alpha {alpha:g}: {desc}\n")
            sys.stdout.write(f"comparison -> {sweep.comparison_file}\n")
            return 0
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
