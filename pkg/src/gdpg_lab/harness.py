"""Seeded experiment execution, alpha sweeps and analysis reports.

CSV conventions: comma-separated, one header row, line-feed terminated,
floats printed with 9 significant digits. Run files carry the columns
(seed, episode, steps, return, rolling100); summaries carry
(steps, mean_rolling100, std_rolling100) at evaluation points aligned
across seeds every 1000 environment steps. Re-running with an identical
configuration reproduces byte-identical files.
"""

from __future__ import annotations

import contextlib
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

try:
    from threadpoolctl import threadpool_limits
except ImportError:  # pragma: no cover
    threadpool_limits = None

from .agent import GdpgConfig, TrainingDiverged, train
from .envs import ENV_IDS, make_env
from .envs.base import UnsupportedCapability
from .nets import init_mlp
from .policies import ConstantPolicy, LinearPolicy, MlpPolicy
from .records import RunRecord
from .theory import ConvergenceReport, convergence_report, example1_grad_value

SUMMARY_EVERY = 1000
EXAMPLE1_MAX_TERMS = 2000
EXAMPLE1_TAIL_TOL = 1e-9

RUN_HEADER = "seed,episode,steps,return,rolling100"
SUMMARY_HEADER = "steps,mean_rolling100,std_rolling100"
COMPARISON_HEADER = "alpha,steps,mean_rolling100,std_rolling100"
VERDICTS_HEADER = "gamma,verdict"
PARTIAL_SUMS_HEADER = "gamma,term,sum1,sum2"


def default_out_dir() -> str:
    return os.environ.get("GDPG_LAB_OUT", "gdpg_lab_out")


def fmt_float(x: float) -> str:
    return f"{float(x):.9g}"


@dataclass
class ExperimentConfig:
    env_id: str = "complex_point"
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    out_dir: str = field(default_factory=default_out_dir)
    workers: int = 1
    gdpg: GdpgConfig = field(default_factory=GdpgConfig)

    def __post_init__(self):
        if self.env_id not in ENV_IDS:
            raise ValueError(f"unknown environment id {self.env_id!r}")
        seeds = tuple(int(s) for s in self.seeds)
        if not seeds:
            raise ValueError("seeds must be non-empty")
        if len(set(seeds)) != len(seeds):
            raise ValueError(f"seeds must be distinct, got {seeds}")
        self.seeds = seeds
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class RunResult:
    config: ExperimentConfig
    seed_files: dict[int, str]
    summary_file: str
    halted: dict[int, int]                 # seed -> halt step
    final_rolling100: dict[int, float]     # successful seeds only
    summary_rows: list[tuple[int, float, float]]


def single_thread_blas():
    """Small matrices at batch size 128 run fastest on one BLAS thread."""
    if threadpool_limits is not None:
        return threadpool_limits(limits=1, user_api="blas")
    return contextlib.nullcontext()


def _train_worker(args):
    env_id, gdpg, seed = args
    env = make_env(env_id)
    try:
        with single_thread_blas():
            records, _ = train(env, gdpg, seed)
        return seed, records, None
    except TrainingDiverged as exc:
        return seed, getattr(exc, "records", []), exc.step


def write_run_csv(path: str, records: list[RunRecord], halt_step: int | None = None) -> None:
    lines = [RUN_HEADER]
    for rec in records:
        lines.append(f"{rec.seed},{rec.episode},{rec.steps},"
                     f"{fmt_float(rec.episode_return)},{fmt_float(rec.rolling100)}")
    if halt_step is not None:
        seed = records[0].seed if records else -1
        lines.append(f"{seed},-1,{halt_step},nan,nan")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def rolling_at_checkpoints(records: list[RunRecord], total_steps: int) -> dict[int, float]:
    """rolling100 of the last finished episode at or before each checkpoint."""
    out: dict[int, float] = {}
    idx = 0
    last = None
    for cp in range(SUMMARY_EVERY, total_steps + 1, SUMMARY_EVERY):
        while idx < len(records) and records[idx].steps <= cp:
            last = records[idx].rolling100
            idx += 1
        if last is not None:
            out[cp] = last
    return out


def _summary_rows(per_seed: dict[int, dict[int, float]], total_steps: int):
    rows = []
    if not per_seed:
        return rows
    for cp in range(SUMMARY_EVERY, total_steps + 1, SUMMARY_EVERY):
        values = [m[cp] for m in per_seed.values() if cp in m]
        if len(values) != len(per_seed):
            continue  # some seed has no finished episode yet; keep rows aligned
        arr = np.asarray(values)
        std = float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0
        rows.append((cp, float(np.mean(arr)), std))
    return rows


def write_summary_csv(path: str, rows) -> None:
    lines = [SUMMARY_HEADER]
    for cp, mean, std in rows:
        lines.append(f"{cp},{fmt_float(mean)},{fmt_float(std)}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def run(config: ExperimentConfig, file_tag: str = "") -> RunResult:
    """Train every seed (in up to ``workers`` processes), then write one CSV
    per seed plus an across-seed summary. A halted seed still gets its
    partial CSV with a marker row (episode -1) and is left out of the
    summary."""
    os.makedirs(config.out_dir, exist_ok=True)
    tasks = [(config.env_id, config.gdpg, seed) for seed in config.seeds]
    if config.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(_train_worker, tasks))
    else:
        outcomes = [_train_worker(t) for t in tasks]

    seed_files: dict[int, str] = {}
    halted: dict[int, int] = {}
    final_rolling: dict[int, float] = {}
    per_seed_curves: dict[int, dict[int, float]] = {}
    for seed, records, halt_step in outcomes:
        path = os.path.join(config.out_dir, f"{config.env_id}{file_tag}_seed{seed}.csv")
        write_run_csv(path, records, halt_step)
        seed_files[seed] = path
        if halt_step is not None:
            halted[seed] = halt_step
            continue
        per_seed_curves[seed] = rolling_at_checkpoints(records, config.gdpg.total_steps)
        if records:
            final_rolling[seed] = records[-1].rolling100

    rows = _summary_rows(per_seed_curves, config.gdpg.total_steps)
    summary_path = os.path.join(config.out_dir, f"summary{file_tag}.csv")
    write_summary_csv(summary_path, rows)
    return RunResult(config=config, seed_files=seed_files, summary_file=summary_path,
                     halted=halted, final_rolling100=final_rolling, summary_rows=rows)


@dataclass
class SweepResult:
    runs: dict[float, RunResult]
    comparison_file: str


def sweep_alpha(config: ExperimentConfig, alphas: list[float]) -> SweepResult:
    """Run the experiment once per alpha, sharing seeds, and emit a
    comparison CSV keyed by alpha (final summary row of each run)."""
    if not alphas:
        raise ValueError("alphas must be non-empty")
    os.makedirs(config.out_dir, exist_ok=True)
    runs: dict[float, RunResult] = {}
    lines = [COMPARISON_HEADER]
    for alpha in alphas:
        tagged = replace(config, gdpg=replace(config.gdpg, alpha=float(alpha)))
        result = run(tagged, file_tag=f"_alpha{alpha:g}")
        runs[float(alpha)] = result
        if result.summary_rows:
            cp, mean, std = result.summary_rows[-1]
            lines.append(f"{alpha:g},{cp},{fmt_float(mean)},{fmt_float(std)}")
        else:
            lines.append(f"{alpha:g},0,nan,nan")
    path = os.path.join(config.out_dir, "alpha_comparison.csv")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return SweepResult(runs=runs, comparison_file=path)


# ---------------------------------------------------------------------------
# analysis reports


@dataclass
class AnalyzeResult:
    report: ConvergenceReport
    verdicts: list[tuple[float, str]]
    report_file: str
    verdicts_file: str
    partial_sums_file: str | None


def example1_verdict(gamma: float, theta=(1.0, 1.0),
                     max_terms: int = EXAMPLE1_MAX_TERMS) -> str:
    """Numerical verdict for the linear_example1 series at one discount:
    diverged once partial sums pass the divergence threshold, converged when
    the tail increment falls below a relative tolerance, else undecided."""
    _, diverged = example1_grad_value(theta, gamma, max_terms)
    if diverged:
        return "diverged"
    tail_prev, _ = example1_grad_value(theta, gamma, max_terms - 1)
    tail_last, _ = example1_grad_value(theta, gamma, max_terms)
    increment = float(np.max(np.abs(tail_last - tail_prev)))
    scale = max(1.0, float(np.max(np.abs(tail_last))))
    if increment <= EXAMPLE1_TAIL_TOL * scale:
        return "converged"
    return "undecided"


def default_analysis_policy(env_id: str, env, seed: int):
    if env_id == "linear_example1":
        return ConstantPolicy(np.array([1.0, 1.0]))
    if env_id == "quadratic_convex":
        rng = np.random.default_rng(seed)
        return LinearPolicy(rng.uniform(-0.2, 0.2, size=(env.action_dim, env.state_dim)))
    rng = np.random.default_rng(seed)
    half = (np.asarray(env.action_high) - np.asarray(env.action_low)) / 2.0
    net = init_mlp([env.state_dim, 64, 64, env.action_dim], rng,
                   output_activation="tanh",
                   output_scale=half if half.size > 1 else float(half[0]))
    return MlpPolicy(net)


def analyze(env_id: str, gammas: list[float], out_dir: str, policy=None,
            theta=(1.0, 1.0), seed: int = 0, state_samples: int = 32,
            chain_length: int = 8) -> AnalyzeResult:
    """Emit the convergence report, per-discount verdicts, and (for
    linear_example1) the series partial sums.

    linear_example1 verdicts come from running the series numerically. Other
    environments get condition-based verdicts: "below_threshold" when the
    discount sits under the sampled 1/(n c f_max) bound, "cond_a1_sampled" /
    "cond_a2_sampled" when a sampled all-discount condition holds, otherwise
    "unknown". Environments without analytic derivatives are differenced.
    """
    os.makedirs(out_dir, exist_ok=True)
    env = make_env(env_id)
    if policy is None:
        policy = default_analysis_policy(env_id, env, seed)
    rng = np.random.default_rng(seed)
    probe_s = env.reset(np.random.default_rng(seed))
    try:
        env.jacobians(probe_s, policy.act(probe_s))
        jac_mode = "analytic"
    except UnsupportedCapability:
        jac_mode = "numeric"
    report = convergence_report(env, policy, state_samples=state_samples,
                                chain_length=chain_length, rng=rng,
                                jacobian_mode=jac_mode)

    verdicts: list[tuple[float, str]] = []
    for gamma in gammas:
        if env_id == "linear_example1":
            verdicts.append((gamma, example1_verdict(gamma, theta)))
        else:
            if report.f_max > 0 and gamma < report.gamma_threshold / report.f_max:
                verdicts.append((gamma, "below_threshold"))
            elif report.cond_a1:
                verdicts.append((gamma, "cond_a1_sampled"))
            elif report.cond_a2:
                verdicts.append((gamma, "cond_a2_sampled"))
            else:
                verdicts.append((gamma, "unknown"))

    report_file = os.path.join(out_dir, f"{env_id}_report.txt")
    with open(report_file, "w", newline="\n") as fh:
        fh.write(f"env={env_id}\njacobian_mode={jac_mode}\n" + report.as_kv_text())

    verdicts_file = os.path.join(out_dir, f"{env_id}_gamma_verdicts.csv")
    with open(verdicts_file, "w", newline="\n") as fh:
        fh.write(VERDICTS_HEADER + "\n")
        for gamma, verdict in verdicts:
            fh.write(f"{fmt_float(gamma)},{verdict}\n")

    partial_sums_file = None
    if env_id == "linear_example1":
        partial_sums_file = os.path.join(out_dir, "example1_partial_sums.csv")
        with open(partial_sums_file, "w", newline="\n") as fh:
            fh.write(PARTIAL_SUMS_HEADER + "\n")
            for gamma in gammas:
                for term in range(1, 401):
                    partial, diverged = example1_grad_value(theta, gamma, term)
                    fh.write(f"{fmt_float(gamma)},{term},"
                             f"{fmt_float(partial[0])},{fmt_float(partial[1])}\n")
                    if diverged:
                        break
    return AnalyzeResult(report=report, verdicts=verdicts, report_file=report_file,
                         verdicts_file=verdicts_file, partial_sums_file=partial_sums_file)


# ---------------------------------------------------------------------------
# flat key=value configuration files


GDPG_FIELD_NAMES = {f.name for f in fields(GdpgConfig)}
EXPERIMENT_KEYS = {"env", "seeds", "out", "workers"}


def parse_config_file(path: str) -> dict[str, str]:
    mapping: dict[str, str] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {raw.rstrip()!r}")
            key, value = line.split("=", 1)
            mapping[key.strip()] = value.strip()
    return mapping


def _coerce(value: str, target_type):
    if target_type is bool:
        low = value.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ValueError(f"cannot parse boolean from {value!r}")
    return target_type(value)


def build_experiment_config(mapping: dict[str, str]) -> ExperimentConfig:
    """Assemble an ExperimentConfig from flat string keys: experiment-level
    keys (env, seeds, out, workers) plus any GdpgConfig field name."""
    gdpg_kwargs = {}
    exp_kwargs = {}
    for key, value in mapping.items():
        if key in ("env", "env_id"):
            exp_kwargs["env_id"] = value
        elif key == "seeds":
            exp_kwargs["seeds"] = tuple(int(x) for x in value.split(",") if x.strip())
        elif key in ("out", "out_dir"):
            exp_kwargs["out_dir"] = value
        elif key == "workers":
            exp_kwargs["workers"] = int(value)
        elif key in ("steps", "total_steps"):
            gdpg_kwargs["total_steps"] = int(value)
        elif key == "hidden_sizes":
            gdpg_kwargs["hidden_sizes"] = tuple(int(x) for x in value.split(",") if x.strip())
        elif key in GDPG_FIELD_NAMES:
            ftype = {f.name: f.type for f in fields(GdpgConfig)}[key]
            types = {"str": str, "float": float, "int": int, "bool": bool,
                     "bool | None": bool}
            gdpg_kwargs[key] = _coerce(value, types.get(ftype, str))
        else:
            raise ValueError(f"unknown configuration key {key!r}")
    return ExperimentConfig(gdpg=GdpgConfig(**gdpg_kwargs), **exp_kwargs)
