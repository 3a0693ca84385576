"""Command-line experiment runner.

Subcommands::

    lipsafe run --preset muddy-fig4 --policy uncertainty-reduction --actions 600
    lipsafe oracle --preset hilly-fig6
    lipsafe verify --preset muddy-fig4
    lipsafe presets

``run`` writes one CSV per run, an aggregate CSV of per-action means and a
``summary.json`` into the output directory.  Settings come from the preset,
then an optional JSON config, then flags (flags win).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .core import ActionTable, StateTable
from .environments import (ENVIRONMENTS, EnvironmentSpec, LipschitzSpecError,
                           verify_lipschitz)
from .explorer import (ConfigurationError, GuaranteeViolation, PolicyKind, RunTrace,
                       seed_initial_knowledge)
from .explorer import run as run_exploration
from .safety import ground_truth_safe
from .uncertainty import LipschitzViolation

__all__ = ["ExperimentConfig", "PRESETS", "main", "trace_csv", "aggregate_csv"]

log = logging.getLogger("lipsafe")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_GUARANTEE = 3
EXIT_LIPSCHITZ = 4

CSV_HEADER = ("action", "safe_size_original", "safe_size_total", "total_uncertainty",
              "state", "crashed")
AGGREGATE_HEADER = ("action", "runs", "safe_size_original", "safe_size_total",
                    "total_uncertainty", "crashed_fraction")


@dataclass
class ExperimentConfig:
    environment: EnvironmentSpec
    policy: PolicyKind = PolicyKind.UNCERTAINTY_REDUCTION
    n_actions: int = 600
    n_runs: int = 1
    seed: int = 0
    output: str = "runs"
    emit_total_safe_size: bool = True

    def __post_init__(self):
        if self.n_actions < 1:
            raise ConfigurationError("n_actions must be at least 1")
        if self.n_runs < 1:
            raise ConfigurationError("n_runs must be at least 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["environment"] = self.environment.to_dict()
        d["policy"] = self.policy.value
        return d


@dataclass(frozen=True)
class Preset:
    name: str
    environment: str
    n_actions: int
    n_runs: int
    description: str = ""


PRESETS: Dict[str, Preset] = {
    p.name: p for p in (
        Preset("muddy-fig4", "muddy", 600, 10,
               "Muddy Jumper, 101 states x 121 actions, S_0 = [-3, 3]"),
        Preset("hilly-fig6", "hilly", 600, 10,
               "Hilly Jumper, 139 states x 7 actions, S_0 = [-1.2, 1.2]"),
    )
}


# -- configuration ------------------------------------------------------------
def _resolve_environment(value, base: Optional[EnvironmentSpec] = None) -> EnvironmentSpec:
    if isinstance(value, EnvironmentSpec):
        return value
    if isinstance(value, str):
        if value in PRESETS:
            value = PRESETS[value].environment
        if value not in ENVIRONMENTS:
            raise ConfigurationError(
                f"unknown environment {value!r}; choose from {sorted(ENVIRONMENTS)}")
        return ENVIRONMENTS[value]
    if isinstance(value, dict):
        value = dict(value)
        name = value.pop("base", None) or value.get("name")
        if name in ENVIRONMENTS:
            base = ENVIRONMENTS[name]
        try:
            return EnvironmentSpec.from_dict(value, base)
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigurationError(f"bad environment config: {exc}") from None
    raise ConfigurationError(f"bad environment config: {value!r}")


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigurationError(f"config {path} must hold a JSON object")
    return data


_CONFIG_KEYS = {"environment", "policy", "n_actions", "n_runs", "seed", "output",
                "emit_total_safe_size", "preset"}


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    """Merge preset, JSON config and flags, in increasing priority."""
    file_cfg = _load_json(args.config) if args.config else {}
    unknown = set(file_cfg) - _CONFIG_KEYS
    if unknown:
        raise ConfigurationError(f"unknown config field(s): {sorted(unknown)}")
    preset_name = args.preset or file_cfg.get("preset")
    values: dict = {}
    if preset_name is not None:
        if preset_name not in PRESETS:
            raise ConfigurationError(
                f"unknown preset {preset_name!r}; choose from {sorted(PRESETS)}")
        p = PRESETS[preset_name]
        values.update(environment=p.environment, n_actions=p.n_actions, n_runs=p.n_runs)
    values.update({k: v for k, v in file_cfg.items() if k != "preset"})
    flags = {"environment": args.env, "policy": args.policy, "n_actions": args.actions,
             "n_runs": args.runs, "seed": args.seed, "output": args.out}
    values.update({k: v for k, v in flags.items() if v is not None})
    if args.no_total:
        values["emit_total_safe_size"] = False
    if "environment" not in values:
        raise ConfigurationError("no environment given (use --preset, --env or a config)")

    env = _resolve_environment(values["environment"])
    if args.l_s is not None or args.l_a is not None:
        try:
            env = env.with_lipschitz(args.l_s, args.l_a)
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from None
    try:
        policy = PolicyKind.parse(values.get("policy", PolicyKind.UNCERTAINTY_REDUCTION))
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from None
    try:
        return ExperimentConfig(
            environment=env, policy=policy,
            n_actions=int(values.get("n_actions", 600)),
            n_runs=int(values.get("n_runs", 1)),
            seed=int(values.get("seed", 0)),
            output=str(values.get("output", "runs")),
            emit_total_safe_size=bool(values.get("emit_total_safe_size", True)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(str(exc)) from None


# -- output -------------------------------------------------------------------
def trace_csv(trace: RunTrace, emit_total: bool = True) -> str:
    """One row per record; ``safe_size_total`` is left blank if not emitted."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in trace.records:
        w.writerow([r.action, r.safe_size_original, r.safe_size_total if emit_total else "",
                    r.total_uncertainty, f"{r.state:.6f}", int(r.crashed)])
    return buf.getvalue()


def aggregate(traces: Sequence[RunTrace]) -> List[tuple]:
    """Per-action means across runs.

    A run that ended early (crash or no reachable certified action) keeps
    its last safe-set size and uncertainty for the remaining actions, and
    counts as crashed from its crash onwards.
    """
    length = max(len(t.records) for t in traces)
    cols = ("safe_size_original", "safe_size_total", "total_uncertainty")
    rows = []
    padded = {}
    for name in cols:
        m = np.empty((len(traces), length))
        for i, t in enumerate(traces):
            v = t.column(name).astype(float)
            m[i, : len(v)] = v
            m[i, len(v):] = v[-1]
        padded[name] = m
    crashed = np.zeros((len(traces), length))
    for i, t in enumerate(traces):
        c = t.column("crashed").astype(float)
        crashed[i, : len(c)] = c
        crashed[i, len(c):] = c[-1]
    for k in range(length):
        rows.append((k, len(traces), *(float(padded[n][:, k].mean()) for n in cols),
                     float(crashed[:, k].mean())))
    return rows


def aggregate_csv(traces: Sequence[RunTrace]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AGGREGATE_HEADER)
    for k, n, so, st, tu, cf in aggregate(traces):
        w.writerow([k, n, f"{so:.6f}", f"{st:.6f}", f"{tu:.6f}", f"{cf:.6f}"])
    return buf.getvalue()


def _summary(cfg: ExperimentConfig, traces: Sequence[RunTrace]) -> dict:
    finals = np.array([t.final.safe_size_original for t in traces], dtype=float)
    return {
        "config": cfg.to_dict(),
        "runs": [{"seed": t.seed, "status": t.status, "actions": len(t.records) - 1,
                  "final_safe_size_original": t.final.safe_size_original,
                  "final_safe_size_total": t.final.safe_size_total,
                  "final_total_uncertainty": t.final.total_uncertainty,
                  "unsound_steps": t.unsound_steps}
                 for t in traces],
        "crashed_runs": sum(t.crashed for t in traces),
        "mean_final_safe_size_original": float(finals.mean()),
    }


# -- execution ----------------------------------------------------------------
def worker_count(n_runs: int) -> int:
    """Workers from ``LIPSAFE_THREADS`` (0 or unset means one per CPU)."""
    raw = os.environ.get("LIPSAFE_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigurationError(f"LIPSAFE_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ConfigurationError("LIPSAFE_THREADS must be non-negative")
    if n == 0:
        n = os.cpu_count() or 1
    return max(1, min(n, n_runs))


def _one_run(env: EnvironmentSpec, policy: PolicyKind, n_actions: int, seed: int) -> RunTrace:
    return run_exploration(env, policy, n_actions, seed)


def run_experiment(cfg: ExperimentConfig) -> List[RunTrace]:
    seeds = [cfg.seed + i for i in range(cfg.n_runs)]
    workers = worker_count(cfg.n_runs)
    if workers == 1:
        return [_one_run(cfg.environment, cfg.policy, cfg.n_actions, s) for s in seeds]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_one_run, cfg.environment, cfg.policy, cfg.n_actions, s)
                   for s in seeds]
        return [f.result() for f in futures]


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    log.info("running %d x %s on %s for %d actions", cfg.n_runs, cfg.policy.value,
             cfg.environment.name, cfg.n_actions)
    traces = run_experiment(cfg)
    for t in traces:
        (out / f"run_{t.seed:04d}.csv").write_text(trace_csv(t, cfg.emit_total_safe_size))
    (out / "aggregate.csv").write_text(aggregate_csv(traces))
    summary = _summary(cfg, traces)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"{cfg.environment.name} {cfg.policy.value}: {cfg.n_runs} run(s), "
          f"{summary['crashed_runs']} crashed, mean final safe size "
          f"{summary['mean_final_safe_size_original']:.2f} -> {out}")
    return EXIT_OK


def _env_from_args(args: argparse.Namespace) -> EnvironmentSpec:
    name = args.preset or args.env
    if name is None:
        raise ConfigurationError("no environment given (use --preset or --env)")
    if args.preset is not None and args.preset not in PRESETS:
        raise ConfigurationError(f"unknown preset {args.preset!r}; choose from {sorted(PRESETS)}")
    env = _resolve_environment(name)
    if args.l_s is not None or args.l_a is not None:
        try:
            env = env.with_lipschitz(args.l_s, args.l_a)
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from None
    return env


def _cmd_oracle(args: argparse.Namespace) -> int:
    env = _env_from_args(args)
    oracle = ground_truth_safe(env, args.resolution)
    samples = env.state_samples()
    mask = oracle.safe_states(samples)
    safe = samples[mask]
    report = {
        "environment": env.name,
        "resolution": oracle.resolution,
        "safe_samples": int(mask.sum()),
        "total_samples": int(len(samples)),
        "interval": [float(safe.min()), float(safe.max())] if len(safe) else None,
    }
    if args.states:
        report["states"] = [round(float(x), 6) for x in safe]
    print(json.dumps(report, indent=2))
    return EXIT_OK


def _cmd_verify(args: argparse.Namespace) -> int:
    env = _env_from_args(args)
    report = verify_lipschitz(env, args.samples, args.seed)
    states, actions = StateTable(env.state_samples()), ActionTable(env.action_samples())
    knowledge = seed_initial_knowledge(env, states, actions)
    print(json.dumps({
        "environment": env.name,
        "state_region": list(report.state_region),
        "max_state_ratio": report.max_state_ratio,
        "max_action_ratio": report.max_action_ratio,
        "l_s": report.l_s,
        "l_a": report.l_a,
        "state_violations": report.state_violations,
        "action_violations": report.action_violations,
        "initial_triplets": len(knowledge),
        "initial_set_connected": True,
    }, indent=2))
    report.raise_for_violation()
    return EXIT_OK


def _cmd_presets(args: argparse.Namespace) -> int:
    for p in PRESETS.values():
        env = ENVIRONMENTS[p.environment]
        print(f"{p.name:12s} {p.description}; {p.n_runs} runs x {p.n_actions} actions; "
              f"L_s={env.lipschitz.l_s:g}, L_a={env.lipschitz.l_a:g}")
    print("policies:", ", ".join(k.value.replace("_", "-") for k in PolicyKind))
    return EXIT_OK


# -- parsing ------------------------------------------------------------------
def _add_env_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", help="named preset (see `presets`)")
    p.add_argument("--env", choices=sorted(ENVIRONMENTS), help="environment name")
    p.add_argument("--l-s", dest="l_s", type=float, help="override state Lipschitz constant")
    p.add_argument("--l-a", dest="l_a", type=float, help="override action Lipschitz constant")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lipsafe", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an exploration experiment")
    _add_env_flags(p)
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--policy", help="uncertainty-reduction, random, safe-no-opt or expansion-opt")
    p.add_argument("--actions", type=int, help="actions per run")
    p.add_argument("--runs", type=int, help="number of runs (seeds base, base+1, ...)")
    p.add_argument("--seed", type=int, help="base seed")
    p.add_argument("--out", help="output directory")
    p.add_argument("--no-total", action="store_true",
                   help="leave the safe_size_total column blank")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("oracle", help="print the ground-truth safe set")
    _add_env_flags(p)
    p.add_argument("--resolution", type=float, help="oracle grid step")
    p.add_argument("--states", action="store_true", help="list the safe sample states")
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("verify", help="check Lipschitz constants and initial connectivity")
    _add_env_flags(p)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("presets", help="list built-in presets")
    p.set_defaults(func=_cmd_presets)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"lipsafe: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GuaranteeViolation as exc:
        print(f"lipsafe: guarantee violated: {exc}", file=sys.stderr)
        return EXIT_GUARANTEE
    except (LipschitzViolation, LipschitzSpecError) as exc:
        print(f"lipsafe: Lipschitz violation: {exc}", file=sys.stderr)
        return EXIT_LIPSCHITZ


if __name__ == "__main__":
    sys.exit(main())
