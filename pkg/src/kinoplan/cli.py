"""Command-line interface for the benchmark harness.

Subcommands: init-config, generate, run, report, validate, kmin.  All
numeric parameters come from a YAML config file given by --config or the
KINOPLAN_CONFIG environment variable, falling back to built-in defaults.
Exit codes: 0 success, 1 usage or config error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import copy
import json
import os
import sys
from typing import Optional, Sequence

import yaml

from .baselines import RRTConfig
from .bench import (
    PLANNERS,
    SuiteSpec,
    aggregate,
    compute_domain_kmin,
    load_suite,
    read_records,
    run_suite,
    sample_suite,
    validate_records,
    write_records,
    write_suite,
    write_summary,
)
from .planner import PlannerConfig
from .trajopt import KminInfeasibleError, OptimizerConfig

ENV_CONFIG = "KINOPLAN_CONFIG"

DEFAULT_CONFIG_TEXT = """\
# kinoplan harness configuration.
# Units: distances in world units, durations in seconds.
suite:
  domain: bars2d
  n_problems: 10
  seed: 0
  budgets: [1, 2, 4, 8]    # expansion thread budgets to sweep
  timeout: 60.0            # per-run wall clock cap (s)
  extent: 6.0              # half-extent of the square world
  n_bars: 2                # vertical bars separating chambers
  bar_width: 0.5
  gap_height: 2.0          # height of the one gap per bar
  resolution: 1.0          # lattice cell size
  step_magnitudes: [1.0]   # action step lengths per axis
  vel_limit: 2.0           # per-axis speed cap
  acc_limit: 8.0           # per-axis acceleration cap
  t_min: 1.0               # shortest admissible trajectory duration
  t_max: 30.0              # duration cap
  duration_factor: null    # set to scale t_max from each pair's kinematic minimum
  sample_budget: 4000      # rejection-sampling attempts before giving up
planner:
  w_h: 2.0                 # heuristic inflation weight
  tunnel_half_width: 1.0   # corridor half-width for fallback solves
  repair_retries: 1        # escalating re-solve attempts per edge
  heuristic_scale: 1.0
optimizer:
  w1: 1.0                  # duration weight
  w2: 1.0                  # path length weight
  num_ctrl: 8
  degree: 3
  validation_samples: 24
  max_iters: 10
  convergence_tol: 1.0e-8
  mu0: 10.0
  mu_growth: 10.0
  mu_max: 1.0e+9
  inner_maxiter: 80
  max_ctrl: 28
  length_eps: 1.0e-8
  feas_tol: 1.0e-8
rrt:
  step_size: 0.5
  max_samples: 5000
  goal_bias: 0.1
  seed: 0
kmin:
  half_width: 1.0
  cap: 12
planners: [pinsat, insat, search_then_optimize, pbirrt]
"""

DEFAULT_CONFIG = yaml.safe_load(DEFAULT_CONFIG_TEXT)


class ConfigError(Exception):
    pass


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def load_config(path: Optional[str]) -> dict:
    """Defaults deep-merged with the YAML file at `path` (or $KINOPLAN_CONFIG)."""
    if path is None:
        path = os.environ.get(ENV_CONFIG)
    if path is None:
        return copy.deepcopy(DEFAULT_CONFIG)
    try:
        with open(path) as fh:
            loaded = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    if loaded is None:
        loaded = {}
    if not isinstance(loaded, dict):
        raise ConfigError(f"malformed config {path}: top level must be a mapping")
    unknown = set(loaded) - set(DEFAULT_CONFIG)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    return _merge(DEFAULT_CONFIG, loaded)


def _build(section: dict, cls, label: str):
    try:
        return cls(**section)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {label} config: {exc}") from exc


def suite_spec(cfg: dict) -> SuiteSpec:
    section = dict(cfg["suite"])
    section["budgets"] = tuple(section["budgets"])
    section["step_magnitudes"] = tuple(section["step_magnitudes"])
    return _build(section, SuiteSpec, "suite")


def planner_config(cfg: dict, timeout: Optional[float] = None) -> PlannerConfig:
    optimizer = _build(cfg["optimizer"], OptimizerConfig, "optimizer")
    section = dict(cfg["planner"])
    section["optimizer"] = optimizer
    if timeout is not None:
        section["timeout"] = timeout
    return _build(section, PlannerConfig, "planner")


def rrt_config(cfg: dict) -> RRTConfig:
    return _build(cfg["rrt"], RRTConfig, "rrt")


# -- subcommands ---------------------------------------------------------------


def _cmd_init_config(args) -> int:
    with open(args.out, "w") as fh:
        fh.write(DEFAULT_CONFIG_TEXT)
    print(f"wrote {args.out}")
    return 0


def _cmd_generate(args) -> int:
    cfg = load_config(args.config)
    spec = suite_spec(cfg)
    if args.seed is not None:
        spec = SuiteSpec(**{**vars_of(spec), "seed": args.seed})
    if args.n is not None:
        spec = SuiteSpec(**{**vars_of(spec), "n_problems": args.n})
    problems = sample_suite(spec)
    write_suite(args.out, spec, problems)
    print(f"wrote {len(problems)} problems to {args.out}")
    return 0


def vars_of(spec: SuiteSpec) -> dict:
    from dataclasses import asdict

    return asdict(spec)


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    spec, problems = load_suite(args.suite)
    budgets = (
        tuple(int(b) for b in args.budgets.split(",")) if args.budgets else spec.budgets
    )
    planner_ids = args.planners.split(",") if args.planners else list(cfg["planners"])
    timeout = args.timeout if args.timeout is not None else spec.timeout
    records = run_suite(
        problems,
        planner_ids,
        budgets,
        planner_config(cfg, timeout=timeout),
        rrt=rrt_config(cfg),
        timeout=timeout,
        traj_dir=args.traj_dir,
    )
    write_records(args.out, records)
    solved = sum(1 for r in records if r.success)
    print(f"wrote {len(records)} records ({solved} successes) to {args.out}")
    return 0


def _cmd_report(args) -> int:
    records = read_records(args.records)
    if not records:
        raise ValueError(f"{args.records}: no records to aggregate")
    summary = aggregate(records)
    write_summary(args.out, summary)
    for g in summary["groups"]:
        mean_t = "n/a" if g["mean_time"] is None else f"{g['mean_time']:.3f}s"
        mean_c = "n/a" if g["mean_cost"] is None else f"{g['mean_cost']:.3f}"
        print(
            f"{g['planner']:>22} nt={g['budget']:<3} "
            f"success {100.0 * g['success_rate']:5.1f}% "
            f"time {mean_t:>9} cost {mean_c:>9}"
        )
    print(f"wrote summary to {args.out}")
    return 0


def _cmd_validate(args) -> int:
    records = read_records(args.records)
    failures = validate_records(records, samples=args.samples)
    checked = sum(1 for r in records if r.success)
    if failures:
        for rec, reason in failures:
            print(
                f"FAIL {rec.problem} {rec.planner} nt={rec.budget}: {reason}",
                file=sys.stderr,
            )
        print(f"{len(failures)}/{checked} stored trajectories failed", file=sys.stderr)
        return 2
    print(f"all {checked} stored trajectories pass re-validation")
    return 0


def _cmd_kmin(args) -> int:
    cfg = load_config(args.config)
    spec = suite_spec(cfg)
    k = compute_domain_kmin(
        spec, half_width=cfg["kmin"]["half_width"], cap=cfg["kmin"]["cap"]
    )
    print(json.dumps({"domain": spec.domain, "k_min": k}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kinoplan", description="kinodynamic planning benchmark harness"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init-config", help="write the default config file")
    p.add_argument("--out", default="kinoplan.yaml")
    p.set_defaults(func=_cmd_init_config)

    p = sub.add_parser("generate", help="sample a problem suite")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("run", help="run planners over a suite")
    p.add_argument("--config")
    p.add_argument("--suite", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--planners", help=f"comma list from {sorted(PLANNERS)}")
    p.add_argument("--budgets", help="comma list of thread budgets")
    p.add_argument("--timeout", type=float)
    p.add_argument("--traj-dir", help="directory for successful trajectories")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("report", help="aggregate records into a summary")
    p.add_argument("--records", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("validate", help="re-check stored trajectories")
    p.add_argument("--records", required=True)
    p.add_argument("--samples", type=int, default=240)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("kmin", help="print the domain's minimum spline order")
    p.add_argument("--config")
    p.set_defaults(func=_cmd_kmin)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KminInfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
