"""Command line: ``posh {plan,bench,sweep-chains,render}``.

``--config`` takes a run config (see :mod:`posh.config`) or a bare environment
file, in which case default planner settings are used. Scalar flags override
the corresponding config fields.

Exit status is 0 on completion (a trial failing its task still counts), 2 on
configuration errors and 1 if a trial raised.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from posh.config import ConfigError, RunConfig, load_run_config
from posh.environment import environment_from_dict
from posh.render import render_frame
from posh.simulation import (
    VARIANTS,
    monte_carlo_configs,
    run_trial,
    run_trials,
    tabulate,
)

log = logging.getLogger("posh")

EXIT_OK, EXIT_CRASH, EXIT_CONFIG = 0, 1, 2


def _load(path: str) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"config not found: {p}")
    try:
        d = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: {exc}") from exc
    if isinstance(d, dict) and "environments" not in d and "workspace" in d:
        env = environment_from_dict(d, source=str(p))
        return RunConfig(name=env.name, environments=[env], source=str(p))
    return load_run_config(p)


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "runs", None) is not None:
        if args.runs < 1:
            raise ConfigError("--runs must be >= 1")
        cfg.runs = args.runs
    if getattr(args, "variant", None) is not None:
        cfg.variants = [args.variant]
    if getattr(args, "workers", None) is not None:
        cfg.workers = args.workers
    chains = getattr(args, "chains", None)
    if chains is not None:
        try:
            cfg.chain_counts = [int(k) for k in chains.split(",")]
        except ValueError as exc:
            raise ConfigError(f"--chains: {exc}") from exc
        if not cfg.chain_counts or min(cfg.chain_counts) < 1:
            raise ConfigError("chain counts must be positive")
    steps = getattr(args, "steps", None)
    if steps:
        try:
            args.steps = [int(k) for k in steps.split(",")]
        except ValueError as exc:
            raise ConfigError(f"--steps: {exc}") from exc
    if not cfg.environments:
        raise ConfigError("config lists no environments")
    return cfg


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_jsonl(path: Path, rows) -> None:
    with open(path, "w") as f:
        for row in rows:
            f.write(json.dumps(row, sort_keys=True) + "\n")


def _frames(result, env, out: Path, stem: str) -> list[Path]:
    paths = []
    for world, graph, executed, diag in result.frames:
        path = out / f"{stem}_t{diag.time_index:03d}.svg"
        render_frame(
            world,
            graph,
            executed,
            diag.planned_positions,
            path,
            goal=env.goal,
            pruned_edges=diag.pruned_segments,
            bounds=[env.workspace_lo, env.workspace_hi],
            robot_radius=env.robot_radius,
            title=f"{env.name} t={diag.time_index}",
        )
        paths.append(path)
    return paths


def cmd_plan(args, cfg: RunConfig) -> int:
    env = cfg.environments[0]
    trial = replace(cfg.trial_configs(cfg.variants[:1])[0], seed=cfg.seed)
    result = run_trial(trial, record_frames=args.frames, verbose=args.verbose)
    out = _out_dir(args)
    stem = f"plan_{env.name}_{trial.variant}_{trial.seed}"
    summary = result.to_dict()
    steps = summary.pop("steps")
    _write_jsonl(out / f"{stem}.jsonl", steps + [{"summary": summary}])
    if args.frames:
        (out / "frames").mkdir(exist_ok=True)
        _frames(result, env, out / "frames", stem)
    status = "success" if result.success else "failure"
    print(f"{env.name} {trial.variant} seed={trial.seed}: {status}, {result.total_steps} steps, "
          f"distance {result.distance:.2f} m, {result.collision_steps} collision steps")
    return EXIT_OK


def _bench_results(cfg: RunConfig, variants=None, builder=None):
    base = cfg.trial_configs(variants)
    if builder is not None:
        base = [replace(c, builder=builder) for c in base]
    return run_trials(monte_carlo_configs(base, cfg.runs, cfg.seed), cfg.workers)


def cmd_bench(args, cfg: RunConfig) -> int:
    results = _bench_results(cfg)
    table = tabulate(results, timing=cfg.report_timing)
    out = _out_dir(args)
    (out / f"{cfg.name}_metrics.csv").write_text(table.to_csv())
    (out / f"{cfg.name}_by_environment.csv").write_text(table.by_environment_csv())
    _write_jsonl(out / f"{cfg.name}_trials.jsonl", (r.to_dict() for r in results))
    print(table.pretty())
    return EXIT_OK


def _chain_label(k: int) -> str:
    return f"N_I={k}"


def cmd_sweep_chains(args, cfg: RunConfig) -> int:
    results = []
    for k in cfg.chain_counts:
        rs = _bench_results(cfg, ["POSH"], replace(cfg.builder, n_chains=k))
        results.extend((_chain_label(k), r) for r in rs)
    labels = {id(r): lab for lab, r in results}
    table = tabulate(
        [r for _, r in results],
        column=lambda r: labels[id(r)],
        columns=[_chain_label(k) for k in cfg.chain_counts],
        timing=cfg.report_timing,
    )
    out = _out_dir(args)
    (out / f"{cfg.name}_chains.csv").write_text(table.to_csv())
    _write_jsonl(out / f"{cfg.name}_chains_trials.jsonl", ({"column": lab, **r.to_dict()} for lab, r in results))
    print(table.pretty())
    return EXIT_OK


def cmd_render(args, cfg: RunConfig) -> int:
    env = cfg.environments[0]
    trial = replace(cfg.trial_configs(cfg.variants[:1])[0], seed=cfg.seed)
    result = run_trial(trial, record_frames=True)
    out = _out_dir(args)
    if args.steps:
        wanted = set(args.steps)
        result.frames = [f for f in result.frames if f[3].time_index in wanted]
    paths = _frames(result, env, out, f"{env.name}_{trial.variant}_{trial.seed}")
    for p in paths:
        print(p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="posh", description="Multi-chain factor-graph motion planning experiments.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, runs=False):
        p.add_argument("--config", required=True, help="run config or environment JSON")
        p.add_argument("--seed", type=int, help="trial seed (plan/render) or master seed (bench/sweep)")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--variant", choices=VARIANTS)
        p.add_argument("--verbose", action="store_true")
        if runs:
            p.add_argument("--runs", type=int, help="Monte-Carlo runs per environment")
            p.add_argument("--workers", type=int, help="worker processes")

    p = sub.add_parser("plan", help="run one closed-loop trial")
    common(p)
    p.add_argument("--frames", action="store_true", help="write an SVG per step")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("bench", help="Monte-Carlo comparison of the variants")
    common(p, runs=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("sweep-chains", help="POSH success against the number of chains")
    common(p, runs=True)
    p.add_argument("--chains", help="comma-separated chain counts, e.g. 2,4,6")
    p.set_defaults(func=cmd_sweep_chains)

    p = sub.add_parser("render", help="SVG snapshots of one trial")
    common(p)
    p.add_argument("--steps", help="comma-separated time indices (default: all)")
    p.set_defaults(func=cmd_render)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        cfg = _apply_overrides(_load(args.config), args)
        _out_dir(args)
    except (ConfigError, OSError, KeyError, TypeError, ValueError) as exc:
        print(f"posh: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args, cfg)
    except OSError as exc:
        print(f"posh: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # a trial crashed
        log.exception("trial crashed")
        print(f"posh: crash: {exc!r}", file=sys.stderr)
        return EXIT_CRASH


if __name__ == "__main__":
    sys.exit(main())
