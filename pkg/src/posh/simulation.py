"""Closed-loop trials with execution/localization noise and Monte-Carlo metrics."""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from posh.environment import EnvironmentConfig, compute_sdf, step_world
from posh.gp_model import SupportState, gp_interpolate
from posh.graph_builder import BuilderParams, build_chains, build_graph
from posh.homotopy import count_switches
from posh.optimizer import LmParams
from posh.planner import PlannerState, PlanningFailure, plan_step

log = logging.getLogger(__name__)

VARIANTS = ("POSH", "GRAPH_THEN_CHAIN", "SINGLE_CHAIN")
N_COLLISION_SUBSTEPS = 4

METRIC_ROWS = [
    ("success_rate", "Success Rate (%)"),
    ("collision_intensity", "Collision Intensity (%)"),
    ("distance", "Distance (m)"),
    ("switches", "Homotopy Switches"),
]
TIMING_ROWS = [
    ("time_t0", "Avg. Comp. Time (s) at t=0"),
    ("time_t", "Avg. Comp. Time (s) at any t>0"),
]


@dataclass
class TrialConfig:
    environment: EnvironmentConfig
    variant: str = "POSH"
    builder: BuilderParams = field(default_factory=BuilderParams)
    lm: LmParams = field(default_factory=LmParams)
    sigma_exec: float = 0.1
    sigma_loc: float = 0.05
    seed: int = 0
    goal_tolerance: float = 0.5

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.sigma_exec < 0 or self.sigma_loc < 0:
            raise ValueError("noise levels must be non-negative")


@dataclass
class StepRecord:
    time_index: int
    path_cost: float
    lm_iterations: int
    signature: str
    switched: bool
    collided: bool
    optimize_time: float
    step_time: float

    def to_dict(self, timing: bool = True) -> dict:
        d = {
            "time_index": self.time_index,
            "path_cost": self.path_cost,
            "lm_iterations": self.lm_iterations,
            "signature": self.signature,
            "switch": self.switched,
            "collided": self.collided,
        }
        if timing:
            d["optimize_time"] = self.optimize_time
            d["step_time"] = self.step_time
        return d


@dataclass
class TrialResult:
    environment: str
    variant: str
    seed: int
    success: bool
    collision_steps: int
    total_steps: int
    distance: float
    switches: int
    step_times: list
    executed_path: np.ndarray
    signatures: list
    planning_failure: bool = False
    failure_reason: str = ""
    steps: list = field(default_factory=list)
    frames: list = field(default_factory=list)

    @property
    def collision_intensity(self) -> float:
        if self.total_steps == 0:
            return 0.0
        return 100.0 * self.collision_steps / self.total_steps

    def to_dict(self, timing: bool = True) -> dict:
        d = {
            "environment": self.environment,
            "variant": self.variant,
            "seed": self.seed,
            "success": self.success,
            "collision_steps": self.collision_steps,
            "total_steps": self.total_steps,
            "distance": self.distance,
            "switches": self.switches,
            "planning_failure": self.planning_failure,
            "failure_reason": self.failure_reason,
            "executed_path": np.asarray(self.executed_path).tolist(),
            "signatures": list(self.signatures),
            "steps": [s.to_dict(timing) for s in self.steps],
        }
        if timing:
            d["step_times"] = list(self.step_times)
        return d


def rng_streams(seed: int) -> dict:
    """Independent counter-based generators per noise source."""
    names = ("obstacles", "execution", "localization")
    children = np.random.SeedSequence(int(seed)).spawn(len(names))
    return {n: np.random.Generator(np.random.Philox(c)) for n, c in zip(names, children)}


def _builder_for(config: TrialConfig) -> BuilderParams:
    p = replace(config.builder, r_robot=config.environment.robot_radius)
    if config.variant == "SINGLE_CHAIN":
        p = replace(p, n_chains=1, interconnection_ratio=0.0)
    return p


def segment_collides(prev, new, sdf, r_robot: float, dt: float, qc: float) -> bool:
    """Clearance check at the new state and at interpolated sub-states."""
    taus = [dt * (k + 1) / (N_COLLISION_SUBSTEPS + 1) for k in range(N_COLLISION_SUBSTEPS)]
    pts = [gp_interpolate(prev, new, tau, dt, qc)[0].position for tau in taus]
    pts.append(np.asarray(new)[:2])
    d, _ = sdf.query(np.array(pts))
    return bool(np.any(d - r_robot < 0))


def _run(config: TrialConfig, record_frames: bool = False, verbose: bool = False) -> TrialResult:
    env = config.environment
    params = _builder_for(config)
    rngs = rng_streams(config.seed)
    env = replace(env, motion=replace(env.motion, dt=params.dt))
    world = env.initial_world()
    sdf = compute_sdf(world.obstacles, env.grid)

    start = world.robot_true
    goal = SupportState(env.goal, np.zeros(2))
    if config.variant == "SINGLE_CHAIN":
        graph = build_chains(start, goal, params)
    else:
        graph = build_graph(start, goal, params)
    planner = PlannerState(graph, lm=config.lm, commit_after_first=config.variant == "GRAPH_THEN_CHAIN")

    true_state = start.vector
    measured = true_state.copy()
    executed = [true_state[:2].copy()]
    signatures, step_times, steps, frames = [], [], [], []
    collision_steps = 0
    failure, reason = False, ""

    for _ in range(params.n_steps):
        try:
            nxt, diag = plan_step(planner, sdf, measured, executed, world.obstacles, verbose=verbose)
        except PlanningFailure as exc:
            failure, reason = True, str(exc)
            break
        if record_frames:
            frames.append((world, planner.graph.copy(), np.array(executed), diag))
        new_true = nxt.copy()
        new_true[:2] += rngs["execution"].normal(0.0, config.sigma_exec, size=2) if config.sigma_exec else 0.0
        world = step_world(world, env, rngs["obstacles"])
        world.robot_true = SupportState.from_vector(new_true)
        sdf = compute_sdf(world.obstacles, env.grid)
        collided = segment_collides(true_state, new_true, sdf, params.r_robot, params.dt, params.qc)
        collision_steps += collided
        true_state = new_true
        executed.append(true_state[:2].copy())
        measured = true_state.copy()
        if config.sigma_loc:
            measured[:2] += rngs["localization"].normal(0.0, config.sigma_loc, size=2)
        signatures.append(str(diag.signature))
        step_times.append(diag.step_time)
        steps.append(
            StepRecord(
                diag.time_index,
                diag.path_cost,
                diag.lm_iterations,
                str(diag.signature),
                diag.switched,
                collided,
                diag.optimize_time,
                diag.step_time,
            )
        )

    path = np.array(executed)
    distance = float(np.sum(np.linalg.norm(np.diff(path, axis=0), axis=1)))
    at_goal = bool(np.linalg.norm(path[-1] - env.goal) <= config.goal_tolerance)
    success = (not failure) and collision_steps == 0 and at_goal
    return TrialResult(
        environment=env.name,
        variant=config.variant,
        seed=config.seed,
        success=success,
        collision_steps=collision_steps,
        total_steps=len(steps),
        distance=distance,
        switches=count_switches(signatures),
        step_times=step_times,
        executed_path=path,
        signatures=signatures,
        planning_failure=failure,
        failure_reason=reason,
        steps=steps,
        frames=frames,
    )


def run_trial(config: TrialConfig, record_frames: bool = False, verbose: bool = False) -> TrialResult:
    """Closed-loop execution of ``config.variant`` on its environment."""
    return _run(config, record_frames, verbose)


def baseline_single_chain(config: TrialConfig, **kw) -> TrialResult:
    return _run(replace(config, variant="SINGLE_CHAIN"), **kw)


def baseline_graph_then_chain(config: TrialConfig, **kw) -> TrialResult:
    return _run(replace(config, variant="GRAPH_THEN_CHAIN"), **kw)


def derive_seeds(master_seed: int, n_runs: int) -> list:
    ss = np.random.SeedSequence(int(master_seed))
    return [int(c.generate_state(1, np.uint64)[0]) for c in ss.spawn(n_runs)]


def _mean(xs) -> float:
    xs = list(xs)
    return float(math.fsum(xs) / len(xs)) if xs else float("nan")


def aggregate(results) -> dict:
    """Table metrics for a group of trials (order independent)."""
    rs = sorted(results, key=lambda r: (r.environment, r.variant, r.seed))
    collided = [r.collision_intensity for r in rs if r.collision_steps > 0]
    completed = [r.distance for r in rs if not r.planning_failure]
    return {
        "runs": len(rs),
        "success_rate": 100.0 * _mean(r.success for r in rs),
        "collision_intensity": _mean(collided) if collided else 0.0,
        "distance": _mean(completed),
        "switches": _mean(r.switches for r in rs),
        "time_t0": _mean(r.step_times[0] for r in rs if r.step_times),
        "time_t": _mean(_mean(r.step_times[1:]) for r in rs if len(r.step_times) > 1),
    }


@dataclass
class MetricsTable:
    """Metrics per column label (variant or chain count), plus per-environment rows."""

    columns: list
    metrics: dict
    by_environment: dict = field(default_factory=dict)
    timing: bool = False
    results: list = field(default_factory=list)

    def rows(self):
        spec = METRIC_ROWS + (TIMING_ROWS if self.timing else [])
        for key, label in spec:
            yield label, [self.metrics[c][key] for c in self.columns]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric"] + list(self.columns))
        for label, vals in self.rows():
            w.writerow([label] + [_fmt(v) for v in vals])
        return buf.getvalue()

    def by_environment_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        keys = ["runs"] + [k for k, _ in METRIC_ROWS + TIMING_ROWS]
        w.writerow(["environment", "column"] + keys)
        for (env, col), m in sorted(self.by_environment.items()):
            w.writerow([env, col] + [_fmt(m[k]) for k in keys])
        return buf.getvalue()

    def pretty(self) -> str:
        labels = [label for label, _ in self.rows()]
        width = max(len(s) for s in labels)
        colw = max(12, *(len(str(c)) for c in self.columns))
        lines = [" " * width + " | " + " | ".join(str(c).rjust(colw) for c in self.columns)]
        lines.append("-" * len(lines[0]))
        for label, vals in self.rows():
            lines.append(label.rjust(width) + " | " + " | ".join(_fmt(v).rjust(colw) for v in vals))
        return "\n".join(lines)


def _fmt(v) -> str:
    if isinstance(v, int):
        return str(v)
    if v != v:
        return "nan"
    return f"{v:.4f}"


def _run_packed(args):
    config, = args
    return run_trial(config)


def run_trials(configs, workers: int = 1) -> list:
    configs = list(configs)
    if workers > 1 and len(configs) > 1:
        with ProcessPoolExecutor(workers) as ex:
            return list(ex.map(_run_packed, [(c,) for c in configs]))
    return [run_trial(c) for c in configs]


def monte_carlo_configs(base_configs, n_runs: int, master_seed: int = 0) -> list:
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    seeds = derive_seeds(master_seed, n_runs)
    return [replace(c, seed=s) for c in base_configs for s in seeds]


def tabulate(results, column=lambda r: r.variant, columns=None, timing: bool = False) -> MetricsTable:
    groups, by_env = {}, {}
    for r in results:
        groups.setdefault(column(r), []).append(r)
        by_env.setdefault((r.environment, column(r)), []).append(r)
    if columns is None:
        columns = [c for c in VARIANTS if c in groups] + sorted(c for c in groups if c not in VARIANTS)
    return MetricsTable(
        columns=list(columns),
        metrics={c: aggregate(groups.get(c, [])) for c in columns},
        by_environment={k: aggregate(v) for k, v in by_env.items()},
        timing=timing,
        results=list(results),
    )


def run_monte_carlo(configs, n_runs: int, master_seed: int = 0, workers: int = 1, timing: bool = False) -> MetricsTable:
    """Run every base config ``n_runs`` times with seeds derived from ``master_seed``."""
    trials = monte_carlo_configs(configs, n_runs, master_seed)
    return tabulate(run_trials(trials, workers), timing=timing)
