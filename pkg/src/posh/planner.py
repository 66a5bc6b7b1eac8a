"""Online replanning loop: optimize, extract the cheapest path, prune, step."""

from __future__ import annotations

import heapq
import time
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from posh.factor_graph import Factor, FactorKind, Graph, VariableId
from posh.graph_builder import ANCHOR_PRECISION, goal_id, start_id
from posh.homotopy import HSignature, signature
from posh.optimizer import LmParams, optimize


class PlanningFailure(RuntimeError):
    pass


def edge_costs(graph: Graph, sdf) -> dict:
    """Cost of traversing each forward GP edge at the current values.

    An edge's cost is its GP-prior cost, the interpolated obstacle costs on the
    same variable pair, and the obstacle cost at the destination.
    """
    packed = graph.packed()
    costs = packed.factor_costs(packed.gather(graph.variables), sdf)
    dest = defaultdict(float)
    interp = defaultdict(float)
    for f, c in zip(graph.factors, costs):
        if f.kind is FactorKind.OBSTACLE:
            dest[f.vars[0]] += c
        elif f.kind is FactorKind.INTERPOLATED_OBSTACLE:
            interp[f.vars] += c
    out = {}
    for f, c in zip(graph.factors, costs):
        if f.kind is FactorKind.GP_PRIOR:
            a, b = f.vars
            cost = float(c + interp[f.vars] + dest[b])
            if (a, b) not in out or cost < out[(a, b)]:
                out[(a, b)] = cost
    return out


def astar(successors, start, goal, heuristic=None):
    """A* over ``successors(v) -> [(w, cost)]``; returns ``(path, cost)``.

    Among equal-cost paths the lexicographically smallest node sequence wins.
    """
    heuristic = heuristic or (lambda v: 0.0)
    frontier = [(heuristic(start), 0.0, (start,))]
    closed = set()
    while frontier:
        _, g, path = heapq.heappop(frontier)
        v = path[-1]
        if v in closed:
            continue
        if v == goal:
            return list(path), g
        closed.add(v)
        for w, c in successors(v):
            if w not in closed:
                gw = g + c
                heapq.heappush(frontier, (gw + heuristic(w), gw, path + (w,)))
    raise PlanningFailure(f"no path from {start} to {goal}")


def extract_best_path(graph: Graph, sdf, current, goal) -> tuple[list, float]:
    costs = edge_costs(graph, sdf)
    succ = defaultdict(list)
    for (a, b), c in costs.items():
        succ[a].append((b, c))
    for v in succ:
        succ[v].sort()
    return astar(lambda v: succ.get(v, ()), VariableId(*current), VariableId(*goal))


def reachable(graph: Graph, root) -> set:
    succ = graph.successors()
    seen = {root}
    stack = [root]
    while stack:
        v = stack.pop()
        for w in succ[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


def prune_unreachable(graph: Graph, next_id) -> Graph:
    """Drop every variable not reachable forward in time from ``next_id``."""
    next_id = VariableId(*next_id)
    keep = reachable(graph, next_id)
    if goal_id(graph.n) not in keep:
        raise PlanningFailure(f"goal unreachable from {next_id}")
    graph.remove_variables(set(graph.variables) - keep)
    return graph


def restrict_to_path(graph: Graph, path) -> Graph:
    graph.remove_variables(set(graph.variables) - set(path))
    return graph


def reanchor(graph: Graph, vid, state, precision: float = ANCHOR_PRECISION) -> None:
    vid = VariableId(*vid)
    state = np.asarray(state, dtype=float).reshape(4)
    graph.remove_factors(lambda f: f.kind is FactorKind.ANCHOR and f.vars[0] == vid)
    graph.add_factor(Factor.anchor(vid, state, precision))
    graph.variables[vid] = state.copy()


@dataclass
class PlannerState:
    graph: Graph
    current: VariableId = field(default_factory=start_id)
    time_index: int = 0
    best_path: list = field(default_factory=list)
    last_signature: HSignature | None = None
    lm: LmParams = field(default_factory=LmParams)
    commit_after_first: bool = False

    @property
    def goal(self) -> VariableId:
        return goal_id(self.graph.n)

    @property
    def done(self) -> bool:
        return self.current == self.goal


@dataclass
class StepDiagnostics:
    time_index: int
    path_cost: float
    lm_iterations: int
    lm_initial_error: float
    lm_final_error: float
    optimize_time: float
    step_time: float
    best_path: list
    planned_positions: np.ndarray
    pruned_edges: list
    pruned_segments: np.ndarray = field(default_factory=lambda: np.zeros((0, 2, 2)))
    signature: HSignature | None = None
    switched: bool = False
    lm_trace: list = field(default_factory=list)


def plan_step(planner: PlannerState, sdf, measured, executed=None, obstacles=None, verbose: bool = False):
    """One iteration of the replanning loop.

    Returns ``(next_state, diagnostics)``. When ``obstacles`` is given the
    diagnostics carry the h-signature of ``executed`` followed by the planned
    remainder.
    """
    if planner.done:
        raise PlanningFailure("planner is already at the goal")
    t0 = time.perf_counter()
    graph = planner.graph
    reanchor(graph, planner.current, measured)

    t_opt = time.perf_counter()
    _, stats = optimize(graph, sdf, planner.lm, verbose=verbose)
    optimize_time = time.perf_counter() - t_opt

    path, cost = extract_best_path(graph, sdf, planner.current, planner.goal)
    planned = np.array([graph.variables[v][:2] for v in path])
    if planner.commit_after_first and planner.time_index == 0:
        restrict_to_path(graph, path)

    before = graph.edges()
    nxt = path[1]
    reach = reachable(graph, nxt)
    pruned = [(a, b) for a, b in before if a not in reach or b not in reach]
    segments = np.array([[graph.variables[a][:2], graph.variables[b][:2]] for a, b in pruned]).reshape(-1, 2, 2)
    prune_unreachable(graph, nxt)

    sig = None
    switched = False
    if obstacles is not None:
        prefix = np.asarray(executed if executed is not None else planned[:1], dtype=float).reshape(-1, 2)
        full = np.vstack([prefix, planned[1:]])
        sig = signature(full, obstacles)
        switched = planner.last_signature is not None and sig != planner.last_signature
        planner.last_signature = sig

    planner.best_path = path[1:]
    planner.current = nxt
    planner.time_index += 1
    next_state = graph.variables[nxt].copy()
    diag = StepDiagnostics(
        time_index=planner.time_index - 1,
        path_cost=cost,
        lm_iterations=stats.iterations,
        lm_initial_error=stats.initial_error,
        lm_final_error=stats.final_error,
        optimize_time=optimize_time,
        step_time=time.perf_counter() - t0,
        best_path=path,
        planned_positions=planned,
        pruned_edges=pruned,
        pruned_segments=segments,
        signature=sig,
        switched=switched,
        lm_trace=stats.trace,
    )
    return next_state, diag
