"""Multi-chain graph construction from half-ellipse initializations."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from posh.factor_graph import Factor, Graph, VariableId
from posh.gp_model import SupportState

ANCHOR_PRECISION = 1e6


@dataclass
class BuilderParams:
    n_chains: int = 4
    n_steps: int = 20
    interconnection_ratio: float = 1.0
    interconnection_qc: float | None = None  # None -> same as qc
    b_max: float | None = None  # None -> half the semi-major axis
    qc: float = 1.0
    dt: float = 0.5
    eps: float = 0.8
    sigma_obs: float = 0.1
    r_robot: float = 0.5
    n_interp: int = 4

    def __post_init__(self):
        if self.n_chains < 1:
            raise ValueError("n_chains must be >= 1")
        if self.n_steps < 2:
            raise ValueError("n_steps must be >= 2")
        if not 0.0 <= self.interconnection_ratio <= 1.0:
            raise ValueError("interconnection_ratio must lie in [0, 1]")
        if self.interconnection_qc is not None and not self.interconnection_qc > 0:
            raise ValueError("interconnection_qc must be positive")
        if not (self.qc > 0 and self.dt > 0 and self.sigma_obs > 0):
            raise ValueError("qc, dt and sigma_obs must be positive")
        if self.eps < 0 or self.r_robot < 0 or self.n_interp < 0:
            raise ValueError("eps, r_robot and n_interp must be non-negative")
        if self.b_max is not None and self.b_max < 0:
            raise ValueError("b_max must be non-negative")

    @property
    def q_interconnect(self) -> float:
        return self.qc if self.interconnection_qc is None else self.interconnection_qc

    @property
    def taus(self) -> tuple:
        k = self.n_interp
        return tuple(self.dt * (j + 1) / (k + 1) for j in range(k))

    def to_dict(self) -> dict:
        return asdict(self)


def minor_radii(n_chains: int, b_max: float) -> np.ndarray:
    if n_chains == 1:
        return np.zeros(1)
    return np.linspace(-b_max, b_max, n_chains)


def start_id() -> VariableId:
    return VariableId(0, 0)


def goal_id(n: int) -> VariableId:
    return VariableId(0, n)


def chain_positions(start, goal, b: float, n: int) -> np.ndarray:
    """Points on the half-ellipse through start and goal with signed minor radius ``b``.

    Progress along the start-goal axis is uniform in the time index, so the
    ``b = 0`` chain is a constant-velocity straight line.
    """
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)
    center = 0.5 * (start + goal)
    axis = goal - start
    a = 0.5 * np.linalg.norm(axis)
    u = axis / (2 * a)
    normal = np.array([-u[1], u[0]])
    c = -1.0 + 2.0 * np.arange(n + 1) / n  # cos(theta), from -1 at start to 1 at goal
    s = np.sqrt(np.clip(1.0 - c * c, 0.0, None))
    p = center + a * c[:, None] * u + b * s[:, None] * normal
    p[0], p[-1] = start, goal
    return p


def _edge_factors(graph: Graph, a, b, qc: float, params: BuilderParams) -> None:
    graph.add_factor(Factor.gp_prior(a, b, qc))
    if params.n_interp:
        graph.add_factor(Factor.interpolated(a, b, params.taus, params.eps, params.sigma_obs, params.r_robot))


def build_chains(start, goal, params: BuilderParams) -> Graph:
    """Graph of ``n_chains`` half-ellipse chains sharing start and goal."""
    start = start if isinstance(start, SupportState) else SupportState(start, np.zeros(2))
    goal = goal if isinstance(goal, SupportState) else SupportState(goal, np.zeros(2))
    dist = np.linalg.norm(goal.position - start.position)
    if dist == 0:
        raise ValueError("start and goal positions coincide")
    n, dt = params.n_steps, params.dt
    b_max = 0.25 * dist if params.b_max is None else params.b_max
    graph = Graph(n=n, dt=dt)
    s, g = start_id(), goal_id(n)
    graph.add_variable(s, start.vector)
    graph.add_variable(g, goal.vector)

    for j, b in enumerate(minor_radii(params.n_chains, b_max)):
        p = chain_positions(start.position, goal.position, b, n)
        v = np.zeros_like(p)
        v[1:-1] = (p[2:] - p[:-2]) / (2 * dt)
        for i in range(1, n):
            graph.add_variable((j, i), np.concatenate([p[i], v[i]]))
        ids = [s] + [VariableId(j, i) for i in range(1, n)] + [g]
        for a, bb in zip(ids[:-1], ids[1:]):
            _edge_factors(graph, a, bb, params.qc, params)

    for v in sorted(graph.variables):
        graph.add_factor(Factor.obstacle(v, params.eps, params.sigma_obs, params.r_robot))
    graph.add_factor(Factor.anchor(s, start.vector, ANCHOR_PRECISION))
    graph.add_factor(Factor.anchor(g, goal.vector, ANCHOR_PRECISION))
    return graph


def interconnection_stride(ratio: float) -> int | None:
    if ratio <= 0:
        return None
    return max(1, int(round(1.0 / ratio)))


def interconnection_times(n: int, ratio: float) -> list[int]:
    """Time indices ``i`` whose outgoing edges get crossed between chains.

    Indices whose crossed edges would touch the shared start or goal are
    skipped since those edges already exist as chain edges.
    """
    k = interconnection_stride(ratio)
    if k is None:
        return []
    return [i for i in range(1, n - 1) if i % k == 0]


def interconnect(graph: Graph, params: BuilderParams) -> Graph:
    """Add crossed GP edges between chains adjacent in minor-radius order."""
    n = graph.n
    for j in range(params.n_chains - 1):
        for i in interconnection_times(n, params.interconnection_ratio):
            for a, b in (((j, i), (j + 1, i + 1)), ((j + 1, i), (j, i + 1))):
                _edge_factors(graph, VariableId(*a), VariableId(*b), params.q_interconnect, params)
    return graph


def build_graph(start, goal, params: BuilderParams) -> Graph:
    return interconnect(build_chains(start, goal, params), params)
