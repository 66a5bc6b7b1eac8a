"""Dynamic 2D worlds of axis-aligned boxes and their signed distance fields."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import ndimage

from posh.gp_model import SupportState

MOTION_MODELS = ("static", "patrol", "random")


@dataclass(frozen=True)
class Obstacle:
    center: np.ndarray
    half_extents: np.ndarray
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(2))
    id: int = 0
    motion: str = "static"

    def __post_init__(self):
        for name in ("center", "half_extents", "velocity"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).reshape(2))
        if np.any(self.half_extents <= 0):
            raise ValueError(f"obstacle {self.id}: half_extents must be positive")
        if self.motion not in MOTION_MODELS:
            raise ValueError(f"obstacle {self.id}: unknown motion model {self.motion!r}")

    def contains(self, points: np.ndarray) -> np.ndarray:
        d = np.abs(np.asarray(points, dtype=float) - self.center)
        return np.all(d <= self.half_extents, axis=-1)


@dataclass(frozen=True)
class GridSpec:
    """Regular grid; cell ``(i, j)`` is centred at ``origin + (i, j) * cell_size``."""

    origin: np.ndarray
    cell_size: float
    dims: tuple[int, int]

    def __post_init__(self):
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float).reshape(2))
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if not self.cell_size > 0:
            raise ValueError("cell_size must be positive")
        if len(self.dims) != 2 or min(self.dims) < 2:
            raise ValueError(f"grid dims must be >= 2 per axis, got {self.dims}")

    @classmethod
    def covering(cls, lo, hi, cell_size: float) -> "GridSpec":
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        dims = np.floor((hi - lo) / cell_size + 1e-9).astype(int) + 1
        return cls(lo, cell_size, (max(int(dims[0]), 2), max(int(dims[1]), 2)))

    @property
    def diameter(self) -> float:
        return self.cell_size * math.hypot(*self.dims)

    def cell_centers(self) -> np.ndarray:
        ix, iy = np.meshgrid(np.arange(self.dims[0]), np.arange(self.dims[1]), indexing="ij")
        return self.origin + self.cell_size * np.stack([ix, iy], axis=-1)

    @property
    def upper(self) -> np.ndarray:
        return self.origin + self.cell_size * (np.asarray(self.dims) - 1)


@dataclass(frozen=True)
class SignedDistanceField:
    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.spec.dims:
            raise ValueError(f"values shape {v.shape} does not match grid {self.spec.dims}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def query(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized bilinear lookup; ``points`` is ``(..., 2)``.

        Outside the grid the value keeps decreasing with the distance to the
        grid so that the gradient points back inside.
        """
        p = np.asarray(points, dtype=float)
        if np.any(np.isnan(p)):
            raise ValueError("NaN query point")
        spec = self.spec
        nx, ny = spec.dims
        u = (p - spec.origin) / spec.cell_size
        hi = np.array([nx - 1, ny - 1], dtype=float)
        uc = np.clip(u, 0.0, hi)
        i0 = np.minimum(np.floor(uc).astype(np.intp), np.array([nx - 2, ny - 2]))
        f = uc - i0
        fx, fy = f[..., 0], f[..., 1]
        ix, iy = i0[..., 0], i0[..., 1]
        v = self.values
        v00 = v[ix, iy]
        v10 = v[ix + 1, iy]
        v01 = v[ix, iy + 1]
        v11 = v[ix + 1, iy + 1]
        d = (1 - fx) * (1 - fy) * v00 + fx * (1 - fy) * v10 + (1 - fx) * fy * v01 + fx * fy * v11
        gx = ((1 - fy) * (v10 - v00) + fy * (v11 - v01)) / spec.cell_size
        gy = ((1 - fx) * (v01 - v00) + fx * (v11 - v10)) / spec.cell_size
        grad = np.stack([gx, gy], axis=-1)

        outside = u != uc
        if np.any(outside):
            grad = np.where(outside, 0.0, grad)
            off = (u - uc) * spec.cell_size
            dist = np.linalg.norm(off, axis=-1)
            safe = np.where(dist > 0, dist, 1.0)
            d = d - dist
            grad = grad - off / safe[..., None]
        return d, grad


def occupancy(obstacles, spec: GridSpec) -> np.ndarray:
    """Cells whose centre lies inside (or on the boundary of) some box."""
    occ = np.zeros(spec.dims, dtype=bool)
    dims = np.asarray(spec.dims)
    for ob in obstacles:
        lo = (ob.center - ob.half_extents - spec.origin) / spec.cell_size
        hi = (ob.center + ob.half_extents - spec.origin) / spec.cell_size
        i0 = np.maximum(np.ceil(lo - 1e-9).astype(int), 0)
        i1 = np.minimum(np.floor(hi + 1e-9).astype(int), dims - 1)
        if np.any(i1 < i0):
            continue
        # the slack above only widens the candidate range; membership is exact
        xs = spec.origin[0] + spec.cell_size * np.arange(i0[0], i1[0] + 1)
        ys = spec.origin[1] + spec.cell_size * np.arange(i0[1], i1[1] + 1)
        inx = np.abs(xs - ob.center[0]) <= ob.half_extents[0]
        iny = np.abs(ys - ob.center[1]) <= ob.half_extents[1]
        occ[i0[0] : i1[0] + 1, i0[1] : i1[1] + 1] |= inx[:, None] & iny[None, :]
    return occ


def sdf_from_occupancy(occ: np.ndarray, spec: GridSpec) -> SignedDistanceField:
    """Exact Euclidean signed distance between cell centres.

    Free cells hold the distance to the nearest occupied cell, occupied cells
    the negated distance to the nearest free cell; both are clamped to the
    grid diameter.
    """
    occ = np.asarray(occ, dtype=bool)
    diam = spec.diameter
    if not occ.any():
        return SignedDistanceField(spec, np.full(spec.dims, diam))
    if occ.all():
        return SignedDistanceField(spec, np.full(spec.dims, -diam))
    outside = ndimage.distance_transform_edt(~occ)
    inside = ndimage.distance_transform_edt(occ)
    values = np.where(occ, -inside, outside) * spec.cell_size
    return SignedDistanceField(spec, np.clip(values, -diam, diam))


def compute_sdf(obstacles, spec: GridSpec) -> SignedDistanceField:
    return sdf_from_occupancy(occupancy(obstacles, spec), spec)


def sdf_query(sdf: SignedDistanceField, point) -> tuple[float, np.ndarray]:
    d, g = sdf.query(np.asarray(point, dtype=float).reshape(2))
    return float(d), g


@dataclass
class MotionConfig:
    dt: float = 0.5
    patrol_bounds: tuple[float, float] = (10.0, 20.0)
    a_max: float = 0.5
    v_max: float = 1.0


@dataclass
class EnvironmentConfig:
    name: str
    kind: str
    workspace_lo: np.ndarray
    workspace_hi: np.ndarray
    grid: GridSpec
    obstacles: list[Obstacle]
    start: np.ndarray
    goal: np.ndarray
    robot_radius: float = 0.5
    motion: MotionConfig = field(default_factory=MotionConfig)
    source: str | None = None

    def initial_world(self) -> "WorldState":
        robot = SupportState(self.start, np.zeros(2))
        return WorldState(list(self.obstacles), robot, 0)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "workspace": {"lo": self.workspace_lo.tolist(), "hi": self.workspace_hi.tolist()},
            "grid": {
                "origin": self.grid.origin.tolist(),
                "cell_size": self.grid.cell_size,
                "dims": list(self.grid.dims),
            },
            "robot_radius": self.robot_radius,
            "start": self.start.tolist(),
            "goal": self.goal.tolist(),
            "motion": {
                "dt": self.motion.dt,
                "patrol_bounds": list(self.motion.patrol_bounds),
                "a_max": self.motion.a_max,
                "v_max": self.motion.v_max,
            },
            "obstacles": [
                {
                    "id": ob.id,
                    "center": ob.center.tolist(),
                    "half_extents": ob.half_extents.tolist(),
                    "velocity": ob.velocity.tolist(),
                    "motion": ob.motion,
                }
                for ob in self.obstacles
            ],
        }


def environment_from_dict(d: dict, source: str | None = None) -> EnvironmentConfig:
    ws = d["workspace"]
    lo = np.asarray(ws["lo"], dtype=float)
    hi = np.asarray(ws["hi"], dtype=float)
    g = d.get("grid", {})
    if "dims" in g:
        grid = GridSpec(g.get("origin", lo), g["cell_size"], g["dims"])
    else:
        grid = GridSpec.covering(lo, hi, g.get("cell_size", 0.1))
    obstacles = [
        Obstacle(o["center"], o["half_extents"], o.get("velocity", (0.0, 0.0)), int(o["id"]), o.get("motion", "static"))
        for o in d.get("obstacles", [])
    ]
    ids = [o.id for o in obstacles]
    if len(set(ids)) != len(ids):
        raise ValueError("obstacle ids must be unique")
    kind = d.get("kind", "static")
    if kind not in ("static", "narrow_passage", "forest"):
        raise ValueError(f"unknown environment kind {kind!r}")
    m = d.get("motion", {})
    motion = MotionConfig(
        dt=m.get("dt", 0.5),
        patrol_bounds=tuple(m.get("patrol_bounds", (10.0, 20.0))),
        a_max=m.get("a_max", 0.5),
        v_max=m.get("v_max", 1.0),
    )
    return EnvironmentConfig(
        name=d.get("name", "environment"),
        kind=kind,
        workspace_lo=lo,
        workspace_hi=hi,
        grid=grid,
        obstacles=obstacles,
        start=np.asarray(d["start"], dtype=float),
        goal=np.asarray(d["goal"], dtype=float),
        robot_radius=float(d.get("robot_radius", 0.5)),
        motion=motion,
        source=source,
    )


def load_environment(path) -> EnvironmentConfig:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"environment config not found: {path}")
    with open(path) as f:
        return environment_from_dict(json.load(f), source=str(path))


@dataclass
class WorldState:
    obstacles: list[Obstacle]
    robot_true: SupportState
    time_index: int = 0

    def advanced(self, obstacles) -> "WorldState":
        return WorldState(list(obstacles), self.robot_true, self.time_index + 1)


def _patrol(ob: Obstacle, lo: float, hi: float, dt: float) -> Obstacle:
    x = ob.center[0] + ob.velocity[0] * dt
    vx = ob.velocity[0]
    # reflect until inside; a single reflection suffices unless v*dt exceeds the span
    while x < lo or x > hi:
        if x < lo:
            x = 2 * lo - x
        else:
            x = 2 * hi - x
        vx = -vx
    return replace(ob, center=np.array([x, ob.center[1]]), velocity=np.array([vx, ob.velocity[1]]))


def step_obstacles_narrow_passage(world: WorldState, config: EnvironmentConfig) -> WorldState:
    """Advance patrolling blocks by one step; everything else stays put."""
    lo, hi = config.motion.patrol_bounds
    obs = [
        _patrol(ob, lo, hi, config.motion.dt) if ob.motion == "patrol" else ob
        for ob in world.obstacles
    ]
    return world.advanced(obs)


def _reflect_axis(c, v, lo, hi):
    if c < lo:
        return 2 * lo - c, abs(v)
    if c > hi:
        return 2 * hi - c, -abs(v)
    return c, v


def step_obstacles_forest(world: WorldState, config: EnvironmentConfig, rng: np.random.Generator) -> WorldState:
    """Random bounded-acceleration motion with speed clamp and wall reflection.

    Draws exactly two uniforms per randomly moving obstacle, in id order.
    """
    m = config.motion
    out = []
    for ob in sorted(world.obstacles, key=lambda o: o.id):
        if ob.motion != "random":
            out.append(ob)
            continue
        acc = rng.uniform(-m.a_max, m.a_max, size=2)
        v = ob.velocity + acc * m.dt
        speed = float(np.hypot(*v))
        if speed > m.v_max:
            v = v * (m.v_max / speed)
        c = ob.center + v * m.dt
        lo = config.workspace_lo + ob.half_extents
        hi = config.workspace_hi - ob.half_extents
        cx, vx = _reflect_axis(c[0], v[0], lo[0], hi[0])
        cy, vy = _reflect_axis(c[1], v[1], lo[1], hi[1])
        out.append(replace(ob, center=np.array([cx, cy]), velocity=np.array([vx, vy])))
    return world.advanced(out)


def step_world(world: WorldState, config: EnvironmentConfig, rng: np.random.Generator) -> WorldState:
    if config.kind == "narrow_passage":
        return step_obstacles_narrow_passage(world, config)
    if config.kind == "forest":
        return step_obstacles_forest(world, config, rng)
    return world.advanced(world.obstacles)
