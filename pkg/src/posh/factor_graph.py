"""Factor graph over 2D support states.

Four factor kinds are supported: the constant-velocity GP prior between states
one step apart, a hinge obstacle cost on a single state, the same hinge
evaluated at GP-interpolated states along an edge, and a tight quadratic anchor.
Evaluation is vectorized per kind through :class:`PackedGraph`, which is
rebuilt lazily whenever the graph structure changes.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from posh.gp_model import (
    STATE_DIM,
    interpolation_matrices,
    process_noise_precision,
    transition_matrix,
)


class VariableId(NamedTuple):
    chain: int
    time_index: int

    def __str__(self):
        return f"x{self.chain}_{self.time_index}"


class FactorKind(enum.Enum):
    GP_PRIOR = "GpPrior"
    OBSTACLE = "Obstacle"
    INTERPOLATED_OBSTACLE = "InterpolatedObstacle"
    ANCHOR = "Anchor"


_ARITY = {
    FactorKind.GP_PRIOR: 2,
    FactorKind.OBSTACLE: 1,
    FactorKind.INTERPOLATED_OBSTACLE: 2,
    FactorKind.ANCHOR: 1,
}


@dataclass(frozen=True, eq=False)
class Factor:
    kind: FactorKind
    vars: tuple
    qc: float = 1.0
    taus: tuple = ()
    target: np.ndarray | None = None
    precision: float = 1e6
    eps: float = 0.8
    sigma: float = 0.1
    r_robot: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "vars", tuple(VariableId(*v) for v in self.vars))
        if len(self.vars) != _ARITY[self.kind]:
            raise ValueError(f"{self.kind.value} factor takes {_ARITY[self.kind]} variable(s)")
        if self.kind in (FactorKind.GP_PRIOR, FactorKind.INTERPOLATED_OBSTACLE):
            a, b = self.vars
            if b.time_index != a.time_index + 1:
                raise ValueError(f"{self.kind.value} must connect time i to i+1, got {a} -> {b}")
        if self.kind is FactorKind.ANCHOR:
            object.__setattr__(self, "target", np.asarray(self.target, dtype=float).reshape(STATE_DIM))

    @classmethod
    def gp_prior(cls, a, b, qc: float) -> "Factor":
        return cls(FactorKind.GP_PRIOR, (a, b), qc=qc)

    @classmethod
    def obstacle(cls, v, eps: float, sigma: float, r_robot: float) -> "Factor":
        return cls(FactorKind.OBSTACLE, (v,), eps=eps, sigma=sigma, r_robot=r_robot)

    @classmethod
    def interpolated(cls, a, b, taus, eps: float, sigma: float, r_robot: float) -> "Factor":
        return cls(FactorKind.INTERPOLATED_OBSTACLE, (a, b), taus=tuple(taus), eps=eps, sigma=sigma, r_robot=r_robot)

    @classmethod
    def anchor(cls, v, target, precision: float = 1e6) -> "Factor":
        return cls(FactorKind.ANCHOR, (v,), target=target, precision=precision)

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value, "vars": [list(v) for v in self.vars]}
        if self.kind is FactorKind.GP_PRIOR:
            d["qc"] = self.qc
        elif self.kind is FactorKind.ANCHOR:
            d["target"] = self.target.tolist()
            d["precision"] = self.precision
        else:
            d.update(eps=self.eps, sigma=self.sigma, r_robot=self.r_robot)
            if self.taus:
                d["taus"] = list(self.taus)
        return d


def obstacle_residual(x, sdf, eps: float, r_robot: float) -> tuple[float, np.ndarray]:
    """Hinge residual ``max(eps - clearance, 0)`` and its 1x4 Jacobian."""
    x = np.asarray(x, dtype=float).reshape(STATE_DIM)
    d, grad = sdf.query(x[:2])
    e = eps - (float(d) - r_robot)
    jac = np.zeros((1, STATE_DIM))
    if e <= 0:
        return 0.0, jac
    jac[0, :2] = -grad
    return e, jac


def interpolated_residual(xa, xb, tau: float, dt: float, sdf, eps: float, r_robot: float):
    """Hinge residual at the GP-interpolated state and its 1x4 Jacobians wrt ``xa``, ``xb``."""
    lam, psi = interpolation_matrices(float(tau), float(dt))
    x = lam @ np.asarray(xa, dtype=float) + psi @ np.asarray(xb, dtype=float)
    e, jx = obstacle_residual(x, sdf, eps, r_robot)
    return e, jx @ lam, jx @ psi


def anchor_residual(x, target) -> tuple[np.ndarray, np.ndarray]:
    return np.asarray(x, dtype=float) - np.asarray(target, dtype=float), np.eye(STATE_DIM)


def _hinge(points, sdf, eps, r_robot):
    d, grad = sdf.query(points)
    e = eps - (d - r_robot)
    active = e > 0
    return np.where(active, e, 0.0), np.where(active[:, None], -grad, 0.0)


class PackedGraph:
    """Index arrays for vectorized evaluation, in lexicographic variable order."""

    def __init__(self, graph: "Graph"):
        self.ids = sorted(graph.variables)
        self.index = {v: i for i, v in enumerate(self.ids)}
        idx = self.index
        dt = graph.dt
        self.phi = transition_matrix(dt)
        self.qinv_unit = process_noise_precision(dt, 1.0)

        gp, ob, ip, an = [], [], [], []
        for k, f in enumerate(graph.factors):
            {
                FactorKind.GP_PRIOR: gp,
                FactorKind.OBSTACLE: ob,
                FactorKind.INTERPOLATED_OBSTACLE: ip,
                FactorKind.ANCHOR: an,
            }[f.kind].append((k, f))
        self.n_factors = len(graph.factors)

        self.gp_fid = np.array([k for k, _ in gp], dtype=np.intp)
        self.gp_a = np.array([idx[f.vars[0]] for _, f in gp], dtype=np.intp)
        self.gp_b = np.array([idx[f.vars[1]] for _, f in gp], dtype=np.intp)
        self.gp_w = np.array([1.0 / f.qc for _, f in gp])

        self.ob_fid = np.array([k for k, _ in ob], dtype=np.intp)
        self.ob_i = np.array([idx[f.vars[0]] for _, f in ob], dtype=np.intp)
        self.ob_eps = np.array([f.eps for _, f in ob])
        self.ob_r = np.array([f.r_robot for _, f in ob])
        self.ob_w = np.array([1.0 / f.sigma**2 for _, f in ob])

        rows = [(k, f, tau) for k, f in ip for tau in f.taus]
        self.ip_fid = np.array([k for k, _, _ in rows], dtype=np.intp)
        self.ip_a = np.array([idx[f.vars[0]] for _, f, _ in rows], dtype=np.intp)
        self.ip_b = np.array([idx[f.vars[1]] for _, f, _ in rows], dtype=np.intp)
        mats = [interpolation_matrices(float(tau), dt) for _, _, tau in rows]
        self.ip_lam = np.array([m[0][:2] for m in mats]).reshape(-1, 2, STATE_DIM)
        self.ip_psi = np.array([m[1][:2] for m in mats]).reshape(-1, 2, STATE_DIM)
        self.ip_eps = np.array([f.eps for _, f, _ in rows])
        self.ip_r = np.array([f.r_robot for _, f, _ in rows])
        self.ip_w = np.array([1.0 / f.sigma**2 for _, f, _ in rows])

        self.an_fid = np.array([k for k, _ in an], dtype=np.intp)
        self.an_i = np.array([idx[f.vars[0]] for _, f in an], dtype=np.intp)
        self.an_target = np.array([f.target for _, f in an]).reshape(-1, STATE_DIM)
        self.an_prec = np.array([f.precision for _, f in an])

    @property
    def size(self) -> int:
        return len(self.ids)

    def gather(self, variables) -> np.ndarray:
        return np.array([variables[v] for v in self.ids], dtype=float).reshape(-1, STATE_DIM)

    # ---- residuals -------------------------------------------------------

    def _gp_residual(self, X):
        return X[self.gp_a] @ self.phi.T - X[self.gp_b]

    def _ip_points(self, X):
        return np.einsum("kij,kj->ki", self.ip_lam, X[self.ip_a]) + np.einsum(
            "kij,kj->ki", self.ip_psi, X[self.ip_b]
        )

    def costs(self, X, sdf) -> dict[str, np.ndarray]:
        """Per-factor (per-row for interpolated factors) costs."""
        r = self._gp_residual(X)
        gp = 0.5 * self.gp_w * np.einsum("ki,ij,kj->k", r, self.qinv_unit, r)
        if len(self.ob_i):
            e, _ = _hinge(X[self.ob_i, :2], sdf, self.ob_eps, self.ob_r)
            ob = 0.5 * self.ob_w * e**2
        else:
            ob = np.zeros(0)
        if len(self.ip_a):
            e, _ = _hinge(self._ip_points(X), sdf, self.ip_eps, self.ip_r)
            ip = 0.5 * self.ip_w * e**2
        else:
            ip = np.zeros(0)
        ra = X[self.an_i] - self.an_target
        an = 0.5 * self.an_prec * np.sum(ra * ra, axis=1)
        return {"gp": gp, "ob": ob, "ip": ip, "an": an}

    def error(self, X, sdf) -> float:
        c = self.costs(X, sdf)
        return float(c["gp"].sum() + c["ob"].sum() + c["ip"].sum() + c["an"].sum())

    def factor_costs(self, X, sdf) -> np.ndarray:
        """Cost of every factor, indexed like ``graph.factors``."""
        c = self.costs(X, sdf)
        out = np.zeros(self.n_factors)
        out[self.gp_fid] = c["gp"]
        out[self.ob_fid] = c["ob"]
        np.add.at(out, self.ip_fid, c["ip"])
        out[self.an_fid] = c["an"]
        return out

    # ---- linearization ---------------------------------------------------

    def blocks(self, X, sdf):
        """Hessian blocks ``(rows, cols, 4x4 blocks)`` and the stacked gradient."""
        m = self.size
        g = np.zeros((m, STATE_DIM))
        bi, bj, blocks = [], [], []

        def add(i, j, b):
            bi.append(i)
            bj.append(j)
            blocks.append(b)

        # GP prior: J_a = Phi, J_b = -I
        if len(self.gp_a):
            r = self._gp_residual(X)
            W = self.gp_w[:, None, None] * self.qinv_unit
            Wr = np.einsum("kij,kj->ki", W, r)
            np.add.at(g, self.gp_a, Wr @ self.phi)
            np.add.at(g, self.gp_b, -Wr)
            PtW = np.einsum("ji,kjl->kil", self.phi, W)
            add(self.gp_a, self.gp_a, PtW @ self.phi)
            add(self.gp_a, self.gp_b, -PtW)
            add(self.gp_b, self.gp_a, -np.transpose(PtW, (0, 2, 1)))
            add(self.gp_b, self.gp_b, W)

        if len(self.ob_i):
            e, jp = _hinge(X[self.ob_i, :2], sdf, self.ob_eps, self.ob_r)
            J = np.zeros((len(e), STATE_DIM))
            J[:, :2] = jp
            np.add.at(g, self.ob_i, (self.ob_w * e)[:, None] * J)
            add(self.ob_i, self.ob_i, self.ob_w[:, None, None] * J[:, :, None] * J[:, None, :])

        if len(self.ip_a):
            e, jp = _hinge(self._ip_points(X), sdf, self.ip_eps, self.ip_r)
            Ja = np.einsum("ki,kij->kj", jp, self.ip_lam)
            Jb = np.einsum("ki,kij->kj", jp, self.ip_psi)
            we = self.ip_w * e
            np.add.at(g, self.ip_a, we[:, None] * Ja)
            np.add.at(g, self.ip_b, we[:, None] * Jb)
            w = self.ip_w[:, None, None]
            add(self.ip_a, self.ip_a, w * Ja[:, :, None] * Ja[:, None, :])
            add(self.ip_a, self.ip_b, w * Ja[:, :, None] * Jb[:, None, :])
            add(self.ip_b, self.ip_a, w * Jb[:, :, None] * Ja[:, None, :])
            add(self.ip_b, self.ip_b, w * Jb[:, :, None] * Jb[:, None, :])

        if len(self.an_i):
            ra = X[self.an_i] - self.an_target
            np.add.at(g, self.an_i, self.an_prec[:, None] * ra)
            add(self.an_i, self.an_i, self.an_prec[:, None, None] * np.eye(STATE_DIM))

        if not blocks:
            return np.zeros(0, np.intp), np.zeros(0, np.intp), np.zeros((0, STATE_DIM, STATE_DIM)), g.ravel()
        return np.concatenate(bi), np.concatenate(bj), np.concatenate(blocks), g.ravel()

    def linearize(self, X, sdf) -> tuple[sp.csr_matrix, np.ndarray]:
        bi, bj, blocks, g = self.blocks(X, sdf)
        return _assemble(bi, bj, blocks, self.size), g

    def linearize_dense(self, X, sdf) -> tuple[np.ndarray, np.ndarray]:
        m = self.size
        bi, bj, blocks, g = self.blocks(X, sdf)
        flat = (bi * m + bj)[:, None] * 16 + np.arange(16)
        H = np.bincount(flat.ravel(), weights=blocks.ravel(), minlength=m * m * 16)
        H = H.reshape(m, m, STATE_DIM, STATE_DIM).transpose(0, 2, 1, 3).reshape(m * STATE_DIM, m * STATE_DIM)
        return H, g


_R4 = np.arange(STATE_DIM)


def _assemble(bi, bj, data, m) -> sp.csr_matrix:
    n = m * STATE_DIM
    rows = (STATE_DIM * bi[:, None, None] + _R4[None, :, None]) + np.zeros((1, 1, STATE_DIM), dtype=np.intp)
    cols = (STATE_DIM * bj[:, None, None] + _R4[None, None, :]) + np.zeros((1, STATE_DIM, 1), dtype=np.intp)
    H = sp.coo_matrix((data.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n)).tocsr()
    H.sum_duplicates()
    return H


@dataclass
class Graph:
    variables: dict = field(default_factory=dict)
    factors: list = field(default_factory=list)
    n: int = 20
    dt: float = 0.5

    def __post_init__(self):
        self._packed = None

    # structure edits invalidate the packed view
    def _touch(self):
        self._packed = None

    def add_variable(self, vid, value) -> None:
        self.variables[VariableId(*vid)] = np.asarray(value, dtype=float).reshape(STATE_DIM).copy()
        self._touch()

    def add_factor(self, factor: Factor) -> None:
        for v in factor.vars:
            if v not in self.variables:
                raise KeyError(f"factor references unknown variable {v}")
        self.factors.append(factor)
        self._touch()

    def remove_factors(self, predicate) -> None:
        self.factors = [f for f in self.factors if not predicate(f)]
        self._touch()

    def remove_variables(self, vids) -> None:
        vids = set(vids)
        for v in vids:
            self.variables.pop(v, None)
        self.factors = [f for f in self.factors if not any(v in vids for v in f.vars)]
        self._touch()

    def packed(self) -> PackedGraph:
        if self._packed is None:
            self._packed = PackedGraph(self)
        return self._packed

    def values_array(self) -> np.ndarray:
        return self.packed().gather(self.variables)

    def set_values(self, X) -> None:
        for v, x in zip(self.packed().ids, np.asarray(X).reshape(-1, STATE_DIM)):
            self.variables[v] = x.copy()

    def copy(self) -> "Graph":
        g = Graph({v: x.copy() for v, x in self.variables.items()}, list(self.factors), self.n, self.dt)
        return g

    def edges(self):
        """Ordered (a, b) pairs of GP-prior factors, oriented forward in time."""
        return [f.vars for f in self.factors if f.kind is FactorKind.GP_PRIOR]

    def successors(self) -> dict:
        succ = {v: [] for v in self.variables}
        for a, b in self.edges():
            succ[a].append(b)
        return succ

    def to_json(self) -> str:
        doc = {
            "n": self.n,
            "dt": self.dt,
            "variables": [
                {"id": list(v), "value": self.variables[v].tolist()} for v in sorted(self.variables)
            ],
            "factors": [f.to_dict() for f in self.factors],
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "Graph":
        doc = json.loads(text)
        g = cls(n=doc["n"], dt=doc["dt"])
        for v in doc["variables"]:
            g.add_variable(tuple(v["id"]), v["value"])
        for f in doc["factors"]:
            kind = FactorKind(f["kind"])
            kw = {k: f[k] for k in ("qc", "target", "precision", "eps", "sigma", "r_robot") if k in f}
            if "taus" in f:
                kw["taus"] = tuple(f["taus"])
            g.add_factor(Factor(kind, tuple(tuple(v) for v in f["vars"]), **kw))
        return g


def factor_error(factor: Factor, graph: Graph, sdf) -> float:
    """Reference (unvectorized) cost of a single factor."""
    from posh.gp_model import gp_interpolate, gp_prior_residual

    xs = [graph.variables[v] for v in factor.vars]
    if factor.kind is FactorKind.GP_PRIOR:
        r, prec, _, _ = gp_prior_residual(xs[0], xs[1], graph.dt, factor.qc)
        return 0.5 * float(r @ prec @ r)
    if factor.kind is FactorKind.OBSTACLE:
        e, _ = obstacle_residual(xs[0], sdf, factor.eps, factor.r_robot)
        return e * e / (2 * factor.sigma**2)
    if factor.kind is FactorKind.INTERPOLATED_OBSTACLE:
        total = 0.0
        for tau in factor.taus:
            x, _, _ = gp_interpolate(xs[0], xs[1], tau, graph.dt, 1.0)
            e, _ = obstacle_residual(x.vector, sdf, factor.eps, factor.r_robot)
            total += e * e / (2 * factor.sigma**2)
        return total
    r = xs[0] - factor.target
    return 0.5 * factor.precision * float(r @ r)


def graph_error(graph: Graph, sdf) -> float:
    packed = graph.packed()
    return packed.error(packed.gather(graph.variables), sdf)


def linearize(graph: Graph, sdf) -> tuple[sp.csr_matrix, np.ndarray]:
    """Gauss-Newton normal system ``(H, g)`` at the current values."""
    packed = graph.packed()
    return packed.linearize(packed.gather(graph.variables), sdf)
