"""Levenberg-Marquardt over a :class:`~posh.factor_graph.Graph`."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

log = logging.getLogger(__name__)

LAMBDA_LIMIT = 1e10


@dataclass
class LmParams:
    lambda_init: float = 1e-5
    lambda_factor: float = 10.0
    max_iters: int = 100
    rel_tol: float = 1e-4
    abs_tol: float = 1e-6

    def __post_init__(self):
        if not self.lambda_init > 0:
            raise ValueError("lambda_init must be positive")
        if not self.lambda_factor > 1:
            raise ValueError("lambda_factor must exceed 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class OptimizeStats:
    iterations: int = 0
    accepted: int = 0
    initial_error: float = 0.0
    final_error: float = 0.0
    converged: bool = True
    trace: list = field(default_factory=list)


class NotPositiveDefinite(np.linalg.LinAlgError):
    pass


def solve_damped(H, g: np.ndarray, lam: float) -> np.ndarray:
    """Solve ``(H + lam * diag(H)) delta = -g`` by Cholesky without pivoting.

    At the graph sizes planned here (a few hundred unknowns) dense LAPACK
    Cholesky beats the sparse LU available in scipy, so sparse input is
    densified before factorization.
    """
    A = H.toarray() if sp.issparse(H) else np.array(H, dtype=float)
    d = np.diag(A).copy()
    A[np.diag_indices_from(A)] += lam * d
    try:
        c = sla.cho_factor(A, lower=False, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    return sla.cho_solve(c, -g, check_finite=False)


def optimize(graph, sdf, params: LmParams | None = None, verbose: bool = False):
    """Run LM in place on ``graph``; returns ``(graph, stats)``.

    Values are left at the best iterate found, so the final error never
    exceeds the initial one.
    """
    params = params or LmParams()
    packed = graph.packed()
    X = packed.gather(graph.variables)
    err = packed.error(X, sdf)
    stats = OptimizeStats(initial_error=err, final_error=err)
    if err == 0.0:
        return graph, stats

    lam = params.lambda_init
    H = g = None
    for it in range(params.max_iters):
        if H is None:
            H, g = packed.linearize_dense(X, sdf)
        stats.iterations = it + 1
        try:
            delta = solve_damped(H, g, lam)
        except NotPositiveDefinite:
            delta = None
        new_err = np.inf
        if delta is not None and np.all(np.isfinite(delta)):
            X_new = X + delta.reshape(X.shape)
            new_err = packed.error(X_new, sdf)
        accepted = new_err < err
        if verbose:
            stats.trace.append({"iteration": it, "lambda": lam, "error": min(new_err, err), "accepted": accepted})
        if accepted:
            rel = (err - new_err) / err
            X, err = X_new, new_err
            stats.accepted += 1
            lam /= params.lambda_factor
            H = None
            if err == 0.0 or rel < params.rel_tol or np.linalg.norm(delta) < params.abs_tol:
                break
        else:
            if delta is not None and np.linalg.norm(delta) < params.abs_tol:
                break
            lam *= params.lambda_factor
            if lam >= LAMBDA_LIMIT:
                stats.converged = False
                log.debug("LM gave up at lambda=%g", lam)
                break

    graph.set_values(X)
    stats.final_error = err
    return graph, stats
