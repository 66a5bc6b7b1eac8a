"""Constant-velocity Gauss-Markov prior for a holonomic 2D robot.

State layout is ``[px, py, vx, vy]``. The prior is the white-noise-on-acceleration
model: the drift matrix is ``[[0, I], [0, 0]]`` and noise enters the velocity
block with isotropic power-spectral density ``qc``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

STATE_DIM = 4
_I2 = np.eye(2)


@dataclass(frozen=True)
class SupportState:
    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.position, dtype=float).reshape(2)
        v = np.asarray(self.velocity, dtype=float).reshape(2)
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(v))):
            raise ValueError("support state components must be finite")
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "velocity", v)

    @classmethod
    def from_vector(cls, x) -> "SupportState":
        x = np.asarray(x, dtype=float).reshape(STATE_DIM)
        return cls(x[:2], x[2:])

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.position, self.velocity])

    def __array__(self, dtype=None, copy=None):
        v = self.vector
        return v if dtype is None else v.astype(dtype)


@dataclass(frozen=True)
class GpModelParams:
    qc: float = 1.0
    dt: float = 0.5

    def __post_init__(self):
        if not self.qc > 0:
            raise ValueError(f"qc must be positive, got {self.qc}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")


def _vec(x) -> np.ndarray:
    return np.asarray(x, dtype=float).reshape(STATE_DIM)


def transition_matrix(dt: float) -> np.ndarray:
    """State transition ``Phi(dt) = [[I, dt I], [0, I]]``."""
    if dt < 0:
        raise ValueError(f"dt must be non-negative, got {dt}")
    phi = np.eye(STATE_DIM)
    phi[0, 2] = phi[1, 3] = dt
    return phi


def _noise_cov(dt: float, qc: float) -> np.ndarray:
    # also valid at dt == 0 (returns zeros), which interpolation needs
    block = np.array([[dt**3 / 3.0, dt**2 / 2.0], [dt**2 / 2.0, dt]])
    return qc * np.kron(block, _I2)


def process_noise_cov(dt: float, qc: float) -> np.ndarray:
    """Covariance accumulated by the acceleration noise over ``dt`` seconds."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if not qc > 0:
        raise ValueError(f"qc must be positive, got {qc}")
    return _noise_cov(dt, qc)


def process_noise_precision(dt: float, qc: float) -> np.ndarray:
    """Closed-form inverse of :func:`process_noise_cov`."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if not qc > 0:
        raise ValueError(f"qc must be positive, got {qc}")
    block = np.array([[12.0 / dt**3, -6.0 / dt**2], [-6.0 / dt**2, 4.0 / dt]])
    return np.kron(block, _I2) / qc


def gp_prior_residual(xa, xb, dt: float, qc: float):
    """Residual of the binary GP-prior factor between consecutive states.

    Returns ``(r, precision, J_a, J_b)`` with ``r = Phi(dt) xa - xb``. The factor
    cost is ``0.5 * r @ precision @ r``.
    """
    phi = transition_matrix(dt)
    precision = process_noise_precision(dt, qc)
    r = phi @ _vec(xa) - _vec(xb)
    return r, precision, phi, -np.eye(STATE_DIM)


@lru_cache(maxsize=256)
def interpolation_matrices(tau: float, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """``(Lambda, Psi)`` such that ``x(tau) = Lambda xa + Psi xb``.

    Both matrices are independent of ``qc`` since it cancels in ``Psi``.
    The returned arrays are shared; callers must not mutate them.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if tau < 0 or tau > dt:
        raise ValueError(f"tau={tau} outside [0, {dt}]")
    psi = _noise_cov(tau, 1.0) @ transition_matrix(dt - tau).T @ process_noise_precision(dt, 1.0)
    lam = transition_matrix(tau) - psi @ transition_matrix(dt)
    lam.setflags(write=False)
    psi.setflags(write=False)
    return lam, psi


def gp_interpolate(xa, xb, tau: float, dt: float, qc: float):
    """Posterior mean state at ``tau`` seconds after ``xa``.

    Returns ``(SupportState, Lambda, Psi)``; the two matrices are the Jacobians
    of the interpolated state with respect to ``xa`` and ``xb``.
    """
    if not qc > 0:
        raise ValueError(f"qc must be positive, got {qc}")
    if not np.isfinite(tau) or tau < 0 or tau > dt:
        raise ValueError(f"tau={tau} outside [0, {dt}]")
    lam, psi = interpolation_matrices(float(tau), float(dt))
    x = lam @ _vec(xa) + psi @ _vec(xb)
    return SupportState.from_vector(x), lam.copy(), psi.copy()
