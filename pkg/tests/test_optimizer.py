import numpy as np
import pytest
import scipy.sparse as sp

from posh.environment import GridSpec, Obstacle, compute_sdf
from posh.factor_graph import Factor, Graph, graph_error
from posh.gp_model import process_noise_precision, transition_matrix
from posh.graph_builder import BuilderParams, build_graph
from posh.optimizer import LmParams, NotPositiveDefinite, optimize, solve_damped

FREE_SDF = compute_sdf([], GridSpec((0, 0), 1.0, (4, 4)))


def linear_chain(rng, n=6, dt=0.5):
    g = Graph(n=n, dt=dt)
    for i in range(n + 1):
        g.add_variable((0, i), rng.normal(scale=3.0, size=4))
    for i in range(n):
        g.add_factor(Factor.gp_prior((0, i), (0, i + 1), rng.uniform(0.5, 2.0)))
    g.add_factor(Factor.anchor((0, 0), rng.normal(size=4), 1e4))
    g.add_factor(Factor.anchor((0, n), rng.normal(size=4), 1e4))
    return g


def lstsq_oracle(g):
    """Stack whitened linear residuals explicitly and solve by least squares."""
    ids = sorted(g.variables)
    col = {v: 4 * k for k, v in enumerate(ids)}
    rows, rhs = [], []
    phi = transition_matrix(g.dt)
    for f in g.factors:
        A = np.zeros((4, 4 * len(ids)))
        if f.kind.value == "GpPrior":
            L = np.linalg.cholesky(process_noise_precision(g.dt, f.qc)).T
            a, b = f.vars
            A[:, col[a] : col[a] + 4] = L @ phi
            A[:, col[b] : col[b] + 4] = -L
            rows.append(A)
            rhs.append(np.zeros(4))
        else:
            s = np.sqrt(f.precision)
            (v,) = f.vars
            A[:, col[v] : col[v] + 4] = s * np.eye(4)
            rows.append(A)
            rhs.append(s * f.target)
    x, *_ = np.linalg.lstsq(np.vstack(rows), np.concatenate(rhs), rcond=None)
    return x.reshape(-1, 4)


@pytest.mark.parametrize("seed", range(5))
def test_linear_case_matches_dense_oracle(seed):
    g = linear_chain(np.random.default_rng(seed))
    expected = lstsq_oracle(g)
    g, stats = optimize(g, FREE_SDF, LmParams(rel_tol=1e-14, abs_tol=1e-12))
    X = g.values_array()
    np.testing.assert_allclose(X, expected, rtol=1e-7, atol=1e-7 * np.abs(expected).max())
    assert stats.final_error <= stats.initial_error


def test_monotone_over_accepted_steps():
    grid = GridSpec((0, 0), 0.1, (301, 301))
    for seed in range(20):
        rng = np.random.default_rng(100 + seed)
        obs = [Obstacle(rng.uniform(8, 22, 2), rng.uniform(0.5, 2.0, 2), id=i) for i in range(4)]
        sdf = compute_sdf(obs, grid)
        p = BuilderParams(n_chains=int(rng.integers(1, 4)), n_steps=10, interconnection_qc=10.0)
        g = build_graph(rng.uniform(1, 5, 2), rng.uniform(25, 29, 2), p)
        g, stats = optimize(g, sdf, LmParams(max_iters=30), verbose=True)
        errs = [stats.initial_error] + [t["error"] for t in stats.trace if t["accepted"]]
        assert all(b < a for a, b in zip(errs[:-1], errs[1:])), seed
        assert stats.final_error == pytest.approx(graph_error(g, sdf), rel=1e-12)
        assert stats.accepted == len(errs) - 1


def test_zero_error_returns_immediately():
    g = Graph(n=1, dt=0.5)
    x = np.array([0.0, 0.0, 1.0, 0.0])
    g.add_variable((0, 0), x)
    g.add_variable((0, 1), transition_matrix(0.5) @ x)
    g.add_factor(Factor.gp_prior((0, 0), (0, 1), 1.0))
    _, stats = optimize(g, FREE_SDF)
    assert stats.iterations == 0 and stats.final_error == 0.0


def test_solve_damped_dense_and_sparse():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(8, 8))
    H = A @ A.T + 8 * np.eye(8)
    g = rng.normal(size=8)
    lam = 0.3
    expected = np.linalg.solve(H + lam * np.diag(np.diag(H)), -g)
    np.testing.assert_allclose(solve_damped(H, g, lam), expected)
    np.testing.assert_allclose(solve_damped(sp.csr_matrix(H), g, lam), expected)


def test_solve_damped_rejects_indefinite():
    with pytest.raises(NotPositiveDefinite):
        solve_damped(np.diag([1.0, -5.0]), np.ones(2), 1e-5)


def test_lm_params_validation():
    with pytest.raises(ValueError):
        LmParams(lambda_factor=1.0)
    with pytest.raises(ValueError):
        LmParams(max_iters=0)
