import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import central_diff, rel_err
from posh.factor_graph import (
    Factor,
    FactorKind,
    Graph,
    VariableId,
    factor_error,
    graph_error,
    linearize,
    obstacle_residual,
)
from posh.gp_model import transition_matrix


class CircleSdf:
    """Smooth analytic SDF of a disc, used where finite differences must be clean."""

    def __init__(self, center=(0.0, 0.0), radius=1.0):
        self.center = np.asarray(center, dtype=float)
        self.radius = radius

    def query(self, points):
        p = np.asarray(points, dtype=float) - self.center
        n = np.linalg.norm(p, axis=-1)
        return n - self.radius, p / n[..., None]


SDF = CircleSdf((0.0, 0.0), 1.0)
EPS, R_ROBOT, SIGMA = 0.8, 0.5, 0.1


def _two_var_graph(kind, xa, xb, dt=0.5):
    g = Graph(n=2, dt=dt)
    g.add_variable((0, 0), xa)
    g.add_variable((0, 1), xb)
    a, b = VariableId(0, 0), VariableId(0, 1)
    if kind is FactorKind.GP_PRIOR:
        g.add_factor(Factor.gp_prior(a, b, 0.7))
    elif kind is FactorKind.OBSTACLE:
        g.add_factor(Factor.obstacle(a, EPS, SIGMA, R_ROBOT))
    elif kind is FactorKind.INTERPOLATED_OBSTACLE:
        g.add_factor(Factor.interpolated(a, b, (0.1, 0.2, 0.3, 0.4), EPS, SIGMA, R_ROBOT))
    else:
        g.add_factor(Factor.anchor(b, [1.0, 2.0, 0.5, -0.5], 1e3))
    return g


def _error_at(g, X):
    p = g.packed()
    return p.error(np.asarray(X).reshape(-1, 4), SDF)


def _near_kink(g, X, tol=1e-3):
    """True if any hinge argument sits within ``tol`` of zero."""
    p = g.packed()
    X = X.reshape(-1, 4)
    pts = []
    if len(p.ob_i):
        pts.append(X[p.ob_i, :2])
    if len(p.ip_a):
        pts.append(p._ip_points(X))
    if not pts:
        return False
    d, _ = SDF.query(np.concatenate(pts))
    return bool(np.any(np.abs(EPS - (d - R_ROBOT)) < tol))


# states in a ring around the disc so that the hinge is mostly active
ring_states = st.tuples(
    st.floats(0.0, 2 * np.pi), st.floats(1.05, 2.5), st.floats(-2, 2), st.floats(-2, 2)
).map(lambda t: np.array([t[1] * np.cos(t[0]), t[1] * np.sin(t[0]), t[2], t[3]]))


@pytest.mark.parametrize("kind", list(FactorKind))
def test_gradient_matches_finite_difference(kind):
    rng = np.random.default_rng(hash(kind.value) % 2**32)
    checked = 0
    while checked < 100:
        ang = rng.uniform(0, 2 * np.pi, 2)
        rad = rng.uniform(1.05, 2.5, 2)
        xa = np.r_[rad[0] * np.cos(ang[0]), rad[0] * np.sin(ang[0]), rng.uniform(-2, 2, 2)]
        xb = np.r_[rad[1] * np.cos(ang[1]), rad[1] * np.sin(ang[1]), rng.uniform(-2, 2, 2)]
        g = _two_var_graph(kind, xa, xb)
        X = g.values_array().ravel()
        if _near_kink(g, X):
            continue
        _, grad = linearize(g, SDF)
        fd = central_diff(lambda x: _error_at(g, x), X, h=1e-6).ravel()
        if np.max(np.abs(fd)) < 1e-8:
            assert np.max(np.abs(grad)) < 1e-8
        else:
            assert rel_err(grad, fd) < 1e-4, (kind, xa, xb)
        checked += 1


@settings(max_examples=100)
@given(ring_states)
def test_obstacle_residual_jacobian(x):
    e, J = obstacle_residual(x, SDF, EPS, R_ROBOT)
    if abs(EPS - (np.linalg.norm(x[:2]) - 1.0 - R_ROBOT)) < 1e-3:
        return
    fd = central_diff(lambda y: obstacle_residual(y, SDF, EPS, R_ROBOT)[0], x)
    assert np.max(np.abs(J - fd)) <= 1e-4 * max(np.max(np.abs(fd)), 1.0)


def _residual_oracle(g, X):
    """Stacked whitened residuals built from the unvectorized per-factor costs."""
    h = g.copy()
    h.set_values(X.reshape(-1, 4))
    return np.sqrt(2.0 * np.array([factor_error(f, h, SDF) for f in h.factors]))


@pytest.mark.parametrize("kind", [FactorKind.OBSTACLE, FactorKind.INTERPOLATED_OBSTACLE])
def test_hessian_is_gauss_newton(kind):
    rng = np.random.default_rng(5)
    for _ in range(20):
        xa = np.r_[rng.uniform(-2.2, 2.2, 2), rng.uniform(-1, 1, 2)]
        xb = np.r_[rng.uniform(-2.2, 2.2, 2), rng.uniform(-1, 1, 2)]
        if min(np.linalg.norm(xa[:2]), np.linalg.norm(xb[:2])) < 1.05:
            continue
        g = _two_var_graph(kind, xa, xb)
        X = g.values_array().ravel()
        if _near_kink(g, X):
            continue
        H, _ = linearize(g, SDF)
        if kind is FactorKind.OBSTACLE:
            J = central_diff(lambda x: _residual_oracle(g, x), X)
            expected = J.T @ J
        else:
            # one residual per interpolation time: sum of per-row outer products
            p = g.packed()
            expected = np.zeros((8, 8))
            for k in range(len(p.ip_a)):
                def row(x, k=k):
                    pts = p._ip_points(x.reshape(-1, 4))[k]
                    d, _ = SDF.query(pts)
                    return max(EPS - (d - R_ROBOT), 0.0) / SIGMA
                Jk = central_diff(row, X)
                expected += Jk.T @ Jk
        np.testing.assert_allclose(H.toarray(), expected, atol=1e-4 * max(1.0, np.abs(expected).max()))


def test_quadratic_factors_hessian_exact():
    rng = np.random.default_rng(9)
    g = Graph(n=3, dt=0.4)
    for i in range(4):
        g.add_variable((0, i), rng.normal(size=4))
    for i in range(3):
        g.add_factor(Factor.gp_prior((0, i), (0, i + 1), 1.5))
    g.add_factor(Factor.anchor((0, 0), np.zeros(4), 100.0))
    H, grad = linearize(g, SDF)
    X = g.values_array().ravel()
    # error is quadratic: E(X + d) = E(X) + g.d + d.H.d / 2 exactly
    d = rng.normal(size=X.size)
    lhs = _error_at(g, X + d)
    rhs = _error_at(g, X) + grad @ d + 0.5 * d @ (H @ d)
    assert lhs == pytest.approx(rhs, rel=1e-10)


def _random_graph(rng, chains=3, n=6):
    g = Graph(n=n, dt=0.5)
    g.add_variable((0, 0), [3.0, 0.0, 0.0, 1.0])
    g.add_variable((0, n), [3.0, 3.0, 0.0, 1.0])
    for c in range(chains):
        for i in range(1, n):
            g.add_variable((c, i), np.r_[rng.uniform(-3, 3, 2), rng.normal(size=2)])
        ids = [(0, 0)] + [(c, i) for i in range(1, n)] + [(0, n)]
        for a, b in zip(ids[:-1], ids[1:]):
            g.add_factor(Factor.gp_prior(a, b, 1.0))
            g.add_factor(Factor.interpolated(a, b, (0.1, 0.25, 0.4), EPS, SIGMA, R_ROBOT))
    for v in list(g.variables):
        g.add_factor(Factor.obstacle(v, EPS, SIGMA, R_ROBOT))
    g.add_factor(Factor.anchor((0, 0), g.variables[VariableId(0, 0)], 1e6))
    return g


def test_vectorized_costs_match_reference():
    rng = np.random.default_rng(2)
    for _ in range(10):
        g = _random_graph(rng)
        p = g.packed()
        fc = p.factor_costs(p.gather(g.variables), SDF)
        ref = np.array([factor_error(f, g, SDF) for f in g.factors])
        np.testing.assert_allclose(fc, ref, rtol=1e-12, atol=1e-12)
        assert graph_error(g, SDF) == pytest.approx(ref.sum(), rel=1e-12)


def test_dense_and_sparse_linearization_agree():
    rng = np.random.default_rng(4)
    g = _random_graph(rng)
    p = g.packed()
    X = p.gather(g.variables)
    Hs, gs = p.linearize(X, SDF)
    Hd, gd = p.linearize_dense(X, SDF)
    np.testing.assert_allclose(Hs.toarray(), Hd, atol=1e-9)
    np.testing.assert_array_equal(gs, gd)
    np.testing.assert_allclose(Hd, Hd.T, atol=1e-9)


def test_gp_prior_zero_cost_on_constant_velocity():
    x0 = np.array([0.0, 0.0, 1.0, 2.0])
    g = _two_var_graph(FactorKind.GP_PRIOR, x0, transition_matrix(0.5) @ x0)
    assert graph_error(g, SDF) == pytest.approx(0.0, abs=1e-20)


def test_obstacle_inactive_beyond_safety_distance():
    x = np.array([1.0 + R_ROBOT + EPS + 0.01, 0.0, 0.0, 0.0])
    e, J = obstacle_residual(x, SDF, EPS, R_ROBOT)
    assert e == 0.0 and not J.any()
    x[0] = 1.0 + R_ROBOT + EPS - 0.3
    e, J = obstacle_residual(x, SDF, EPS, R_ROBOT)
    assert e == pytest.approx(0.3)
    np.testing.assert_allclose(J, [[-1.0, 0.0, 0.0, 0.0]])


def test_factor_validation():
    with pytest.raises(ValueError):
        Factor.gp_prior((0, 1), (0, 3), 1.0)
    with pytest.raises(ValueError):
        Factor(FactorKind.OBSTACLE, ((0, 1), (0, 2)))
    g = Graph(n=2)
    g.add_variable((0, 0), np.zeros(4))
    with pytest.raises(KeyError):
        g.add_factor(Factor.gp_prior((0, 0), (0, 1), 1.0))


def test_remove_variables_drops_attached_factors():
    g = _random_graph(np.random.default_rng(0))
    g.remove_variables([VariableId(1, 3)])
    assert VariableId(1, 3) not in g.variables
    assert all(VariableId(1, 3) not in f.vars for f in g.factors)
    assert g.packed().size == len(g.variables)


def test_json_round_trip():
    g = _random_graph(np.random.default_rng(1))
    back = Graph.from_json(g.to_json())
    assert back.to_json() == g.to_json()
    assert graph_error(back, SDF) == graph_error(g, SDF)


def test_successors_follow_time():
    g = _random_graph(np.random.default_rng(1), chains=2, n=4)
    for a, succ in g.successors().items():
        assert all(b.time_index == a.time_index + 1 for b in succ)
