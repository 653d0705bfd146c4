import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import projection_oracle
from rckelly.simplex import TruncatedSimplex, bisect_nu, bracket, clip_shift, project, shift_residual

finite_vec = arrays(np.float64, st.integers(2, 8), elements=st.floats(-5, 5))


def test_domain_validation():
    with pytest.raises(ValueError):
        TruncatedSimplex(1, 0.0)
    with pytest.raises(ValueError):
        TruncatedSimplex(3, 1.5)
    dom = TruncatedSimplex(3, 0.1)
    assert dom.contains([0.2, 0.6, 0.2]) and not dom.contains([0.5, 0.45, 0.05])


def test_examples():
    z = np.array([0.2, 0.5, 0.3])
    np.testing.assert_allclose(project(z, TruncatedSimplex(3, 0.01)).weights, z, atol=1e-15)
    np.testing.assert_allclose(project([2.0, 0.0, 0.0], TruncatedSimplex(3, 0.0)).weights, [1, 0, 0], atol=1e-15)
    assert bisect_nu([1.0, 0.0], TruncatedSimplex(2, 0.0)) == pytest.approx(0.0, abs=1e-12)
    for c in (-3.0, 0.7, 12.5):
        assert bisect_nu(np.array([0.5, 0.5]) + c, TruncatedSimplex(2, 0.0)) == pytest.approx(c, abs=1e-12)


def test_cash_floor():
    b = project([3.0, 1.0, -2.0], TruncatedSimplex(3, 0.05))
    np.testing.assert_allclose(b.weights, [0.95, 0.0, 0.05], atol=1e-14)


def test_matches_active_set_oracle():
    rng = np.random.default_rng(1)
    for _ in range(300):
        n = int(rng.integers(2, 7))
        z = rng.uniform(-1, 1, n)
        eps = float(rng.choice([0.0, 0.01, 0.3]))
        b = project(z, TruncatedSimplex(n, eps)).weights
        np.testing.assert_allclose(b, projection_oracle(z, eps), atol=1e-8)


def test_rejects_bad_input():
    dom = TruncatedSimplex(3, 0.0)
    for z in ([np.nan, 0, 0], [np.inf, 0, 0], [0.0, 1.0]):
        with pytest.raises(ValueError):
            project(z, dom)


@settings(max_examples=300)
@given(finite_vec, st.sampled_from([0.0, 1e-6, 0.1, 1.0]))
def test_residual_and_bracket(z, eps):
    dom = TruncatedSimplex(z.size, eps)
    nu = bisect_nu(z, dom)
    assert abs(shift_residual(z, nu, eps) - 1.0) <= 1e-12
    assert z.max() - 1.0 - 1e-12 <= nu <= z.max() + 1e-12
    b = project(z, dom)
    assert dom.contains(b.weights, tol=1e-10)
    np.testing.assert_allclose(b.weights, clip_shift(z, nu, eps), atol=1e-12)


@settings(max_examples=300)
@given(finite_vec, st.sampled_from([0.0, 1e-6, 0.2]))
def test_boundary_identities(z, eps):
    # h(max z - 1) >= 1 and h(max z) = eps, exactly
    assert shift_residual(z, z.max() - 1.0, eps) >= 1.0
    assert shift_residual(z, z.max(), eps) == eps


def test_bracket_rounds_down():
    # max z - 1 rounds up here, so h at the naive shift falls below one
    z = np.array([-8.530979834140473, -3.796083474971463])
    assert shift_residual(z, z.max() - 1.0, 0.3) < 1.0
    lo, hi = bracket(z)
    assert lo < z.max() - 1.0 and shift_residual(z, lo, 0.3) >= 1.0
    assert shift_residual(z, hi, 0.3) == 0.3
    rng = np.random.default_rng(0)
    for _ in range(2000):
        z = rng.normal(0.0, 100.0, int(rng.integers(2, 9)))
        lo, hi = bracket(z)
        assert shift_residual(z, lo, 0.0) >= 1.0 and z.max() - 1.0 - lo <= 4e-16 * max(1.0, abs(lo))


@settings(max_examples=200)
@given(finite_vec, st.sampled_from([0.0, 0.05]))
def test_idempotent(z, eps):
    dom = TruncatedSimplex(z.size, eps)
    b = project(z, dom).weights
    np.testing.assert_allclose(project(b, dom).weights, b, atol=1e-10)


@settings(max_examples=200)
@given(st.integers(2, 8), st.integers(0, 2**32 - 1), st.sampled_from([0.0, 0.05]))
def test_nonexpansive(n, seed, eps):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=(2, n)) * 3
    dom = TruncatedSimplex(n, eps)
    d = np.linalg.norm(project(x, dom).weights - project(y, dom).weights)
    assert d <= np.linalg.norm(x - y) + 1e-12


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1))
def test_projection_is_nearest(seed):
    # no random feasible point is closer than the projection
    rng = np.random.default_rng(seed)
    n = 5
    z = rng.normal(size=n)
    eps = 0.05
    b = project(z, TruncatedSimplex(n, eps)).weights
    cands = rng.dirichlet(np.ones(n), size=500) * (1 - eps)
    cands[:, -1] += eps
    assert np.linalg.norm(b - z) <= np.linalg.norm(cands - z, axis=1).min() + 1e-12


def test_residual_monotone():
    rng = np.random.default_rng(3)
    z = rng.normal(size=6)
    grid = np.linspace(z.max() - 2, z.max() + 1, 500)
    h = [shift_residual(z, nu, 0.01) for nu in grid]
    assert np.all(np.diff(h) <= 1e-15)
