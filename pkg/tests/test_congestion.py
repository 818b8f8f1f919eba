import numpy as np
import pytest
from hypothesis import given, strategies as st

from jfcs.congestion import (ConcavityError, UtilityFunction, curvature_bounds, log_utility,
                             optimal_rate)

U = log_utility(1e-3)


def test_empty_queue_admits_cap():
    assert optimal_rate(0.0, 25.0, 1e-3, 3e9, U, unit=1e9) == 3e9
    assert optimal_rate(np.zeros(3), 1.0, 1.0, 5.0, U).tolist() == [5.0] * 3


def test_inverse_derivative_value():
    # qhat / (phi tau) = 2 in utility units
    a = optimal_rate(2.0, 1.0, 1.0, 10.0, U)
    assert a == pytest.approx(0.499, abs=1e-12)
    a = optimal_rate(2e9, 1.0, 1.0, 10e9, U, unit=1e9)
    assert a == pytest.approx(0.499e9, rel=1e-12)


def test_heavy_queue_throttles():
    assert optimal_rate(1e12, 1.0, 1.0, 10.0, U) < 1e-6
    assert optimal_rate(1e3, 1.0, 1.0, 10.0, U) <= 1e-15


def test_bad_arguments():
    with pytest.raises(ValueError):
        optimal_rate(1.0, 0.0, 1.0, 1.0, U)
    with pytest.raises(ValueError):
        optimal_rate(-1.0, 1.0, 1.0, 1.0, U)


@given(st.floats(0.0, 1e4), st.floats(0.0, 1e4), st.floats(0.1, 100.0))
def test_rate_nonincreasing_in_queue(q1, q2, phi):
    lo, hi = sorted((q1, q2))
    assert optimal_rate(hi, phi, 1e-3, 3.0, U) <= optimal_rate(lo, phi, 1e-3, 3.0, U)


@given(st.floats(0.0, 1e4), st.floats(0.1, 100.0), st.floats(0.1, 100.0))
def test_rate_nondecreasing_in_phi(q, p1, p2):
    lo, hi = sorted((p1, p2))
    assert optimal_rate(q, lo, 1e-3, 3.0, U) <= optimal_rate(q, hi, 1e-3, 3.0, U)


@given(st.floats(1e-4, 50.0))
def test_inverse_derivative_roundtrip(a):
    assert U.inv(U.derivative(a)) == pytest.approx(a, rel=1e-9)


def test_matches_grid_search():
    rng = np.random.default_rng(3)
    grid = np.linspace(0.0, 3.0, 300_001)
    for _ in range(50):
        q, phi, tau = rng.uniform(0, 0.5), rng.uniform(1, 40), 1e-3
        a = optimal_rate(q, phi, tau, 3.0, U)
        obj = phi * U.value(grid) - q / tau * grid
        f = lambda x: phi * U.value(x) - q / tau * x
        assert f(a) >= obj.max() - 1e-6


def test_curvature_bounds_quadratic():
    quad = UtilityFunction(lambda a: -0.5 * np.asarray(a) ** 2 + 10 * np.asarray(a),
                           lambda a: 10 - np.asarray(a))
    psi, big = curvature_bounds(quad, (0.0, 5.0))
    assert psi == pytest.approx(1.0, rel=1e-3)
    assert big == pytest.approx(1.0, rel=1e-3)


def test_curvature_bounds_log():
    psi, big = curvature_bounds(U, (0.0, 1.0))
    assert big == pytest.approx(1e6, rel=1e-3)
    assert psi == pytest.approx(1.0 / 1.001 ** 2, rel=1e-4)
    assert psi == pytest.approx(0.998, abs=1e-3)


def test_curvature_bounds_rejects_linear():
    lin = UtilityFunction(lambda a: 2.0 * np.asarray(a), lambda a: np.full(np.shape(a), 2.0))
    with pytest.raises(ConcavityError):
        curvature_bounds(lin, (0.0, 1.0))
    with pytest.raises(ValueError):
        curvature_bounds(U, (1.0, 1.0))


def test_generic_inverse_by_root_finding():
    sq = UtilityFunction(lambda a: np.sqrt(1 + np.asarray(a)),
                         lambda a: 0.5 / np.sqrt(1 + np.asarray(a)), None, (0.0, 100.0))
    a = 3.0
    assert sq.inv(sq.derivative(a)) == pytest.approx(a, rel=1e-9)
