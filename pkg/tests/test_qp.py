import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from greyshield.safety.qp import solve_box_hyperplane_qp

vec = st.lists(st.floats(-2, 2), min_size=5, max_size=5).map(np.array)


@settings(max_examples=60, deadline=None)
@given(y=vec, c=vec, t=st.floats(0.05, 0.95), w=st.lists(st.floats(0.1, 5), min_size=5,
                                                          max_size=5).map(np.array))
def test_matches_generic_solver(y, c, t, w):
    lb, ub = -np.ones(5), np.ones(5)
    if np.abs(c).max() < 1e-3:
        return
    # pick d inside the attainable range so the problem is feasible
    lo = np.sum(np.where(c > 0, c * lb, c * ub))
    hi = np.sum(np.where(c > 0, c * ub, c * lb))
    d = lo + t * (hi - lo)
    x, ok, lam = solve_box_hyperplane_qp(y, c, d, lb, ub, w)
    assert ok
    assert c @ x == pytest.approx(d, abs=1e-9)
    assert np.all(x >= lb - 1e-12) and np.all(x <= ub + 1e-12)
    f = lambda z: 0.5 * np.sum(w * (z - y) ** 2)
    ref = minimize(f, np.clip(y, lb, ub), method="SLSQP", bounds=list(zip(lb, ub)),
                   constraints=[{"type": "eq", "fun": lambda z: c @ z - d}],
                   options={"ftol": 1e-12, "maxiter": 500})
    # weak duality: f(z) - lam (c.z - d) >= f(x*) for every z in the box,
    # so slight infeasibility of the reference point cannot flip the comparison
    z = np.clip(ref.x, lb, ub)
    assert f(x) <= f(z) - lam * (c @ z - d) + 1e-9


def test_hyperplane_misses_box():
    x, ok, lam = solve_box_hyperplane_qp(np.zeros(2), np.array([1.0, 1.0]), 5.0,
                                         -np.ones(2), np.ones(2))
    assert not ok and np.isnan(lam)
    assert np.array_equal(x, np.ones(2))


def test_unconstrained_projection_onto_plane():
    y = np.array([0.3, -0.2, 0.1])
    c = np.array([1.0, 2.0, -1.0])
    x, ok, _ = solve_box_hyperplane_qp(y, c, 0.0, -10 * np.ones(3), 10 * np.ones(3))
    expect = y - (c @ y) / (c @ c) * c
    assert ok and np.allclose(x, expect, atol=1e-12)
