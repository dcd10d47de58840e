import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from greyshield.nominal import datasheet_models
from greyshield.safety import (ASSIGNMENTS, INFEASIBLE_DISTANCE, ConstraintSet,
                               NoFeasibleActionError, project, safety_distance)
from greyshield.safety.projection import SlpConfig
from oracles import CELL, grid_projection

actions = st.lists(st.floats(-1, 1), min_size=5, max_size=5).map(np.array)


def test_enumerates_all_assignments():
    assert len(ASSIGNMENTS) == 8 and len(set(ASSIGNMENTS)) == 8


def test_constraint_count(models, assets):
    cs = ConstraintSet(models, 1e6, 0.5, assets)
    assert cs.residuals(np.zeros(5)).shape == (cs.n_c,)


@settings(max_examples=40, deadline=None)
@given(a=actions, q=st.floats(0.25e6, 2.7e6), soc=st.floats(0, 1))
def test_projection_feasible_and_idempotent(models, assets, a, q, soc):
    cs = ConstraintSet(models, q, soc, assets)
    res = project(a, cs)
    assert abs(cs.balance(res.a_safe)) <= cs.balance_tol
    assert np.all(np.abs(res.a_safe) <= 1.0 + 1e-9)
    assert res.d_safe == pytest.approx(0.5 * np.sum((res.a_safe - a) ** 2))
    again = project(res.a_safe, cs)
    assert again.d_safe == 0.0 and np.array_equal(again.a_safe, res.a_safe)


@settings(max_examples=25, deadline=None)
@given(a=actions, q=st.floats(0.25e6, 2.7e6), soc=st.floats(0, 1))
def test_pruning_is_exact(models, assets, a, q, soc):
    cs = ConstraintSet(models, q, soc, assets)
    full = project(a, cs, cfg=SlpConfig(prune=False))
    pruned = project(a, cs)
    assert pruned.d_safe == pytest.approx(full.d_safe, rel=1e-9, abs=1e-12)


def test_single_active_dimension_closed_form():
    # boiler only (other producers forced off, store gives nothing at a=0):
    # projection of a_boil onto q = coef * u reduces to 1/2 delta^2
    models = datasheet_models()
    cs = ConstraintSet(models, 1.0e6, 0.5)
    a = np.array([0.5, -1.0, -1.0, 0.0, 0.0])
    res = project(a, cs)
    # 1 MW needs u = 0.5 on the 2 MW boiler, a = 0; the CHP alone (u = 1) is farther
    target = np.array([0.0, -1.0, -1.0, 0.0, 0.0])
    assert res.d_safe <= 0.5 * 0.5 ** 2 + 1e-12
    assert abs(cs.balance(res.a_safe)) <= 1e-3
    assert res.d_safe <= 0.5 * np.sum((target - a) ** 2) + 1e-12


def test_infeasible_demand_raises(models, assets):
    cs = ConstraintSet(models, 1e8, 0.5, assets)
    with pytest.raises(NoFeasibleActionError):
        project(np.zeros(5), cs)
    assert safety_distance(np.zeros(5), cs) == INFEASIBLE_DISTANCE


def test_rejects_malformed_prediction(models, assets):
    cs = ConstraintSet(models, 1e6, 0.5, assets)
    with pytest.raises(ValueError):
        project(np.zeros(4), cs)
    with pytest.raises(ValueError):
        project(np.array([0, 0, np.inf, 0, 0]), cs)


def test_against_grid_oracle_sample(models, assets):
    rng = np.random.default_rng(77)
    for _ in range(30):
        q, soc = rng.uniform(0.25e6, 2.7e6), rng.uniform(0, 1)
        a = rng.uniform(-1, 1, 5)
        cs = ConstraintSet(models, q, soc, assets)
        d_o, _ = grid_projection(a, models, q, soc, assets)
        d_s = project(a, cs).d_safe
        assert np.sqrt(2 * d_s) <= np.sqrt(2 * d_o) + CELL
