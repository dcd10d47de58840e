import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from greyshield.fallback import (CapacityExceededError, FallbackConfig, fallback_action,
                                 fallback_dispatch, invert_producer)
from greyshield.nominal import datasheet_models, predict_nominal
from greyshield.plant import action_to_fraction


@pytest.fixture(scope="module")
def sheet_cfg():
    return FallbackConfig.from_models(datasheet_models())


@pytest.mark.parametrize("q_mw, chp_mw, boil_mw", [
    (0.3, 0.0, 0.3),
    (0.8, 0.8, 0.0),
    (2.5, 1.0, 1.5),
])
def test_worked_dispatch_cases(sheet_cfg, q_mw, chp_mw, boil_mw):
    q_chp, q_boil = fallback_dispatch(q_mw * 1e6, sheet_cfg)
    assert q_chp == pytest.approx(chp_mw * 1e6, abs=1e-6)
    assert q_boil == pytest.approx(boil_mw * 1e6, abs=1e-6)


def test_capacity_and_sign_errors(sheet_cfg):
    with pytest.raises(CapacityExceededError):
        fallback_dispatch(3.5e6, sheet_cfg)
    with pytest.raises(ValueError):
        fallback_dispatch(-1.0, sheet_cfg)
    assert fallback_dispatch(0.0, sheet_cfg) == (0.0, 0.0)


def test_remainder_below_boiler_minimum(sheet_cfg):
    # CHP at max leaves 0.1 MW: the boiler cannot run that low, so CHP backs off
    q = sheet_cfg.q_max_chp + 0.1e6
    q_chp, q_boil = fallback_dispatch(q, sheet_cfg)
    assert q_boil == pytest.approx(sheet_cfg.q_min_boil)
    assert q_chp + q_boil == pytest.approx(q)


@settings(max_examples=80, deadline=None)
@given(q=st.floats(0.25e6, 2.7e6))
def test_action_reproduces_demand(models, assets, q):
    cfg = FallbackConfig.from_models(models, assets)
    a = fallback_action(q, cfg)
    assert np.all(np.abs(a) <= 1.0)
    out = 0.0
    for name, i in (("boil", 0), ("chp", 2)):
        u = float(action_to_fraction(a[i], assets[name].p_min_frac))
        out += predict_nominal(models[name], u) if u > 0 else 0.0
    assert out == pytest.approx(q, rel=1e-9)
    assert a[1] == -1.0 and a[3] == 0.0 and a[4] == 0.0


def test_invert_quadratic(models):
    hp = models["hp"]
    for u in np.linspace(0.25, 1.0, 20):
        q = predict_nominal(hp, u)
        a = invert_producer(hp, q, 0.25)
        assert (a + 1) / 2 == pytest.approx(u, abs=1e-9)
    with pytest.raises(CapacityExceededError):
        invert_producer(hp, 2 * hp.q_max, 0.25)
