import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from greyshield.nominal import (BoundSet, DegenerateDataError, UndefinedMetricError,
                                datasheet_models, fit_nominal, load_models, metrics,
                                nominal_derivative, predict_nominal, save_models)


def test_exact_polynomial_recovered(rng):
    u = rng.uniform(0.2, 1.0, 400)
    q = 7.5e5 * u - 2.5e3 * u ** 2
    model, m = fit_nominal("hp", u, q)
    assert model.coef == pytest.approx((7.5e5, -2.5e3), rel=1e-9)
    assert m.mae == pytest.approx(0.0, abs=1e-6)


def test_tess_bivariate_fit(rng):
    a = rng.uniform(-1, 1, 600)
    s = rng.uniform(0, 1, 600)
    q = 1e6 * a + 2e5 * a * s - 1e5 * a ** 3 + 3e4 * s
    model, _ = fit_nominal("tess", a, q, soc=s)
    pred = predict_nominal(model, a, s)
    assert np.max(np.abs(pred - q)) < 1e-3


def test_rank_deficient_raises():
    u = np.full(100, 0.5)
    with pytest.raises(DegenerateDataError):
        fit_nominal("hp", u, u * 1e6)


def test_too_few_samples():
    with pytest.raises(ValueError):
        fit_nominal("boil", np.linspace(0.1, 1, 5), np.linspace(0.1, 1, 5))


def test_prediction_domain():
    m = datasheet_models()["boil"]
    with pytest.raises(ValueError):
        predict_nominal(m, 1.2)
    # producers clamp to [0, q_max]
    assert predict_nominal(m, 1.0) == m.q_max


def test_metrics_values():
    m = metrics([1.0, 2.0, 4.0], [1.0, 3.0, 5.0])
    assert m.mae == pytest.approx(2.0 / 3.0)
    assert m.nmae == pytest.approx((2.0 / 3.0) / 4.0)
    with pytest.raises(UndefinedMetricError):
        metrics([1.0, 2.0], [3.0, 3.0])


@settings(max_examples=40, deadline=None)
@given(x=st.floats(0.05, 0.95), s=st.floats(0, 1))
def test_derivative_matches_differences(models, x, s):
    for name in ("boil", "hp", "chp"):
        h = 1e-6
        fd = (predict_nominal(models[name], x + h) - predict_nominal(models[name], x - h)) / (2 * h)
        assert nominal_derivative(models[name], x) == pytest.approx(fd, rel=1e-5, abs=1e-3)
    h = 1e-6
    fd = (predict_nominal(models["tess"], x + h, s) - predict_nominal(models["tess"], x - h, s)) / (2 * h)
    assert nominal_derivative(models["tess"], x, s) == pytest.approx(fd, rel=1e-5, abs=1e-3)


def test_save_load_round_trip(tmp_path, models):
    save_models(models, tmp_path / "m.txt")
    back = load_models(tmp_path / "m.txt")
    assert back == models
    (tmp_path / "bad.txt").write_text("something else\n")
    with pytest.raises(ValueError):
        load_models(tmp_path / "bad.txt")


def test_bound_set(assets):
    b = BoundSet.from_assets(assets)
    assert b["chp"].binary and b["chp"].q_min == pytest.approx(0.5 * assets["chp"].p_nom_th)
    assert b["tess"].q_min == -assets["tess"].p_nom_th
