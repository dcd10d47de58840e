import io

import numpy as np
import pytest

from greyshield.nn import Adam, Mlp, PlateauSchedule, load_mlp_text, mse_loss_and_grads, save_mlp_text


def test_forward_shapes(rng):
    net = Mlp([3, 8, 2], rng=rng)
    assert net.forward(np.zeros(3)).shape == (1, 2)
    assert net.forward(np.zeros((7, 3))).shape == (7, 2)


def test_zero_output_init(rng):
    net = Mlp([3, 8, 1], rng=rng, zero_output=True)
    assert np.all(net.forward(rng.normal(size=(5, 3))) == 0.0)


def test_tanh_output_bounded(rng):
    net = Mlp([4, 16, 3], output="tanh", rng=rng)
    out = net.forward(rng.normal(size=(50, 4)) * 100)
    assert np.all(np.abs(out) <= 1.0)


def test_input_jacobian_matches_differences(rng):
    net = Mlp([3, 10, 10, 1], rng=rng)
    x = rng.normal(size=3)
    J = net.input_jacobian(x)
    h = 1e-6
    fd = [(net.forward(x + h * e)[0, 0] - net.forward(x - h * e)[0, 0]) / (2 * h)
          for e in np.eye(3)]
    assert np.allclose(J[0], fd, atol=1e-6)


def test_line_knots_reproduce_function(rng):
    net = Mlp([2, 12, 8, 1], rng=rng)
    x0, d = rng.normal(size=2), rng.normal(size=2)
    t = net.line_knots(x0, d, -1.0, 1.0)
    f = lambda s: net.forward(x0 + s * d)[0, 0]
    vals = np.array([f(s) for s in t])
    for s in rng.uniform(-1, 1, 100):
        assert f(s) == pytest.approx(np.interp(s, t, vals), abs=1e-9)


def test_adam_first_step_is_lr_times_sign():
    p = [np.array([1.0, -2.0, 3.0])]
    g = [np.array([0.5, -4.0, 0.0])]
    opt = Adam(p, lr=0.1)
    new = opt.step(p, g)
    assert np.allclose(new[0], [0.9, -1.9, 3.0], atol=1e-6)


def test_mse_decreases_with_training(rng):
    X = rng.uniform(-1, 1, (200, 2))
    y = np.sin(2 * X[:, 0]) + X[:, 1] ** 2
    net = Mlp([2, 32, 1], rng=rng)
    opt = Adam(net.params, 1e-2)
    first, _ = mse_loss_and_grads(net, X, y)
    for _ in range(300):
        loss, g = mse_loss_and_grads(net, X, y)
        net.set_params(opt.step(net.params, g))
    assert loss < 0.1 * first


def test_plateau_schedule_halves():
    sch = PlateauSchedule(1e-3, patience=2)
    lrs = [sch.update(v) for v in (1.0, 0.5, 0.5, 0.5, 0.5)]
    assert lrs[-1] == pytest.approx(5e-4)


def test_text_round_trip(rng):
    net = Mlp([3, 5, 2], output="tanh", rng=rng)
    buf = io.StringIO()
    save_mlp_text(net, buf, {"tag": [1.5]})
    back, extra = load_mlp_text(buf.getvalue().splitlines())
    x = rng.normal(size=(4, 3))
    assert np.array_equal(back.forward(x), net.forward(x))
    assert extra["tag"][0] == 1.5
