import csv

import numpy as np
import pytest

from greyshield.env import RewardConfig
from greyshield.harness import (RunConfig, constraint_tolerance, parse_seeds, read_eval_report,
                                relative_objective, report, run_experiment, runtime_stats)
from greyshield.nominal import UndefinedMetricError
from oracles import constraint_nsum


def tiny(tmp_path, name="run", **kw):
    base = dict(method="optlayerpolicy", agent="random", seeds=(1,), training_steps=40,
                eval_interval=20, eval_horizon=48, out=str(tmp_path / name),
                surrogate_max_epochs=5)
    base.update(kw)
    return RunConfig(**base)


def test_parse_seeds():
    assert parse_seeds("1, 2,3") == (1, 2, 3)


def test_config_validation():
    with pytest.raises(ValueError):
        RunConfig(method="nope")
    with pytest.raises(ValueError):
        RunConfig(agent="nope")
    with pytest.raises(ValueError):
        RunConfig(seeds=())
    with pytest.raises(ValueError):
        RunConfig(eval_interval=0)


def test_config_round_trip(tmp_path):
    cfg = RunConfig(method="greyoptlayerpolicy", agent="td3", seeds=(3, 4), training_steps=123,
                    plant={"tau_tess": 12.0}, reward=RewardConfig(x=0.2), h_safe=0.5,
                    td3={"batch_size": 32, "hidden": (64, 64)}, out=str(tmp_path / "o"))
    cfg.write(tmp_path / "c.ini")
    back = RunConfig.from_ini(tmp_path / "c.ini")
    assert back == cfg
    assert RunConfig.from_ini(tmp_path / "c.ini", method="unsafe").method == "unsafe"


def test_unknown_plant_key_rejected():
    with pytest.raises(KeyError):
        RunConfig.from_ini("[plant]\nbogus = 1.0\n")


def test_constraint_tolerance_metrics(rng):
    q = rng.uniform(0.3e6, 2.5e6, 100)
    p = q + rng.normal(0, 5e4, 100)
    nmae, nsum = constraint_tolerance({"q_demand": q, "q_production": p})
    assert nmae == pytest.approx(100 * np.mean(np.abs(q - p)) / np.ptp(q))
    assert nsum == pytest.approx(constraint_nsum(q, p))
    with pytest.raises(UndefinedMetricError):
        constraint_tolerance({"q_demand": np.ones(3), "q_production": np.ones(3)})


def test_relative_objective_and_runtime():
    assert relative_objective(-50.0, -100.0) == pytest.approx(200.0)
    st = runtime_stats([1.0, 3.0])
    assert st["mean"] == 2.0 and st["max"] == 3.0 and st["steps"] == 2
    assert runtime_stats([])["steps"] == 0


def test_run_writes_outputs(tmp_path):
    out = run_experiment(tiny(tmp_path, timing=True))
    for name in ("config.ini", "learning_curve.csv", "cost_curve.csv", "eval_report.csv",
                 "surrogate_metrics.csv", "runtime.csv", "trajectory_1.csv",
                 "nominal_models_1.txt"):
        assert (out / name).exists(), name
    rows = read_eval_report(out)
    assert [r["seed"] for r in rows] == ["1", "mean"]
    with open(out / "learning_curve.csv") as fh:
        steps = [int(r["step"]) for r in csv.DictReader(fh)]
    assert steps == [0, 20, 40]


def test_report_relative(tmp_path):
    ref = run_experiment(tiny(tmp_path, "ref", method="unsafe"))
    run = run_experiment(tiny(tmp_path, "fb", method="safefallback"))
    rows = report([run], ref)
    ref_obj = float(read_eval_report(ref)[-1]["objective_absolute"])
    for r in rows:
        assert r["objective_relative"] == pytest.approx(100 * ref_obj / r["objective_absolute"])


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError):
        run_experiment(tiny(tmp_path, out=str(blocker / "sub")))


def test_td3_run_writes_diagnostics(tmp_path):
    cfg = tiny(tmp_path, "td3", agent="td3", td3={"hidden": (16, 16)})
    out = run_experiment(cfg)
    assert (out / "td3_diagnostics_1.csv").exists()


def test_unsafe_random_violates_heavily_and_fallback_does_not():
    from greyshield.harness import build_context, evaluate
    from greyshield.profiles import DEMAND_MAX_W, DEMAND_MIN_W

    cfg = RunConfig(method="unsafe", agent="random")
    log = evaluate(cfg, build_context(cfg, 1), 0)
    assert constraint_tolerance(log)[0] > 30.0
    cfg = RunConfig(method="unsafe", agent="fallback")
    log = evaluate(cfg, build_context(cfg, 1), 0)
    # plant-model mismatch only: mean comfort loss within 5% of the demand range
    assert log.column("l_comfort").mean() <= 0.05 * (DEMAND_MAX_W - DEMAND_MIN_W)
