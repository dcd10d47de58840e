"""Commissioning sweep: excite the plant and fit the nominal models from the log."""

from __future__ import annotations

import numpy as np

from .fallback import FallbackConfig, fallback_action
from .nominal import datasheet_models, fit_nominal
from .plant import Plant, action_to_fraction
from .profiles import ExogenousProfile, generate_profiles
from .plant import STEPS_PER_DAY, STEPS_PER_WEEK

COMMISSIONING_START_DAY = 91
COMMISSIONING_STEPS = 4 * STEPS_PER_WEEK


class OperationLog:
    """Column store of executed actions, pre-step measurements and realised outputs."""

    columns = ("a_boil", "a_hp", "a_chp", "a_tess", "a_bess", "soc_tess",
               "q_hp_prev", "q_tess_prev", "q_demand_prev", "q_demand",
               "q_boil", "q_hp", "q_chp", "q_tess", "step")

    def __init__(self):
        self._rows: list[tuple] = []

    def __len__(self):
        return len(self._rows)

    def append(self, state, action, outcome) -> None:
        self._rows.append((*map(float, action), state.soc_tess, state.q_hp_prev,
                           state.q_tess_prev, state.q_demand_prev, outcome.q_demand,
                           outcome.q["boil"], outcome.q["hp"], outcome.q["chp"],
                           outcome.q["tess"], float(state.t)))

    def extend(self, other: "OperationLog") -> None:
        self._rows.extend(other._rows)

    def array(self, name: str, start: int = 0, stop: int | None = None) -> np.ndarray:
        j = self.columns.index(name)
        return np.array([r[j] for r in self._rows[start:stop]], dtype=float)

    def tail(self, n: int) -> "OperationLog":
        out = OperationLog()
        out._rows = self._rows[-n:]
        return out


def commissioning_sweep(plant: Plant, profile: ExogenousProfile, steps: int | None = None,
                        seed: int = 0, hp_on_prob: float = 0.6, hold: int = 4,
                        tess_hold: int = 16) -> OperationLog:
    """Step the cascade through random heat targets; random HP and storage setpoints.

    Boiler and CHP follow the fallback cascade (datasheet inversion) for a heat
    target redrawn every ``hold`` steps from the whole operating range, so both
    units are seen off, at part load and at full load regardless of season.
    The store setpoint is held for ``tess_hold`` steps so the tank is driven
    through its full SOC range.
    """
    rng = np.random.default_rng([seed, 99])
    fb = FallbackConfig.from_models(datasheet_models(plant.assets), plant.assets)
    steps = profile.horizon if steps is None else steps
    state = plant.initial_state(profile.start_step)
    log = OperationLog()
    u_min_hp = plant.assets["hp"].p_min_frac
    q_lo, q_hi = fb.q_min_boil, 0.98 * (fb.q_max_chp + fb.q_max_boil)
    target, a_tess = q_lo, 0.0
    for k in range(steps):
        if k % hold == 0:
            target = rng.uniform(q_lo, q_hi)
        a = fallback_action(target, fb)
        if rng.random() < hp_on_prob:
            a[1] = 2.0 * rng.uniform(u_min_hp, 1.0) - 1.0
        else:
            a[1] = -1.0
        if k % tess_hold == 0:
            a_tess = rng.uniform(-1.0, 1.0)
        a[3] = a_tess
        a[4] = rng.uniform(-1.0, 1.0)
        new, out = plant.step(state, a, profile)
        log.append(state, a, out)
        state = new
    return log


def nominal_inputs(log: OperationLog, asset: str, assets) -> tuple:
    """(setpoint, soc, q) arrays for fitting ``asset``'s nominal model."""
    if asset == "tess":
        return log.array("a_tess"), log.array("soc_tess"), log.array("q_tess")
    u = action_to_fraction(log.array("a_" + asset), assets[asset].p_min_frac)
    return u, None, log.array("q_" + asset)


def fit_all_nominal(log: OperationLog, assets) -> tuple[dict, dict]:
    models, scores = {}, {}
    for name in ("boil", "hp", "chp", "tess"):
        x, soc, q = nominal_inputs(log, name, assets)
        models[name], scores[name] = fit_nominal(name, x, q, soc=soc,
                                                 q_max=assets[name].p_nom_th)
    return models, scores


def commissioning_profile(seed: int, cfg=None) -> ExogenousProfile:
    start = COMMISSIONING_START_DAY * STEPS_PER_DAY
    year = generate_profiles(seed, start + COMMISSIONING_STEPS, "train", cfg)
    return year.slice(start, COMMISSIONING_STEPS)


def commission(plant: Plant, seed: int = 0) -> tuple[dict, dict, OperationLog]:
    """Run the one-month sweep and fit all nominal models; returns (models, metrics, log)."""
    profile = commissioning_profile(seed, plant.cfg)
    log = commissioning_sweep(plant, profile, seed=seed)
    models, scores = fit_all_nominal(log, plant.assets)
    return models, scores, log
