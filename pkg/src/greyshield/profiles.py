"""Synthetic exogenous time series: heat/power demand, wind, PV and spot price."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .plant import (STEPS_PER_DAY, STEPS_PER_WEEK, PlantConfig,
                    ambient_temperature)

CSV_HEADER = ["step", "thermal_demand_w", "electrical_demand_w", "wind_w", "solar_w",
              "price_per_mwh"]

# demand is kept below boiler + CHP nameplate with headroom for model error
DEMAND_MIN_W = 0.25e6
DEMAND_MAX_W = 2.70e6

EVAL_START_DAY = 14


@dataclass
class ExogenousProfile:
    """Exogenous series over ``horizon`` steps starting at absolute ``start_step``.

    Powers in W, ``elec_price`` in currency per MWh.
    """

    thermal_demand: np.ndarray
    electrical_demand: np.ndarray
    wind_infeed: np.ndarray
    solar_infeed: np.ndarray
    elec_price: np.ndarray
    start_step: int = 0

    def __post_init__(self):
        n = len(self.thermal_demand)
        for name in ("electrical_demand", "wind_infeed", "solar_infeed", "elec_price"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} length differs from thermal_demand")

    @property
    def horizon(self) -> int:
        return len(self.thermal_demand)

    def index(self, t: int) -> int:
        i = t - self.start_step
        if not 0 <= i < self.horizon:
            raise IndexError(f"step {t} outside profile horizon")
        return i

    def slice(self, start: int, length: int) -> "ExogenousProfile":
        sl = slice(start, start + length)
        return ExogenousProfile(self.thermal_demand[sl], self.electrical_demand[sl],
                                self.wind_infeed[sl], self.solar_infeed[sl],
                                self.elec_price[sl], self.start_step + start)


def _ar1(rng, n, phi, sigma):
    eps = rng.standard_normal(n) * sigma
    out = np.empty(n)
    acc = 0.0
    for i in range(n):
        acc = phi * acc + eps[i]
        out[i] = acc
    return out


def generate_profiles(seed: int, horizon: int, profile_kind: str = "train",
                      cfg: PlantConfig | None = None) -> ExogenousProfile:
    """Deterministic synthetic profile.

    ``train`` profiles start on 1 January; ``eval`` profiles start on day
    ``EVAL_START_DAY`` (a Monday in winter) and use a separate noise stream.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if profile_kind not in ("train", "eval"):
        raise ValueError(f"unknown profile kind {profile_kind!r}")
    cfg = cfg or PlantConfig()
    stream = 0 if profile_kind == "train" else 1
    rng = np.random.default_rng([seed, stream])
    start = 0 if profile_kind == "train" else EVAL_START_DAY * STEPS_PER_DAY
    steps = start + np.arange(horizon)
    hour = (steps % STEPS_PER_DAY) / 4.0
    weekday = (steps // STEPS_PER_DAY) % 7
    weekend = weekday >= 5

    t_env = ambient_temperature(steps, cfg)
    heating = np.clip((291.15 - t_env) / 18.0, 0.0, 1.0)
    occupancy = np.where((hour >= 6) & (hour < 22), 1.0, 0.0)
    morning = np.exp(-0.5 * ((hour - 7.0) / 1.5) ** 2)
    thermal = (0.45e6 + 1.45e6 * heating + 0.30e6 * occupancy * ~weekend
               + 0.35e6 * morning - 0.10e6 * weekend + _ar1(rng, horizon, 0.95, 0.035e6))
    thermal = np.clip(thermal, DEMAND_MIN_W, DEMAND_MAX_W)

    electrical = (0.45e6 + 0.35e6 * occupancy * ~weekend + 0.10e6 * occupancy
                  + _ar1(rng, horizon, 0.9, 0.02e6))
    electrical = np.clip(electrical, 0.1e6, 1.4e6)

    wind_speed = np.clip(7.0 + _ar1(rng, horizon, 0.995, 0.35), 0.0, None)
    wind = 0.8e6 * np.clip((wind_speed - 3.0) / 9.0, 0.0, 1.0) ** 3
    wind = np.where(wind < 0.015 * 0.8e6, 0.0, wind)

    day_of_year = steps / STEPS_PER_DAY
    sun_len = 12.0 - 4.0 * np.cos(2 * np.pi * (day_of_year + 10) / 365.0)
    elev = np.cos(np.pi * (hour + 0.125 - 12.5) / sun_len)
    clouds = np.clip(0.7 + _ar1(rng, horizon, 0.98, 0.05), 0.1, 1.0)
    solar = 1.0e6 * np.clip(elev, 0.0, None) * clouds * (0.55 + 0.45 * (1 - heating))
    solar = np.where(np.abs(hour + 0.125 - 12.5) >= sun_len / 2, 0.0, solar)
    solar = np.clip(solar, 0.0, 1.0e6)

    price = (55.0 + 45.0 * occupancy * ~weekend + 25.0 * morning
             + 20.0 * np.exp(-0.5 * ((hour - 18.5) / 1.5) ** 2)
             - 30.0 * (wind / 0.8e6) + _ar1(rng, horizon, 0.9, 4.0))
    price = np.clip(price, cfg.price_min, cfg.price_max)

    return ExogenousProfile(thermal, electrical, wind, solar, price, start_step=start)


def save_profile_csv(profile: ExogenousProfile, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for i in range(profile.horizon):
            w.writerow([profile.start_step + i] + [repr(float(x)) for x in (
                profile.thermal_demand[i], profile.electrical_demand[i],
                profile.wind_infeed[i], profile.solar_infeed[i], profile.elec_price[i])])


def load_profile_csv(path) -> ExogenousProfile:
    with open(Path(path), newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_HEADER:
            raise ValueError(f"unexpected profile header: {header}")
        rows = [r for r in reader if r]
    if not rows:
        raise ValueError("profile CSV has no rows")
    steps = [int(r[0]) for r in rows]
    if steps != list(range(steps[0], steps[0] + len(steps))):
        raise ValueError("profile steps must be consecutive")
    cols = np.array([[float(x) for x in r[1:]] for r in rows]).T
    return ExogenousProfile(cols[0], cols[1], cols[2], cols[3], cols[4], start_step=steps[0])


__all__ = ["ExogenousProfile", "generate_profiles", "save_profile_csv", "load_profile_csv",
           "CSV_HEADER", "STEPS_PER_WEEK"]
