"""MDP wrapper: observation, reward and episode loop over the plant."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .plant import STEPS_PER_DAY, Plant, PlantConfig, PlantState
from .profiles import ExogenousProfile

OBS_FIELDS = ("e_th", "e_el", "p_wind", "p_solar", "x_el", "soc_tess", "soc_bess",
              "hour_of_day", "day_of_week")
ACTION_FIELDS = ("a_boil", "a_hp", "a_chp", "a_tess", "a_bess")


def obs_ranges(cfg: PlantConfig | None = None, assets=None) -> np.ndarray:
    """(lo, hi) per observation component; fixed a priori from the plant config."""
    from .plant import default_assets

    cfg = cfg or PlantConfig()
    assets = assets or default_assets()
    return np.array([
        (0.0, cfg.e_th_max),
        (0.0, cfg.e_el_max),
        (0.0, assets["wind"].p_nom_el),
        (0.0, assets["solar"].p_nom_el),
        (cfg.price_min, cfg.price_max),
        (0.0, 1.0),
        (0.0, 1.0),
        (0.0, 1.0),
        (0.0, 1.0),
    ])


def raw_observation(state: PlantState, profile: ExogenousProfile) -> np.ndarray:
    """Physical quantities behind the observation (hour/day already as fractions)."""
    i = profile.index(state.t)
    hour = (state.t // 4) % 24
    day = (state.t // STEPS_PER_DAY) % 7
    return np.array([
        profile.thermal_demand[i], profile.electrical_demand[i],
        profile.wind_infeed[i], profile.solar_infeed[i], profile.elec_price[i],
        state.soc_tess, state.soc_bess, hour / 24.0, day / 7.0,
    ], dtype=float)


def normalize(raw, ranges) -> np.ndarray:
    lo, hi = ranges[:, 0], ranges[:, 1]
    return (np.asarray(raw, dtype=float) - lo) / (hi - lo)


def denormalize(obs, ranges) -> np.ndarray:
    lo, hi = ranges[:, 0], ranges[:, 1]
    return np.asarray(obs, dtype=float) * (hi - lo) + lo


def observe(state: PlantState, profile: ExogenousProfile, ranges=None) -> np.ndarray:
    """9-component min-max normalised state; step 0 is Monday 00:00."""
    ranges = obs_ranges() if ranges is None else ranges
    return normalize(raw_observation(state, profile), ranges)


@dataclass(frozen=True)
class RewardConfig:
    x: float = 1.0 / 10.0
    y: float = 1.0 / 5e5
    z: float = 1.0

    def __post_init__(self):
        if min(self.x, self.y, self.z) < 0:
            raise ValueError("reward weights must be >= 0")


def reward(l_cost: float, l_comfort: float, violated: bool = False,
           cfg: RewardConfig = RewardConfig()) -> float:
    if l_comfort < 0:
        raise ValueError("l_comfort must be >= 0")
    r = -(cfg.x * l_cost + cfg.y * l_comfort)
    return r - cfg.z if violated else r


@dataclass
class ExperienceTuple:
    s: np.ndarray
    a: np.ndarray
    r: float
    s2: np.ndarray
    done: bool


@dataclass
class StepRecord:
    """One executed control step and its diagnostics."""

    step: int
    obs: np.ndarray
    a_pred: np.ndarray
    a_exec: np.ndarray
    q_demand: float
    q_production: float
    l_cost: float
    l_comfort: float
    reward: float
    corrected: bool
    method: str
    d_safe: float = 0.0
    used_fallback: bool = False
    subproblems_feasible: int = 0
    slp_iters: int = 0
    next_obs: np.ndarray | None = None
    done: bool = False
    seconds: float = 0.0


TRAJECTORY_HEADER = ["step", *ACTION_FIELDS, "q_demand", "q_production", "l_cost",
                     "l_comfort", "reward", "corrected", "method", "d_safe",
                     "used_fallback", "subproblems_feasible", "slp_iters"]


@dataclass
class TrajectoryLog:
    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def append(self, rec: StepRecord) -> None:
        self.records.append(rec)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def total_reward(self) -> float:
        return float(sum(r.reward for r in self.records))

    def rows(self):
        for r in self.records:
            yield [r.step, *(repr(float(v)) for v in r.a_exec),
                   *(repr(float(v)) for v in (r.q_demand, r.q_production, r.l_cost,
                                              r.l_comfort, r.reward)),
                   int(r.corrected), r.method, repr(float(r.d_safe)), int(r.used_fallback),
                   r.subproblems_feasible, r.slp_iters]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRAJECTORY_HEADER)
            w.writerows(self.rows())


class MesEnv:
    """Gym-like environment: ``reset() -> obs``, ``step(a) -> (obs, r, done, info)``.

    ``info`` carries the pre-step plant state and the step outcome, which the
    safety layer and surrogate buffer need.
    """

    def __init__(self, plant: Plant, profile: ExogenousProfile, horizon: int | None = None,
                 reward_cfg: RewardConfig = RewardConfig(), soc_tess: float = 0.5,
                 soc_bess: float = 0.5):
        self.plant = plant
        self.profile = profile
        self.horizon = profile.horizon if horizon is None else int(horizon)
        if self.horizon > profile.horizon:
            raise ValueError("horizon exceeds profile length")
        self.reward_cfg = reward_cfg
        self.ranges = obs_ranges(plant.cfg, plant.assets)
        self._soc0 = (soc_tess, soc_bess)
        self.state: PlantState | None = None
        self.k = 0

    def reset(self) -> np.ndarray:
        self.state = self.plant.initial_state(self.profile.start_step, *self._soc0)
        self.k = 0
        return self.obs()

    @property
    def done(self) -> bool:
        return self.k >= self.horizon

    def obs(self) -> np.ndarray:
        return observe(self.state, self.profile, self.ranges)

    def q_demand(self) -> float:
        return float(self.profile.thermal_demand[self.profile.index(self.state.t)])

    def step(self, action):
        if self.done:
            raise RuntimeError("episode finished; call reset()")
        before = self.state
        self.state, out = self.plant.step(before, action, self.profile)
        self.k += 1
        r = reward(out.l_cost, out.l_comfort, False, self.reward_cfg)
        done = self.done
        # the terminal observation repeats the last valid one
        nxt = self.obs() if not done else observe(before, self.profile, self.ranges)
        return nxt, r, done, {"state": before, "outcome": out}


def control_step(env: MesEnv, policy, shield=None, method: str = "unsafe"):
    """observe -> predict -> shield -> execute for one step.

    ``policy(obs)`` returns the predicted action.  ``shield(a, obs, state,
    q_demand)`` returns an object with ``action``, ``corrected``,
    ``used_fallback`` and diagnostic attributes; ``None`` passes through.
    ``StepRecord.seconds`` is the wall time of the whole step.
    Returns ``(StepRecord, info)``.
    """
    import time

    obs = env.obs()
    t0 = time.perf_counter()
    a_pred = np.clip(np.asarray(policy(obs), dtype=float), -1.0, 1.0)
    if shield is None:
        a_exec, corrected, fb, d, nfeas, iters = a_pred, False, False, 0.0, 0, 0
    else:
        res = shield(a_pred, obs, env.state, env.q_demand())
        a_exec, corrected, fb = res.action, res.corrected, res.used_fallback
        d, nfeas, iters = res.d_safe, res.subproblems_feasible, res.slp_iters
        method = res.method
    t = env.state.t
    nxt, r, done, info = env.step(a_exec)
    elapsed = time.perf_counter() - t0
    out = info["outcome"]
    rec = StepRecord(step=t, obs=obs, a_pred=a_pred, a_exec=np.asarray(a_exec, dtype=float),
                     q_demand=out.q_demand, q_production=out.q_production,
                     l_cost=out.l_cost, l_comfort=out.l_comfort, reward=r,
                     corrected=bool(corrected), method=method, d_safe=float(d),
                     used_fallback=bool(fb), subproblems_feasible=int(nfeas),
                     slp_iters=int(iters), next_obs=nxt, done=done, seconds=elapsed)
    return rec, info


def episode_run(env: MesEnv, policy, shield=None, recorder=None, z: float | None = None,
                method: str = "unsafe") -> TrajectoryLog:
    """Roll out a full episode from ``reset()``.

    ``recorder`` (optional) receives every experience tuple: the executed one
    and, when the shield changed the action, the shaped duplicate.
    """
    from .safety.shield import shaped_tuples

    z = env.reward_cfg.z if z is None else z
    env.reset()
    log = TrajectoryLog()
    while not env.done:
        rec, _ = control_step(env, policy, shield, method)
        log.append(rec)
        if recorder is not None:
            for tup in shaped_tuples(rec.obs, rec.a_pred, rec.a_exec, rec.reward,
                                     rec.next_obs, rec.done, z):
                recorder(tup)
    return log
