"""Ground-truth multi-energy plant.

A discrete-time (15 min) simulator of a site with a gas boiler, an electric heat
pump, a CHP unit, a stratified hot-water store (TESS), a battery (BESS), wind
and PV in-feed and a grid connection acting as slack.  The asset output
functions deliberately differ from the polynomial models the safety layer uses:
boiler efficiency drifts with the network return temperature, the heat pump
follows a Carnot-fraction COP with lagged evaporator/condenser temperatures,
CHP efficiency has a quadratic part-load curve and ambient derating, and the
store's deliverable power saturates with tank temperature.

Power sign conventions: thermal outputs are heat delivered into the network
(TESS positive = discharge), BESS power is positive when charging.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

DT_HOURS = 0.25
STEPS_PER_DAY = 96
STEPS_PER_WEEK = 7 * STEPS_PER_DAY
STEPS_PER_YEAR = 365 * STEPS_PER_DAY

ASSETS = ("boil", "hp", "chp", "tess", "bess")
THERMAL_ASSETS = ("boil", "hp", "chp", "tess")
SEMI_CONTINUOUS = ("boil", "hp", "chp")

KELVIN = 273.15
# round-off allowance at the on/off threshold of semi-continuous assets
ON_TOL = 1e-12


@dataclass(frozen=True)
class AssetSpec:
    """Nameplate data of one asset (powers in W, energy in Wh)."""

    p_nom_th: float = 0.0
    p_nom_el: float = 0.0
    p_min_frac: float = 0.0
    e_nom: float = 0.0

    def __post_init__(self):
        if self.p_nom_th < 0 or self.p_nom_el < 0:
            raise ValueError("nominal powers must be non-negative")
        if not 0.0 <= self.p_min_frac <= 1.0:
            raise ValueError("p_min_frac must lie in [0, 1]")
        if self.e_nom < 0:
            raise ValueError("e_nom must be non-negative")


def default_assets() -> dict[str, AssetSpec]:
    return {
        "boil": AssetSpec(p_nom_th=2.0e6, p_min_frac=0.10),
        "hp": AssetSpec(p_nom_th=1.0e6, p_min_frac=0.25),
        "chp": AssetSpec(p_nom_th=1.0e6, p_nom_el=0.8e6, p_min_frac=0.50),
        "tess": AssetSpec(p_nom_th=0.5e6, e_nom=3.5e6),
        "bess": AssetSpec(p_nom_el=0.5e6, e_nom=2.0e6),
        "wind": AssetSpec(p_nom_el=0.8e6, p_min_frac=0.015),
        "solar": AssetSpec(p_nom_el=1.0e6),
    }


@dataclass(frozen=True)
class NoiseConfig:
    """Truncated multiplicative Gaussian noise on thermal outputs.

    ``sigma_mult`` is the base standard deviation; each thermal asset scales it
    by its entry in ``asset_scale`` (a well-controlled CHP is quieter than a
    heat pump).
    """

    sigma_mult: float = 0.015
    clip: float = 3.0
    seed: int = 0
    asset_scale: tuple = (("boil", 0.8), ("hp", 1.2), ("chp", 0.2), ("tess", 1.5))

    def __post_init__(self):
        if self.sigma_mult < 0:
            raise ValueError("sigma_mult must be >= 0")
        if self.clip <= 0:
            raise ValueError("clip must be > 0")

    def sigma(self, asset: str) -> float:
        return self.sigma_mult * dict(self.asset_scale).get(asset, 1.0)


@dataclass(frozen=True)
class PlantConfig:
    """Physical parameters of the reference plant.

    All keys are flat so the config round-trips through a key-value file.
    Temperatures are in kelvin, time constants in control steps.
    """

    # boiler
    boil_eta_ref: float = 0.97
    boil_eta_slope: float = 0.009
    boil_t_ref: float = 313.15
    ret_t_base: float = 313.15
    ret_t_span: float = 20.0
    tau_boiler: float = 2.0
    # heat pump
    hp_carnot_frac: float = 0.45
    hp_t_evap_design: float = 283.15
    hp_t_cond_design: float = 323.15
    hp_evap_drop: float = 30.0
    hp_cond_rise: float = 10.0
    tau_hp: float = 2.0
    # chp
    chp_partload_coef: float = 0.01
    chp_env_derate: float = 0.002
    chp_t_env_ref: float = 278.15
    chp_eta_th_abs: float = 0.50
    # thermal store
    tess_t_cold: float = 318.15
    tess_t_hot: float = 363.15
    tess_eta_charge: float = 0.97
    tess_eta_discharge: float = 0.97
    tess_standby_loss: float = 0.0004
    tess_return_sens: float = 1.0
    tess_sat_band: float = 0.8
    tau_tess: float = 24.0
    # battery
    bess_eta_charge: float = 0.95
    bess_eta_discharge: float = 0.95
    # ambient
    env_t_mean: float = 281.15
    env_t_season: float = 5.5
    env_t_daily: float = 3.0
    # prices
    gas_price_per_mwh: float = 35.0
    # normalisation ranges
    e_th_max: float = 3.0e6
    e_el_max: float = 1.5e6
    price_min: float = -50.0
    price_max: float = 250.0

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, values: dict) -> "PlantConfig":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, val in values.items():
            if key not in known:
                raise KeyError(f"unknown plant config key: {key}")
            kwargs[key] = float(val)
        return cls(**kwargs)


@dataclass
class PlantState:
    t: int = 0
    soc_tess: float = 0.5
    soc_bess: float = 0.5
    temp_boiler_return: float = 323.15
    temp_evap: float = 283.15
    temp_cond: float = 323.15
    temp_env: float = 278.15
    temp_tess_avg: float = 340.65
    q_boil_prev: float = 0.0
    q_hp_prev: float = 0.0
    q_chp_prev: float = 0.0
    q_tess_prev: float = 0.0
    q_demand_prev: float = 0.0

    def copy(self) -> "PlantState":
        return replace(self)


@dataclass
class StepOutcome:
    """What one control step realised."""

    q: dict
    p_chp: float
    p_hp: float
    p_bess: float
    grid: float
    q_demand: float
    q_production: float
    l_cost: float
    l_comfort: float
    spilled_tess: float = 0.0
    spilled_bess: float = 0.0
    loss_tess: float = 0.0
    loss_bess: float = 0.0
    p_demand: float = 0.0
    wind: float = 0.0
    solar: float = 0.0


def ambient_temperature(step, cfg: PlantConfig = PlantConfig()):
    """Outdoor temperature [K] at absolute step index (step 0 = 1 Jan, 00:00)."""
    step = np.asarray(step, dtype=float)
    day = step / STEPS_PER_DAY
    season = np.cos(2 * np.pi * (day - 15.0) / 365.0)
    daily = np.cos(2 * np.pi * ((day % 1.0) - 0.625))
    return cfg.env_t_mean - cfg.env_t_season * season + cfg.env_t_daily * daily


def action_to_fraction(a, p_min_frac):
    """Decode scaled action(s) in [-1, 1] to a load fraction; below minimum is off."""
    u = (np.asarray(a, dtype=float) + 1.0) / 2.0
    return np.where(u < p_min_frac - ON_TOL, 0.0, u)


def off_threshold(p_min_frac: float) -> float:
    """Scaled action at which a semi-continuous asset switches on."""
    return 2.0 * p_min_frac - 1.0


def _smoothstep(z: float) -> float:
    """Cubic 3z^2 - 2z^3 on [0, 1], saturating outside."""
    z = min(max(z, 0.0), 1.0)
    return z * z * (3.0 - 2.0 * z)


def _draw_truncated(rng: np.random.Generator, clip: float) -> float:
    z = rng.standard_normal()
    while abs(z) > clip:
        z = rng.standard_normal()
    return z


class Plant:
    """Stateful wrapper bundling config, nameplates and a noise stream."""

    def __init__(self, cfg: PlantConfig | None = None, assets=None,
                 noise: NoiseConfig | None = None):
        self.cfg = cfg or PlantConfig()
        self.assets = assets or default_assets()
        self.noise = noise or NoiseConfig()
        self.rng = np.random.default_rng(self.noise.seed)

    # --- state ---------------------------------------------------------
    def initial_state(self, start_step: int = 0, soc_tess: float = 0.5,
                      soc_bess: float = 0.5) -> PlantState:
        c = self.cfg
        return PlantState(
            t=start_step,
            soc_tess=soc_tess,
            soc_bess=soc_bess,
            temp_boiler_return=c.ret_t_base + 0.5 * c.ret_t_span,
            temp_evap=c.hp_t_evap_design,
            temp_cond=c.hp_t_cond_design,
            temp_env=float(ambient_temperature(start_step, c)),
            temp_tess_avg=c.tess_t_cold + soc_tess * (c.tess_t_hot - c.tess_t_cold),
        )

    def draw_noise(self) -> dict:
        """One multiplicative factor per thermal asset; always four draws."""
        out = {}
        for name in THERMAL_ASSETS:
            z = _draw_truncated(self.rng, self.noise.clip)
            out[name] = 1.0 + self.noise.sigma(name) * z
        return out

    # --- asset physics ---------------------------------------------------
    def tess_capacity(self, state: PlantState) -> tuple[float, float]:
        """(discharge, charge) power limits of the store [W]."""
        c = self.cfg
        q_max = self.assets["tess"].p_nom_th
        x = (state.temp_tess_avg - c.tess_t_cold) / (c.tess_t_hot - c.tess_t_cold)
        x = min(max(x, 0.0), 1.0)
        ret_x = (state.temp_boiler_return - c.ret_t_base) / c.ret_t_span
        ret_factor = 1.0 - c.tess_return_sens * 0.5 * min(max(ret_x, 0.0), 1.0)
        discharge = q_max * _smoothstep(x / c.tess_sat_band) * ret_factor
        charge = q_max * _smoothstep((1.0 - x) / c.tess_sat_band)
        return discharge, charge

    def true_asset_output(self, asset: str, action_component: float,
                          state: PlantState, noise: float = 1.0):
        """Realised thermal output [W] of one asset; CHP also returns electrical W.

        ``noise`` is the multiplicative factor (1 + w).  Storage energy limits
        are not applied here (see :meth:`step`).
        """
        c = self.cfg
        spec = self.assets[asset]
        a = float(action_component)
        if asset == "boil":
            u = float(action_to_fraction(a, spec.p_min_frac))
            eta = c.boil_eta_ref - c.boil_eta_slope * (state.temp_boiler_return - c.boil_t_ref)
            return u * (eta / c.boil_eta_ref) * spec.p_nom_th * noise
        if asset == "hp":
            u = float(action_to_fraction(a, spec.p_min_frac))
            return u * self.hp_cop_ratio(state) * spec.p_nom_th * noise
        if asset == "chp":
            u = float(action_to_fraction(a, spec.p_min_frac))
            q = u * self.chp_eta_ratio(u, state.temp_env) * spec.p_nom_th * noise
            return q, q * spec.p_nom_el / spec.p_nom_th
        if asset == "tess":
            request = a * spec.p_nom_th
            discharge, charge = self.tess_capacity(state)
            return min(max(request, -charge), discharge) * noise
        raise KeyError(asset)

    def hp_cop(self, t_evap: float, t_cond: float) -> float:
        return self.cfg.hp_carnot_frac * t_cond / (t_cond - t_evap)

    def hp_cop_max(self) -> float:
        return self.hp_cop(self.cfg.hp_t_evap_design, self.cfg.hp_t_cond_design)

    def hp_cop_ratio(self, state: PlantState) -> float:
        return self.hp_cop(state.temp_evap, state.temp_cond) / self.hp_cop_max()

    def chp_eta_ratio(self, u: float, t_env: float) -> float:
        c = self.cfg
        if u <= 0.0:
            return 0.0
        part = 1.0 - c.chp_partload_coef * (1.0 - u) ** 2
        return part * (1.0 - c.chp_env_derate * (t_env - c.chp_t_env_ref))

    # --- dynamics --------------------------------------------------------
    def step(self, state: PlantState, action, profile) -> tuple[PlantState, StepOutcome]:
        """Advance one 15-minute step under ``action`` (scaled, 5 components)."""
        a = np.asarray(action, dtype=float)
        if a.shape != (5,):
            raise ValueError("action must have 5 components")
        if np.any(np.abs(a) > 1.0 + 1e-9) or not np.all(np.isfinite(a)):
            raise ValueError(f"action outside [-1, 1]: {a}")
        a = np.clip(a, -1.0, 1.0)
        c = self.cfg
        i = profile.index(state.t)
        q_demand = float(profile.thermal_demand[i])
        p_demand = float(profile.electrical_demand[i])
        wind = float(profile.wind_infeed[i])
        solar = float(profile.solar_infeed[i])
        price = float(profile.elec_price[i])

        noise = self.draw_noise()
        q_boil = self.true_asset_output("boil", a[0], state, noise["boil"])
        q_hp = self.true_asset_output("hp", a[1], state, noise["hp"])
        q_chp, p_chp = self.true_asset_output("chp", a[2], state, noise["chp"])
        q_tess_req = self.true_asset_output("tess", a[3], state, noise["tess"])

        # thermal store energy bookkeeping
        tess = self.assets["tess"]
        e_tess = state.soc_tess * tess.e_nom
        standby = c.tess_standby_loss * e_tess
        e_avail = e_tess - standby
        if q_tess_req >= 0:
            q_tess = min(q_tess_req, e_avail * c.tess_eta_discharge / DT_HOURS)
            e_new = e_avail - q_tess * DT_HOURS / c.tess_eta_discharge
            conv_loss = q_tess * DT_HOURS * (1.0 / c.tess_eta_discharge - 1.0)
        else:
            room = tess.e_nom - e_avail
            q_tess = max(q_tess_req, -room / (c.tess_eta_charge * DT_HOURS))
            e_new = e_avail - q_tess * DT_HOURS * c.tess_eta_charge
            conv_loss = -q_tess * DT_HOURS * (1.0 - c.tess_eta_charge)
        spilled_tess = abs(q_tess_req - q_tess)
        soc_tess = min(max(e_new / tess.e_nom, 0.0), 1.0)
        loss_tess = standby + conv_loss

        bess = self.assets["bess"]
        p_req = a[4] * bess.p_nom_el
        e_bess = state.soc_bess * bess.e_nom
        if p_req >= 0:
            p_bess = min(p_req, (bess.e_nom - e_bess) / (c.bess_eta_charge * DT_HOURS))
            e_bess_new = e_bess + p_bess * DT_HOURS * c.bess_eta_charge
            loss_bess = p_bess * DT_HOURS * (1.0 - c.bess_eta_charge)
        else:
            p_bess = max(p_req, -e_bess * c.bess_eta_discharge / DT_HOURS)
            e_bess_new = e_bess + p_bess * DT_HOURS / c.bess_eta_discharge
            loss_bess = -p_bess * DT_HOURS * (1.0 / c.bess_eta_discharge - 1.0)
        spilled_bess = abs(p_req - p_bess)
        soc_bess = min(max(e_bess_new / bess.e_nom, 0.0), 1.0)

        cop = self.hp_cop(state.temp_evap, state.temp_cond)
        p_hp = q_hp / cop if q_hp > 0 else 0.0
        grid = p_demand + p_hp + p_bess - wind - solar - p_chp

        # energy cost: grid exchange at spot price (export earns it), gas for boiler and CHP
        eta_boil = c.boil_eta_ref - c.boil_eta_slope * (state.temp_boiler_return - c.boil_t_ref)
        gas_wh = (q_boil / eta_boil + q_chp / c.chp_eta_th_abs) * DT_HOURS
        l_cost = grid * DT_HOURS * price / 1e6 + gas_wh * c.gas_price_per_mwh / 1e6

        q_production = q_boil + q_hp + q_chp + q_tess
        l_comfort = abs(q_demand - q_production)

        # first-order temperature lags
        u_hp = float(action_to_fraction(a[1], self.assets["hp"].p_min_frac))
        evap_sp = c.hp_t_evap_design - c.hp_evap_drop * u_hp
        cond_sp = c.hp_t_cond_design + c.hp_cond_rise * u_hp
        ret_sp = c.ret_t_base + c.ret_t_span * q_demand / c.e_th_max
        tess_sp = c.tess_t_cold + soc_tess * (c.tess_t_hot - c.tess_t_cold)
        k_hp = 1.0 - math.exp(-1.0 / c.tau_hp)
        k_b = 1.0 - math.exp(-1.0 / c.tau_boiler)
        k_t = 1.0 - math.exp(-1.0 / c.tau_tess)

        new = PlantState(
            t=state.t + 1,
            soc_tess=soc_tess,
            soc_bess=soc_bess,
            temp_boiler_return=state.temp_boiler_return + k_b * (ret_sp - state.temp_boiler_return),
            temp_evap=state.temp_evap + k_hp * (evap_sp - state.temp_evap),
            temp_cond=state.temp_cond + k_hp * (cond_sp - state.temp_cond),
            temp_env=float(ambient_temperature(state.t + 1, c)),
            temp_tess_avg=state.temp_tess_avg + k_t * (tess_sp - state.temp_tess_avg),
            q_boil_prev=q_boil,
            q_hp_prev=q_hp,
            q_chp_prev=q_chp,
            q_tess_prev=q_tess,
            q_demand_prev=q_demand,
        )
        outcome = StepOutcome(
            q={"boil": q_boil, "hp": q_hp, "chp": q_chp, "tess": q_tess},
            p_chp=p_chp, p_hp=p_hp, p_bess=p_bess, grid=grid,
            q_demand=q_demand, q_production=q_production,
            l_cost=l_cost, l_comfort=l_comfort,
            spilled_tess=spilled_tess, spilled_bess=spilled_bess,
            loss_tess=loss_tess, loss_bess=loss_bess,
            p_demand=p_demand, wind=wind, solar=solar,
        )
        return new, outcome
