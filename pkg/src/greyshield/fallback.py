"""CHP-priority cascade used as the a-priori safe policy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nominal import NominalModel, predict_nominal
from .plant import default_assets


class CapacityExceededError(ValueError):
    pass


@dataclass(frozen=True)
class FallbackConfig:
    chp: NominalModel
    boil: NominalModel
    chp_min_frac: float = 0.5
    boil_min_frac: float = 0.1
    a_hp: float = -1.0
    a_tess: float = 0.0
    a_bess: float = 0.0

    def __post_init__(self):
        if not self.q_min_chp < self.q_max_chp:
            raise ValueError("q_min_chp must be below q_max_chp")

    @classmethod
    def from_models(cls, models: dict, assets: dict | None = None, **kw) -> "FallbackConfig":
        assets = assets or default_assets()
        return cls(chp=models["chp"], boil=models["boil"],
                   chp_min_frac=assets["chp"].p_min_frac,
                   boil_min_frac=assets["boil"].p_min_frac, **kw)

    @property
    def q_min_chp(self) -> float:
        return predict_nominal(self.chp, self.chp_min_frac)

    @property
    def q_max_chp(self) -> float:
        return predict_nominal(self.chp, 1.0)

    @property
    def q_min_boil(self) -> float:
        return predict_nominal(self.boil, self.boil_min_frac)

    @property
    def q_max_boil(self) -> float:
        return predict_nominal(self.boil, 1.0)


def invert_producer(model: NominalModel, q: float, min_frac: float) -> float:
    """Scaled action giving nominal output ``q`` (off when ``q`` is zero)."""
    if q <= 0.0:
        return -1.0
    coef = np.asarray(model.coef)
    # roots of sum_k c_k u^k - q on [0, 1]
    poly = np.concatenate([coef[::-1], [-q]])
    roots = np.roots(poly)
    real = roots[np.abs(roots.imag) < 1e-9].real
    real = real[(real >= min_frac - 1e-9) & (real <= 1.0 + 1e-9)]
    if real.size == 0:
        raise CapacityExceededError(f"{model.asset}: no setpoint yields {q:.6g} W")
    u = float(np.clip(real.min(), min_frac, 1.0))
    if model.degree == 1:
        u = float(np.clip(q / coef[0], min_frac, 1.0))
    return 2.0 * u - 1.0


def fallback_dispatch(q_demand: float, cfg: FallbackConfig) -> tuple[float, float]:
    """Thermal setpoints (Q_chp, Q_boil) of the cascade."""
    if q_demand < 0:
        raise ValueError("q_demand must be >= 0")
    q_min_chp, q_max_chp = cfg.q_min_chp, cfg.q_max_chp
    q_min_boil, q_max_boil = cfg.q_min_boil, cfg.q_max_boil
    if q_demand > q_max_chp + q_max_boil * (1 + 1e-12):
        raise CapacityExceededError(
            f"demand {q_demand:.6g} W exceeds CHP + boiler capacity {q_max_chp + q_max_boil:.6g} W")
    if q_demand == 0.0:
        return 0.0, 0.0
    if q_demand < q_min_chp:
        if q_demand < q_min_boil:
            raise CapacityExceededError(
                f"demand {q_demand:.6g} W below boiler minimum {q_min_boil:.6g} W")
        return 0.0, q_demand
    if q_demand < q_max_chp:
        return q_demand, 0.0
    rest = q_demand - q_max_chp
    if 0.0 < rest < q_min_boil:
        # boiler cannot run this low; back the CHP off so the boiler sits at its minimum
        return q_demand - q_min_boil, q_min_boil
    return q_max_chp, rest


def fallback_action(q_demand: float, cfg: FallbackConfig) -> np.ndarray:
    q_chp, q_boil = fallback_dispatch(q_demand, cfg)
    return np.array([
        invert_producer(cfg.boil, q_boil, cfg.boil_min_frac),
        cfg.a_hp,
        invert_producer(cfg.chp, q_chp, cfg.chp_min_frac),
        cfg.a_tess,
        cfg.a_bess,
    ])


class FallbackPolicy:
    """Callable wrapper: ``policy(q_demand) -> scaled action``."""

    def __init__(self, cfg: FallbackConfig):
        self.cfg = cfg

    def __call__(self, q_demand: float) -> np.ndarray:
        return fallback_action(q_demand, self.cfg)
