"""A-priori polynomial output models of the thermal assets and their accuracy metrics.

Producers (boiler, CHP: linear; heat pump: quadratic) are zero-intercept
polynomials in the load fraction ``u`` in [0, 1].  The thermal store is a full
bivariate cubic in its setpoint (charge/discharge fraction in [-1, 1]) and SOC.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .plant import SEMI_CONTINUOUS, AssetSpec, default_assets

DEGREES = {"boil": 1, "chp": 1, "hp": 2, "tess": 3}
FORMAT_TAG = "greyshield-nominal v1"


class DegenerateDataError(ValueError):
    """Design matrix is rank deficient."""


class UndefinedMetricError(ValueError):
    """Normalising range of the actual values is zero."""


@dataclass(frozen=True)
class ModelMetrics:
    r2: float
    mae: float
    nmae: float


@dataclass(frozen=True)
class NominalModel:
    asset: str
    degree: int
    coef: tuple
    q_max: float = np.inf
    input_range: tuple = (0.0, 1.0)

    @property
    def is_producer(self) -> bool:
        return self.asset in SEMI_CONTINUOUS


def _tess_exponents(degree):
    return [(i, j) for total in range(degree + 1) for i in range(total + 1)
            for j in [total - i]]


def design_matrix(asset: str, setpoint, soc=None, degree=None) -> np.ndarray:
    degree = DEGREES[asset] if degree is None else degree
    x = np.atleast_1d(np.asarray(setpoint, dtype=float))
    if asset == "tess":
        s = np.broadcast_to(np.asarray(0.0 if soc is None else soc, dtype=float), x.shape)
        return np.stack([x ** i * s ** j for i, j in _tess_exponents(degree)], axis=-1)
    return np.stack([x ** k for k in range(1, degree + 1)], axis=-1)


def metrics(predictions, actuals) -> ModelMetrics:
    """R2, MAE and range-normalised MAE."""
    pred = np.asarray(predictions, dtype=float)
    act = np.asarray(actuals, dtype=float)
    if pred.shape != act.shape or act.size == 0:
        raise ValueError("predictions and actuals must be equal-length and nonempty")
    span = float(act.max() - act.min())
    if span <= 0.0:
        raise UndefinedMetricError("range of actual values is zero")
    err = pred - act
    mae = float(np.mean(np.abs(err)))
    ss_res = float(np.sum(err ** 2))
    ss_tot = float(np.sum((act - act.mean()) ** 2))
    return ModelMetrics(r2=1.0 - ss_res / ss_tot, mae=mae, nmae=mae / span)


def fit_nominal(asset: str, setpoint, q, soc=None, degree=None,
                q_max: float | None = None, holdout: float = 0.2):
    """Least-squares fit; returns ``(model, metrics on an interleaved 20% holdout)``."""
    degree = DEGREES[asset] if degree is None else degree
    x = np.asarray(setpoint, dtype=float)
    y = np.asarray(q, dtype=float)
    if x.shape != y.shape:
        raise ValueError("setpoint and q must have the same shape")
    n_coef = design_matrix(asset, 0.0, 0.0, degree).shape[-1]
    if x.size < 10 * (degree + 1):
        raise ValueError(f"need at least {10 * (degree + 1)} samples, got {x.size}")
    s = None if soc is None else np.asarray(soc, dtype=float)
    X = design_matrix(asset, x, s, degree)
    # every k-th sample is held out so the validation set spans all seasons
    held = np.zeros(x.size, dtype=bool)
    if holdout > 0:
        held[::max(int(round(1.0 / holdout)), 2)] = True
    fit = ~held
    if np.linalg.matrix_rank(X[fit]) < n_coef:
        raise DegenerateDataError(f"{asset}: rank-deficient design matrix")
    coef, *_ = np.linalg.lstsq(X[fit], y[fit], rcond=None)
    lo = -1.0 if asset == "tess" else 0.0
    if q_max is None:
        q_max = default_assets()[asset].p_nom_th
    model = NominalModel(asset, degree, tuple(float(c) for c in coef), float(q_max), (lo, 1.0))
    sel = held if held.any() else fit
    val = metrics(predict_nominal(model, x[sel], None if s is None else s[sel]), y[sel])
    return model, val


def _check_range(model: NominalModel, x):
    lo, hi = model.input_range
    if np.any(x < lo - 1e-12) or np.any(x > hi + 1e-12) or not np.all(np.isfinite(x)):
        raise ValueError(f"{model.asset}: setpoint outside [{lo}, {hi}]")


def predict_nominal(model: NominalModel, setpoint, soc=None):
    """Nominal thermal output [W]; producers are clamped to [0, q_max]."""
    x = np.asarray(setpoint, dtype=float)
    _check_range(model, x)
    q = design_matrix(model.asset, x, soc, model.degree) @ np.asarray(model.coef)
    if model.is_producer:
        q = np.clip(q, 0.0, model.q_max)
    return float(q[0]) if np.ndim(setpoint) == 0 else q.reshape(x.shape)


def nominal_derivative(model: NominalModel, setpoint: float, soc: float | None = None) -> float:
    """d(output)/d(setpoint) of the unclamped polynomial."""
    c = model.coef
    x = float(setpoint)
    if model.asset == "tess":
        s = 0.0 if soc is None else float(soc)
        return float(sum(ci * i * x ** (i - 1) * s ** j
                         for ci, (i, j) in zip(c, _tess_exponents(model.degree)) if i > 0))
    return float(sum(ck * k * x ** (k - 1) for k, ck in enumerate(c, start=1)))


def datasheet_models(assets: dict | None = None) -> dict:
    """Nameplate models: output = setpoint * rating (used before commissioning)."""
    assets = assets or default_assets()
    out = {}
    for name in ("boil", "chp", "hp"):
        q = assets[name].p_nom_th
        coef = (q,) + (0.0,) * (DEGREES[name] - 1)
        out[name] = NominalModel(name, DEGREES[name], coef, q)
    q = assets["tess"].p_nom_th
    coef = [0.0] * len(_tess_exponents(3))
    coef[_tess_exponents(3).index((1, 0))] = q
    out["tess"] = NominalModel("tess", 3, tuple(coef), q, (-1.0, 1.0))
    return out


@dataclass(frozen=True)
class AssetBounds:
    q_min: float
    q_max: float
    p_min: float = 0.0
    p_max: float = 0.0
    binary: bool = False

    def __post_init__(self):
        if self.q_min > self.q_max:
            raise ValueError("q_min must not exceed q_max")


@dataclass(frozen=True)
class BoundSet:
    """Per-asset thermal/electrical output bounds; semi-continuous assets carry a binary."""

    bounds: dict = field(default_factory=dict)

    def __getitem__(self, asset):
        return self.bounds[asset]

    @classmethod
    def from_assets(cls, assets: dict | None = None) -> "BoundSet":
        assets = assets or default_assets()
        b = {}
        for name in SEMI_CONTINUOUS:
            s: AssetSpec = assets[name]
            b[name] = AssetBounds(s.p_min_frac * s.p_nom_th, s.p_nom_th,
                                  s.p_min_frac * s.p_nom_el, s.p_nom_el, True)
        b["tess"] = AssetBounds(-assets["tess"].p_nom_th, assets["tess"].p_nom_th)
        b["bess"] = AssetBounds(0.0, 0.0, -assets["bess"].p_nom_el, assets["bess"].p_nom_el)
        return cls(b)


def save_models(models: dict, path) -> None:
    lines = [FORMAT_TAG]
    for name in sorted(models):
        m = models[name]
        lines.append(f"asset {m.asset}")
        lines.append(f"degree {m.degree}")
        lines.append(f"q_max {m.q_max:.17g}")
        lines.append(f"range {m.input_range[0]:.17g} {m.input_range[1]:.17g}")
        lines.append("coef " + " ".join(f"{c:.17g}" for c in m.coef))
    Path(path).write_text("\n".join(lines) + "\n")


def load_models(path) -> dict:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != FORMAT_TAG:
        raise ValueError("not a nominal model file")
    out = {}
    cur = {}
    for line in lines[1:]:
        if not line.strip():
            continue
        key, _, rest = line.partition(" ")
        if key == "asset":
            cur = {"asset": rest.strip()}
        elif key == "degree":
            cur["degree"] = int(rest)
        elif key == "q_max":
            cur["q_max"] = float(rest)
        elif key == "range":
            lo, hi = rest.split()
            cur["input_range"] = (float(lo), float(hi))
        elif key == "coef":
            cur["coef"] = tuple(float(c) for c in rest.split())
            out[cur["asset"]] = NominalModel(**cur)
        else:
            raise ValueError(f"unknown key {key!r} in model file")
    return out
