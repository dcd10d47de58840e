"""Learned residual output models for the heat pump and the thermal store.

Each surrogate is a rectifier MLP predicting ``realised Q - nominal Q`` from a
fixed feature vector.  Refits follow a weekly-then-monthly schedule and a new
model only replaces the current one when it scores better on validation data.
"""

from __future__ import annotations

import bisect
import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .nn import Adam, Mlp, PlateauSchedule, load_mlp_text, mse_loss_and_grads, save_mlp_text
from .nominal import ModelMetrics, UndefinedMetricError, metrics, predict_nominal
from .plant import STEPS_PER_WEEK, action_to_fraction

log = logging.getLogger(__name__)

FEATURES = {
    "hp": ("a_hp", "q_hp_prev"),
    "tess": ("a_tess", "soc_tess", "q_tess_prev", "q_demand_prev"),
}
HIDDEN = {"hp": (15, 10, 10, 10), "tess": (25, 20, 20, 10)}
FORMAT_TAG = "greyshield-mlp v1"


class MlpModel:
    """Standardised scalar regressor ``features -> residual [W]``."""

    def __init__(self, n_in: int, hidden=(10,), rng=None):
        self.net = Mlp([n_in, *hidden, 1], output="identity", rng=rng, zero_output=True)
        self.x_mean = np.zeros(n_in)
        self.x_std = np.ones(n_in)
        self.y_mean = 0.0
        self.y_std = 1.0

    @property
    def n_in(self) -> int:
        return self.net.widths[0]

    def copy(self) -> "MlpModel":
        new = MlpModel.__new__(MlpModel)
        new.net = self.net.copy()
        new.x_mean, new.x_std = self.x_mean.copy(), self.x_std.copy()
        new.y_mean, new.y_std = self.y_mean, self.y_std
        return new

    def set_standardization(self, X, y) -> None:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = np.asarray(y, dtype=float)
        self.x_mean = X.mean(axis=0)
        std = X.std(axis=0)
        self.x_std = np.where(std > 0, std, 1.0)
        self.y_mean = float(y.mean())
        s = float(y.std())
        self.y_std = s if s > 0 else 1.0

    def scale_x(self, X):
        return (np.atleast_2d(np.asarray(X, dtype=float)) - self.x_mean) / self.x_std

    def scale_y(self, y):
        return (np.asarray(y, dtype=float) - self.y_mean) / self.y_std

    def predict(self, X) -> np.ndarray:
        """Residual predictions [W] for a batch (or a single feature vector)."""
        out = self.net.forward(self.scale_x(X))[:, 0] * self.y_std + self.y_mean
        return out

    def __call__(self, features) -> float:
        return float(self.predict(features)[0])

    def local_affine(self, features, which: int = 0) -> tuple[float, float]:
        """Exact affine map in input ``which`` on the activation region of ``features``.

        Returns ``(slope, intercept)`` with ``model(f) == slope * f[which] +
        intercept`` for every ``f`` sharing the activation pattern and the
        other inputs.
        """
        f = np.asarray(features, dtype=float)
        z = self.scale_x(f)
        J = self.net.input_jacobian(z)[0]
        slope = float(J[which] * self.y_std / self.x_std[which])
        value = self(f)
        return slope, value - slope * float(f[which])


    def line_function(self, features, which: int = 0, lo: float = -1.0, hi: float = 1.0
                      ) -> "PiecewiseLinear":
        """The model as an exact piecewise-linear function of input ``which``
        on ``[lo, hi]``, the other inputs held at ``features``."""
        f = np.asarray(features, dtype=float)
        x0 = self.scale_x(f)[0]
        e = np.zeros_like(x0)
        e[which] = 1.0 / self.x_std[which]
        # parametrise by the raw input value
        x0 = x0 - e * f[which]
        knots = self.net.line_knots(x0, e, lo, hi)
        knots = knots[np.concatenate([[True], np.diff(knots) > 1e-12])]
        if knots.size < 2:
            knots = np.array([lo, hi])
        X = np.repeat(f[None, :], knots.size, axis=0)
        X[:, which] = knots
        return PiecewiseLinear(knots, self.predict(X))


class PiecewiseLinear:
    """Continuous piecewise-linear scalar function given by knots and values."""

    def __init__(self, knots, values):
        self.knots = np.asarray(knots, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self._t = self.knots.tolist()
        self._v = self.values.tolist()
        self._s = (np.diff(self.values) / np.diff(self.knots)).tolist()

    def __call__(self, x: float) -> float:
        return self.value_and_slope(x)[0]

    def value_and_slope(self, x: float) -> tuple[float, float]:
        """Value and slope; at a knot the slope of the segment to its right
        (left segment at the upper end).  Linear extrapolation outside."""
        i = bisect.bisect_right(self._t, x) - 1
        i = min(max(i, 0), len(self._s) - 1)
        s = self._s[i]
        return self._v[i] + s * (x - self._t[i]), s

    def range(self, lo: float, hi: float) -> tuple[float, float]:
        inner = self.values[(self.knots > lo) & (self.knots < hi)]
        vals = [self(lo), self(hi), *inner.tolist()]
        return min(vals), max(vals)

def surrogate_features(asset: str, a, soc, q_hp_prev, q_tess_prev, q_demand_prev) -> np.ndarray:
    if asset == "hp":
        return np.array([a, q_hp_prev], dtype=float)
    if asset == "tess":
        return np.array([a, soc, q_tess_prev, q_demand_prev], dtype=float)
    raise KeyError(asset)


@dataclass(frozen=True)
class TrainSchedule:
    h_initial: int = STEPS_PER_WEEK
    h_later: int = 4 * STEPS_PER_WEEK
    switch_step: int = 4 * STEPS_PER_WEEK

    def __post_init__(self):
        if self.h_initial <= 0 or self.h_later <= 0:
            raise ValueError("training intervals must be positive")

    def interval(self, k: int) -> int:
        return self.h_initial if k < self.switch_step else self.h_later

    def is_fit_step(self, k: int) -> bool:
        """Fit after step ``k`` (0-indexed) when ``k mod h == h - 1``."""
        h = self.interval(k)
        return k % h == h - 1


@dataclass
class FitConfig:
    max_epochs: int = 500
    patience: int = 10
    batch_size: int = 200
    lr: float = 1e-3
    val_frac: float = 0.2
    min_samples: int = 200
    seed: int = 0


def dataset(log_, asset: str, nominal_models: dict, assets, start=0, stop=None):
    """Features, residual targets, realised Q and nominal Q from an operation log.

    Heat-pump rows where the unit was commanded off are dropped: the
    surrogate only corrects the running unit.
    """
    cols = {c: log_.array(c, start, stop) for c in FEATURES[asset]}
    X = np.column_stack([cols[c] for c in FEATURES[asset]]) if len(log_) else np.zeros((0, len(cols)))
    q = log_.array("q_" + asset, start, stop)
    a = cols["a_" + asset]
    if asset == "hp":
        u = action_to_fraction(a, assets["hp"].p_min_frac)
        keep = u > 0
        X, q, u = X[keep], q[keep], u[keep]
        q_nom = predict_nominal(nominal_models["hp"], u) if u.size else np.zeros(0)
    else:
        soc = cols["soc_tess"]
        q_nom = predict_nominal(nominal_models["tess"], a, soc) if a.size else np.zeros(0)
    return X, q - q_nom, q, q_nom


def train_mlp(model: MlpModel, X_tr, y_tr, X_val, y_val, cfg: FitConfig, rng) -> dict:
    """Minibatch Adam with plateau halving and early stopping on validation loss.

    Trains in place (warm start) and leaves the best-validation weights.
    """
    model.set_standardization(X_tr, y_tr)
    Xs, ys = model.scale_x(X_tr), model.scale_y(y_tr)[:, None]
    Xv, yv = model.scale_x(X_val), model.scale_y(y_val)[:, None]
    opt = Adam(model.net.params, lr=cfg.lr)
    sched = PlateauSchedule(lr=cfg.lr)
    best_val, best_params, bad, epochs = np.inf, model.net.params, 0, 0
    n = Xs.shape[0]
    bs = min(cfg.batch_size, n)
    for epoch in range(cfg.max_epochs):
        epochs = epoch + 1
        order = rng.permutation(n)
        total = 0.0
        for i in range(0, n, bs):
            idx = order[i:i + bs]
            loss, grads = mse_loss_and_grads(model.net, Xs[idx], ys[idx])
            model.net.set_params(opt.step(model.net.params, grads, sched.lr))
            total += loss * idx.size
        sched.update(total / n)
        val = float(np.mean((model.net.forward(Xv) - yv) ** 2))
        if val < best_val - 1e-12:
            best_val, best_params, bad = val, [p.copy() for p in model.net.params], 0
        else:
            bad += 1
            if bad >= cfg.patience:
                break
    model.net.set_params(best_params)
    return {"epochs": epochs, "val_mse": best_val}


def combined_metrics(model: MlpModel | None, X, q, q_nom) -> ModelMetrics:
    pred = q_nom if model is None else q_nom + model.predict(X)
    return metrics(pred, q)


@dataclass
class FitRecord:
    fit_index: int
    step: int
    asset: str
    nmae: float
    mae: float
    r2: float
    accepted: bool
    version: int


class SurrogateLearner:
    """Holds the accepted surrogates and refits them from an operation log.

    ``version`` increases by one each time any model is replaced; the
    projection always uses the models current at step start.
    """

    def __init__(self, nominal_models: dict, assets, schedule: TrainSchedule = TrainSchedule(),
                 fit_cfg: FitConfig = FitConfig(), hidden: dict | None = None):
        self.nominal = nominal_models
        self.assets = assets
        self.schedule = schedule
        self.fit_cfg = fit_cfg
        self.hidden = dict(HIDDEN if hidden is None else hidden)
        self.models: dict = {}
        self.val_nmae: dict = {}
        self.version = 0
        self.fit_index = 0
        self.history: list[FitRecord] = []

    def maybe_fit(self, k: int, oplog) -> bool:
        if self.schedule.is_fit_step(k):
            self.fit(oplog, k)
            return True
        return False

    def fit(self, oplog, step: int) -> dict:
        out = {}
        for asset in ("hp", "tess"):
            out[asset] = self._fit_asset(asset, oplog, step)
        self.fit_index += 1
        return out

    def _fit_asset(self, asset, oplog, step):
        cfg = self.fit_cfg
        X, y, q, q_nom = dataset(oplog, asset, self.nominal, self.assets)
        n = X.shape[0]
        if n < cfg.min_samples:
            log.warning("%s surrogate: %d samples, skipping fit", asset, n)
            return None
        n_tr = int(round(n * (1 - cfg.val_frac)))
        tr, va = slice(0, n_tr), slice(n_tr, n)
        if np.ptp(X[tr, 0]) == 0 or np.ptp(q[va]) == 0:
            log.warning("%s surrogate: degenerate data, keeping previous model", asset)
            return None
        rng = np.random.default_rng([cfg.seed, self.fit_index, 0 if asset == "hp" else 1])
        current = self.models.get(asset)
        cand = current.copy() if current is not None else \
            MlpModel(X.shape[1], self.hidden[asset], rng=rng)
        train_mlp(cand, X[tr], y[tr], X[va], y[va], cfg, rng)
        try:
            new_m = combined_metrics(cand, X[va], q[va], q_nom[va])
            old_m = combined_metrics(current, X[va], q[va], q_nom[va])
        except UndefinedMetricError:
            return None
        accepted = new_m.nmae < old_m.nmae
        if accepted:
            self.models[asset] = cand
            self.version += 1
        kept = new_m if accepted else old_m
        self.val_nmae[asset] = kept.nmae
        rec = FitRecord(self.fit_index, step, asset, kept.nmae, kept.mae, kept.r2,
                        accepted, self.version)
        self.history.append(rec)
        return rec

    def evaluate(self, oplog, asset: str, holdout: float | None = None):
        """``(nominal-only, nominal + surrogate)`` metrics on the trailing
        ``holdout`` fraction of the asset's rows.

        With the default fraction this is the validation split of a fit on
        the same log, which no accepted model has trained on.
        """
        holdout = self.fit_cfg.val_frac if holdout is None else holdout
        X, _, q, q_nom = dataset(oplog, asset, self.nominal, self.assets)
        va = slice(int(round(X.shape[0] * (1 - holdout))), X.shape[0])
        return (combined_metrics(None, X[va], q[va], q_nom[va]),
                combined_metrics(self.models.get(asset), X[va], q[va], q_nom[va]))

    def snapshot(self) -> dict:
        """Read-only view of the accepted models (the dict is copied, models are not)."""
        return dict(self.models)

    def write_history(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["fit_index", "step", "asset", "nmae", "mae", "r2"])
            for r in self.history:
                w.writerow([r.fit_index, r.step, r.asset, repr(float(r.nmae)), repr(float(r.mae)),
                            repr(float(r.r2))])


def save_model(model: MlpModel, path) -> None:
    with open(path, "w") as fh:
        fh.write(FORMAT_TAG + "\n")
        save_mlp_text(model.net, fh, {"x_mean": model.x_mean, "x_std": model.x_std,
                                      "y_mean": [model.y_mean], "y_std": [model.y_std]})


def load_model(path) -> MlpModel:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != FORMAT_TAG:
        raise ValueError("not a surrogate checkpoint")
    net, extra = load_mlp_text(lines[1:])
    m = MlpModel.__new__(MlpModel)
    m.net = net
    m.x_mean, m.x_std = extra["x_mean"], extra["x_std"]
    m.y_mean, m.y_std = float(extra["y_mean"][0]), float(extra["y_std"][0])
    return m
