"""Constraint set of one control step: action box, on/off thresholds, heat balance.

All quantities are expressed in the scaled action space.  For a fixed on/off
assignment ``gamma`` of (boiler, heat pump, CHP) the feasible set is a box
intersected with the nonlinear equality ``production(a) = q_demand``.
"""

from __future__ import annotations

import numpy as np

from ..nominal import NominalModel, _tess_exponents
from ..plant import ON_TOL, SEMI_CONTINUOUS, default_assets, off_threshold

PRODUCER_INDEX = {"boil": 0, "hp": 1, "chp": 2}
TESS_INDEX = 3
# gap kept below the switch-on threshold for the "off" box so decoding is unambiguous
OFF_MARGIN = 1e-7


class _Producer:
    """Nominal output of a producer as a function of its scaled action."""

    def __init__(self, model: NominalModel, p_min_frac: float):
        self.coef = [float(c) for c in model.coef]
        self.q_max = float(model.q_max)
        self.thr = off_threshold(p_min_frac)
        self.p_min_frac = p_min_frac

    def derivs(self, a: float) -> tuple[float, float, float]:
        """Output and its first two derivatives w.r.t. the scaled action."""
        u = 0.5 * (a + 1.0)
        # Horner on sum_k c_k u^k (zero intercept) with derivatives
        v, dv, ddv = 0.0, 0.0, 0.0
        for c in reversed(self.coef):
            ddv = ddv * u + 2.0 * dv
            dv = dv * u + v
            v = v * u + c
        ddv = ddv * u + 2.0 * dv
        dv = dv * u + v
        v = v * u
        if v <= 0.0:
            return 0.0, 0.0, 0.0
        if v >= self.q_max:
            return self.q_max, 0.0, 0.0
        return v, 0.5 * dv, 0.25 * ddv

    def output_range(self, lo: float, hi: float) -> tuple[float, float]:
        """Exact min/max of the (clamped) output over ``[lo, hi]``."""
        pts = [lo, hi]
        if len(self.coef) >= 2 and self.coef[1] != 0.0:
            # vertex of c1 u + c2 u^2
            a_v = 2.0 * (-self.coef[0] / (2.0 * self.coef[1])) - 1.0
            if lo < a_v < hi:
                pts.append(a_v)
        vals = [self.derivs(a)[0] for a in pts]
        return min(vals), max(vals)


class _Store:
    """Nominal store output: bivariate cubic collapsed to a cubic in the action."""

    def __init__(self, model: NominalModel, soc: float):
        n = model.degree + 1
        c = [0.0] * n
        for ci, (i, j) in zip(model.coef, _tess_exponents(model.degree)):
            c[i] += ci * soc ** j
        self.coef = c

    def derivs(self, a: float) -> tuple[float, float, float]:
        v, dv, ddv = 0.0, 0.0, 0.0
        for c in reversed(self.coef):
            ddv = ddv * a + 2.0 * dv
            dv = dv * a + v
            v = v * a + c
        return v, dv, ddv

    def output_range(self, lo: float, hi: float) -> tuple[float, float]:
        pts = [lo, hi]
        c = self.coef
        if len(c) == 4:
            for r in np.roots([3 * c[3], 2 * c[2], c[1]]):
                if abs(r.imag) < 1e-12 and lo < r.real < hi:
                    pts.append(float(r.real))
        vals = [self.derivs(a)[0] for a in pts]
        return min(vals), max(vals)


class ConstraintSet:
    """Box bounds plus the thermal balance equality for one step.

    ``surrogates`` optionally maps ``"hp"``/``"tess"`` to a residual model
    with ``local_affine(features, 0)``; the heat-pump residual only applies
    while the unit is on.  ``features`` supplies the lag measurements.
    """

    n_c = 11

    def __init__(self, models: dict, q_demand: float, soc_tess: float, assets=None,
                 surrogates: dict | None = None, features: dict | None = None,
                 balance_tol: float = 1e-3):
        assets = assets or default_assets()
        self.models = models
        self.q_demand = float(q_demand)
        self.soc_tess = float(soc_tess)
        self.assets = assets
        self.balance_tol = balance_tol
        self.producers = [_Producer(models[n], assets[n].p_min_frac) for n in SEMI_CONTINUOUS]
        self.store = _Store(models["tess"], self.soc_tess)
        self.thresholds = np.array([p.thr for p in self.producers])
        self.surrogates = dict(surrogates or {})
        f = features or {}
        self._lag = (float(f.get("q_hp_prev", 0.0)), float(f.get("q_tess_prev", 0.0)),
                     float(f.get("q_demand_prev", 0.0)))
        self._feat_hp = np.array([0.0, self._lag[0]])
        self._feat_tess = np.array([0.0, self.soc_tess, self._lag[1], self._lag[2]])
        self.q_ref = max(assets[n].p_nom_th for n in ("boil", "hp", "chp", "tess"))
        # with the lags fixed each surrogate is a 1-D piecewise-linear function
        self._lines = {}
        for asset, model in self.surrogates.items():
            if hasattr(model, "line_function"):
                feat = self._feat_hp if asset == "hp" else self._feat_tess
                self._lines[asset] = model.line_function(feat, 0, -1.0, 1.0)

    @property
    def grey(self) -> bool:
        return bool(self.surrogates)

    # --- on/off structure --------------------------------------------------
    def decode_gamma(self, a) -> tuple:
        a = a.tolist() if isinstance(a, np.ndarray) else a
        return tuple(int(0.5 * (a[i] + 1.0) >= p.p_min_frac - ON_TOL)
                     for i, p in enumerate(self.producers))

    def box(self, gamma) -> tuple[np.ndarray, np.ndarray]:
        lb = -np.ones(5)
        ub = np.ones(5)
        for i, g in enumerate(gamma):
            if g:
                lb[i] = self.thresholds[i]
            else:
                ub[i] = self.thresholds[i] - OFF_MARGIN
        return lb, ub

    # --- balance -----------------------------------------------------------
    def _residual(self, asset, a):
        line = self._lines.get(asset)
        if line is not None:
            v, slope = line.value_and_slope(a)
            return v, slope
        model = self.surrogates.get(asset)
        if model is None:
            return 0.0, 0.0
        feat = self._feat_hp if asset == "hp" else self._feat_tess
        feat[0] = a
        slope, icpt = model.local_affine(feat, 0)
        return slope * a + icpt, slope

    def asset_outputs(self, a, gamma=None) -> np.ndarray:
        """Modelled thermal output of boiler, HP, CHP, store at action ``a``."""
        gamma = self.decode_gamma(a) if gamma is None else gamma
        out = np.zeros(4)
        for i, p in enumerate(self.producers):
            if gamma[i]:
                out[i] = p.derivs(a[i])[0]
        if gamma[1]:
            out[1] += self._residual("hp", a[1])[0]
        out[3] = self.store.derivs(a[3])[0] + self._residual("tess", a[3])[0]
        return out

    def balance_range(self, gamma) -> tuple[float, float] | None:
        """Range of the balance over the assignment's box.

        Exact for the nominal model.  With surrogates each residual range is
        added separately, which gives an outer bound.  Returns None when a
        surrogate offers no line function.
        """
        if any(a not in self._lines for a in self.surrogates):
            return None
        lb, ub = self.box(gamma)
        lo = hi = -self.q_demand
        for i, p in enumerate(self.producers):
            if gamma[i]:
                a, b = p.output_range(lb[i], ub[i])
                lo, hi = lo + a, hi + b
        if gamma[1] and "hp" in self._lines:
            a, b = self._lines["hp"].range(lb[1], ub[1])
            lo, hi = lo + a, hi + b
        a, b = self.store.output_range(-1.0, 1.0)
        lo, hi = lo + a, hi + b
        if "tess" in self._lines:
            a, b = self._lines["tess"].range(-1.0, 1.0)
            lo, hi = lo + a, hi + b
        return lo, hi

    def balance_derivs(self, a, gamma=None) -> tuple[float, np.ndarray, np.ndarray]:
        """``production(a) - q_demand``, its gradient and its (diagonal) Hessian.

        The balance is separable across assets, so the Hessian is diagonal.
        Surrogate terms are piecewise affine and add no curvature.
        """
        gamma = self.decode_gamma(a) if gamma is None else gamma
        # python floats: scalar arithmetic on numpy elements is slow
        a = a.tolist() if isinstance(a, np.ndarray) else list(a)
        grad = np.zeros(5)
        hess = np.zeros(5)
        total = -self.q_demand
        for i, p in enumerate(self.producers):
            if gamma[i]:
                v, d, dd = p.derivs(a[i])
                total += v
                grad[i] = d
                hess[i] = dd
        if gamma[1] and "hp" in self.surrogates:
            v, d = self._residual("hp", a[1])
            total += v
            grad[1] += d
        v, d, dd = self.store.derivs(a[TESS_INDEX])
        total += v
        grad[TESS_INDEX] = d
        hess[TESS_INDEX] = dd
        if "tess" in self.surrogates:
            v, d = self._residual("tess", a[TESS_INDEX])
            total += v
            grad[TESS_INDEX] += d
        return total, grad, hess

    def balance_and_grad(self, a, gamma=None) -> tuple[float, np.ndarray]:
        g, grad, _ = self.balance_derivs(a, gamma)
        return g, grad

    def balance(self, a, gamma=None) -> float:
        return self.balance_and_grad(a, gamma)[0]

    def residuals(self, a) -> np.ndarray:
        """All ``n_c`` constraint values (``<= 0`` box rows, ``== 0`` balance last)."""
        a = np.asarray(a, dtype=float)
        return np.concatenate([a - 1.0, -1.0 - a, [self.balance(a)]])

    def in_box(self, a, tol: float = 1e-9) -> bool:
        return bool(np.all(np.abs(np.asarray(a)) <= 1.0 + tol))

    def is_feasible(self, a, tol: float | None = None) -> bool:
        tol = self.balance_tol if tol is None else tol
        return self.in_box(a) and abs(self.balance(a)) <= tol
