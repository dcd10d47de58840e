"""Shielding methods wrapped around the projection and the fallback policy."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..env import ExperienceTuple
from ..profiles import DEMAND_MAX_W, DEMAND_MIN_W
from .constraints import ConstraintSet
from .projection import NoFeasibleActionError, ProjectionResult, SlpConfig, project

METHODS = ("unsafe", "optlayer", "safefallback", "optlayerpolicy", "greyoptlayerpolicy")
CORRECTION_TOL = 1e-9


@dataclass(frozen=True)
class SafetyConfig:
    method: str = "optlayerpolicy"
    h_safe: float = 0.25
    eps_balance: float = 0.10
    demand_range: float = DEMAND_MAX_W - DEMAND_MIN_W
    slp: SlpConfig = field(default_factory=SlpConfig)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.h_safe <= 0:
            raise ValueError("h_safe must be > 0")
        if not 0 < self.eps_balance < 1:
            raise ValueError("eps_balance must lie in (0, 1)")

    @property
    def needs_fallback(self) -> bool:
        return self.method in ("safefallback", "optlayerpolicy", "greyoptlayerpolicy")


@dataclass
class ShieldResult:
    action: np.ndarray
    corrected: bool
    used_fallback: bool
    method: str
    d_safe: float = 0.0
    binary_assignment: tuple = ()
    subproblems_feasible: int = 0
    slp_iters: int = 0
    seconds: float = 0.0
    model_version: int = 0


def _differs(a, b) -> bool:
    return bool(np.any(np.abs(np.asarray(a) - np.asarray(b)) > CORRECTION_TOL))


def shield(a_tilde, obs, cs: ConstraintSet, cfg: SafetyConfig, pi_safe=None) -> ShieldResult:
    """Apply ``cfg.method`` to the predicted action.

    ``pi_safe`` maps the current heat demand (taken from ``cs``) to the
    fallback action.  ``obs`` is accepted for interface symmetry; all methods
    read the step's demand and measurements from ``cs``.
    """
    t0 = time.perf_counter()
    a_tilde = np.asarray(a_tilde, dtype=float)
    m = cfg.method
    if cfg.needs_fallback and pi_safe is None:
        raise ValueError(f"method {m} needs a fallback policy")

    def done(action, fb, proj: ProjectionResult | None = None, d=0.0):
        st = proj.solve_stats if proj is not None else {}
        return ShieldResult(np.asarray(action, dtype=float), _differs(action, a_tilde), fb, m,
                            d_safe=d,
                            binary_assignment=proj.binary_assignment if proj else (),
                            subproblems_feasible=st.get("feasible", 0),
                            slp_iters=st.get("iterations", 0),
                            seconds=time.perf_counter() - t0)

    if m == "unsafe":
        return done(a_tilde, False)
    if m == "safefallback":
        ok = cs.in_box(a_tilde) and \
            abs(cs.balance(a_tilde)) <= cfg.eps_balance * cfg.demand_range
        return done(a_tilde, False) if ok else done(pi_safe(cs.q_demand), True)
    fb_action = pi_safe(cs.q_demand) if pi_safe is not None else None
    if m == "optlayer":
        proj = project(a_tilde, cs, fb_action, cfg.slp)
        return done(proj.a_safe, False, proj, proj.d_safe)
    # optlayerpolicy / greyoptlayerpolicy: one solve serves both distance and action
    try:
        proj = project(a_tilde, cs, fb_action, cfg.slp)
    except NoFeasibleActionError:
        return done(fb_action, True, None, float("inf"))
    if proj.d_safe <= cfg.h_safe:
        return done(proj.a_safe, False, proj, proj.d_safe)
    return done(fb_action, True, proj, proj.d_safe)


def shaped_tuples(s, a_tilde, a_safe, r, s2, done, z=1.0) -> list:
    """Executed tuple, plus the predicted-action duplicate carrying ``r - z`` if corrected."""
    out = [ExperienceTuple(s, np.asarray(a_safe, dtype=float), float(r), s2, bool(done))]
    if _differs(a_safe, a_tilde):
        out.append(ExperienceTuple(s, np.asarray(a_tilde, dtype=float), float(r) - z, s2,
                                   bool(done)))
    return out


class SafetyLayer:
    """Per-step shield bound to the plant's nominal models and fallback policy.

    Called as ``layer(a_tilde, obs, state, q_demand)``.  For the grey method
    the surrogates are read from ``learner`` at call time, i.e. the last
    accepted models at step start.
    """

    def __init__(self, cfg: SafetyConfig, models: dict, assets, pi_safe=None, learner=None):
        self.cfg = cfg
        self.models = models
        self.assets = assets
        self.pi_safe = pi_safe
        self.learner = learner
        if cfg.method == "greyoptlayerpolicy" and learner is None:
            raise ValueError("greyoptlayerpolicy needs a surrogate learner")

    def constraint_set(self, state, q_demand) -> ConstraintSet:
        surrogates = None
        if self.cfg.method == "greyoptlayerpolicy":
            surrogates = self.learner.snapshot()
        feats = {"q_hp_prev": state.q_hp_prev, "q_tess_prev": state.q_tess_prev,
                 "q_demand_prev": state.q_demand_prev}
        return ConstraintSet(self.models, q_demand, state.soc_tess, self.assets,
                             surrogates=surrogates, features=feats)

    def __call__(self, a_tilde, obs, state, q_demand) -> ShieldResult:
        version = self.learner.version if self.learner is not None else 0
        if self.cfg.method == "unsafe":
            return shield(a_tilde, obs, None, self.cfg)
        cs = self.constraint_set(state, q_demand)
        res = shield(a_tilde, obs, cs, self.cfg, self.pi_safe)
        res.model_version = version
        return res
