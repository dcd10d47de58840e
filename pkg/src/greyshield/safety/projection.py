"""Mixed-integer projection of a predicted action onto the feasible set.

The three semi-continuous units give 8 on/off assignments.  Each assignment
is a continuous problem (box + nonlinear balance) solved by sequential
linearisation: linearise the balance at the iterate, solve the exact
equality-plus-box QP, repeat.  Several starting points guard against local
minima of the cubic store model and the piecewise-affine surrogates.
"""

from __future__ import annotations

import itertools
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from .constraints import ConstraintSet
from .qp import solve_box_hyperplane_qp

ASSIGNMENTS = tuple(itertools.product((0, 1), repeat=3))
INFEASIBLE_DISTANCE = sys.float_info.max


class NoFeasibleActionError(RuntimeError):
    """No on/off assignment admits an action meeting the heat balance."""


@dataclass(frozen=True)
class SlpConfig:
    max_iter: int = 50
    step_tol: float = 1e-8
    prune: bool = True
    merit_weight: float = 100.0
    min_alpha: float = 1.0 / 64.0
    min_weight: float = 0.05
    stall_limit: int = 5


@dataclass
class SubproblemResult:
    gamma: tuple
    action: np.ndarray | None
    distance: float
    feasible: bool
    iterations: int
    converged: bool


@dataclass
class ProjectionResult:
    a_safe: np.ndarray
    d_safe: float
    binary_assignment: tuple
    corrected: bool
    used_fallback: bool = False
    solve_stats: dict = field(default_factory=dict)


def _distance(a, a_tilde) -> float:
    diff = a - a_tilde
    return 0.5 * float(diff @ diff)


def slp(a_tilde, cs: ConstraintSet, gamma, start, cfg: SlpConfig = SlpConfig()):
    """One sequential-linearisation run from ``start``.

    Each iteration linearises the balance at the iterate and solves the
    equality-plus-box QP exactly.  The QP metric carries the diagonal
    curvature of the Lagrangian (multiplier times the second derivative of
    each asset's output curve, floored to stay positive), which restores fast
    local convergence when the multiplier is large.  Steps are damped by
    backtracking on the exact-penalty merit ``distance + mu * |balance|``.

    Returns ``(x, feasible, iterations, converged)``.
    """
    lb, ub = cs.box(gamma)
    x = np.minimum(np.maximum(start, lb), ub)
    g, grad, hess = cs.balance_derivs(x, gamma)
    scale = cfg.merit_weight / cs.q_ref
    merit = _distance(x, a_tilde) + scale * abs(g)
    lam = 0.0
    stall = 0
    it, converged = 0, False
    for it in range(1, cfg.max_iter + 1):
        w = np.maximum(1.0 - lam * hess, cfg.min_weight)
        y = x - (x - a_tilde) / w
        target, _, lam_new = solve_box_hyperplane_qp(y, grad, float(grad @ x) - g, lb, ub, w)
        direction = target - x
        alpha = 1.0
        while True:
            x_new = x + alpha * direction
            g_new, grad_new, hess_new = cs.balance_derivs(x_new, gamma)
            merit_new = _distance(x_new, a_tilde) + scale * abs(g_new)
            if merit_new <= merit or abs(g_new) <= cs.balance_tol or alpha <= cfg.min_alpha:
                break
            alpha *= 0.5
        if np.isfinite(lam_new):
            lam = lam_new
        step = alpha * float(np.max(np.abs(direction)))
        stall = stall + 1 if merit_new > merit - 1e-12 else 0
        x, g, grad, hess, merit = x_new, g_new, grad_new, hess_new, merit_new
        if step <= cfg.step_tol:
            converged = True
            break
        if stall >= cfg.stall_limit:
            break
    feasible = abs(g) <= cs.balance_tol
    return x, feasible, it, converged


def solve_assignment(a_tilde, cs: ConstraintSet, gamma, starts, cfg: SlpConfig = SlpConfig()
                     ) -> SubproblemResult:
    """Best feasible SLP result over the distinct starting points."""
    lb, ub = cs.box(gamma)
    rng_ = cs.balance_range(gamma)
    if rng_ is not None and not rng_[0] - cs.balance_tol <= 0.0 <= rng_[1] + cs.balance_tol:
        return SubproblemResult(tuple(gamma), None, np.inf, False, 0, True)
    seen = []
    best, best_d, iters, conv = None, np.inf, 0, True
    for s in starts:
        s = np.clip(s, lb, ub)
        if any(np.array_equal(s, t) for t in seen):
            continue
        seen.append(s)
        x, feas, n, ok = slp(a_tilde, cs, gamma, s, cfg)
        iters += n
        if feas:
            d = _distance(x, a_tilde)
            if d < best_d:
                best, best_d, conv = x, d, ok
    return SubproblemResult(tuple(gamma), best, best_d if best is not None else np.inf,
                            best is not None, iters, conv)


def default_starts(a_tilde, cs: ConstraintSet, fallback=None, gamma=None):
    lb, ub = cs.box(gamma)
    starts = [np.asarray(a_tilde, dtype=float)]
    if fallback is not None:
        starts.append(np.asarray(fallback, dtype=float))
    starts.append(0.5 * (lb + ub))
    return starts


def project(a_tilde, cs: ConstraintSet, fallback=None, cfg: SlpConfig = SlpConfig()
            ) -> ProjectionResult:
    """Closest action (half squared distance) satisfying bounds and heat balance.

    ``fallback`` is an optional extra SLP starting point.  Raises
    :class:`NoFeasibleActionError` when every assignment is infeasible.
    """
    t0 = time.perf_counter()
    a_tilde = np.asarray(a_tilde, dtype=float)
    if a_tilde.shape != (5,) or not np.all(np.isfinite(a_tilde)):
        raise ValueError("predicted action must be 5 finite components")
    if cs.is_feasible(a_tilde):
        return ProjectionResult(a_tilde.copy(), 0.0, cs.decode_gamma(a_tilde), False,
                                solve_stats={"iterations": 0, "subproblems": 0, "feasible": 1,
                                             "converged": True,
                                             "seconds": time.perf_counter() - t0})
    # lower bound per assignment: distance to its box alone
    order = []
    for gamma in ASSIGNMENTS:
        lb, ub = cs.box(gamma)
        order.append((_distance(np.clip(a_tilde, lb, ub), a_tilde), gamma))
    order.sort()
    results = []
    best_d, iters, solved = np.inf, 0, 0
    for bound, gamma in order:
        if cfg.prune and bound > best_d:
            continue
        res = solve_assignment(a_tilde, cs, gamma,
                               default_starts(a_tilde, cs, fallback, gamma), cfg)
        solved += 1
        iters += res.iterations
        if res.feasible:
            results.append(res)
            best_d = min(best_d, res.distance)
    if not results:
        raise NoFeasibleActionError("no on/off assignment admits a balanced action")
    # least distance, ties broken by the lexicographic assignment
    best = min(results, key=lambda r: (r.distance, r.gamma))
    # "converged" refers to the SLP run that produced the returned action
    stats = {"iterations": iters, "subproblems": solved, "feasible": len(results),
             "converged": best.converged, "seconds": time.perf_counter() - t0}
    corrected = bool(np.any(np.abs(best.action - a_tilde) > 1e-9))
    return ProjectionResult(best.action, best.distance, best.gamma, corrected,
                            solve_stats=stats)


def safety_distance(a_tilde, cs: ConstraintSet, fallback=None,
                    cfg: SlpConfig = SlpConfig()) -> float:
    """Half squared distance to the feasible set; the largest float if it is empty."""
    try:
        return project(a_tilde, cs, fallback, cfg).d_safe
    except NoFeasibleActionError:
        return INFEASIBLE_DISTANCE
