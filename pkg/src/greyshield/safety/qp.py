"""Exact solver for the projection QP with one linear equality and box bounds.

    min 1/2 sum_i w_i (x_i - y_i)^2   s.t.  c.x = d,  lb <= x <= ub

with positive weights ``w``.  The KKT conditions give
``x(lam) = clip(y + lam * c / w, lb, ub)``; ``c.x(lam)`` is piecewise linear
and non-decreasing in ``lam``, so the optimal multiplier (and with it the
active bound set) is found by scanning the breakpoints where a component hits
a bound and interpolating on the bracketing segment.
"""

from __future__ import annotations

import numpy as np


def solve_box_hyperplane_qp(y, c, d, lb, ub, w=None, tol=0.0):
    """Return ``(x, feasible, lam)``.

    If the hyperplane misses the box, ``x`` is the box point closest to it
    (extreme ``lam``), ``feasible`` is False and ``lam`` is nan.
    """
    y = np.asarray(y, dtype=float)
    c = np.asarray(c, dtype=float)
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=float)
    norm = float(np.sqrt(c @ c))
    if norm == 0.0:
        return _clip(y, lb, ub), abs(d) <= tol, 0.0
    c = c / norm
    # components negligible against the normal cannot move the iterate
    c[np.abs(c) < 1e-14] = 0.0
    d = d / norm
    tol = tol / norm
    pos, neg = c > 0, c < 0
    yc = _clip(y, lb, ub)
    lo = np.where(pos, lb, np.where(neg, ub, yc))
    hi = np.where(pos, ub, np.where(neg, lb, yc))
    phi_lo, phi_hi = float(c @ lo), float(c @ hi)
    if d <= phi_lo:
        return lo, d >= phi_lo - tol, float("nan")
    if d >= phi_hi:
        return hi, d <= phi_hi + tol, float("nan")
    nz = pos | neg
    v = c / w
    vz = v[nz]
    bps = np.sort(np.concatenate([(lb[nz] - y[nz]) / vz, (ub[nz] - y[nz]) / vz]))
    X = _clip(y + bps[:, None] * v, lb, ub)
    phi = X @ c
    k = int(np.searchsorted(phi, d))
    # phi[0] <= phi_lo < d and phi[-1] >= phi_hi > d, so 1 <= k < len(bps)
    k = min(max(k, 1), len(bps) - 1)
    l0, l1 = bps[k - 1], bps[k]
    p0, p1 = phi[k - 1], phi[k]
    lam = l0 if p1 == p0 else l0 + (d - p0) * (l1 - l0) / (p1 - p0)
    return _clip(y + lam * v, lb, ub), True, lam / norm


def _clip(x, lb, ub):
    # np.clip carries noticeable dispatch overhead on 5-vectors
    return np.minimum(np.maximum(x, lb), ub)
