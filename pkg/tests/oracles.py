"""Independent reference computations used by the tests.

The projection oracle discretises every action component except one onto a
51-point grid and solves the heat balance for the remaining component in
closed form, then keeps the balanced point nearest to the prediction.
"""

import itertools

import numpy as np

from greyshield.nominal import predict_nominal

GRID_POINTS = 51
CELL = 2.0 / (GRID_POINTS - 1)


def _producer_q(model, a):
    u = (np.asarray(a) + 1.0) / 2.0
    return predict_nominal(model, np.clip(u, 0.0, 1.0))


def _invert(model, rest):
    """Scaled action(s) giving nominal output ``rest`` (nan where impossible)."""
    c = np.asarray(model.coef)
    rest = np.asarray(rest, dtype=float)
    if model.degree == 1:
        u = rest / c[0]
    else:
        c1, c2 = c[0], c[1]
        disc = c1 * c1 + 4 * c2 * rest
        with np.errstate(invalid="ignore"):
            u = np.where(abs(c2) < 1e-12, rest / c1,
                         (-c1 + np.sqrt(np.where(disc >= 0, disc, np.nan))) / (2 * c2))
    return 2.0 * u - 1.0


def grid_projection(a_tilde, models, q_demand, soc, assets, points=GRID_POINTS):
    """Best (distance, action) over all on/off assignments; (inf, None) if none balance."""
    a_tilde = np.asarray(a_tilde, dtype=float)
    names = ("boil", "hp", "chp")
    thr = {n: 2 * assets[n].p_min_frac - 1 for n in names}
    best = (np.inf, None)
    for gamma in itertools.product((0, 1), repeat=3):
        on = [n for n, g in zip(names, gamma) if g]
        fixed = {}
        for n, g in zip(names, gamma):
            if not g:
                fixed[n] = min(max(a_tilde[names.index(n)], -1.0), thr[n] - 1e-7)
        # the eliminated unit: first producer that is on, else the store
        elim = on[0] if on else "tess"
        grid_vars = [n for n in on if n != elim] + (["tess"] if elim != "tess" else [])
        axes = [np.linspace(thr[n], 1.0, points) if n != "tess" else np.linspace(-1, 1, points)
                for n in grid_vars]
        mesh = np.meshgrid(*axes, indexing="ij") if axes else []
        pts = {n: m.ravel() for n, m in zip(grid_vars, mesh)}
        size = mesh[0].size if axes else 1
        produced = np.zeros(size)
        for n in on:
            if n != elim:
                produced += _producer_q(models[n], pts[n])
        if "tess" in pts:
            produced += predict_nominal(models["tess"], pts["tess"], np.full(size, soc))
        rest = q_demand - produced
        cand = {}
        if elim == "tess":
            c = np.zeros(4)
            from greyshield.nominal import _tess_exponents
            for ci, (i, j) in zip(models["tess"].coef, _tess_exponents(3)):
                c[i] += ci * soc ** j
            roots = np.roots([c[3], c[2], c[1], c[0] - rest[0]])
            real = roots[np.abs(roots.imag) < 1e-9].real
            real = real[(real >= -1) & (real <= 1)]
            if real.size == 0:
                continue
            sols = [np.array([[r]]) for r in real]
        else:
            a_e = _invert(models[elim], rest)
            ok = np.isfinite(a_e) & (a_e >= thr[elim] - 1e-12) & (a_e <= 1.0 + 1e-12)
            if not ok.any():
                continue
            sols = [a_e]
        for a_e in sols:
            a_e = np.ravel(a_e)
            A = np.tile(a_tilde, (a_e.size if elim == "tess" else size, 1))
            for n, v in fixed.items():
                A[:, names.index(n)] = v
            idx = {"boil": 0, "hp": 1, "chp": 2, "tess": 3}
            for n in grid_vars:
                A[:, idx[n]] = pts[n] if elim != "tess" else pts[n][0]
            A[:, idx[elim]] = a_e
            A[:, 4] = np.clip(a_tilde[4], -1, 1)
            mask = np.all(np.isfinite(A), axis=1)
            if elim != "tess":
                mask &= ok
            if not mask.any():
                continue
            d = 0.5 * np.sum((A[mask] - a_tilde) ** 2, axis=1)
            k = int(np.argmin(d))
            if d[k] < best[0]:
                best = (float(d[k]), A[mask][k])
    return best


def constraint_nsum(q_demand, q_production):
    e = np.abs(np.asarray(q_demand) - np.asarray(q_production))
    return 100.0 * e.sum() / np.sum(q_demand)
