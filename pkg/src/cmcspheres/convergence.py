"""Richardson extrapolation and convergence-order fits over a radius ladder."""

from __future__ import annotations

import numpy as np


def fit_order(radii, values) -> float:
    """Observed decay order p of v(r) - v(inf) from successive differences.

    For v = L + a r^-p on a ladder with ratio q, consecutive differences shrink
    by q^p.  Returns the median estimate; +inf if the sequence is constant.
    """
    r = np.asarray(radii, dtype=float)
    v = np.asarray(values, dtype=float)
    d = np.diff(v, axis=0)
    dn = np.abs(d) if d.ndim == 1 else np.linalg.norm(d.reshape(d.shape[0], -1), axis=1)
    if np.all(dn < 1e-300):
        return float("inf")
    est = []
    for k in range(len(dn) - 1):
        if dn[k] > 0 and dn[k + 1] > 0:
            q = np.sqrt(r[k + 2] * r[k + 1]) / np.sqrt(r[k + 1] * r[k])
            est.append(np.log(dn[k] / dn[k + 1]) / np.log(q))
    if not est:
        return float("inf")
    return float(np.median(est))


def richardson(radii, values, order: float | None = None, n_terms: int | None = None,
               snap: float = 0.03):
    """Extrapolate v(r) = L + sum_k a_k r^-(p+k) to r -> inf.

    With ``order=None`` the leading order p is estimated by :func:`fit_order`
    and snapped to the nearest tenth when within ``snap`` of it, since the
    estimate is biased by the subleading terms.
    Values may be scalars or arrays (extrapolated componentwise).  Returns
    ``(limit, p)``.
    """
    r = np.asarray(radii, dtype=float)
    v = np.asarray(values, dtype=float)
    if order is None:
        p = fit_order(r, v)
        if np.isfinite(p) and abs(p - round(p, 1)) < snap:
            p = round(p, 1)
    else:
        p = float(order)
    if not np.isfinite(p):
        return v[-1].copy() if v.ndim > 1 else float(v[-1]), p
    n = len(r)
    K = n - 1 if n_terms is None else min(n_terms, n - 1)
    A = np.column_stack([np.ones(n)] + [r ** -(p + k) for k in range(K)])
    flat = v.reshape(n, -1)
    sol, *_ = np.linalg.lstsq(A, flat, rcond=None)
    L = sol[0].reshape(v.shape[1:])
    return (float(L) if v.ndim == 1 else L), p


def loglog_slope(x, y) -> float:
    x = np.log(np.asarray(x, dtype=float))
    y = np.log(np.maximum(np.abs(np.asarray(y, dtype=float)), 1e-300))
    return float(np.polyfit(x, y, 1)[0])
