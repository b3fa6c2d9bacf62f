"""Quadrature helpers.

One-dimensional adaptive integration is delegated to QUADPACK
(``scipy.integrate.quad``, a Gauss-Kronrod scheme) behind a wrapper that
enforces the requested tolerance instead of silently returning a poor
estimate.  Multi-dimensional integrals in this package use composite
tensor Gauss-Legendre rules with refinement-based error control.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import quad as _quad

from .errors import QuadratureError


def adaptive_quad(f, a, b, *, tol=1e-10, points=None, limit=200):
    """Integrate ``f`` on [a, b] to absolute tolerance ``tol``.

    ``points`` marks known breakpoints (kinks, support edges).  Raises
    QuadratureError when QUADPACK's error estimate exceeds ``tol``.
    """
    if points is not None:
        pts = [p for p in points if a < p < b]
        pts = sorted(set(pts)) or None
    else:
        pts = None
    val, err = _quad(f, a, b, epsabs=tol, epsrel=0.0, limit=limit, points=pts)
    if not np.isfinite(val) or err > 10.0 * tol:
        raise QuadratureError(
            f"integral on [{a}, {b}] did not converge: estimate {val}, error {err} > {tol}"
        )
    return val


def gauss_legendre(a, b, n):
    """Gauss-Legendre nodes and weights on [a, b]."""
    x, w = np.polynomial.legendre.leggauss(n)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return mid + half * x, half * w


def panel_rule(edges, nodes_per_panel):
    """Composite Gauss-Legendre rule over consecutive panels given by ``edges``."""
    xs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        x, w = gauss_legendre(a, b, nodes_per_panel)
        xs.append(x)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


def refine_until(compute, *, tol, start=1, max_doublings=4, what="integral"):
    """Run ``compute(level)`` with increasing refinement until two consecutive
    levels agree within ``tol``.  ``compute`` must become more accurate as the
    level increases.  Returns the finest value.
    """
    prev = compute(start)
    for level in range(start + 1, start + 1 + max_doublings):
        cur = compute(level)
        if abs(cur - prev) <= tol:
            return cur
        prev = cur
    raise QuadratureError(f"{what} did not converge to tolerance {tol}")
