"""Quadrature expectations of the kernel estimators under a known model.

These are the deterministic counterparts used to verify bias bounds
without Monte Carlo: the expectation of a directional average is a 1-D/2-D
integral, and the expectation of the pairwise (order-2) estimator is a 4-D
integral reduced here to a tensor Gauss-Legendre rule after substituting
the two kernel arguments as integration variables.
"""

from __future__ import annotations

import numpy as np

from .errors import QuadratureError
from .estimators import OMEGA, OMEGA_GAMMA
from .kernels import Kernel, eval_kernel
from .models import Model, model_density
from .quad import adaptive_quad, gauss_legendre
from .rotation import Rotation, angles_equal, overlap_coeffs

AUX_TOL = 1e-4


def _projected_density(m: Model, b: np.ndarray):
    """Density of b^T X as a callable; closed form for Gaussian marginals,
    a convolution quadrature otherwise."""
    c = m.rotation.matrix.T @ b  # coordinates of b in the model frame
    g1, g2 = m.marginal1, m.marginal2
    if g1.kind == "gaussian" and g2.kind == "gaussian":
        var = (c[0] * g1.sigma) ** 2 + (c[1] * g2.sigma) ** 2
        sd = np.sqrt(var)

        def rho(v):
            return np.exp(-0.5 * (v / sd) ** 2) / (sd * np.sqrt(2.0 * np.pi))

        return rho
    if abs(c[1]) < 1e-9 or abs(c[0]) < 1e-9:
        ga, scale = (g1, c[0]) if abs(c[0]) >= abs(c[1]) else (g2, c[1])

        def rho_axis(v):
            return ga.pdf(np.asarray(v) / scale) / abs(scale)

        return rho_axis

    w1 = 8.0 * g1.sigma

    def rho_conv(v):
        return adaptive_quad(
            lambda t: g1.pdf(t) * g2.pdf((v - c[0] * t) / c[1]) / abs(c[1]),
            -w1, w1, tol=1e-11,
            points=None if g1.kind == "gaussian" else [-g1.eps, g1.eps])

    return rho_conv


def expected_directional(m: Model, b, h: float, x, kernel: Kernel,
                         *, tol=1e-9) -> float:
    """E[n^-1 sum K_h(b^T(X_k - x))] = ∫ K(t) rho_b(b^T x + t h) dt."""
    b = np.asarray(b, dtype=float)
    x = np.asarray(x, dtype=float)
    rho = _projected_density(m, b)
    v0 = float(b @ x)
    return adaptive_quad(
        lambda t: eval_kernel(kernel, t) * rho(v0 + t * h), -1.0, 1.0, tol=tol)


def expected_product(m: Model, d_rot: Rotation, h: float, x, kernel: Kernel,
                     *, tol=1e-9) -> float:
    """Product of the two directional expectations for the axis pair of D."""
    e1 = expected_directional(m, d_rot.d, h, x, kernel, tol=tol)
    e2 = expected_directional(m, d_rot.d_perp, h, x, kernel, tol=tol)
    return e1 * e2


def expected_auxiliary(m: Model, d_rot: Rotation, q_rot: Rotation, h: float,
                       x, kernel: Kernel, *, tol=AUX_TOL) -> float:
    """E of the pairwise estimator: a 4-D tensor Gauss-Legendre quadrature.

    After substituting the two kernel arguments t1, t2 (supported on
    [-1, 1]) the integral reads

      (1/|p1 p2|) ∬ K(t1) K(t2) J(t1, t2) dt1 dt2,
      J = ∬ f((t2 h + c2 - p2 b)/p1, a) f((t1 h + c1 + p1 a)/p2, b) da db,

    with c the recentered query point.  Refinement doubling certifies the
    coarse tolerance; raises QuadratureError otherwise.
    """
    if angles_equal(d_rot, q_rot):
        return expected_product(m, q_rot, h, x, kernel, tol=1e-9)
    x = np.asarray(x, dtype=float)
    p1, p2 = overlap_coeffs(d_rot, q_rot)
    if min(abs(p1), abs(p2)) < 1e-9:
        raise QuadratureError("degenerate rotation pair for the 4-D quadrature")
    c = OMEGA_GAMMA @ (q_rot.matrix @ (d_rot.matrix @ (OMEGA @ x)))
    r = 8.0 * max(m.marginal1.sigma, m.marginal2.sigma) + abs(p1) + abs(p2)

    def level_value(level: int) -> float:
        nt, ng = 16 * level, 32 * level
        t, wt = gauss_legendre(-1.0, 1.0, nt)
        g, wg = gauss_legendre(-r, r, ng)
        kt = eval_kernel(kernel, t) * wt
        # A[i_t2, i_b, i_a] = f(y1(t2, b), a); B[i_t1, i_a, i_b] = f(z1(t1, a), b)
        y1 = (t[:, None] * h + c[1] - p2 * g[None, :]) / p1      # (nt, ng)
        z1 = (t[:, None] * h + c[0] + p1 * g[None, :]) / p2      # (nt, ng)
        pts_a = np.stack(np.broadcast_arrays(y1[:, :, None], g[None, None, :]),
                         axis=-1).reshape(-1, 2)
        av = model_density(m, pts_a).reshape(nt, ng, ng)
        pts_b = np.stack(np.broadcast_arrays(z1[:, :, None], g[None, None, :]),
                         axis=-1).reshape(-1, 2)
        bv = model_density(m, pts_b).reshape(nt, ng, ng)
        aw = av * (wg[:, None] * wg[None, :])
        j = np.einsum("qba,pab->pq", aw, bv)
        return float(kt @ j @ kt) / abs(p1 * p2)

    v1, v2 = level_value(2), level_value(4)
    if abs(v2 - v1) > tol:
        v3 = level_value(8)
        if abs(v3 - v2) > tol:
            raise QuadratureError(
                f"pairwise-estimator expectation did not converge to {tol}")
        return v3
    return v2
