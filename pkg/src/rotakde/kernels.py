"""Higher-order polynomial kernels on [-1, 1].

The kernel of order floor m is the orthonormal-Legendre expansion of the
evaluation functional at 0, truncated at degree 2m and restricted to
[-1, 1].  It integrates to one, its moments of order 1..2m vanish, and it
is an even polynomial (odd Legendre terms drop out).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.polynomial import legendre as npleg
from numpy.polynomial import polynomial as nppoly

from .errors import QuadratureError
from .quad import adaptive_quad, panel_rule

MOMENT_TOL = 1e-10
CAPACITY_TOL = 1e-8
SUPPORT = 1.0


@dataclass(frozen=True)
class Kernel:
    """Even polynomial kernel supported on [-support, support].

    coeffs are monomial coefficients in ascending powers; odd entries are
    exactly zero.  Norms are cached at construction from the polynomial
    coefficients and cross-checked against quadrature in the test suite.
    """

    order_floor: int
    coeffs: tuple[float, ...]
    support: float
    sup_norm: float
    l1_norm: float
    l2_norm_sq: float

    @cached_property
    def _even_coeffs(self) -> np.ndarray:
        return np.asarray(self.coeffs[0::2], dtype=float)

    def __call__(self, u):
        return eval_kernel(self, u)


def _legendre_projection_coeffs(order_floor: int) -> np.ndarray:
    """Monomial coefficients of sum_j phi_j(0) phi_j(u), degree <= 2*order_floor."""
    deg = 2 * order_floor
    series = np.zeros(deg + 1)
    for j in range(0, deg + 1, 2):
        e = np.zeros(j + 1)
        e[j] = 1.0
        pj0 = npleg.legval(0.0, e)
        series[j] = (2 * j + 1) / 2.0 * pj0
    mono = npleg.leg2poly(series)
    mono[1::2] = 0.0  # even polynomial: odd monomials vanish identically
    return mono


def _real_roots_in_support(coeffs: np.ndarray, lo=-SUPPORT, hi=SUPPORT) -> list[float]:
    roots = nppoly.polyroots(coeffs)
    out = []
    for r in roots:
        if abs(r.imag) < 1e-10 and lo < r.real < hi:
            out.append(float(r.real))
    return sorted(out)


def build_kernel(order_floor: int) -> Kernel:
    """Construct the order-``order_floor`` kernel (closed form, no iteration)."""
    if order_floor < 0 or int(order_floor) != order_floor:
        raise ValueError(f"order_floor must be a nonnegative integer, got {order_floor!r}")
    order_floor = int(order_floor)
    c = _legendre_projection_coeffs(order_floor)

    # L2 norm squared: integrate the squared polynomial exactly.
    sq = nppoly.polymul(c, c)
    anti_sq = nppoly.polyint(sq)
    l2 = float(nppoly.polyval(SUPPORT, anti_sq) - nppoly.polyval(-SUPPORT, anti_sq))

    # L1 norm: split at sign changes and integrate the antiderivative piecewise.
    anti = nppoly.polyint(c)
    breaks = [-SUPPORT] + _real_roots_in_support(c) + [SUPPORT]
    l1 = 0.0
    for a, b in zip(breaks[:-1], breaks[1:]):
        l1 += abs(nppoly.polyval(b, anti) - nppoly.polyval(a, anti))

    # Sup norm: extrema are critical points plus the support endpoints.
    crit = _real_roots_in_support(nppoly.polyder(c))
    cand = np.array([-SUPPORT, SUPPORT] + crit)
    sup = float(np.max(np.abs(nppoly.polyval(cand, c))))

    return Kernel(
        order_floor=order_floor,
        coeffs=tuple(float(v) for v in c),
        support=SUPPORT,
        sup_norm=sup,
        l1_norm=float(l1),
        l2_norm_sq=l2,
    )


def eval_kernel(k: Kernel, u):
    """K(u); exactly zero outside [-support, support].  Accepts scalars or arrays."""
    u = np.asarray(u, dtype=float)
    z = u * u
    acc = np.zeros_like(z)
    for c in k._even_coeffs[::-1]:
        acc = acc * z + c
    out = np.where(z <= k.support * k.support, acc, 0.0)
    if out.ndim == 0:
        return float(out)
    return out


def kernel_moment(k: Kernel, j: int, *, tol=MOMENT_TOL) -> float:
    """∫ u^j K(u) du by adaptive quadrature (the slow, independent route)."""
    pts = _real_roots_in_support(np.asarray(k.coeffs))
    return adaptive_quad(lambda u: (u**j) * eval_kernel(k, u), -k.support, k.support,
                         tol=tol, points=pts)


def _abs_kernel_axis_rule(k: Kernel, level: int):
    """Composite GL rule for integrals of |K(t)| * smooth(t) on [-1, 1].

    Panels break at the kernel's sign changes (kinks of |K|) and refine
    geometrically toward 0 where the radial factor t -> (t^2+s^2)^b loses
    smoothness.
    """
    edges = {-k.support, k.support, 0.0}
    edges.update(_real_roots_in_support(np.asarray(k.coeffs)))
    for e in (1e-4, 1e-3, 1e-2, 1e-1):
        edges.add(e)
        edges.add(-e)
    x, w = panel_rule(sorted(edges), 8 * level)
    return x, w * np.abs(eval_kernel(k, x))


def capacity_constant(k: Kernel, b: float, s: float, *, grid_size=32, tol=CAPACITY_TOL) -> float:
    """sup over b' in {b/grid_size, ..., b} of
    ∬ |K(t1)K(t2)| [s (t1^2+t2^2)^{b'} + 1]^2 dt1 dt2.

    The b'-grid is documented behaviour: the integrand is smooth in b' and
    for s >= 1 the supremum sits near an endpoint.  Raises QuadratureError
    if two refinement levels disagree by more than ``tol``.
    """
    if b <= 0 or s <= 0:
        raise ValueError("b and s must be positive")
    bprimes = [b * j / grid_size for j in range(1, grid_size + 1)]

    def compute(level: int) -> float:
        x, w = _abs_kernel_axis_rule(k, level)
        r2 = x[:, None] ** 2 + x[None, :] ** 2
        ww = w[:, None] * w[None, :]
        best = -np.inf
        for bp in bprimes:
            bracket = s * r2**bp + 1.0
            best = max(best, float(np.sum(ww * bracket * bracket)))
        return best

    lo, hi = compute(2), compute(4)
    if abs(hi - lo) > tol:
        hi2 = compute(8)
        if abs(hi2 - hi) > tol:
            raise QuadratureError(
                f"capacity constant did not converge to {tol} (levels: {lo}, {hi}, {hi2})"
            )
        hi = hi2
    return hi


def bandwidth_scaled(k: Kernel, t, h: float):
    """K_h(t) = K(t/h) / h."""
    return eval_kernel(k, np.asarray(t, dtype=float) / h) / h
