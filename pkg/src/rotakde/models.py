"""Ground-truth bivariate densities f(x) = g1((Q^T x)_1) g2((Q^T x)_2).

Two marginal families ship with the package: centered Gaussians and
perturbed Gaussians n(y) + L eps^beta lam(y/eps), where lam is a smooth
compactly supported wiggle with zero integral.  Construction calibrates
the wiggle scale and the Gaussian width so that every marginal passes
numeric smoothness-class certification at its declared (beta, L).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.special import ndtr

from .errors import CertificationError, EnvelopeError, NumericError
from .quad import adaptive_quad
from .rotation import Rotation, angles_equal, overlap_coeffs

ENVELOPE_FACTOR = 1.5
CERT_SLACK = 1.02
FD_STEP = 1e-3
P1_FLOOR = 1e-6

# order-6 central difference stencils
_FD1_W = np.array([-1 / 60, 3 / 20, -3 / 4, 0.0, 3 / 4, -3 / 20, 1 / 60])
_FD2_W = np.array([1 / 90, -3 / 20, 3 / 2, -49 / 18, 3 / 2, -3 / 20, 1 / 90])
_FD_OFF = np.arange(-3, 4)


def smooth_bump(y):
    """exp(-1/(1-y^2)) on (-1, 1), zero outside."""
    y = np.asarray(y, dtype=float)
    inside = np.abs(y) < 1.0
    out = np.zeros_like(y)
    t = y[inside]
    out[inside] = np.exp(-1.0 / (1.0 - t * t))
    return out


def wiggle_base(y):
    """2 B(2y) - B(y): symmetric, supported on [-1,1], integrates to zero,
    positive at the origin."""
    y = np.asarray(y, dtype=float)
    return 2.0 * smooth_bump(2.0 * y) - smooth_bump(y)


def _gauss_pdf(y, sigma):
    y = np.asarray(y, dtype=float)
    return np.exp(-0.5 * (y / sigma) ** 2) / (sigma * math.sqrt(2.0 * math.pi))


def _hermite_prob(j, t):
    """Probabilists' Hermite polynomial He_j(t), by recurrence."""
    t = np.asarray(t, dtype=float)
    if j == 0:
        return np.ones_like(t)
    prev, cur = np.ones_like(t), t.copy()
    for m in range(1, j):
        prev, cur = cur, t * cur - m * prev
    return cur


def gauss_derivative(j, y, sigma):
    """j-th derivative of the N(0, sigma^2) density (closed form)."""
    y = np.asarray(y, dtype=float)
    return (-1.0) ** j * _hermite_prob(j, y / sigma) * _gauss_pdf(y, sigma) / sigma**j


def _fd_derivative(f, j, y, step=FD_STEP):
    """j-th derivative of a smooth vectorized function by order-6 central
    differences; j > 2 recurses on the (j-2)-nd derivative."""
    y = np.asarray(y, dtype=float)
    if j == 0:
        return f(y)
    if j > 2:
        return _fd_derivative(lambda t: _fd_derivative(f, j - 2, t, step), 2, y, step)
    w = _FD1_W if j == 1 else _FD2_W
    vals = np.zeros_like(y)
    for c, o in zip(w, _FD_OFF):
        if c != 0.0:
            vals += c * f(y + o * step)
    return vals / step**j


@dataclass(frozen=True)
class CertificationResult:
    ok: bool
    reason: str = "ok"
    derivative_order: int | None = None
    at: float | None = None
    at2: float | None = None
    value: float | None = None
    bound: float | None = None

    def __bool__(self) -> bool:
        return self.ok


def holder_split(beta: float) -> tuple[int, float]:
    """beta = r + alpha with r = ceil(beta) - 1 and alpha in (0, 1]."""
    r = math.ceil(beta) - 1
    return r, beta - r


def holder_certify_fn(deriv, grid, beta: float, L: float,
                      slack: float = CERT_SLACK) -> CertificationResult:
    """Certify membership of a function in the smoothness class (beta, L)
    on a grid: bounded derivatives up to order r and an alpha-Hölder top
    derivative, checked over all grid pairs.  ``deriv(j, y)`` must return
    the j-th derivative at the points y.
    """
    r, alpha = holder_split(beta)
    grid = np.unique(np.asarray(grid, dtype=float))
    for j in range(r + 1):
        vals = np.abs(deriv(j, grid))
        i = int(np.argmax(vals))
        if vals[i] > slack * L:
            return CertificationResult(False, "sup", j, float(grid[i]),
                                       None, float(vals[i]), L)
    w = np.asarray(deriv(r, grid), dtype=float)
    worst = (-1.0, 0.0, 0.0, 0.0)
    chunk = 256
    for lo in range(0, len(grid), chunk):
        hi = min(lo + chunk, len(grid))
        dy = np.abs(grid[lo:hi, None] - grid[None, :])
        dw = np.abs(w[lo:hi, None] - w[None, :])
        np.fill_diagonal(dy[:, lo:hi], np.inf)  # skip i == j
        excess = dw - slack * L * dy**alpha
        i, j = np.unravel_index(np.argmax(excess), excess.shape)
        if excess[i, j] > worst[0]:
            worst = (float(excess[i, j]), float(grid[lo + i]), float(grid[j]),
                     float(dw[i, j]))
    if worst[0] > 0.0:
        return CertificationResult(False, "holder", r, worst[1], worst[2],
                                   worst[3], L)
    return CertificationResult(True)


@dataclass(frozen=True)
class Marginal:
    """A symmetric univariate probability density.

    kind "gaussian": N(0, sigma^2).
    kind "perturbed_gaussian": N(0, sigma^2) + L eps^beta lam(y/eps) with
    lam(y) = lam_scale * (2 B(2y) - B(y)).
    """

    kind: str
    sigma: float
    beta: float | None = None
    L: float | None = None
    eps: float | None = None
    lam_scale: float | None = None

    @property
    def bump_amp(self) -> float:
        if self.kind == "gaussian":
            return 0.0
        return self.L * self.eps**self.beta

    def lam(self, y):
        return self.lam_scale * wiggle_base(y)

    def pdf(self, y):
        y = np.asarray(y, dtype=float)
        base = _gauss_pdf(y, self.sigma)
        if self.kind == "gaussian":
            return base
        return base + self.bump_amp * self.lam(y / self.eps)

    def derivative(self, j, y):
        """j-th derivative of the density; Gaussian part in closed form,
        wiggle part by order-6 finite differences."""
        y = np.asarray(y, dtype=float)
        out = gauss_derivative(j, y, self.sigma)
        if self.kind != "gaussian":
            amp = self.bump_amp
            if j == 0:
                out = out + amp * self.lam(y / self.eps)
            else:
                out = out + amp * self.eps ** (-j) * _fd_derivative(
                    self.lam, j, y / self.eps)
        return out

    @cached_property
    def _lam_cdf_table(self):
        u = np.linspace(-1.0, 1.0, 16385)
        cum = cumulative_trapezoid(self.lam(u), u, initial=0.0)
        return u, cum

    def cdf(self, y):
        y = np.asarray(y, dtype=float)
        out = ndtr(y / self.sigma)
        if self.kind != "gaussian":
            u, cum = self._lam_cdf_table
            out = out + self.bump_amp * self.eps * np.interp(
                y / self.eps, u, cum, left=0.0, right=cum[-1])
        return out

    def certification_grid(self) -> np.ndarray:
        g = np.linspace(-8.0 * self.sigma, 8.0 * self.sigma, 4001)
        if self.kind != "gaussian":
            g = np.concatenate([g, np.linspace(-self.eps, self.eps, 2001)])
        return np.unique(g)

    @cached_property
    def _envelope_ok(self) -> bool:
        if self.kind == "gaussian":
            return True
        g = self.certification_grid()
        ratio = self.pdf(g) / (ENVELOPE_FACTOR * _gauss_pdf(g, self.sigma))
        return bool(np.max(ratio) <= 1.0 + 1e-12)

    def sample(self, rng, size: int) -> np.ndarray:
        if self.kind == "gaussian":
            return rng.normal(0.0, self.sigma, size)
        if not self._envelope_ok:
            raise EnvelopeError(
                "scaled-Gaussian envelope does not dominate the perturbed density")
        out = np.empty(size)
        have = 0
        for _ in range(200):
            if have >= size:
                break
            need = size - have
            m = int(math.ceil(need * ENVELOPE_FACTOR / 0.9)) + 16
            cand = rng.normal(0.0, self.sigma, m)
            u = rng.random(m)
            accept = u * ENVELOPE_FACTOR * _gauss_pdf(cand, self.sigma) < self.pdf(cand)
            took = cand[accept][:need]
            out[have:have + took.size] = took
            have += took.size
        if have < size:
            raise EnvelopeError("rejection sampling failed to fill the request")
        return out


def holder_certify(marg: Marginal, beta: float, L: float) -> CertificationResult:
    return holder_certify_fn(marg.derivative, marg.certification_grid(), beta, L)


_SIGMA_CACHE: dict[tuple[float, float], float] = {}
_LAM_SCALE_CACHE: dict[float, float] = {}
_MARGINAL_CACHE: dict[tuple[float, float, float], Marginal] = {}


def _calibrate_sigma(beta: float, L: float) -> float:
    """Smallest sigma (x 1.05 safety) with N(0, sigma^2) in class (beta, L/2)."""
    key = (beta, L)
    if key in _SIGMA_CACHE:
        return _SIGMA_CACHE[key]

    def passes(sigma: float, n_grid: int = 801) -> bool:
        grid = np.linspace(-8.0 * sigma, 8.0 * sigma, n_grid)
        res = holder_certify_fn(lambda j, y: gauss_derivative(j, y, sigma),
                                grid, beta, L / 2.0)
        return bool(res)

    hi = 1.0
    for _ in range(80):
        if passes(hi):
            break
        hi *= 2.0
    else:
        raise CertificationError("could not bracket a certifiable Gaussian width")
    lo = hi / 2.0
    while passes(lo):
        hi, lo = lo, lo / 2.0
        if lo < 1e-8:
            break
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        if passes(mid):
            hi = mid
        else:
            lo = mid
    sigma = 1.05 * hi
    _SIGMA_CACHE[key] = sigma
    return sigma


def _calibrate_lam_scale(beta: float) -> float:
    """Largest wiggle scale (x 0.95 safety) with lam in class (beta, 1/2)."""
    if beta in _LAM_SCALE_CACHE:
        return _LAM_SCALE_CACHE[beta]
    grid = np.linspace(-1.0, 1.0, 2001)

    def passes(c: float) -> bool:
        return bool(holder_certify_fn(
            lambda j, y: c * _fd_derivative(wiggle_base, j, y) if j else c * wiggle_base(y),
            grid, beta, 0.5))

    hi = 1.0
    while passes(hi):
        hi *= 2.0
        if hi > 2.0**20:
            break
    lo = 0.0
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        if passes(mid):
            lo = mid
        else:
            hi = mid
    c = 0.95 * lo
    if c <= 0.0:
        raise CertificationError("wiggle calibration collapsed to zero")
    _LAM_SCALE_CACHE[beta] = c
    return c


def gaussian_marginal(sigma: float) -> Marginal:
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return Marginal(kind="gaussian", sigma=float(sigma))


def make_perturbed_marginal(beta: float, L: float, eps: float) -> Marginal:
    """Perturbed Gaussian marginal with certified smoothness.

    Raises CertificationError when the requested (beta, L, eps) do not
    admit a nonnegative certified density.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps!r}")
    if beta <= 0 or L <= 0:
        raise ValueError("beta and L must be positive")
    key = (float(beta), float(L), float(eps))
    if key in _MARGINAL_CACHE:
        return _MARGINAL_CACHE[key]

    sigma = _calibrate_sigma(beta, L)
    lam_scale = _calibrate_lam_scale(beta)
    marg = Marginal(kind="perturbed_gaussian", sigma=sigma, beta=float(beta),
                    L=float(L), eps=float(eps), lam_scale=lam_scale)

    grid = marg.certification_grid()
    vals = marg.pdf(grid)
    i = int(np.argmin(vals))
    if vals[i] <= 0.0:
        raise CertificationError(
            "perturbed density is not positive everywhere",
            at=float(grid[i]), value=float(vals[i]))
    total = adaptive_quad(marg.pdf, -8.0 * sigma, 8.0 * sigma, tol=1e-10,
                          points=[-eps, -eps / 2, 0.0, eps / 2, eps])
    if abs(total - 1.0) > 1e-8:
        raise CertificationError(f"perturbed density integrates to {total}, not 1")
    res = holder_certify(marg, beta, L)
    if not res:
        raise CertificationError(
            "perturbed density failed smoothness certification",
            reason=res.reason, derivative_order=res.derivative_order,
            at=res.at, at2=res.at2, value=res.value, bound=res.bound)
    if not marg._envelope_ok:
        raise EnvelopeError(
            "scaled-Gaussian envelope does not dominate the perturbed density")
    _MARGINAL_CACHE[key] = marg
    return marg


@dataclass(frozen=True)
class Model:
    """f(x) = marginal1((Q^T x)_1) * marginal2((Q^T x)_2)."""

    marginal1: Marginal
    marginal2: Marginal
    rotation: Rotation
    beta: float
    L: float

    @cached_property
    def model_id(self) -> str:
        desc = repr((self.marginal1, self.marginal2, self.rotation.theta,
                     self.beta, self.L))
        return hashlib.sha256(desc.encode()).hexdigest()[:12]

    @property
    def is_rotation_invariant(self) -> bool:
        return (self.marginal1.kind == "gaussian"
                and self.marginal2.kind == "gaussian"
                and self.marginal1.sigma == self.marginal2.sigma)

    def density(self, x):
        return model_density(self, x)


def make_model(marginal1: Marginal, marginal2: Marginal, rotation: Rotation,
               beta: float, L: float, *, certify: bool = True) -> Model:
    if certify:
        for name, marg in (("marginal1", marginal1), ("marginal2", marginal2)):
            res = holder_certify(marg, beta, L)
            if not res:
                raise CertificationError(
                    f"{name} failed smoothness certification at (beta={beta}, L={L})",
                    reason=res.reason, derivative_order=res.derivative_order,
                    at=res.at, at2=res.at2, value=res.value, bound=res.bound)
    return Model(marginal1=marginal1, marginal2=marginal2, rotation=rotation,
                 beta=float(beta), L=float(L))


def model_density(m: Model, x):
    """f at a point (2,) or at rows of an (N, 2) array."""
    x = np.asarray(x, dtype=float)
    u = x @ m.rotation.matrix  # rows are (Q^T x)^T
    if u.ndim == 1:
        return float(m.marginal1.pdf(u[0]) * m.marginal2.pdf(u[1]))
    return m.marginal1.pdf(u[..., 0]) * m.marginal2.pdf(u[..., 1])


@dataclass(frozen=True)
class Sample:
    points: np.ndarray
    n: int
    seed: int
    model_id: str


def sample(m: Model, n: int, seed: int) -> Sample:
    """n independent draws X = Q xi, coordinates of xi independent from the
    two marginals.  Deterministic per seed (counter-based generator)."""
    if n < 1:
        raise ValueError("need n >= 1")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    xi = np.column_stack([m.marginal1.sample(rng, n), m.marginal2.sample(rng, n)])
    pts = xi @ m.rotation.matrix.T
    pts.flags.writeable = False
    return Sample(points=pts, n=n, seed=int(seed), model_id=m.model_id)


def epsilon_for_capacity(varpi: float, L: float, capacity: float, n: int,
                         beta: float) -> float:
    """(varpi L^-2 capacity / n)^(1/(2 beta + 1)); varpi is a user parameter."""
    return (varpi * capacity / (L**2 * n)) ** (1.0 / (2.0 * beta + 1.0))


def _marginal_halfwidth(marg: Marginal) -> float:
    return 8.0 * marg.sigma


def tau_oracle(m: Model, d_rot: Rotation, x, *, tol=1e-9) -> float:
    """Limit value of the paired directional smoothers at rotation D.

    For D equal to the model rotation this is f(x); otherwise the double
    integral separates into two univariate convolutions which are computed
    by adaptive quadrature.
    """
    x = np.asarray(x, dtype=float)
    if angles_equal(d_rot, m.rotation):
        return model_density(m, x)
    p1, p2 = overlap_coeffs(d_rot, m.rotation)
    if abs(p1) < P1_FLOOR:
        raise NumericError(
            f"|p1|={abs(p1)} below floor {P1_FLOOR}; rotation is numerically "
            "indistinguishable from the model rotation modulo the degenerate axis")
    a = d_rot.matrix @ np.array([x[1], x[0]]) / p1
    g1, g2 = m.marginal1, m.marginal2

    def factor(ga, gb, shift, sign):
        # integral of ga(p1 u) * gb(shift + sign p2 u) du
        wa = _marginal_halfwidth(ga) / abs(p1)
        if abs(p2) < 1e-12:
            # second factor is constant in u; first integrates to 1/|p1|
            return float(gb.pdf(shift)) / abs(p1)
        lo_b = (-_marginal_halfwidth(gb) - shift) / (sign * p2)
        hi_b = (_marginal_halfwidth(gb) - shift) / (sign * p2)
        lo = max(-wa, min(lo_b, hi_b))
        hi = min(wa, max(lo_b, hi_b))
        if hi <= lo:
            return 0.0
        pts = []
        if ga.kind != "gaussian":
            pts += [e / p1 for e in (-ga.eps, ga.eps)]
        if gb.kind != "gaussian":
            pts += [(e - shift) / (sign * p2) for e in (-gb.eps, gb.eps)]
        return adaptive_quad(
            lambda u: ga.pdf(p1 * u) * gb.pdf(shift + sign * p2 * u),
            lo, hi, tol=tol, points=pts)

    i1 = factor(g1, g2, a[1], +1.0)
    i2 = factor(g2, g1, a[0], -1.0)
    return i1 * i2
