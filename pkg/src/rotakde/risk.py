"""Monte Carlo pointwise-risk laboratory.

Replications are independent tasks over an immutable model: each gets a
counter-derived seed, results are stored by replication index and reduced
in index order, so output is byte-identical for any worker count.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .estimators import _pts, product_estimate
from .kernels import Kernel, build_kernel, eval_kernel
from .models import Model, model_density, sample as draw_sample
from .rotation import RotationNet, build_net, rotation_from_angle
from .selectors import (adaptive_select, angles_match_mod_halfpi, derive_seed,
                        minimax_select)


def oracle_estimate(s, x, m: Model, mu: float, kernel: Kernel,
                    beta: float) -> float:
    """Known-rotation benchmark at bandwidth (mu / n)^{1/(2 beta + 1)}."""
    n = len(_pts(s))
    if not 1.0 <= mu <= n:
        raise ValueError(f"mu must lie in [1, n]={n}, got {mu}")
    h = (mu / n) ** (1.0 / (2.0 * beta + 1.0))
    return product_estimate(s, x, h, m.rotation, kernel)


def isotropic_default_bandwidth(n: int, beta: float) -> float:
    return float(n) ** (-1.0 / (2.0 * beta + 2.0))


def isotropic_baseline(s, x, h: float, kernel: Kernel) -> float:
    """Plain 2-D product-kernel average in the unrotated coordinates:
    n^-1 sum_k K_h(X_k1 - x1) K_h(X_k2 - x2)."""
    if h <= 0:
        raise ValueError("bandwidth must be positive")
    pts = _pts(s)
    x = np.asarray(x, dtype=float)
    t = (pts - x) / h
    vals = eval_kernel(kernel, t[:, 0]) * eval_kernel(kernel, t[:, 1])
    return float(np.mean(vals)) / (h * h)


# ---------------------------------------------------------------------------
# estimator specs (picklable, resolvable inside worker processes)


@dataclass(frozen=True)
class EstimatorSpec:
    kind: str
    params: dict = field(default_factory=dict)

    @property
    def estimator_id(self) -> str:
        digest = hashlib.sha256(repr(sorted(self.params.items())).encode())
        return f"{self.kind}-{digest.hexdigest()[:8]}"


def _net_from_params(params) -> RotationNet:
    if "thetas" in params:
        members = [rotation_from_angle(t) for t in params["thetas"]]
        return RotationNet.from_members(params["delta"], members)
    return build_net(params["delta"])


def resolve_estimator(spec: EstimatorSpec, model: Model):
    """Turn a spec into a callable (sample, x) -> float."""
    p = spec.params
    kind = spec.kind
    if kind == "exact":
        return lambda s, x: model_density(model, np.asarray(x, dtype=float))
    kernel = build_kernel(int(p.get("order", 2)))
    if kind == "oracle":
        beta = float(p.get("beta", model.beta))
        mu = p.get("mu", "log_n")

        def est_oracle(s, x):
            m_val = math.log(len(_pts(s))) if mu == "log_n" else float(mu)
            return oracle_estimate(s, x, model, m_val, kernel, beta)

        return est_oracle
    if kind == "isotropic":
        beta = float(p.get("beta", model.beta))
        h_spec = p.get("h", "default")

        def est_iso(s, x):
            h = (isotropic_default_bandwidth(len(_pts(s)), beta)
                 if h_spec == "default" else float(h_spec))
            return isotropic_baseline(s, x, h, kernel)

        return est_iso
    if kind == "adaptive":
        net = _net_from_params(p)
        a_mult = float(p.get("a_mult", 1.0))
        rule_p = float(p.get("p", 2))
        mb = p.get("mb")

        def est_adaptive(s, x):
            return adaptive_select(s, x, net, kernel, a_mult=a_mult, p=rule_p,
                                   mb=mb, mode=p.get("mode", "pruned")).estimate

        return est_adaptive
    if kind == "minimax":
        net = _net_from_params(p)
        beta = float(p.get("beta", model.beta))
        big_l = float(p.get("L", model.L))
        b_mult = float(p.get("b_mult", 1.0))
        rule_p = float(p.get("p", 2))

        def est_minimax(s, x):
            return minimax_select(
                s, x, net, kernel, beta, big_l, b_mult=b_mult, p=rule_p,
                a_mult=float(p.get("a_mult", 1.0)),
                no_split=bool(p.get("no_split", False)),
                mode=p.get("mode", "pruned")).estimate

        return est_minimax
    raise ConfigError(f"unknown estimator kind {kind!r}", key="estimator.kind")


# ---------------------------------------------------------------------------
# replication engine


def _error_chunk(args):
    model, spec, x, n, p_order, seed, rep_indices = args
    est = resolve_estimator(spec, model)
    x = np.asarray(x, dtype=float)
    truth = model_density(model, x)
    out = []
    for rep in rep_indices:
        s = draw_sample(model, n, derive_seed(seed, rep))
        try:
            val = est(s, x)
        except Exception as exc:
            raise RuntimeError(f"estimator failed on replication {rep}") from exc
        out.append(abs(val - truth))
    return out


def _run_chunks(worker, arg_list, threads: int):
    if threads <= 1 or len(arg_list) <= 1:
        results = [worker(a) for a in arg_list]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(worker, arg_list))
    return [v for chunk in results for v in chunk]


def _replication_errors(model, spec, x, n, p_order, reps, seed,
                        threads: int) -> np.ndarray:
    n_chunks = max(1, min(reps, 4 * max(threads, 1)))
    bounds = np.linspace(0, reps, n_chunks + 1).astype(int)
    args = [(model, spec, x, n, p_order, seed, list(range(a, b)))
            for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    return np.asarray(_run_chunks(_error_chunk, args, threads))


def pointwise_risk(model: Model, spec: EstimatorSpec, x, n: int,
                   p: float, reps: int, seed: int,
                   threads: int = 1) -> tuple[float, float]:
    """(empirical p-th-mean error^(1/p), delta-method standard error)."""
    if reps < 2:
        raise ValueError("need reps >= 2")
    errs = _replication_errors(model, spec, x, n, p, reps, seed, threads)
    ep = errs**p
    m = float(np.mean(ep))
    risk = m ** (1.0 / p)
    if m <= 0.0:
        return 0.0, 0.0
    var_m = float(np.var(ep, ddof=1)) / reps
    stderr = risk ** (1.0 - p) / p * math.sqrt(var_m)
    return risk, stderr


@dataclass(frozen=True)
class RiskReport:
    n_grid: tuple[int, ...]
    risks: tuple[float, ...]
    stderrs: tuple[float, ...]
    slope: float | None
    slope_stderr: float | None
    reps: int
    seed: int
    estimator_id: str
    p: float
    degenerate: bool = False

    def rows(self):
        out = [{"n": n, "risk": r, "stderr": se, "reps": self.reps,
                "estimator_id": self.estimator_id}
               for n, r, se in zip(self.n_grid, self.risks, self.stderrs)]
        return out


def _ols_slope(lx, ly):
    lx, ly = np.asarray(lx), np.asarray(ly)
    k = len(lx)
    sxx = float(np.sum((lx - lx.mean()) ** 2))
    slope = float(np.sum((lx - lx.mean()) * (ly - ly.mean())) / sxx)
    intercept = float(ly.mean() - slope * lx.mean())
    resid = ly - (intercept + slope * lx)
    dof = max(k - 2, 1)
    s2 = float(resid @ resid) / dof
    return slope, math.sqrt(s2 / sxx)


def rate_study(model: Model, spec: EstimatorSpec, x, n_grid, p: float,
               reps: int, seed: int, threads: int = 1) -> RiskReport:
    """Risk curve over n with a log-log least-squares slope.

    A replication index maps to the same seed at every n, so estimator
    comparisons at fixed (seed, rep) are paired across the grid.
    """
    n_grid = tuple(int(n) for n in n_grid)
    if len(n_grid) < 3:
        raise ValueError("need at least 3 grid points for a slope")
    risks, stderrs = [], []
    for n in n_grid:
        r, se = pointwise_risk(model, spec, x, n, p, reps, seed, threads)
        risks.append(r)
        stderrs.append(se)
    if min(risks) <= 0.0:
        return RiskReport(n_grid, tuple(risks), tuple(stderrs), None, None,
                          reps, seed, spec.estimator_id, p, degenerate=True)
    slope, slope_se = _ols_slope(np.log(n_grid), np.log(risks))
    return RiskReport(n_grid, tuple(risks), tuple(stderrs), slope, slope_se,
                      reps, seed, spec.estimator_id, p)


# ---------------------------------------------------------------------------
# selection-frequency probe


def _frequency_chunk(args):
    model, net, x, n, seed, kernel_order, rule, opts, rep_indices = args
    kernel = build_kernel(kernel_order)
    x = np.asarray(x, dtype=float)
    hits = []
    for rep in rep_indices:
        s = draw_sample(model, n, derive_seed(seed, rep))
        if rule == "adaptive":
            res = adaptive_select(s, x, net, kernel, a_mult=opts["a_mult"],
                                  p=opts["p"], mb=opts.get("mb"),
                                  mode=opts.get("mode", "pruned"))
        else:
            res = minimax_select(s, x, net, kernel, opts["beta"], opts["L"],
                                 b_mult=opts.get("b_mult", 1.0), p=opts["p"],
                                 a_mult=opts.get("a_mult", 1.0),
                                 mode=opts.get("mode", "pruned"))
        hits.append(1.0 if angles_match_mod_halfpi(res.q_hat, model.rotation)
                    else 0.0)
    return hits


def selection_frequency(model: Model, net: RotationNet, x, n: int, reps: int,
                        seed: int, *, kernel_order: int = 2,
                        rule: str = "adaptive", a_mult: float = 1.0,
                        p: float = 2, mb: float | None = None,
                        beta: float | None = None, L: float | None = None,
                        b_mult: float = 1.0, threads: int = 1,
                        mode: str = "pruned") -> float:
    """Fraction of replications whose selected rotation matches the model
    rotation mod pi/2 (angle tolerance 1e-9)."""
    if model.is_rotation_invariant:
        raise ValueError("rotation-invariant model: the selected rotation is "
                         "not identified, frequency is meaningless")
    if not any(angles_match_mod_halfpi(q, model.rotation) for q in net.members):
        raise ValueError("the model rotation (mod pi/2) must coincide with a "
                         "net member")
    opts = {"a_mult": a_mult, "p": p, "mb": mb, "b_mult": b_mult,
            "beta": model.beta if beta is None else beta,
            "L": model.L if L is None else L, "mode": mode}
    n_chunks = max(1, min(reps, 4 * max(threads, 1)))
    bounds = np.linspace(0, reps, n_chunks + 1).astype(int)
    args = [(model, net, x, n, seed, kernel_order, rule, opts,
             list(range(a, b)))
            for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    hits = _run_chunks(_frequency_chunk, args, threads)
    return float(np.mean(hits))
