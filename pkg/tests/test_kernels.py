import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

import rotakde as rk
from rotakde.kernels import kernel_moment


def scipy_moment(kernel, j):
    val, _ = quad(lambda u: u**j * rk.eval_kernel(kernel, u), -1, 1,
                  epsabs=1e-12, limit=200)
    return val


@pytest.mark.parametrize("order", [0, 1, 2, 3])
def test_moments_vanish(order):
    k = rk.build_kernel(order)
    assert abs(scipy_moment(k, 0) - 1.0) < 1e-8
    for j in range(1, 2 * order + 1):
        assert abs(scipy_moment(k, j)) < 1e-8


def test_order0_is_box():
    k = rk.build_kernel(0)
    assert k.coeffs == (0.5,)
    assert rk.eval_kernel(k, 0.3) == 0.5


def test_order1_closed_form(kernel1):
    u = np.linspace(-1, 1, 1001)
    expect = 9 / 8 - 15 / 8 * u**2
    assert np.max(np.abs(rk.eval_kernel(kernel1, u) - expect)) < 1e-12
    assert rk.eval_kernel(kernel1, 0.0) == pytest.approx(1.125, abs=1e-15)
    assert rk.eval_kernel(kernel1, 1.0) == pytest.approx(-0.75, abs=1e-15)


def test_outside_support_exactly_zero(kernel1, kernel2):
    for k in (kernel1, kernel2):
        assert rk.eval_kernel(k, 2.0) == 0.0
        assert rk.eval_kernel(k, -1.0000001) == 0.0


@settings(max_examples=100, deadline=None)
@given(u=st.floats(-3, 3), order=st.integers(0, 3))
def test_even(u, order):
    k = rk.build_kernel(order)
    assert rk.eval_kernel(k, u) == rk.eval_kernel(k, -u)


@pytest.mark.parametrize("order", [1, 2, 3])
def test_cached_norms_match_quadrature(order):
    from rotakde.kernels import _real_roots_in_support

    k = rk.build_kernel(order)
    kinks = _real_roots_in_support(np.asarray(k.coeffs))
    l1, _ = quad(lambda u: abs(rk.eval_kernel(k, u)), -1, 1, epsabs=1e-12,
                 limit=300, points=kinks)
    l2, _ = quad(lambda u: rk.eval_kernel(k, u) ** 2, -1, 1, epsabs=1e-12,
                 limit=300, points=kinks)
    assert k.l1_norm == pytest.approx(l1, abs=1e-9)
    assert k.l2_norm_sq == pytest.approx(l2, abs=1e-9)
    grid = np.linspace(-1, 1, 200001)
    assert k.sup_norm == pytest.approx(np.max(np.abs(rk.eval_kernel(k, grid))),
                                       abs=1e-7)


def test_moment_helper_matches_scipy(kernel2):
    for j in range(0, 5):
        assert kernel_moment(kernel2, j) == pytest.approx(
            scipy_moment(kernel2, j), abs=1e-10)


def test_build_kernel_rejects_bad_order():
    with pytest.raises(ValueError):
        rk.build_kernel(-1)


class TestCapacityConstant:
    def test_small_s_limit_is_l1_squared(self, kernel1):
        val = rk.capacity_constant(kernel1, 1.0, 1e-9)
        assert val == pytest.approx(kernel1.l1_norm**2, rel=1e-6)

    def test_lower_bound(self, kernel1, kernel2):
        for k, b, s in ((kernel1, 1.0, 1.0), (kernel2, 2.0, math.sqrt(2)),
                        (kernel1, 0.5, 3.0)):
            assert rk.capacity_constant(k, b, s) >= k.l1_norm**2

    def test_riemann_oracle(self, kernel1):
        # brute-force midpoint Riemann sum over the documented b' grid
        val = rk.capacity_constant(kernel1, 1.0, 1.0)
        m = 4000
        t = (np.arange(m) + 0.5) / m * 2.0 - 1.0
        absk = np.abs(rk.eval_kernel(kernel1, t))
        r2 = t[:, None] ** 2 + t[None, :] ** 2
        ww = absk[:, None] * absk[None, :] * (2.0 / m) ** 2
        best = -np.inf
        for j in range(1, 33):
            bp = j / 32.0
            best = max(best, float(np.sum(ww * (r2**bp + 1.0) ** 2)))
        assert val == pytest.approx(best, abs=1e-6)

    def test_monotone_in_s(self, kernel1):
        vals_s = [rk.capacity_constant(kernel1, 1.0, s)
                  for s in (0.5, 1.0, 2.0, 4.0)]
        assert all(x <= y + 1e-12 for x, y in zip(vals_s, vals_s[1:]))

    def test_bounded_by_zero_power_limit(self, kernel1):
        # on [-1,1]^2 the bracket never exceeds its b' -> 0 limit by much:
        # the grid-sup stays below (s+1)^2 ||K||_1^2 + margin for r <= sqrt2
        s = 1.0
        cap = rk.capacity_constant(kernel1, 2.0, s)
        assert cap <= (s * 2.0 + 1.0) ** 2 * kernel1.l1_norm**2

    def test_rejects_nonpositive(self, kernel1):
        with pytest.raises(ValueError):
            rk.capacity_constant(kernel1, 0.0, 1.0)
        with pytest.raises(ValueError):
            rk.capacity_constant(kernel1, 1.0, -2.0)
