"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s`.  The Monte Carlo criteria
use fixed seeds and are deterministic end to end.
"""

import csv
import io
import json
import math
import time

import numpy as np
import pytest
from scipy.integrate import quad

import rotakde as rk
from rotakde.cli import run as cli_run
from rotakde.risk import EstimatorSpec
from rotakde.selectors import _fill_tables, _r_surface, derive_seed


def report(num, ok, detail):
    print(f"\nACCEPTANCE {num:02d} {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {num}: {detail}"


def rot(deg):
    return rk.rotation_from_angle(math.radians(deg))


# ---------------------------------------------------------------------------


def test_criterion_01_kernel_moments():
    worst = 0.0
    for order in (1, 2, 3):
        k = rk.build_kernel(order)
        kinks = [r for r in np.roots(list(k.coeffs)[::-1])
                 if abs(r.imag) < 1e-12 and -1 < r.real < 1]
        pts = sorted(float(r.real) for r in kinks)
        val, _ = quad(lambda u: rk.eval_kernel(k, u), -1, 1, epsabs=1e-12,
                      limit=300, points=pts)
        worst = max(worst, abs(val - 1.0))
        for j in range(1, 2 * order + 1):
            mom, _ = quad(lambda u: u**j * rk.eval_kernel(k, u), -1, 1,
                          epsabs=1e-12, limit=300, points=pts)
            worst = max(worst, abs(mom))
    k1 = rk.build_kernel(1)
    u = np.linspace(-1, 1, 1001)
    point_err = float(np.max(np.abs(rk.eval_kernel(k1, u)
                                    - (9 / 8 - 15 / 8 * u**2))))
    ok = worst <= 1e-8 and point_err <= 1e-12
    report(1, ok, f"worst moment defect {worst:.2e} (<=1e-8), "
                  f"order-1 closed-form error {point_err:.2e} (<=1e-12)")


def test_criterion_02_net_validity():
    details = []
    ok = True
    for delta in (0.3, 0.1, 0.03, 0.01):
        net = rk.build_net(delta)
        sep = net.min_separation()
        want_card = math.floor(math.pi / (2 * math.asin(delta)))
        cap_bound = 2 * abs(math.log(delta)) + 2
        infra = rk.pseudo_inframetric_check(net.members)
        good = (sep >= delta and len(net) == want_card
                and net.capacity <= cap_bound and infra)
        ok = ok and good
        details.append(f"d={delta}: card {len(net)}, minsep {sep:.4f}, "
                       f"cap {net.capacity:.3f}<={cap_bound:.3f}, infra {infra}")
    report(2, ok, "; ".join(details))


def test_criterion_03_ustat_oracle_equivalence_and_pruning():
    k1 = rk.build_kernel(1)
    rng = np.random.default_rng(31)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 501))
        pts = rng.normal(0, 1.2, (n, 2))
        h = float(np.exp(rng.uniform(np.log(0.03), 0.0)))
        d = rk.rotation_from_angle(float(rng.uniform(0, 2 * math.pi)))
        q = rk.rotation_from_angle(float(rng.uniform(0, 2 * math.pi)))
        x = rng.normal(0, 1, 2)
        a = rk.auxiliary_estimate(pts, x, h, d, q, k1, mode="naive")
        b = rk.auxiliary_estimate(pts, x, h, d, q, k1, mode="pruned")
        worst = max(worst, abs(a - b))

    marg = rk.make_perturbed_marginal(2.0, 1.0, 0.5)
    m = rk.make_model(marg, marg, rot(30.0), 2.0, 1.0)
    s = rk.sample(m, 20000, 404)
    d, q = rot(0.0), rot(45.0)
    x = np.zeros(2)
    t0 = time.perf_counter()
    vp = rk.auxiliary_estimate(s, x, 0.05, d, q, k1, mode="pruned")
    t_pruned = time.perf_counter() - t0
    t0 = time.perf_counter()
    vn = rk.auxiliary_estimate(s, x, 0.05, d, q, k1, mode="naive")
    t_naive = time.perf_counter() - t0
    speedup = t_naive / t_pruned
    ok = worst <= 1e-12 and abs(vp - vn) <= 1e-12 and speedup >= 3.0
    report(3, ok, f"100-config worst |pruned-naive| {worst:.2e} (<=1e-12); "
                  f"n=20000 h=0.05 speedup {speedup:.1f}x (>=3x, "
                  f"naive {t_naive:.2f}s vs pruned {t_pruned:.2f}s)")


def test_criterion_04_bias_bounds_by_quadrature():
    g = rk.gaussian_marginal(1.0)
    qf = rot(30.0)
    m = rk.make_model(g, g, qf, 2.0, 1.0)  # certification runs eagerly
    k2 = rk.build_kernel(2)
    beta, big_l = 2.0, 1.0
    x = np.array([0.0, 0.0])
    rotations = [rot(t) for t in (0.0, 20.0, 45.0, 60.0, 80.0)]

    c1 = rk.capacity_constant(k2, beta, 1.0)
    product_bound_ok = True
    worst_prod = -np.inf
    for d in rotations:
        tau = rk.tau_oracle(m, d, x)
        for h in (0.5, 0.25, 0.125):
            gap = abs(rk.expected_product(m, d, h, x, k2) - tau)
            bound = 2.0 * c1 * big_l**2 * h**beta
            worst_prod = max(worst_prod, gap / bound)
            product_bound_ok = product_bound_ok and gap <= bound

    c2 = rk.capacity_constant(k2, beta, math.sqrt(2.0))
    pairwise_bound_ok = True
    worst_pair = -np.inf
    for h, eta in ((0.5, 0.5), (0.5, 0.25), (0.25, 0.125)):
        bound = 2.0 * c2 * big_l**2 * (h**beta + eta**beta)
        for d in rotations:
            e_pair = rk.expected_auxiliary(m, d, qf, h, x, k2)
            e_prod = rk.expected_product(m, d, eta, x, k2)
            gap = abs(e_pair - e_prod)
            worst_pair = max(worst_pair, gap / bound)
            pairwise_bound_ok = pairwise_bound_ok and gap <= bound
    ok = product_bound_ok and pairwise_bound_ok
    report(4, ok, f"pairing-limit bound: max gap/bound {worst_prod:.3e}; "
                  f"pairwise-vs-product bound: max gap/bound {worst_pair:.3e} "
                  f"(both <=1; C(K,2,1)={c1:.2f}, C(K,2,sqrt2)={c2:.2f})")


def test_criterion_05_rate_reproduction():
    marg = rk.make_perturbed_marginal(2.0, 1.0, 0.5)
    m = rk.make_model(marg, marg, rot(30.0), 2.0, 1.0)
    x = [0.0, 0.0]
    n_grid = [512, 1024, 2048, 4096, 8192, 16384]
    rep_o = rk.rate_study(m, EstimatorSpec("oracle", {"order": 2,
                                                      "mu": "log_n"}),
                          x, n_grid, 2.0, 200, 313, threads=2)
    rep_i = rk.rate_study(m, EstimatorSpec("isotropic", {"order": 2}),
                          x, n_grid, 2.0, 200, 313, threads=2)
    ratio = np.array(rep_i.risks) / np.array(rep_o.risks)
    in_window = -0.55 <= rep_o.slope <= -0.25
    shallower = rep_i.slope > rep_o.slope
    ratio_grows = ratio[-1] >= ratio[0]
    ok = in_window and shallower and ratio_grows
    report(5, ok, f"oracle slope {rep_o.slope:.3f}+-{rep_o.slope_stderr:.3f} "
                  f"in [-0.55,-0.25] (target -0.4); isotropic slope "
                  f"{rep_i.slope:.3f} shallower; ratio {ratio[0]:.2f} -> "
                  f"{ratio[-1]:.2f} nondecreasing end-to-end")


def test_criterion_06_commutativity_statistical():
    marg = rk.make_perturbed_marginal(2.0, 1.0, 0.5)
    m = rk.make_model(marg, marg, rot(30.0), 2.0, 1.0)
    k2 = rk.build_kernel(2)
    reps, n = 2000, 200
    configs = [
        (0.0, 45.0, 0.5, (0.0, 0.0)),
        (10.0, 60.0, 0.37, (0.3, -0.2)),
        (0.0, 90.0, 0.25, (0.5, 0.5)),
        (20.0, 50.0, 0.5, (-0.4, 0.1)),
        (5.0, 80.0, 0.37, (0.0, 0.6)),
        (0.0, 30.0, 0.25, (0.2, 0.2)),
        (15.0, 75.0, 0.5, (0.1, -0.5)),
        (40.0, 85.0, 0.37, (-0.3, -0.3)),
        (25.0, 65.0, 0.61, (0.0, 0.0)),
        (8.0, 52.0, 0.45, (0.45, 0.05)),
    ]
    agree = 0
    zs = []
    for ci, (dd, qd, h, xx) in enumerate(configs):
        d, q = rot(dd), rot(qd)
        x = np.asarray(xx)
        diffs = np.empty(reps)
        for rep in range(reps):
            s = rk.sample(m, n, derive_seed(606, ci * 100000 + rep))
            diffs[rep] = (rk.combined_estimate(s, x, h, d, q, k2)
                          - rk.combined_estimate(s, x, h, q, d, k2))
        se = float(diffs.std(ddof=1)) / math.sqrt(reps)
        z = abs(float(diffs.mean())) / se if se > 0 else 0.0
        zs.append(z)
        agree += z <= 3.0
    ok = agree >= 9
    report(6, ok, f"{agree}/10 configurations within 3 combined standard "
                  f"errors (paired, R={reps}, n={n}); |z| = "
                  + ", ".join(f"{z:.2f}" for z in zs))


def test_criterion_07_adaptive_rule_sanity_and_frequency_trend():
    k1 = rk.build_kernel(1)

    # (a) hand-checked surface on a 3-point sample with an explicit grid
    pts = np.array([[0.1, 0.05], [-0.2, -0.1], [0.3, 0.2]])
    x = np.zeros(2)
    net1 = rk.RotationNet.from_members(0.5, [rot(0.0)])
    restricted = (0.5, 0.25)
    prod, aux, _ = _fill_tables(pts, x, net1, restricted, k1, "pruned")
    pen = np.array([0.01, 0.02])
    surf = _r_surface(
        np.abs(aux.transpose(2, 0, 1)[:, :, None, :]
               - prod[None, None, :, :]).max(axis=3), pen)
    p_big = rk.product_estimate(pts, x, 0.5, rot(0.0), k1)
    p_small = rk.product_estimate(pts, x, 0.25, rot(0.0), k1)
    want_big_h = max(0.0, abs(p_big - p_small) - pen[1])
    hand_ok = (surf[0, 1] == 0.0
               and abs(surf[0, 0] - want_big_h) < 1e-14)

    # (b) singleton net: selected bandwidth lives in the restricted grid and
    # the surface matches an independent scalar recomputation
    marg1 = rk.make_perturbed_marginal(1.0, 1.0, 0.9)
    sig = rk.make_model(marg1, marg1, rot(45.0), 1.0, 1.0)
    s400 = rk.sample(sig, 400, 21)
    res1 = rk.adaptive_select(s400, x, net1, k1, a_mult=0.01, mb=1.0)
    grid_ok = res1.h_hat in res1.bandwidths and res1.q_hat.theta == 0.0
    pen1 = (res1.diagnostics["a_eff"] * res1.u_hat
            * np.sqrt(math.log(400) / (400 * np.asarray(res1.bandwidths))))
    brute = np.zeros_like(res1.r_surface)
    for ih, h in enumerate(res1.bandwidths):
        best = 0.0
        for ie, eta in enumerate(res1.bandwidths):
            if eta > h:
                continue
            for ie2, eta2 in enumerate(res1.bandwidths):
                if eta2 > eta:
                    continue
                f1 = rk.combined_estimate(s400, x, eta, rot(0.0), rot(0.0), k1)
                f2 = rk.product_estimate(s400, x, eta2, rot(0.0), k1)
                best = max(best, abs(f1 - f2) - pen1[ie2])
        brute[0, ih] = max(0.0, best)
    brute_ok = bool(np.allclose(res1.r_surface, brute, atol=1e-13, rtol=0))

    # (c) calibrated selection-frequency trend on the two-element net
    net2 = rk.RotationNet.from_members(0.6, [rot(0.0), rot(45.0)])
    a_theory = rk.constant_A(2, 1.0, k1, 1.0)
    a_mult = rk.calibrate_a_mult(sig, net2, x, 500, 120, 99, k1, mb=1.0)
    freqs = []
    for n, reps in ((500, 120), (2000, 120), (8000, 60)):
        freqs.append(rk.selection_frequency(
            sig, net2, x, n, reps, 2024, kernel_order=1, a_mult=a_mult,
            mb=1.0, threads=2))
    trend_ok = freqs[0] <= freqs[1] <= freqs[2]
    ok = hand_ok and grid_ok and brute_ok and trend_ok
    report(7, ok, f"hand surface {hand_ok}, singleton-net grid/brute "
                  f"{grid_ok}/{brute_ok}; frequencies over n=(500,2000,8000):"
                  f" {freqs[0]:.3f} <= {freqs[1]:.3f} <= {freqs[2]:.3f} with "
                  f"calibrated a_mult={a_mult:.5f} (theoretical A="
                  f"{a_theory:.1f})")


def test_criterion_08_split_plan_exactness():
    net = rk.build_net(0.6)
    plan6 = rk.split_plan(10**6, net)
    million_ok = (plan6.i_star == 1 and plan6.chunks[0] == (0, 250000)
                  and len(plan6.chunks) == 2
                  and plan6.chunks[1] == (250000, 10**6))
    plan30 = rk.split_plan(10**30, net)
    astro_ok = plan30.i_star == 2
    part_ok = True
    rng = np.random.default_rng(8)
    for n in [10**6, 10**30] + [int(v) for v in rng.integers(16, 10**8, 50)]:
        plan = rk.split_plan(n, net)
        covers = (plan.chunks[0][0] == 0 and plan.chunks[-1][1] == n
                  and all(b1 == a2 for (_, b1), (a2, _) in
                          zip(plan.chunks, plan.chunks[1:])))
        boundary_ok = plan.chunks[-1][0] < 3 * n / 4
        part_ok = part_ok and covers and boundary_ok
    ok = million_ok and astro_ok and part_ok
    report(8, ok, f"n=1e6: i*=1, N0=250000, two chunks ({million_ok}); "
                  f"n=1e30: i*=2 ({astro_ok}); 52 plans partition exactly "
                  f"with N_(i*-1) < 3n/4 ({part_ok})")


def test_criterion_09_constants():
    k1, k2 = rk.build_kernel(1), rk.build_kernel(2)
    a_inj = rk.constant_A(1, 1.0, k1, 1.0, sup_norm=1.0, capacity=0.0)
    b_inj = rk.constant_B(1, 1.0, 1.0, 1.0, k1, norms=(1.0, 1.0, 1.0),
                          capacity=0.0, cbeta=1.0)
    inj_ok = (abs(a_inj - 12 * math.sqrt(10) * (1 + math.sqrt(5))) < 1e-12
              and abs(a_inj - 122.797) / 122.797 < 2e-4
              and abs(b_inj - 527730 * math.sqrt(6) * 169) < 1e-3
              and abs(b_inj - 2.1848e8) / 2.1848e8 < 2e-4)

    rng = np.random.default_rng(99)
    worst = 0.0
    for _ in range(10):
        p = float(rng.uniform(1, 4))
        alpha = float(rng.uniform(1, 3))
        beta = float(rng.choice([1.0, 1.5, 2.0, 3.0]))
        big_l = float(rng.uniform(0.5, 3.0))
        kernel = k1 if beta <= 1 else k2
        cap = rk.capacity_constant(kernel, beta, math.sqrt(2.0))
        want_a = (12 * math.sqrt(10 * p * alpha) * (1 + math.sqrt(5 * p))
                  * max(1.0, kernel.sup_norm) + 4 * cap)
        got_a = rk.constant_A(p, alpha, kernel, beta)
        worst = max(worst, abs(got_a - want_a) / want_a)
        cb = rk.c_beta(beta)
        nsq = max(kernel.l1_norm**2, kernel.l2_norm_sq, kernel.sup_norm**2)
        want_b = (527730 * p * p * math.sqrt(6) * nsq
                  * (9 + 4 * alpha) ** ((3 * beta + 3) / (2 * beta + 1))
                  * cb**1.5 * big_l ** ((4 * beta + 8) / (2 * beta + 1))
                  + 8 * cap * big_l**2)
        got_b = rk.constant_B(p, alpha, beta, big_l, kernel)
        worst = max(worst, abs(got_b - want_b) / want_b)
    ok = inj_ok and worst <= 1e-6
    report(9, ok, f"injected values A={a_inj:.3f} (~122.797), B={b_inj:.4e} "
                  f"(~2.1848e8); recomputation worst rel err {worst:.2e} "
                  f"(<=1e-6) on 10 randomized inputs")


def test_criterion_10_determinism_across_threads(tmp_path):
    cfg = {
        "model": {
            "marginal1": {"kind": "perturbed_gaussian", "eps": 0.5},
            "marginal2": {"kind": "perturbed_gaussian", "eps": 0.5},
            "theta": 30.0, "beta": 2.0, "L": 1.0,
        },
        "estimator": {"kind": "oracle", "params": {"order": 2}},
        "n_grid": [64, 128, 256],
        "reps": 8,
        "seed": 99,
    }
    cfg_path = tmp_path / "exp.json"
    cfg_path.write_text(json.dumps(cfg))
    payloads = []
    for threads in ("1", "8"):
        out_path = tmp_path / f"rep_{threads}.csv"
        buf_out, buf_err = io.StringIO(), io.StringIO()
        code = cli_run(["risk", "--config", str(cfg_path), "--out",
                        str(out_path), "--threads", threads],
                       out=buf_out, err=buf_err)
        assert code == 0, buf_err.getvalue()
        payloads.append(out_path.read_bytes())
    rerun_path = tmp_path / "rep_again.csv"
    code = cli_run(["risk", "--config", str(cfg_path), "--out",
                    str(rerun_path), "--threads", "1"],
                   out=io.StringIO(), err=io.StringIO())
    assert code == 0
    ok = payloads[0] == payloads[1] == rerun_path.read_bytes()
    report(10, ok, f"report CSV byte-identical at threads 1 and 8 and on "
                   f"rerun ({len(payloads[0])} bytes)")
