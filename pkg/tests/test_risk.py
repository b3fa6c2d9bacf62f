import math

import numpy as np
import pytest

import rotakde as rk
from rotakde.risk import EstimatorSpec, isotropic_default_bandwidth, resolve_estimator


def rot(deg):
    return rk.rotation_from_angle(math.radians(deg))


class TestOracleEstimate:
    def test_mu_equals_n_gives_unit_bandwidth(self, perturbed_model, kernel2):
        s = rk.sample(perturbed_model, 128, 3)
        got = rk.oracle_estimate(s, [0.0, 0.0], perturbed_model, 128, kernel2,
                                 2.0)
        want = rk.product_estimate(s, [0.0, 0.0], 1.0, perturbed_model.rotation,
                                   kernel2)
        assert got == want

    def test_definitional_equality(self, perturbed_model, kernel2):
        s = rk.sample(perturbed_model, 512, 5)
        mu = math.log(512)
        h = (mu / 512) ** 0.2
        assert rk.oracle_estimate(s, [0.1, 0.1], perturbed_model, mu, kernel2,
                                  2.0) == rk.product_estimate(
            s, [0.1, 0.1], h, perturbed_model.rotation, kernel2)

    def test_mu_range(self, perturbed_model, kernel2):
        s = rk.sample(perturbed_model, 64, 1)
        with pytest.raises(ValueError):
            rk.oracle_estimate(s, [0, 0], perturbed_model, 0.5, kernel2, 2.0)
        with pytest.raises(ValueError):
            rk.oracle_estimate(s, [0, 0], perturbed_model, 100, kernel2, 2.0)

    def test_mc_mean_matches_quadrature_expectation(self, gauss_model,
                                                    kernel2):
        n, mu = 4096, math.log(4096)
        h = (mu / n) ** 0.2
        want = rk.expected_product(gauss_model, gauss_model.rotation, h,
                                   [0.0, 0.0], kernel2)
        vals = [rk.oracle_estimate(rk.sample(gauss_model, n, 100 + i),
                                   [0.0, 0.0], gauss_model, mu, kernel2, 2.0)
                for i in range(500)]
        se = np.std(vals, ddof=1) / math.sqrt(len(vals))
        assert abs(np.mean(vals) - want) <= 3 * se


class TestIsotropicBaseline:
    def test_single_point(self, kernel2):
        pts = np.array([[0.5, -0.5]])
        h = 0.3
        got = rk.isotropic_baseline(pts, [0.5, -0.5], h, kernel2)
        assert got == pytest.approx((rk.eval_kernel(kernel2, 0.0) / h) ** 2,
                                    rel=1e-12)

    def test_average_of_products_not_product_of_averages(self, perturbed_model,
                                                         kernel2):
        # same formula only at n=1; differs in general
        s = rk.sample(perturbed_model, 200, 77)
        h = 0.4
        iso = rk.isotropic_baseline(s, [0.0, 0.0], h, kernel2)
        prod = rk.product_estimate(s, [0.0, 0.0], h, rot(0.0), kernel2)
        assert iso != prod

    def test_fixed_seed_regression_vs_rotated_product(self, perturbed_model,
                                                      kernel2):
        s = rk.sample(perturbed_model, 300, 123)
        h = isotropic_default_bandwidth(300, 2.0)
        iso = rk.isotropic_baseline(s, [0.0, 0.0], h, kernel2)
        prod = rk.product_estimate(s, [0.0, 0.0], h,
                                   perturbed_model.rotation, kernel2)
        assert abs(iso - prod) > 1e-6

    def test_default_bandwidth(self):
        assert isotropic_default_bandwidth(4096, 2.0) == pytest.approx(
            4096 ** (-1 / 6))

    def test_positive_h_required(self, kernel2):
        with pytest.raises(ValueError):
            rk.isotropic_baseline(np.zeros((2, 2)), [0, 0], 0.0, kernel2)


class TestPointwiseRisk:
    def test_exact_estimator_zero_risk(self, perturbed_model):
        spec = EstimatorSpec("exact")
        risk, se = rk.pointwise_risk(perturbed_model, spec, [0.0, 0.0], 64,
                                     2.0, 8, 99)
        assert risk == 0.0 and se == 0.0

    def test_deterministic(self, perturbed_model):
        spec = EstimatorSpec("oracle", {"order": 2, "mu": "log_n"})
        a = rk.pointwise_risk(perturbed_model, spec, [0.0, 0.0], 128, 2.0,
                              10, 42)
        b = rk.pointwise_risk(perturbed_model, spec, [0.0, 0.0], 128, 2.0,
                              10, 42)
        assert a == b

    def test_threads_do_not_change_values(self, perturbed_model):
        spec = EstimatorSpec("oracle", {"order": 2, "mu": "log_n"})
        a = rk.pointwise_risk(perturbed_model, spec, [0.0, 0.0], 128, 2.0,
                              12, 42, threads=1)
        b = rk.pointwise_risk(perturbed_model, spec, [0.0, 0.0], 128, 2.0,
                              12, 42, threads=2)
        assert a == b

    def test_stderr_scaling(self, perturbed_model):
        spec = EstimatorSpec("oracle", {"order": 2, "mu": "log_n"})
        ratios = []
        for seed in range(20):
            _, se1 = rk.pointwise_risk(perturbed_model, spec, [0.0, 0.0], 64,
                                       2.0, 60, 1000 + seed)
            _, se2 = rk.pointwise_risk(perturbed_model, spec, [0.0, 0.0], 64,
                                       2.0, 120, 1000 + seed)
            ratios.append(se2 / se1)
        mean_ratio = float(np.mean(ratios))
        assert abs(mean_ratio - 1 / math.sqrt(2)) < 0.2 / math.sqrt(2)

    def test_needs_two_reps(self, perturbed_model):
        with pytest.raises(ValueError):
            rk.pointwise_risk(perturbed_model, EstimatorSpec("exact"),
                              [0, 0], 64, 2.0, 1, 1)


class TestRateStudy:
    def test_degenerate_flagged(self, perturbed_model):
        spec = EstimatorSpec("exact")
        rep = rk.rate_study(perturbed_model, spec, [0.0, 0.0], [64, 128, 256],
                            2.0, 4, 5)
        assert rep.degenerate
        assert rep.slope is None and rep.slope_stderr is None

    def test_oracle_slope_sane(self, perturbed_model):
        spec = EstimatorSpec("oracle", {"order": 2, "mu": "log_n"})
        rep = rk.rate_study(perturbed_model, spec, [0.0, 0.0],
                            [256, 512, 1024, 2048], 2.0, 60, 7)
        assert not rep.degenerate
        assert -0.8 < rep.slope < -0.1
        assert rep.slope_stderr > 0.0
        assert len(rep.rows()) == 4

    def test_needs_three_points(self, perturbed_model):
        with pytest.raises(ValueError):
            rk.rate_study(perturbed_model, EstimatorSpec("exact"), [0, 0],
                          [64, 128], 2.0, 4, 5)


class TestResolveEstimator:
    def test_all_kinds_resolve_and_run(self, signal_model):
        s = rk.sample(signal_model, 512, 11)
        x = [0.0, 0.0]
        specs = [
            EstimatorSpec("exact"),
            EstimatorSpec("oracle", {"order": 1, "beta": 1.0}),
            EstimatorSpec("isotropic", {"order": 1, "beta": 1.0}),
            EstimatorSpec("adaptive", {"order": 1, "delta": 0.6,
                                       "a_mult": 0.01, "mb": 1.0}),
            EstimatorSpec("minimax", {"order": 1, "delta": 0.6, "beta": 1.0,
                                      "L": 1.0}),
        ]
        for spec in specs:
            val = resolve_estimator(spec, signal_model)(s, x)
            assert np.isfinite(val)

    def test_net_from_thetas(self, signal_model):
        spec = EstimatorSpec("adaptive", {"order": 1, "delta": 0.6,
                                          "thetas": [0.0, math.pi / 4],
                                          "a_mult": 0.01, "mb": 1.0})
        s = rk.sample(signal_model, 512, 11)
        assert np.isfinite(resolve_estimator(spec, signal_model)(s, [0, 0]))

    def test_unknown_kind(self, signal_model):
        with pytest.raises(Exception, match="kind"):
            resolve_estimator(EstimatorSpec("magic"), signal_model)

    def test_estimator_id_stable(self):
        a = EstimatorSpec("oracle", {"order": 2}).estimator_id
        b = EstimatorSpec("oracle", {"order": 2}).estimator_id
        assert a == b and a.startswith("oracle-")


class TestSelectionFrequency:
    def test_singleton_net_always_hits(self, signal_model, kernel1):
        net = rk.RotationNet.from_members(0.5, [signal_model.rotation])
        f = rk.selection_frequency(signal_model, net, [0.0, 0.0], 500, 6, 3,
                                   kernel_order=1, a_mult=0.01, mb=1.0)
        assert f == 1.0

    def test_missing_true_rotation_rejected(self, signal_model, kernel1):
        net = rk.RotationNet.from_members(0.5, [rot(10.0), rot(60.0)])
        with pytest.raises(ValueError, match="net member"):
            rk.selection_frequency(signal_model, net, [0.0, 0.0], 500, 4, 3)

    def test_rotation_invariant_model_rejected(self, gauss_model, net2):
        with pytest.raises(ValueError, match="invariant"):
            rk.selection_frequency(gauss_model, net2, [0.0, 0.0], 500, 4, 3)
