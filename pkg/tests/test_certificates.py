import math

import numpy as np
import pytest

from optidesign import certificates, model
from optidesign.errors import DegenerateFactor, InvalidAlpha, RankDeficientTarget

from instances import small_instance


class TestAlphaBound:
    def test_empty_selection_is_one(self, p1_pool):
        assert certificates.alpha_bound_a(p1_pool, 0) == pytest.approx(1.0)

    def test_scalar_one_selection(self, p1_pool):
        assert certificates.alpha_bound_a(p1_pool, 1) == pytest.approx(1.0 / 3.0)

    def test_low_snr_corollary_shape(self):
        # Isotropic prior R_theta = s2*I with H = I: the bound collapses to
        # 1 / (1 + a * s2 * l_max), matching the diagonal corollary form.
        s2 = 0.25
        a_mat = np.array([[1.0, 0.0], [0.0, 1.0]])
        pool = model.Pool(
            experiments=[model.make_experiment(0, a_mat, np.eye(2))],
            prior_mean=np.zeros(2),
            prior_cov=s2 * np.eye(2),
            target=np.eye(2),
        )
        l_max = 1.0
        for a in range(4):
            want = (1.0 / s2) / (1.0 / s2 + a * l_max)
            assert certificates.alpha_bound_a(pool, a) == pytest.approx(want)

    def test_nonincreasing_in_a(self):
        for seed in range(10):
            pool, _ = small_instance(seed)
            vals = [certificates.alpha_bound_a(pool, a) for a in range(6)]
            for earlier, later in zip(vals, vals[1:]):
                assert later <= earlier + 1e-12
            assert all(0.0 < v <= 1.0 for v in vals)

    def test_rank_deficient_target_raises(self):
        pool = model.Pool(
            experiments=[model.make_experiment(0, np.eye(2), np.eye(2))],
            prior_mean=np.zeros(2),
            prior_cov=np.eye(2),
            target=np.array([[1.0, 0.0], [1.0, 0.0]]),
        )
        with pytest.raises(RankDeficientTarget):
            certificates.alpha_bound_a(pool, 1)


class TestTightenedBound:
    def test_single_selection_coincides(self, p1_pool):
        assert certificates.alpha_bound_tightened(p1_pool, 1) == pytest.approx(
            certificates.alpha_bound_a(p1_pool, 1)
        )

    def test_with_replacement_equals_base(self, p1_pool):
        # Repetition allowed: the top increment is counted twice, exactly as
        # in a * l_max.
        assert certificates.alpha_bound_tightened(
            p1_pool, 2, with_replacement=True
        ) == pytest.approx(certificates.alpha_bound_a(p1_pool, 2))

    def test_without_replacement_is_sharper(self, p1_pool):
        tight = certificates.alpha_bound_tightened(p1_pool, 2, with_replacement=False)
        assert tight == pytest.approx(0.25)
        assert certificates.alpha_bound_a(p1_pool, 2) == pytest.approx(0.2)
        assert tight >= certificates.alpha_bound_a(p1_pool, 2) - 1e-12

    def test_never_below_base(self):
        for seed in range(10):
            pool, _ = small_instance(seed)
            for a in range(4):
                for repl in (True, False):
                    t = certificates.alpha_bound_tightened(pool, a, with_replacement=repl)
                    assert t >= certificates.alpha_bound_a(pool, a) - 1e-12


class TestAlphaGuarantee:
    def test_supermodular_limit(self):
        k = 4
        cert = certificates.alpha_guarantee(lambda a, b: 1.0, k, k)
        assert cert.factor_product == pytest.approx(1.0 - (1.0 - 1.0 / k) ** k)
        assert cert.factor_exp == pytest.approx(1.0 - math.exp(-1.0))
        assert cert.equivalent_alpha == pytest.approx(1.0)

    def test_scalar_bound_chain(self):
        cert = certificates.alpha_guarantee(lambda a, b: 1.0 / (1.0 + 2.0 * a), 2, 2)
        assert cert.factor_product == pytest.approx(7.0 / 12.0)
        assert cert.alpha_bar == pytest.approx(1.0 / 3.0)
        assert cert.equivalent_alpha == pytest.approx(2.0 * (1.0 - math.sqrt(5.0 / 12.0)))

    def test_exponent_recovery_at_triple_horizon(self):
        # alpha_bar = 1/3 with ell = 3k recovers the classical constant.
        k = 5
        cert = certificates.alpha_guarantee(lambda a, b: 1.0 / 3.0, k, 3 * k)
        assert cert.factor_exp == pytest.approx(1.0 - math.exp(-1.0))

    def test_product_dominates_exponential(self):
        for seed in range(8):
            rng = np.random.default_rng(seed)
            vals = rng.uniform(0.1, 1.0, size=64)
            fn = lambda a, b: float(vals[(7 * a + b) % 64])
            cert = certificates.alpha_guarantee(fn, 3, 4)
            assert cert.factor_product >= cert.factor_exp - 1e-12
            assert 0.0 <= cert.factor_exp <= 1.0
            assert 0.0 <= cert.factor_product <= 1.0

    def test_values_above_one_are_projected(self):
        cert = certificates.alpha_guarantee(lambda a, b: 5.0, 2, 2)
        assert cert.factor_product == pytest.approx(1.0 - (1.0 - 1.0 / 2.0) ** 2)

    def test_nonpositive_alpha_rejected(self):
        with pytest.raises(InvalidAlpha):
            certificates.alpha_guarantee(lambda a, b: 0.0, 2, 2)

    def test_degenerate_chain_reports_factor_one(self):
        # k = 1 queries alpha(a, a) = 1, so the chain term vanishes and the
        # guarantee collapses to factor 1 with the limiting summary alpha = k.
        cert = certificates.alpha_guarantee(lambda a, b: 1.0, 1, 1)
        assert cert.factor_product == pytest.approx(1.0)
        assert cert.equivalent_alpha == pytest.approx(1.0)


class TestEpsilonBound:
    def test_equal_sets_zero(self, p1_pool):
        assert certificates.epsilon_bound_e(p1_pool, 1, 1) == 0.0

    def test_scalar_arithmetic(self, p1_pool):
        assert certificates.epsilon_bound_e(p1_pool, 1, 3) == pytest.approx(4.0)

    def test_prior_scale_enters_squared(self, p1_pool):
        base = certificates.epsilon_bound_e(p1_pool, 0, 2)
        scaled_pool = model.Pool(
            experiments=p1_pool.experiments,
            prior_mean=p1_pool.prior_mean,
            prior_cov=4.0 * p1_pool.prior_cov,
            target=p1_pool.target,
        )
        assert certificates.epsilon_bound_e(scaled_pool, 0, 2) == pytest.approx(
            16.0 * base
        )

    def test_nondecreasing_in_gap(self):
        for seed in range(10):
            pool, _ = small_instance(seed)
            vals = [certificates.epsilon_bound_e(pool, 0, b) for b in range(6)]
            for earlier, later in zip(vals, vals[1:]):
                assert later >= earlier - 1e-12
            assert all(v >= 0.0 for v in vals)


class TestEpsilonGuarantee:
    def test_supermodular_limit(self):
        k = 4
        cert = certificates.epsilon_guarantee(lambda a, b: 0.0, k, k)
        assert cert.additive_product == 0.0
        assert cert.multiplicative_factor == pytest.approx(1.0 - (1.0 - 1.0 / k) ** k)

    def test_single_step(self):
        cert = certificates.epsilon_guarantee(lambda a, b: 3.5, 1, 1)
        assert cert.additive_product == pytest.approx(3.5)

    def test_exponential_bound_with_f_star(self, p1_pool):
        cert = certificates.epsilon_certificate_from_bounds(p1_pool, 2, 2, f_star=-0.8)
        assert cert.epsilon_bar == pytest.approx(6.0)
        assert cert.exponential_bound == pytest.approx(
            (1.0 - math.exp(-1.0)) * (-0.8 + 2.0 * 6.0)
        )
        assert -0.8 <= cert.exponential_bound

    def test_constant_slope_summary(self):
        # For the linear-in-(b-a) bound table the equivalent epsilon has the
        # closed form c * (k - 1) / 2 ... plus the weighted average over h of
        # the geometric weights; verified against direct evaluation.
        k, ell, c = 3, 3, 2.0
        cert = certificates.epsilon_guarantee(lambda a, b: c * (b - a), k, ell)
        weights = [(1.0 - 1.0 / k) ** (ell - 1 - h) for h in range(ell)]
        inner = sum(c * s for s in range(k)) / k
        want = inner * sum(weights) / sum(weights)
        assert cert.equivalent_epsilon == pytest.approx(want)
        assert cert.equivalent_epsilon == pytest.approx(c * (k - 1) / 2.0)

    def test_certificate_from_bounds_scalar(self, p1_pool):
        cert = certificates.epsilon_certificate_from_bounds(p1_pool, 2, 2)
        assert cert.additive_product == pytest.approx(1.5)
        assert cert.equivalent_epsilon == pytest.approx(1.0)
        assert cert.epsilon_bar == pytest.approx((2 + 2 - 1) * 2.0)


class TestEquivalentSummaries:
    def test_alpha_fixed_point(self):
        k = 3
        factor = 1.0 - (1.0 - 1.0 / k) ** k
        assert certificates.equivalent_alpha(factor, k, k) == pytest.approx(1.0)

    def test_alpha_scalar_chain(self):
        assert certificates.equivalent_alpha(7.0 / 12.0, 2, 2) == pytest.approx(
            2.0 * (1.0 - math.sqrt(5.0 / 12.0))
        )

    def test_alpha_degenerate(self):
        with pytest.raises(DegenerateFactor):
            certificates.equivalent_alpha(1.0, 2, 2)

    def test_epsilon_fixed_point(self):
        k, ell, c = 4, 4, 0.7
        weights = sum((1.0 - 1.0 / k) ** (ell - 1 - h) for h in range(ell))
        assert certificates.equivalent_epsilon(c * weights, k, ell) == pytest.approx(c)


class TestDGuarantee:
    def test_single(self):
        assert certificates.d_guarantee(1).finite == pytest.approx(1.0)

    def test_pair(self):
        assert certificates.d_guarantee(2).finite == pytest.approx(0.75)

    def test_limit(self):
        g = certificates.d_guarantee(10_000)
        assert g.finite == pytest.approx(1.0 - math.exp(-1.0), abs=1e-4)
        assert g.exponential == pytest.approx(1.0 - math.exp(-1.0))


class TestCertificateFromBounds:
    def test_scalar_chain(self, p1_pool):
        cert = certificates.alpha_certificate_from_bounds(p1_pool, 2, 2)
        assert cert.per_a == pytest.approx((1.0, 1.0 / 3.0))
        assert cert.factor_product == pytest.approx(7.0 / 12.0)
        assert cert.alpha_bar == pytest.approx(1.0 / 3.0)

    def test_serializes(self, p1_pool):
        import json

        a = certificates.alpha_certificate_from_bounds(p1_pool, 2, 2)
        e = certificates.epsilon_certificate_from_bounds(p1_pool, 2, 2, f_star=-0.8)
        json.dumps(a.to_dict())
        json.dumps(e.to_dict())
