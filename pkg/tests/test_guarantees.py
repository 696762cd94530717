"""Tests for the closed-form guarantees, their inversions and the planners."""

import math

import numpy as np
import pytest

from src.binning_calibration.errors import InvalidConfigurationError
from src.binning_calibration.guarantees import (
    GuaranteeVariant,
    bound_curve,
    clopper_pearson,
    ece_expectation_bound,
    eps_randomized,
    eps_umd,
    eps_umd_original,
    epsilon_for,
    guarantee,
    hoeffding_halfwidth,
    required_n,
    suggest_bins,
    ums_required_n,
)

BIN_COUNT_CAPTION = [(1000, 5, 0.12), (5000, 10, 0.08), (20000, 22, 0.06)]


class TestEpsUmd:
    @pytest.mark.parametrize("n,B,target", BIN_COUNT_CAPTION)
    def test_caption_points(self, n, B, target):
        assert eps_umd(n, B, 0.1) <= target

    def test_known_value(self):
        assert eps_umd(1000, 5, 0.1) == pytest.approx(0.1076, abs=1e-4)

    def test_requires_two_points_per_bin(self):
        with pytest.raises(InvalidConfigurationError, match="n ≥ 2B"):
            eps_umd(9, 5, 0.1)

    @pytest.mark.parametrize("alpha", [0.0, 1.0, -0.5])
    def test_alpha_range(self, alpha):
        with pytest.raises(InvalidConfigurationError):
            eps_umd(1000, 5, alpha)

    def test_monotone_in_n_B_alpha(self):
        for B in (1, 5, 20):
            values = [eps_umd(B * m, B, 0.1) for m in range(2, 400)]
            assert all(a > b for a, b in zip(values, values[1:]))
        # fixed m = floor(n/B): only the log term grows with B
        values = [eps_umd(100 * B, B, 0.1) for B in range(1, 40)]
        assert all(a < b for a, b in zip(values, values[1:]))
        alphas = np.linspace(0.01, 0.9, 50)
        values = [eps_umd(2000, 10, a) for a in alphas]
        assert all(a > b for a, b in zip(values, values[1:]))


class TestEpsUmdOriginal:
    def test_published_point(self):
        assert eps_umd_original(2900, 10, 0.1) < 0.1

    def test_extra_term_is_one_over_bin_size(self):
        for n, B in [(100, 3), (2900, 10), (12345, 17)]:
            gap = eps_umd_original(n, B, 0.1) - eps_umd(n, B, 0.1)
            assert gap == pytest.approx(1.0 / (n // B), abs=1e-15)

    def test_extra_term_small_when_width_small(self):
        for n in range(500, 20001, 250):
            for B in range(5, 31):
                for alpha in (0.01, 0.05, 0.1, 0.2, 0.5):
                    if n >= 2 * B and eps_umd(n, B, alpha) <= 0.1:
                        assert 1.0 / (n // B) <= 0.007


class TestEpsRandomized:
    def test_conditional_without_delta_matches_umd(self):
        assert eps_randomized(3000, 10, 0.1, 0.0, "conditional") == eps_umd(3000, 10, 0.1)

    def test_marginal_below_conditional(self):
        for n, B, alpha in [(100, 1, 0.5), (1500, 10, 0.1), (9000, 30, 0.01)]:
            assert eps_randomized(n, B, alpha, 0.0, "marginal") <= eps_randomized(n, B, alpha, 0.0, "conditional")

    def test_published_marginal_point_within_tolerance(self):
        assert abs(eps_randomized(1500, 10, 0.1, 1e-10, "marginal") - 0.1) <= 0.005

    def test_delta_is_additive(self):
        base = eps_randomized(1500, 10, 0.1, 0.0)
        assert eps_randomized(1500, 10, 0.1, 0.01) == pytest.approx(base + 0.01)

    def test_unknown_mode(self):
        with pytest.raises(InvalidConfigurationError):
            eps_randomized(1500, 10, 0.1, 0.0, "joint")

    @pytest.mark.parametrize("delta", [0.0, 1e-10, 0.01])
    def test_conditional_within_original_width_plus_delta(self, delta):
        for n, B, alpha in [(20, 10, 0.5), (1500, 10, 0.1), (2900, 10, 0.1), (9000, 30, 0.01)]:
            assert eps_randomized(n, B, alpha, delta, "conditional") <= eps_umd_original(n, B, alpha) + delta


@pytest.mark.parametrize(
    "width",
    [
        eps_umd_original,
        lambda n, B, alpha: eps_randomized(n, B, alpha, 0.01, "conditional"),
        lambda n, B, alpha: eps_randomized(n, B, alpha, 0.01, "marginal"),
        lambda n, B, alpha: ece_expectation_bound(n, B, 0.01),
    ],
    ids=["original", "randomized-conditional", "randomized-marginal", "ece-expectation"],
)
def test_widths_monotone_in_n_B_alpha(width):
    for B in (1, 5, 20):
        values = [width(B * m, B, 0.1) for m in range(2, 400)]
        assert all(a > b for a, b in zip(values, values[1:]))
    values = [width(2000, B, 0.1) for B in range(1, 41)]
    assert all(a <= b for a, b in zip(values, values[1:]))
    values = [width(2000, 10, a) for a in np.linspace(0.01, 0.9, 50)]
    assert all(a >= b for a, b in zip(values, values[1:]))


class TestEceExpectationBound:
    def test_values(self):
        assert ece_expectation_bound(2000, 10, 0.0) == pytest.approx(0.05)
        assert ece_expectation_bound(2, 1, 0.0) == pytest.approx(0.5)

    def test_delta_additivity(self):
        assert ece_expectation_bound(2000, 10, 0.02) - ece_expectation_bound(2000, 10, 0.0) == pytest.approx(0.02)


class TestHoeffdingHalfwidth:
    def test_single_bin_example(self):
        value = hoeffding_halfwidth(150, 0.1)
        assert value == pytest.approx(0.0999, abs=1e-3)
        assert value < 0.1

    def test_sample_split_stage(self):
        assert hoeffding_halfwidth(300, 0.05 / 10) <= 0.1

    def test_halves_when_m_quadruples(self):
        assert hoeffding_halfwidth(400, 0.1) == pytest.approx(hoeffding_halfwidth(100, 0.1) / 2)

    @pytest.mark.parametrize("m,t", [(0, 0.1), (10, 1.0), (10, 2.0), (10, 0.0)])
    def test_rejects_invalid(self, m, t):
        with pytest.raises(InvalidConfigurationError):
            hoeffding_halfwidth(m, t)


class TestRequiredN:
    def test_original_variant_at_published_point(self):
        assert required_n(0.1, 0.1, 10, GuaranteeVariant.UMD_ORIGINAL_CONDITIONAL) <= 2900

    def test_single_bin_closed_form(self):
        expected = math.ceil(math.log(2 / 0.1) / (2 * 0.1**2)) + 1
        assert required_n(0.1, 0.1, 1, "umd-conditional") == expected

    def test_minimal_and_sufficient(self):
        generator = np.random.default_rng(8)
        variants = list(GuaranteeVariant)
        for _ in range(1000):
            epsilon = float(generator.uniform(0.05, 0.3))
            alpha = float(generator.uniform(0.01, 0.5))
            B = int(generator.integers(1, 31))
            variant = variants[int(generator.integers(len(variants)))]
            n = required_n(epsilon, alpha, B, variant)
            assert n >= 2 * B
            assert epsilon_for(variant, n, B, alpha) <= epsilon
            if n > 2 * B:
                assert epsilon_for(variant, n - 1, B, alpha) > epsilon

    def test_epsilon_below_delta_is_infeasible(self):
        with pytest.raises(InvalidConfigurationError):
            required_n(0.01, 0.1, 10, "randomized-marginal", delta=0.02)


class TestBoundCurve:
    @pytest.mark.parametrize("n,B,target", BIN_COUNT_CAPTION)
    def test_caption_points_on_curves(self, n, B, target):
        curve = dict(bound_curve(n, 0.1, range(1, 60)))
        assert curve[B] <= target

    def test_single_bin_is_hoeffding(self):
        (_, epsilon), *_ = bound_curve(1000, 0.1, [1])
        assert epsilon == pytest.approx(hoeffding_halfwidth(999, 0.1))

    def test_skips_infeasible_bins(self):
        assert len(bound_curve(10, 0.1, range(1, 10))) == 5

    def test_suggested_bins(self):
        assert suggest_bins(1000, 0.1, 0.12) == 5

    def test_no_suggestion(self):
        assert suggest_bins(10, 0.1, 0.01) is None


class TestUmsRequiredN:
    def test_sample_size_chain(self):
        result = ums_required_n(0.1, 0.1, 10, c=100)
        assert result.N_min == 300
        # 1000 * ln(4000) rounds up to 8295, above the rounded 8000 usually quoted,
        # so the first-split and total windows are widened on purpose
        assert result.n_split1 == math.ceil(1000 * math.log(4000))
        assert 9400 <= result.n_split2 <= 9600
        assert result.n_total == result.n_split1 + result.n_split2
        assert abs(result.n_total - 17500) / 17500 < 0.05

    def test_nonincreasing_in_epsilon(self):
        totals = [ums_required_n(e, 0.1, 10).n_total for e in np.linspace(0.05, 0.3, 26)]
        assert all(a >= b for a, b in zip(totals, totals[1:]))

    def test_rejects_bad_inputs(self):
        with pytest.raises(InvalidConfigurationError):
            ums_required_n(0.0, 0.1, 10)


class TestGuaranteeResult:
    def test_lines(self):
        result = guarantee("umd-original-conditional", 2900, 10, 0.1)
        lines = dict(line.split("=") for line in result.as_lines())
        assert lines["variant"] == "umd-original-conditional"
        assert float(lines["epsilon"]) < 0.1
        assert lines["n"] == "2900"

    def test_expectation_bound_has_no_alpha(self):
        assert guarantee("ece-expectation", 2000, 10).alpha is None


class TestClopperPearson:
    def test_zero_failures(self):
        lower, upper = clopper_pearson(0, 100)
        assert lower == 0.0
        assert upper == pytest.approx(1.0 - 0.005 ** (1 / 100))

    def test_all_failures(self):
        assert clopper_pearson(100, 100)[1] == 1.0

    def test_contains_rate(self):
        lower, upper = clopper_pearson(12, 500)
        assert lower < 12 / 500 < upper
