import math

import numpy as np
import pytest

from fsa_aoi.utils.errors import DivergentSeries, IntegrandError, NoRootInBracket
from fsa_aoi.utils.models import QuadratureSpec, SeriesSpec
from fsa_aoi.utils.numerics import (
    find_root_bracketed,
    gamma_fn,
    gamma_product,
    gen_binomial,
    quad_2d_rect,
    quad_finite,
    quad_semi_infinite,
    safe_exp,
    sum_series,
    unit_interval_rule,
)


class TestSpecialFunctions:

    def test_gamma_integers_and_half(self):
        assert gamma_fn(5) == pytest.approx(24.0)
        assert gamma_fn(0.5) == pytest.approx(math.sqrt(math.pi))

    @pytest.mark.parametrize("pole", [0, -1, -3])
    def test_gamma_poles_raise(self, pole):
        with pytest.raises(ValueError):
            gamma_fn(pole)

    @pytest.mark.parametrize("a, k, expected", [
        (0.5, 0, 1.0),
        (0.5, 2, -0.125),
        (-1.0, 3, -1.0),
        (4.0, 2, 6.0),
    ])
    def test_generalized_binomial(self, a, k, expected):
        assert gen_binomial(a, k) == pytest.approx(expected)

    def test_binomial_rejects_negative_k(self):
        with pytest.raises(ValueError):
            gen_binomial(0.5, -1)

    @pytest.mark.parametrize("delta", [0.2, 0.5, 4 / 7, 0.9])
    def test_gamma_product_reflection(self, delta):
        assert gamma_product(delta) == pytest.approx(math.pi * delta / math.sin(math.pi * delta), rel=1e-12)

    def test_safe_exp_overflow(self):
        assert safe_exp(800.0) == math.inf
        assert safe_exp(1.0) == pytest.approx(math.e)


class TestQuadrature:

    def test_exponential_transform(self):
        result = quad_semi_infinite(lambda z: math.exp(-z))
        assert result.converged
        assert result.value == pytest.approx(1.0, rel=1e-8)

    def test_rational_transform(self):
        result = quad_semi_infinite(lambda z: 1.0 / (1.0 + z) ** 2, transform="rational")
        assert result.value == pytest.approx(1.0, rel=1e-8)

    def test_lower_limit(self):
        result = quad_semi_infinite(lambda z: math.exp(-z), lower=2.0)
        assert result.value == pytest.approx(math.exp(-2.0), rel=1e-8)

    def test_gamma_integral(self):
        result = quad_semi_infinite(lambda z: z * math.exp(-z))
        assert result.value == pytest.approx(1.0, rel=1e-8)

    def test_divergent_integral_is_flagged(self):
        result = quad_semi_infinite(lambda z: 1.0)
        assert not result.converged

    def test_nan_integrand_raises(self):
        with pytest.raises(IntegrandError):
            quad_semi_infinite(lambda z: math.nan)

    def test_unknown_transform(self):
        with pytest.raises(ValueError):
            quad_semi_infinite(lambda z: 1.0, transform="tan")

    def test_finite_interval(self):
        assert quad_finite(math.sin, 0.0, math.pi).value == pytest.approx(2.0, rel=1e-10)

    def test_graded_rule_weights(self):
        nodes, weights = unit_interval_rule(QuadratureSpec())
        assert weights.sum() == pytest.approx(1.0, rel=1e-12)
        assert np.all((nodes > 0) & (nodes < 1))
        assert np.dot(weights, nodes ** 3) == pytest.approx(0.25, rel=1e-12)

    def test_graded_rule_endpoint_singularity(self):
        nodes, weights = unit_interval_rule(QuadratureSpec())
        assert np.dot(weights, nodes ** -0.5) == pytest.approx(2.0, rel=1e-5)

    def test_quad_2d_rect(self):
        result = quad_2d_rect(lambda q, s: math.exp(-q) * s)
        assert result.value == pytest.approx(0.5, rel=1e-8)


class TestSeries:

    def test_geometric(self):
        result = sum_series(lambda k: 0.5 ** k)
        assert result.value == pytest.approx(2.0, rel=1e-12)
        assert result.terms > 10

    def test_exponential(self):
        assert sum_series(lambda k: 1.0 / math.factorial(k)).value == pytest.approx(math.e, rel=1e-12)

    def test_growing_terms_raise(self):
        with pytest.raises(DivergentSeries) as info:
            sum_series(lambda k: 2.0 ** k)
        assert info.value.terms > 0
        assert info.value.partial_sum > 1e12

    def test_max_terms_exceeded(self):
        with pytest.raises(DivergentSeries) as info:
            sum_series(lambda k: 1e-3, SeriesSpec(max_terms=10))
        assert info.value.terms == 10
        assert info.value.partial_sum == pytest.approx(1e-2)

    @pytest.mark.parametrize("ratio", [0.99, -0.99])
    def test_budget_exhausted_on_shrinking_terms(self, ratio):
        result = sum_series(lambda k: ratio ** k, SeriesSpec(max_terms=50))
        assert result.converged is False
        assert result.terms == 50
        assert result.value == pytest.approx(1.0 / (1.0 - ratio), rel=1e-10)


class TestRootFinding:

    def test_sqrt_two(self):
        assert find_root_bracketed(lambda x: x * x - 2.0, 0.0, 2.0) == pytest.approx(math.sqrt(2.0), abs=1e-9)

    def test_no_sign_change(self):
        with pytest.raises(NoRootInBracket) as info:
            find_root_bracketed(lambda x: x * x + 1.0, -1.0, 1.0)
        assert info.value.lo == -1.0
        assert info.value.g_hi == pytest.approx(2.0)
