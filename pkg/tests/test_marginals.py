"""Marginal families: truncation, standardization, density evaluators.

Derived expected values are computed by independent oracles inside the
tests: tail quantiles by bisection on an erf-based Gaussian CDF, and
normalization by composite trapezoid quadrature.
"""

import math

import numpy as np
import pytest

from poince import Marginal, prepare_input, standardize, truncate
from poince.errors import DomainError, UnsupportedFamilyError


def gauss_cdf(x):
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def gauss_quantile_bisect(p, lo=-10.0, hi=10.0):
    """Oracle: bisection on the erf-based CDF, no scipy involved."""
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if gauss_cdf(mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class TestTruncate:
    def test_standard_gaussian_tail_quantiles(self):
        t = truncate(Marginal("gaussian", (0, 1)))
        z = gauss_quantile_bisect(1e-6)
        assert t.support[0] == pytest.approx(z, abs=1e-6)
        assert t.support[1] == pytest.approx(-z, abs=1e-6)

    def test_bounded_marginal_unchanged(self):
        u = Marginal("uniform", (7, 9))
        assert truncate(u) is u
        assert truncate(u).support == (7.0, 9.0)

    def test_existing_finite_bound_kept(self):
        m = Marginal("gaussian", (30, 8), bounds=(15, np.inf))
        t = truncate(m)
        z = gauss_quantile_bisect(1 - 1e-6)
        assert t.support[0] == 15.0
        assert t.support[1] == pytest.approx(30 + 8 * z, abs=1e-4)

    def test_one_sided_families_keep_zero(self):
        t = truncate(Marginal("exponential", (2.0,)))
        assert t.support[0] == 0.0
        assert math.isfinite(t.support[1])

    def test_laplace_rejected(self):
        with pytest.raises(UnsupportedFamilyError):
            truncate(Marginal("laplace", (0, 1)))


class TestStandardize:
    def test_uniform_maps_to_centered_unit_interval(self):
        std, m = standardize(Marginal("uniform", (7, 9)))
        assert std.support == (-0.5, 0.5)
        assert (m.shift, m.scale) == (8.0, 2.0)
        assert m.to_standard(9.0) == pytest.approx(0.5)

    def test_gumbel_location_scale(self):
        std, m = standardize(Marginal("gumbel", (1013, 558)))
        assert std.params == (0.0, 1.0)
        assert (m.shift, m.scale) == (1013.0, 558.0)

    def test_standard_gaussian_identity(self):
        g = Marginal("gaussian", (0, 1))
        std, m = standardize(g)
        assert m.is_identity
        assert std == g

    def test_explicit_bounds_are_mapped(self):
        std, m = standardize(Marginal("gumbel", (1013, 558),
                                      bounds=(500, 3000)))
        assert std.support[0] == pytest.approx((500 - 1013) / 558)
        assert std.support[1] == pytest.approx((3000 - 1013) / 558)

    def test_scale_family(self):
        std, m = standardize(Marginal("exponential", (4.0,)))
        assert m.scale == pytest.approx(0.25)
        assert std.params == (1.0,)

    @pytest.mark.parametrize("family,params", [
        ("uniform", (7, 9)),
        ("gaussian", (30, 8)),
        ("gumbel", (1013, 558)),
        ("triangular", (49, 51)),
        ("lognormal", (1.3, 0.4)),
    ])
    def test_map_round_trip_is_affine_exact(self, family, params):
        _, m = standardize(Marginal(family, params))
        x = np.linspace(-5, 5, 11) * (1 + abs(m.shift))
        np.testing.assert_allclose(m.to_model(m.to_standard(x)), x,
                                   rtol=0, atol=1e-12 * (1 + abs(m.shift)))


class TestEvaluators:
    def test_uniform_density_and_potential(self):
        u = Marginal("uniform", (-0.5, 0.5))
        assert u.density(0.0) == pytest.approx(1.0)
        assert u.potential(0.0) == pytest.approx(0.0)
        assert u.potential_prime(0.3) == 0.0

    def test_standard_normal_density(self):
        g = Marginal("gaussian", (0, 1))
        assert g.density(0.0) == pytest.approx(1.0 / math.sqrt(2 * math.pi))
        assert g.potential_prime(1.7) == pytest.approx(1.7)

    def test_triangular_mode_density(self):
        # unit-area symmetric triangle on [49, 51]: height 2/(b-a) = 1 at 50
        t = Marginal("triangular", (49, 51))
        assert t.density(50.0) == pytest.approx(1.0)
        assert t.density(49.5) == pytest.approx(0.5)

    def test_gumbel_potential_prime(self):
        g = Marginal("gumbel", (0, 1))
        z = 0.8
        # V(z) = z + exp(-z) up to a constant
        assert g.potential_prime(z) == pytest.approx(1 - math.exp(-z))

    def test_outside_support_raises(self):
        u = Marginal("uniform", (7, 9))
        with pytest.raises(DomainError):
            u.density(9.5)
        with pytest.raises(DomainError):
            u.potential(6.0)

    def test_density_is_renormalized_after_truncation(self):
        m = Marginal("gaussian", (0, 1), bounds=(-1, 1))
        # mass inside [-1, 1] is ~0.6827, so the density is inflated
        assert m.density(0.0) > 1.0 / math.sqrt(2 * math.pi)


ALL_CASES = [
    Marginal("uniform", (7, 9)),
    truncate(Marginal("gaussian", (30, 8))),
    truncate(Marginal("gaussian", (30, 8), bounds=(15, np.inf))),
    Marginal("gumbel", (1013, 558), bounds=(500, 3000)),
    truncate(Marginal("gumbel", (0, 1))),
    truncate(Marginal("gumbel-min", (0, 1))),
    Marginal("triangular", (49, 51)),
    Marginal("beta", (2, 5)),
    truncate(Marginal("gamma", (3, 2))),
    truncate(Marginal("exponential", (1.5,))),
    truncate(Marginal("weibull", (2, 1.3))),
    truncate(Marginal("lognormal", (0.5, 0.6))),
    truncate(Marginal("logistic", (2, 0.7))),
]


@pytest.mark.parametrize("marginal", ALL_CASES, ids=lambda m: m.family)
def test_truncated_density_integrates_to_one(marginal):
    from scipy.integrate import simpson
    a, b = marginal.support
    x = np.linspace(a, b, 20001)
    mass = simpson(marginal.density(x), x=x)
    assert mass == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("marginal", ALL_CASES, ids=lambda m: m.family)
@pytest.mark.parametrize("p", [1e-6, 0.5, 1 - 1e-6])
def test_cdf_quantile_round_trip(marginal, p):
    assert marginal.cdf(marginal.quantile(p)) == pytest.approx(p, abs=1e-10)


@pytest.mark.parametrize("marginal", ALL_CASES, ids=lambda m: m.family)
def test_density_positive_inside_support(marginal):
    a, b = marginal.support
    x = np.linspace(a, b, 501)[1:-1]
    assert np.all(marginal.density(x) > 0)


class TestPrepareInput:
    def test_gaussian_stays_unbounded(self):
        prep = prepare_input(Marginal("gaussian", (5, 2)))
        assert not prep.standard.is_bounded
        assert prep.standard.params == (0.0, 1.0)

    def test_bounded_gaussian_is_truncated(self):
        prep = prepare_input(Marginal("gaussian", (30, 8),
                                      bounds=(15, np.inf)), "Ks")
        assert prep.standard.support[0] == pytest.approx(-1.875)
        assert prep.standard.is_bounded
        assert prep.model.support[0] == pytest.approx(15.0)

    def test_model_and_standard_quantiles_agree(self):
        prep = prepare_input(Marginal("gumbel", (1013, 558),
                                      bounds=(500, 3000)))
        for p in (0.1, 0.5, 0.9):
            assert prep.map.to_model(prep.standard.quantile(p)) == \
                pytest.approx(prep.model.quantile(p), rel=1e-10)
