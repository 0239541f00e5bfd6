"""Dyke cost model (hand-evaluated oracles), synthetic targets, data files."""

import math

import numpy as np
import pytest

from poince import BasisSet, Marginal
from poince.expansion import ExpansionSetup
from poince.models import (DYKE_INPUT_NAMES, dyke_cost, dyke_gradient,
                           dyke_marginals, dyke_overflow, load_tabular,
                           save_tabular, synthetic_target)

REF_POINT = np.array([1013.0, 30.0, 50.0, 55.0, 8.0, 55.5, 5000.0, 300.0])


def overflow_oracle(q, ks, zv, zm, hd, cb, le, b):
    """Hand evaluation of the overflow formula, kept independent."""
    return (q / (b * ks * math.sqrt((zm - zv) / le))) ** 0.6 + zv - hd - cb


def cost_oracle(x):
    s = overflow_oracle(*x)
    flood = 1.0 if s > 0 else 0.0
    maint = (0.2 + 0.8 * (1 - math.exp(-1000.0 / s ** 4))) if s <= 0 else 0.0
    constr = (8.0 if x[4] <= 8 else x[4]) / 20.0
    return flood + maint + constr


class TestOverflow:
    def test_reference_point(self):
        s = dyke_overflow(REF_POINT)
        assert s == pytest.approx(overflow_oracle(*REF_POINT), rel=1e-14)
        assert s == pytest.approx(-11.358, abs=5e-4)

    def test_zero_flow(self):
        x = REF_POINT.copy()
        x[0] = 0.0
        assert dyke_overflow(x) == pytest.approx(50.0 - 8.0 - 55.5)

    def test_monotone_in_flow_and_height(self):
        up = REF_POINT.copy()
        up[0] += 10.0
        assert dyke_overflow(up) > dyke_overflow(REF_POINT)
        taller = REF_POINT.copy()
        taller[4] += 0.5
        assert dyke_overflow(taller) < dyke_overflow(REF_POINT)


class TestCost:
    def test_reference_point(self):
        y = dyke_cost(REF_POINT)
        assert y == pytest.approx(cost_oracle(REF_POINT), rel=1e-14)
        assert y == pytest.approx(0.6466, abs=5e-4)

    def test_flooded_branch_arithmetic(self):
        x = REF_POINT.copy()
        x[4] = 9.0
        x[5] = 20.0     # low bank level forces overflow
        assert dyke_overflow(x) > 0
        assert dyke_cost(x) == pytest.approx(1.0 + 9.0 / 20.0)

    def test_construction_term_continuous_at_height_eight(self):
        lo, hi = REF_POINT.copy(), REF_POINT.copy()
        lo[4], hi[4] = 8.0 - 1e-9, 8.0 + 1e-9
        assert abs(dyke_cost(lo) - dyke_cost(hi)) < 1e-6

    def test_continuous_across_overflow_seam(self):
        # move Cb so that S crosses 0; the cost must stay continuous
        x = REF_POINT.copy()
        s0 = dyke_overflow(x)
        x[5] += s0          # shifts S to ~0
        for eps in (-1e-7, 1e-7):
            xx = x.copy()
            xx[5] += eps
            assert dyke_cost(xx) == pytest.approx(1.0 + 0.4, abs=1e-6)

    def test_maintenance_term_bounds(self):
        rng = np.random.default_rng(0)
        pts = np.tile(REF_POINT, (200, 1))
        pts[:, 5] = rng.uniform(55, 70, 200)    # keep S <= 0
        s = dyke_overflow(pts)
        y = dyke_cost(pts)
        maint = y - 0.4
        keep = s <= 0
        assert np.all(maint[keep] >= 0.2 - 1e-12)
        assert np.all(maint[keep] <= 1.0 + 1e-12)


class TestGradient:
    def test_noninfluential_length_input(self):
        # compare derivative magnitudes scaled by the input ranges, the
        # scale on which sensitivity lives
        margs = dyke_marginals()
        g = dyke_gradient(REF_POINT[None, :], margs)
        q_effect = abs(g[0, 0]) * (3000 - 500)
        l_effect = abs(g[0, 6]) * (5010 - 4990)
        assert l_effect < 1e-2 * q_effect

    def test_flow_derivative_matches_symbolic_chain_rule(self):
        # on the S <= 0 branch: dY/dQ = 0.8 * exp(-1000/S^4) * 4000 S^-5 * dS/dQ
        x = REF_POINT
        s = overflow_oracle(*x)
        ds_dq = 0.6 * (x[0] / (x[7] * x[1] * math.sqrt((x[3] - x[2]) / x[6]))) \
            ** 0.6 / x[0]
        dy_ds = 0.8 * math.exp(-1000.0 / s ** 4) * (-4000.0 / s ** 5)
        oracle = dy_ds * ds_dq
        g = dyke_gradient(x[None, :], dyke_marginals())
        assert g[0, 0] == pytest.approx(oracle, rel=1e-4)

    def test_height_derivative_includes_construction_slope(self):
        x = REF_POINT.copy()
        x[4] = 8.5
        s = dyke_overflow(x)
        dy_ds = 0.8 * math.exp(-1000.0 / s ** 4) * (-4000.0 / s ** 5)
        oracle = dy_ds * (-1.0) + 1.0 / 20.0
        g = dyke_gradient(x[None, :], dyke_marginals())
        assert g[0, 4] == pytest.approx(oracle, rel=1e-4)


class TestDykeMarginals:
    def test_names_and_count(self):
        margs = dyke_marginals()
        assert len(margs) == len(DYKE_INPUT_NAMES) == 8

    def test_flow_bounds(self):
        q = dyke_marginals()[0]
        assert q.family == "gumbel"
        assert q.support == (500.0, 3000.0)

    def test_friction_lower_bound(self):
        ks = dyke_marginals()[1]
        assert ks.support[0] == 15.0
        assert not ks.is_bounded


@pytest.fixture(scope="module")
def bset():
    setup = ExpansionSetup.create(
        [Marginal("uniform", (-0.5, 0.5)) for _ in range(2)],
        p_range=[3])
    return BasisSet.build(setup.bases, 3)


class TestSyntheticTarget:
    def test_empty_coefficients_is_zero_model(self, bset):
        f = synthetic_target(bset, {})
        x = np.zeros((4, 2))
        np.testing.assert_array_equal(f(x), 0.0)
        np.testing.assert_array_equal(f.gradient(x), 0.0)

    def test_gradient_vanishes_for_absent_input(self, bset):
        f = synthetic_target(bset, {(1, 0): 1.0})
        x = np.random.default_rng(0).uniform(-0.5, 0.5, (10, 2))
        np.testing.assert_array_equal(f.gradient(x)[:, 1], 0.0)

    def test_gradient_matches_finite_differences(self, bset):
        f = synthetic_target(bset, {(1, 0): 1.0, (2, 1): -0.7, (1, 1): 0.3})
        rng = np.random.default_rng(1)
        x = rng.uniform(-0.45, 0.45, (20, 2))
        g = f.gradient(x)
        h = 1e-6
        for i in (0, 1):
            xp, xm = x.copy(), x.copy()
            xp[:, i] += h
            xm[:, i] -= h
            fd = (f(xp) - f(xm)) / (2 * h)
            np.testing.assert_allclose(g[:, i], fd, atol=1e-6)

    def test_sobol_indices_are_normalized_squares(self, bset):
        from poince import prepare_inputs, report_from_expansion
        from poince.expansion import Expansion
        coeffs = {(1, 0): 2.0, (0, 1): 1.0, (1, 1): 0.5}
        e = Expansion(bset, coeffs, "poince-lars",
                      prepare_inputs([Marginal("uniform", (-0.5, 0.5))] * 2))
        rep = report_from_expansion(e)
        d = 4.0 + 1.0 + 0.25
        assert rep.total_variance == pytest.approx(d)
        assert rep.s1[0] == pytest.approx(4.0 / d)
        assert rep.stot[0] == pytest.approx(4.25 / d)


class TestTabular:
    def test_round_trip_with_derivatives(self, tmp_path):
        rng = np.random.default_rng(2)
        names = ["a", "b"]
        X = rng.standard_normal((15, 2))
        y = rng.standard_normal(15)
        dY = rng.standard_normal((15, 2))
        path = tmp_path / "data.csv"
        save_tabular(path, names, X, y, dY)
        data = load_tabular(path, names)
        np.testing.assert_allclose(data.X, X)
        np.testing.assert_allclose(data.y, y)
        np.testing.assert_allclose(data.dY, dY)
        assert data.has_derivatives

    def test_missing_derivatives_detected(self, tmp_path):
        path = tmp_path / "data.csv"
        save_tabular(path, ["a"], np.zeros((3, 1)), np.zeros(3))
        data = load_tabular(path, ["a"])
        assert not data.has_derivatives

    def test_missing_column_rejected(self, tmp_path):
        path = tmp_path / "data.csv"
        save_tabular(path, ["a"], np.zeros((3, 1)), np.zeros(3))
        from poince.errors import ConfigError
        with pytest.raises(ConfigError):
            load_tabular(path, ["a", "zz"])
