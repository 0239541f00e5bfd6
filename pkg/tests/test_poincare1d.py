"""Spectral-basis correctness: closed forms, FEM solve, orthonormality.

Oracles used here are independent of the construction paths they check:
the weak-form identity and Gram matrices are evaluated by composite
Simpson quadrature at 10x the FEM resolution, and the truncated-Gaussian
spectrum is cross-checked by high-precision shooting integration of the
eigenvalue ODE.
"""

import math

import numpy as np
import pytest
from scipy.integrate import simpson, solve_ivp
from scipy.optimize import brentq

from poince import Marginal, build_basis, build_fem, standardize, truncate
from poince.errors import AssemblyError, DomainError
from poince.poincare1d import build_analytic_hermite, build_analytic_uniform

GRID_N = 1000


def gram_matrix(basis, upto, use_deriv=False):
    """Quadrature Gram of the (derivative-normalized) eigenfunctions."""
    a, b = basis.support
    x = np.linspace(a, b, 10 * GRID_N + 1)
    rho = basis.marginal.density(x)
    if use_deriv:
        funcs = [basis.eval_deriv(al, x) / math.sqrt(basis.eigenvalues[al])
                 for al in range(1, upto + 1)]
    else:
        funcs = [basis.eval(al, x) for al in range(upto + 1)]
    n = len(funcs)
    g = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            g[i, j] = g[j, i] = simpson(funcs[i] * funcs[j] * rho, x=x)
    return g


def count_sign_changes(values, tol_rel=1e-8):
    v = np.asarray(values)
    v = v[np.abs(v) > tol_rel * np.abs(v).max()]
    s = np.sign(v)
    return int(np.sum(s[1:] != s[:-1]))


class TestCosineBasis:
    def test_first_eigenvalue_is_pi_squared(self):
        b = build_analytic_uniform(Marginal("uniform", (-0.5, 0.5)), 4)
        assert b.eigenvalues[1] == pytest.approx(math.pi ** 2, rel=1e-14)
        assert b.poincare_constant == pytest.approx(1 / math.pi ** 2)

    def test_eigenvalue_scaling_with_interval_length(self):
        b = build_analytic_uniform(Marginal("uniform", (3, 7)), 6)
        for alpha in range(1, 7):
            assert b.eigenvalues[alpha] / alpha ** 2 == \
                pytest.approx(math.pi ** 2 / 16, rel=1e-14)

    def test_two_pi_interval_gives_half_frequencies(self):
        b = build_analytic_uniform(Marginal("uniform", (0, 2 * math.pi)), 3)
        x = np.linspace(0, 2 * math.pi, 17)
        for alpha in (1, 2, 3):
            np.testing.assert_allclose(
                b.eval(alpha, x), math.sqrt(2) * np.cos(alpha * x / 2),
                atol=1e-13)

    def test_weak_form_identity_by_quadrature(self):
        # <f', phi_1'> = lambda_1 <f, phi_1> for f = phi_1, phi_2
        b = build_analytic_uniform(Marginal("uniform", (-0.5, 0.5)), 3)
        x = np.linspace(-0.5, 0.5, 20001)
        rho = np.ones_like(x)
        for f_order in (1, 2):
            lhs = simpson(b.eval_deriv(f_order, x) * b.eval_deriv(1, x) * rho,
                          x=x)
            rhs = b.eigenvalues[1] * simpson(
                b.eval(f_order, x) * b.eval(1, x) * rho, x=x)
            assert lhs == pytest.approx(rhs, abs=1e-9 * b.eigenvalues[1])

    def test_midpoint_zero_of_first_eigenfunction(self):
        b = build_analytic_uniform(Marginal("uniform", (-0.5, 0.5)), 1)
        assert b.eval(1, 0.0) == pytest.approx(0.0, abs=1e-15)


@pytest.fixture(scope="module")
def basis():
    return build_analytic_hermite(Marginal("gaussian", (0, 1)), 5)


class TestHermiteBasis:
    def test_constant_mode(self, basis):
        assert basis.eigenvalues[0] == 0.0
        x = np.linspace(-3, 3, 7)
        np.testing.assert_allclose(basis.eval(0, x), 1.0)

    def test_low_order_polynomials(self, basis):
        x = np.linspace(-4, 4, 41)
        np.testing.assert_allclose(basis.eval(1, x), x, atol=1e-13)
        np.testing.assert_allclose(basis.eval(2, x),
                                   (x ** 2 - 1) / math.sqrt(2), atol=1e-12)
        np.testing.assert_allclose(basis.eval(3, x),
                                   (x ** 3 - 3 * x) / math.sqrt(6),
                                   atol=1e-12)
        np.testing.assert_allclose(basis.eval(4, x),
                                   (x ** 4 - 6 * x ** 2 + 3) / math.sqrt(24),
                                   atol=1e-11)

    def test_integer_eigenvalues(self, basis):
        np.testing.assert_allclose(basis.eigenvalues, np.arange(6))

    def test_first_derivative_is_one(self, basis):
        x = np.linspace(-2, 2, 9)
        np.testing.assert_allclose(basis.eval_deriv(1, x), 1.0)

    def test_gauss_hermite_orthonormality(self, basis):
        # exact quadrature for polynomials: probabilists' Gauss-Hermite
        nodes, weights = np.polynomial.hermite_e.hermegauss(40)
        weights = weights / math.sqrt(2 * math.pi)
        g = np.empty((6, 6))
        for i in range(6):
            for j in range(6):
                g[i, j] = np.sum(weights * basis.eval(i, nodes)
                                 * basis.eval(j, nodes))
        np.testing.assert_allclose(g, np.eye(6), atol=1e-12)


def shooting_eigenvalue(alpha, z):
    """Oracle: Neumann eigenvalue of f'' - x f' = -lam f on [-z, z].

    Exploits even/odd parity; integrates with DOP853 at tight tolerance
    and finds the eigenvalue by root bracketing.
    """
    parity = alpha % 2
    y0 = [1.0, 0.0] if parity == 0 else [0.0, 1.0]

    def end_slope(lam):
        sol = solve_ivp(lambda t, y: [y[1], t * y[1] - lam * y[0]],
                        (0.0, z), y0, rtol=1e-11, atol=1e-13,
                        method="DOP853")
        return sol.y[1, -1]

    return brentq(end_slope, alpha - 0.5, alpha + 0.5, xtol=1e-10)


@pytest.fixture(scope="module")
def uniform_fem():
    return build_fem(Marginal("uniform", (-0.5, 0.5)), 6, GRID_N)


@pytest.fixture(scope="module")
def gauss_fem():
    return build_fem(truncate(Marginal("gaussian", (0, 1))), 4, GRID_N)


@pytest.fixture(scope="module")
def tri_fem():
    std, _ = standardize(Marginal("triangular", (49, 51)))
    return build_fem(std, 6, GRID_N)


class TestFemBasis:
    def test_uniform_against_cosine_oracle(self, uniform_fem):
        exact = (np.arange(7) * math.pi) ** 2
        np.testing.assert_allclose(uniform_fem.eigenvalues[1:], exact[1:],
                                   rtol=1e-3)

    def test_truncated_gaussian_against_shooting_oracle(self, gauss_fem):
        z = -gauss_fem.support[0]
        for alpha in (1, 2, 3, 4):
            ref = shooting_eigenvalue(alpha, z)
            assert gauss_fem.eigenvalues[alpha] == \
                pytest.approx(ref, rel=5e-4)

    def test_truncated_gaussian_near_integer_spectrum(self, gauss_fem):
        # truncation perturbs the Hermite spectrum upward, mildly for low
        # orders (the alpha = 4 deviation already reaches ~4e-2)
        for alpha in (1, 2, 3):
            assert gauss_fem.eigenvalues[alpha] == \
                pytest.approx(alpha, abs=1e-2)

    @pytest.mark.parametrize("which", ["uniform", "gauss", "tri"])
    def test_gram_identity(self, which, request):
        basis = request.getfixturevalue(f"{which}_fem")
        upto = basis.p_max
        g = gram_matrix(basis, upto)
        assert np.abs(g - np.eye(upto + 1)).max() < 1e-3

    @pytest.mark.parametrize("which", ["uniform", "gauss", "tri"])
    def test_derivative_gram_identity(self, which, request):
        basis = request.getfixturevalue(f"{which}_fem")
        upto = basis.p_max
        g = gram_matrix(basis, upto, use_deriv=True)
        assert np.abs(g - np.eye(upto)).max() < 1e-3

    @pytest.mark.parametrize("which", ["uniform", "gauss", "tri"])
    def test_sign_change_counts(self, which, request):
        basis = request.getfixturevalue(f"{which}_fem")
        a, b = basis.support
        x = np.linspace(a, b, 4001)
        for alpha in range(basis.p_max + 1):
            assert count_sign_changes(basis.eval(alpha, x)) == alpha

    def test_weak_form_identity(self, tri_fem):
        a, b = tri_fem.support
        x = np.linspace(a, b, 10 * GRID_N + 1)
        rho = tri_fem.marginal.density(x)
        for alpha in (1, 2, 3, 4):
            for f_order in (1, 2, 3, 4):
                lhs = simpson(tri_fem.eval_deriv(f_order, x)
                              * tri_fem.eval_deriv(alpha, x) * rho, x=x)
                rhs = tri_fem.eigenvalues[alpha] * simpson(
                    tri_fem.eval(f_order, x) * tri_fem.eval(alpha, x) * rho,
                    x=x)
                assert lhs == pytest.approx(
                    rhs, abs=1e-3 * tri_fem.eigenvalues[alpha])

    def test_poincare_equality_case(self, tri_fem):
        # Var(phi_1) = C_P * ||phi_1'||^2 at the level of the computed pair
        a, b = tri_fem.support
        x = np.linspace(a, b, 10 * GRID_N + 1)
        rho = tri_fem.marginal.density(x)
        phi1 = tri_fem.eval(1, x)
        var = simpson(phi1 ** 2 * rho, x=x) - simpson(phi1 * rho, x=x) ** 2
        energy = simpson(tri_fem.eval_deriv(1, x) ** 2 * rho, x=x)
        assert var == pytest.approx(tri_fem.poincare_constant * energy,
                                    rel=1e-6)

    def test_neumann_boundary_derivative(self, tri_fem):
        a, b = tri_fem.support
        assert tri_fem.eval_deriv(3, a) == 0.0
        assert tri_fem.eval_deriv(3, b) == 0.0

    def test_constant_mode(self, tri_fem):
        assert tri_fem.eigenvalues[0] == 0.0
        x = np.linspace(*tri_fem.support, 5)
        np.testing.assert_allclose(tri_fem.eval(0, x), 1.0)

    def test_eigenvalue_asymptotics_mildly_perturbed_uniform(self):
        # smooth near-uniform density: lambda_alpha / alpha^2 decreases
        # monotonically to (pi / length)^2, within 2% by alpha = 8
        basis = build_fem(Marginal("beta", (1.05, 1.05)), 8, 2000)
        ratio = basis.eigenvalues[1:] / np.arange(1, 9) ** 2
        target = math.pi ** 2
        assert np.all(np.diff(ratio) < 0)
        assert abs(ratio[-1] - target) / target < 0.02

    def test_unbounded_support_rejected(self):
        with pytest.raises(AssemblyError):
            build_fem(Marginal("gaussian", (0, 1)), 3)

    def test_out_of_range_evaluation(self, uniform_fem):
        with pytest.raises(DomainError):
            uniform_fem.eval(99, 0.0)
        with pytest.raises(DomainError):
            uniform_fem.eval(1, 2.0)


class TestDispatch:
    def test_uniform_goes_analytic(self):
        b = build_basis(Marginal("uniform", (0, 1)), 3)
        assert b.kind == "analytic-cosine"

    def test_plain_gaussian_goes_hermite(self):
        b = build_basis(Marginal("gaussian", (0, 1)), 3)
        assert b.kind == "analytic-hermite"

    def test_truncated_gaussian_goes_fem(self):
        b = build_basis(truncate(Marginal("gaussian", (0, 1))), 3)
        assert b.kind == "fem"

    def test_analytic_sign_changes(self):
        cos_b = build_basis(Marginal("uniform", (-0.5, 0.5)), 5)
        her_b = build_basis(Marginal("gaussian", (0, 1)), 5)
        x_u = np.linspace(-0.5, 0.5, 2001)
        x_g = np.linspace(-6, 6, 2001)
        for alpha in range(6):
            assert count_sign_changes(cos_b.eval(alpha, x_u)) == alpha
            assert count_sign_changes(her_b.eval(alpha, x_g)) == alpha

    def test_dump_csv(self, tmp_path):
        b = build_basis(Marginal("uniform", (-0.5, 0.5)), 2)
        path = tmp_path / "basis.csv"
        b.dump_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("eigenvalue")
        assert len(lines) > 100
