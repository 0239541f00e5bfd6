"""Spectral basis of the 1D Poincare differential operator.

For a marginal with density ``rho = exp(-V)`` on ``[a, b]``, the basis
consists of the eigenfunctions of ``L(f) = f'' - V'f'`` with Neumann
boundary conditions, equivalently of the weak eigenproblem

    <f', phi_alpha'> = lambda_alpha <f, phi_alpha>      (inner products in L2(rho))

with ``0 = lambda_0 < lambda_1 < lambda_2 < ...``. Two families have closed
forms: the uniform law (a cosine basis) and the standard Gaussian (Hermite
polynomials). Everything else is solved numerically with linear finite
elements on a uniform grid: assemble the mass matrix M and stiffness S in
the hat-function basis, set K = M + S and solve the shifted generalized
eigenproblem ``K a = (lambda + 1) M a``. Discrete eigenvectors are
interpolated by clamped cubic splines (zero end slopes, matching the
Neumann conditions); derivative evaluators use centered finite differences
on the spline. Both the eigenfunctions and their normalized derivatives
``phi' / sqrt(lambda)`` are rescaled to unit L2(rho) norm.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, List

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline
from scipy.linalg import LinAlgError, eigh

from .errors import AssemblyError, DomainError, SpectralError
from .marginals import Marginal

DEFAULT_GRID_N = 1000

# 3-point Gauss-Legendre on [0, 1]: exact for the quintic element integrands
_GL_X = np.array([0.5 - math.sqrt(15) / 10, 0.5, 0.5 + math.sqrt(15) / 10])
_GL_W = np.array([5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])


@dataclass
class PoincareBasis1D:
    """Ordered eigenpairs of the Poincare operator for one marginal.

    Attributes
    ----------
    marginal : Marginal
        The (standardized) marginal the basis belongs to.
    p_max : int
        Largest basis order held; orders run 0..p_max.
    eigenvalues : ndarray
        ``lambda_0 = 0 < lambda_1 < ...``, in units 1/length^2 of the
        marginal's coordinates.
    kind : str
        'analytic-cosine', 'analytic-hermite' or 'fem'.
    """

    marginal: Marginal
    p_max: int
    eigenvalues: np.ndarray
    kind: str
    _phi: List[Callable] = field(repr=False, default_factory=list)
    _dphi: List[Callable] = field(repr=False, default_factory=list)

    @property
    def support(self):
        return self.marginal.support

    @property
    def poincare_constant(self) -> float:
        """Sharp constant in Var(f) <= C_P * ||f'||^2, equal to 1/lambda_1."""
        return 1.0 / self.eigenvalues[1]

    def _check(self, alpha: int, x):
        if not 0 <= alpha <= self.p_max:
            raise DomainError(f"basis order {alpha} outside 0..{self.p_max}")
        lo, hi = self.support
        tol = 1e-9 * max(1.0, abs(lo) if math.isfinite(lo) else 0.0,
                         abs(hi) if math.isfinite(hi) else 0.0)
        x = np.asarray(x, dtype=float)
        if np.any(x < lo - tol) or np.any(x > hi + tol):
            raise DomainError(f"evaluation point outside support [{lo}, {hi}]")
        if math.isfinite(lo):
            x = np.clip(x, lo, hi)
        return x

    def eval(self, alpha: int, x):
        """Evaluate the eigenfunction of order ``alpha`` at ``x``."""
        xa = self._check(alpha, x)
        out = self._phi[alpha](xa)
        return out if np.ndim(x) else float(out)

    def eval_deriv(self, alpha: int, x):
        """Evaluate the eigenfunction derivative; 0 at FEM boundaries."""
        xa = self._check(alpha, x)
        out = self._dphi[alpha](xa)
        return out if np.ndim(x) else float(out)

    def eval_table(self, x, upto: int | None = None) -> np.ndarray:
        """Eigenfunction values, shape (len(x), upto + 1)."""
        upto = self.p_max if upto is None else upto
        xa = self._check(upto, x)
        return np.column_stack([self._phi[a](xa) for a in range(upto + 1)])

    def eval_deriv_table(self, x, upto: int | None = None) -> np.ndarray:
        upto = self.p_max if upto is None else upto
        xa = self._check(upto, x)
        return np.column_stack([self._dphi[a](xa) for a in range(upto + 1)])

    def dump_csv(self, path, n_samples: int = 513):
        """Write (grid, eigenvalues, eigenfunction samples) for inspection."""
        lo, hi = self.support
        if not (math.isfinite(lo) and math.isfinite(hi)):
            lo, hi = self.marginal.quantile(1e-7), self.marginal.quantile(1 - 1e-7)
        grid = np.linspace(lo, hi, n_samples)
        table = self.eval_table(grid)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["eigenvalue"] + [format(v, ".12g") for v in self.eigenvalues])
            w.writerow(["x"] + [f"phi{a}" for a in range(self.p_max + 1)])
            for i, x in enumerate(grid):
                w.writerow([format(x, ".12g")]
                           + [format(v, ".12g") for v in table[i]])


def build_analytic_uniform(marginal: Marginal, p_max: int) -> PoincareBasis1D:
    """Cosine basis of the uniform law on [a, b].

    ``phi_alpha(x) = sqrt(2) cos(alpha pi (x - a)/(b - a))`` with eigenvalue
    ``(alpha pi / (b - a))**2``.
    """
    if marginal.family != "uniform":
        raise ValueError("analytic cosine basis requires a uniform marginal")
    a, b = marginal.support
    length = b - a
    eigenvalues = (np.arange(p_max + 1) * math.pi / length) ** 2

    def phi(alpha):
        if alpha == 0:
            return lambda x: np.ones_like(x)
        w = alpha * math.pi / length
        return lambda x: math.sqrt(2.0) * np.cos(w * (x - a))

    def dphi(alpha):
        if alpha == 0:
            return lambda x: np.zeros_like(x)
        w = alpha * math.pi / length
        return lambda x: -math.sqrt(2.0) * w * np.sin(w * (x - a))

    return PoincareBasis1D(marginal, p_max, eigenvalues, "analytic-cosine",
                           [phi(a_) for a_ in range(p_max + 1)],
                           [dphi(a_) for a_ in range(p_max + 1)])


def _hermite_table(x: np.ndarray, upto: int) -> np.ndarray:
    """Normalized (probabilists') Hermite polynomials by stable recurrence."""
    out = np.empty((x.size, upto + 1))
    out[:, 0] = 1.0
    if upto >= 1:
        out[:, 1] = x
    for k in range(1, upto):
        out[:, k + 1] = (x * out[:, k] - math.sqrt(k) * out[:, k - 1]) \
            / math.sqrt(k + 1)
    return out


def build_analytic_hermite(marginal: Marginal, p_max: int) -> PoincareBasis1D:
    """Hermite basis of the standard Gaussian; eigenvalue of order alpha is alpha."""
    if marginal.family != "gaussian" or marginal.params != (0.0, 1.0) \
            or marginal.is_bounded:
        raise ValueError("analytic Hermite basis requires an untruncated N(0,1)")
    eigenvalues = np.arange(p_max + 1, dtype=float)

    def phi(alpha):
        return lambda x: _hermite_table(np.atleast_1d(np.asarray(x, float)),
                                        alpha)[:, alpha].reshape(np.shape(x))

    def dphi(alpha):
        if alpha == 0:
            return lambda x: np.zeros_like(np.asarray(x, float))
        s = math.sqrt(alpha)
        return lambda x: s * _hermite_table(
            np.atleast_1d(np.asarray(x, float)), alpha - 1)[:, alpha - 1] \
            .reshape(np.shape(x))

    return PoincareBasis1D(marginal, p_max, eigenvalues, "analytic-hermite",
                           [phi(a_) for a_ in range(p_max + 1)],
                           [dphi(a_) for a_ in range(p_max + 1)])


def _assemble_tridiagonal(marginal: Marginal, grid_n: int):
    """Mass and shifted-stiffness tridiagonals in the hat-function basis."""
    a, b = marginal.support
    nodes = np.linspace(a, b, grid_n)
    h = nodes[1] - nodes[0]
    xq = nodes[:-1, None] + _GL_X[None, :] * h            # (n-1, 3)
    wq = _GL_W[None, :] * h
    rho = marginal.density(xq)
    if not np.all(np.isfinite(rho)) or np.any(rho <= 0.0):
        raise AssemblyError(
            f"non-positive density inside an element of the {marginal.family} "
            "marginal; the spectral problem is not well-posed")
    pl, pr = 1.0 - _GL_X, _GL_X
    m_ll = (wq * rho * pl * pl).sum(axis=1)
    m_lr = (wq * rho * pl * pr).sum(axis=1)
    m_rr = (wq * rho * pr * pr).sum(axis=1)
    s_el = (wq * rho).sum(axis=1) / h ** 2

    diag_m = np.zeros(grid_n)
    diag_m[:-1] += m_ll
    diag_m[1:] += m_rr
    off_m = m_lr
    diag_s = np.zeros(grid_n)
    diag_s[:-1] += s_el
    diag_s[1:] += s_el
    off_s = -s_el
    return nodes, (diag_m, off_m), (diag_m + diag_s, off_m + off_s)


def build_fem(marginal: Marginal, p_max: int,
              grid_n: int = DEFAULT_GRID_N) -> PoincareBasis1D:
    """Finite-element basis for a bounded marginal with positive density.

    Solves ``K a = (lambda + 1) M a`` for the ``p_max + 1`` smallest
    eigenvalues, fixes the sign so that each eigenfunction is positive at
    the left endpoint, and normalizes function and derivative evaluators
    in L2(rho) by composite-Simpson quadrature on a 10x refined grid.
    """
    if not marginal.is_bounded:
        raise AssemblyError("FEM basis requires a bounded (truncated) support")
    if grid_n < 8:
        raise ValueError("grid_n too small for a meaningful eigensolve")
    nodes, (dm, om), (dk, ok) = _assemble_tridiagonal(marginal, grid_n)
    mass = np.diag(dm) + np.diag(om, 1) + np.diag(om, -1)
    stiff = np.diag(dk) + np.diag(ok, 1) + np.diag(ok, -1)
    try:
        vals, vecs = eigh(stiff, mass, subset_by_index=(0, p_max))
    except LinAlgError as exc:
        raise SpectralError(f"generalized eigensolve failed: {exc}") from exc
    lam = vals - 1.0
    if abs(lam[0]) > 1e-6 or np.any(np.diff(lam) <= 0):
        raise SpectralError(
            f"unusable spectrum from FEM solve (lambda = {lam})")
    lam[0] = 0.0

    a, b = marginal.support
    h_fd = (b - a) / (10.0 * grid_n)
    x_fine = np.linspace(a, b, 10 * grid_n + 1)
    rho_fine = marginal.density(x_fine)

    phis: List[Callable] = [lambda x: np.ones_like(np.asarray(x, float))]
    dphis: List[Callable] = [lambda x: np.zeros_like(np.asarray(x, float))]
    for alpha in range(1, p_max + 1):
        v = vecs[:, alpha]
        lead = v[np.argmax(np.abs(v) > 1e-12 * np.abs(v).max())]
        if lead < 0:
            v = -v
        spline = CubicSpline(nodes, v, bc_type=((1, 0.0), (1, 0.0)))
        norm = math.sqrt(simpson(spline(x_fine) ** 2 * rho_fine, x=x_fine))

        def dphi_raw(x, _s=spline, _n=norm):
            x = np.asarray(x, dtype=float)
            x1 = np.clip(x - h_fd, a, b)
            x2 = np.clip(x + h_fd, a, b)
            out = (_s(x2) - _s(x1)) / ((x2 - x1) * _n)
            # Neumann conditions: the derivative vanishes at the boundary
            return np.where((x <= a) | (x >= b), 0.0, out)

        d_norm = math.sqrt(simpson(dphi_raw(x_fine) ** 2 * rho_fine, x=x_fine))
        d_scale = math.sqrt(lam[alpha]) / d_norm

        phis.append(lambda x, _s=spline, _n=norm: _s(np.asarray(x, float)) / _n)
        dphis.append(lambda x, _f=dphi_raw, _c=d_scale: _c * _f(x))

    return PoincareBasis1D(marginal, p_max, lam, "fem", phis, dphis)


def build_basis(marginal: Marginal, p_max: int,
                grid_n: int = DEFAULT_GRID_N) -> PoincareBasis1D:
    """Dispatch to the analytic basis when one exists, else to the FEM."""
    if marginal.family == "uniform":
        return build_analytic_uniform(marginal, p_max)
    if marginal.family == "gaussian" and marginal.params == (0.0, 1.0) \
            and not marginal.is_bounded:
        return build_analytic_hermite(marginal, p_max)
    return build_fem(marginal, p_max, grid_n)
