"""Sensitivity indices from expansion coefficients, plus MC references.

Variance-based quantities follow the coefficient identities of orthonormal
expansions: total variance D = sum of squared non-constant coefficients,
total partial variance of input i = the sub-sum over indices with a nonzero
order in i, first-order partial variance = the sub-sum over indices
touching i only. The derivative-based measure of input i is

    nu_i = sum_{alpha_i >= 1} lambda_{i, alpha_i} * c_alpha^2,

and C_P(mu_i) * nu_i = sum (lambda_{i, alpha_i} / lambda_{i, 1}) c_alpha^2
upper-bounds the total partial variance term by term (the eigenvalue ratio
is >= 1). Derivative quantities are expressed in standardized input
coordinates; the product C_P * nu is invariant under the affine
standardization, so the bound chain is coordinate-free.

Monte Carlo reference estimators (for nu_i and for the relative
mean-squared error of a surrogate) are included for validation; they
deliberately share no code with the coefficient formulas.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from .design import mc_sample
from .errors import SpectralError
from .expansion import Expansion, eval_surrogate
from .marginals import Marginal, PreparedInput


def total_variance(expansion: Expansion) -> float:
    """Sum of squared non-constant coefficients."""
    zero = tuple([0] * expansion.d)
    return float(sum(v * v for a, v in expansion.coefficients.items()
                     if a != zero))


def partial_variances(expansion: Expansion, i: int) -> tuple[float, float]:
    """(first-order, total) partial variance of input i."""
    d1 = 0.0
    dtot = 0.0
    for alpha, v in expansion.coefficients.items():
        if alpha[i] >= 1:
            dtot += v * v
            if all(a == 0 for j, a in enumerate(alpha) if j != i):
                d1 += v * v
    return d1, dtot


def dgsm_from_coefficients(expansion: Expansion, i: int) -> float:
    """Coefficient form of the derivative-based measure of input i."""
    lam = expansion.basis_set.bases[i].eigenvalues
    return float(sum(lam[alpha[i]] * v * v
                     for alpha, v in expansion.coefficients.items()
                     if alpha[i] >= 1))


def dgsm_upper_bound(expansion: Expansion, i: int) -> float:
    """Eigenvalue-weighted bound on the total partial variance of input i.

    Equals C_P(mu_i) * nu_i computed on the same coefficients. Accumulated
    as Dtot_i plus the nonnegative excess terms (lambda ratio - 1) * c^2,
    so the ordering bound >= Dtot_i holds exactly in floating point.
    """
    lam = expansion.basis_set.bases[i].eigenvalues
    if len(lam) < 2 or not lam[1] > 0:
        raise SpectralError("first nonzero eigenvalue unavailable")
    _, dtot = partial_variances(expansion, i)
    excess = sum((lam[alpha[i]] / lam[1] - 1.0) * v * v
                 for alpha, v in expansion.coefficients.items()
                 if alpha[i] >= 1)
    return float(dtot + max(excess, 0.0))


def dgsm_mc_reference(gradient: Callable[[np.ndarray], np.ndarray],
                      inputs: Sequence[PreparedInput], n: int, seed: int,
                      i: int) -> float:
    """Monte Carlo average of the squared partial derivative of input i.

    ``gradient(X)`` returns model-unit gradients of shape (N, d); the
    result is chain-ruled into standardized coordinates to be comparable
    with :func:`dgsm_from_coefficients`.
    """
    design = mc_sample([inp.model for inp in inputs], n, seed)
    g = np.asarray(gradient(design.X), dtype=float)
    if g.ndim == 1:
        g = g[:, None]
    dz = g[:, i] * inputs[i].map.scale
    return float(np.mean(dz ** 2))


def relmse(surrogate: Callable[[np.ndarray], np.ndarray],
           model: Callable[[np.ndarray], np.ndarray],
           marginals: Sequence[Marginal], n_val: int, seed: int) -> float:
    """Relative mean-squared error on an independent validation sample."""
    design = mc_sample(marginals, n_val, seed)
    y = np.asarray(model(design.X), dtype=float).ravel()
    yhat = np.asarray(surrogate(design.X), dtype=float).ravel()
    var = float(np.var(y))
    if var <= 0.0:
        raise ValueError("model variance is zero; RelMSE undefined")
    return float(np.mean((y - yhat) ** 2) / var)


@dataclass
class SensitivityReport:
    """Per-input sensitivity summary of one fitted expansion."""

    names: List[str]
    total_variance: float
    d1: np.ndarray
    dtot: np.ndarray
    s1: np.ndarray
    stot: np.ndarray
    dgsm: np.ndarray
    dgsm_ub: np.ndarray
    source: str                    # 'coefficients' or 'empirical'

    def rows(self) -> List[dict]:
        out = []
        for i, name in enumerate(self.names):
            out.append({
                "input": name,
                "D": self.total_variance,
                "D1": float(self.d1[i]),
                "Dtot": float(self.dtot[i]),
                "S1": float(self.s1[i]),
                "Stot": float(self.stot[i]),
                "dgsm": float(self.dgsm[i]),
                "dgsm_ub": float(self.dgsm_ub[i]),
            })
        return out


def normalize_report(names: Sequence[str], d1, dtot, dgsm, dgsm_ub,
                     total_var: float, source: str) -> SensitivityReport:
    """Normalize partial variances by the total variance into Sobol' indices."""
    if not total_var > 0.0:
        raise ValueError(f"total variance must be positive, got {total_var}")
    if source not in ("coefficients", "empirical"):
        raise ValueError(f"unknown variance source {source!r}")
    d1 = np.asarray(d1, dtype=float)
    dtot = np.asarray(dtot, dtype=float)
    return SensitivityReport(list(names), float(total_var), d1, dtot,
                             d1 / total_var, dtot / total_var,
                             np.asarray(dgsm, dtype=float),
                             np.asarray(dgsm_ub, dtype=float), source)


def report_from_expansion(expansion: Expansion,
                          total_var: Optional[float] = None,
                          source: str = "coefficients",
                          per_input: Optional[Sequence[Expansion]] = None
                          ) -> SensitivityReport:
    """Build a report from one expansion, or from d per-direction expansions.

    With ``per_input`` given (the direction-i derivative expansions), the
    partial variances and derivative measures of input i come from the i-th
    expansion while ``expansion`` (typically the averaged one) only provides
    the total variance.
    """
    names = [inp.name for inp in expansion.inputs]
    d = expansion.d
    if total_var is None:
        total_var = total_variance(expansion)
    d1 = np.empty(d)
    dtot = np.empty(d)
    dgsm = np.empty(d)
    ub = np.empty(d)
    for i in range(d):
        src = expansion if per_input is None else per_input[i]
        d1[i], dtot[i] = partial_variances(src, i)
        dgsm[i] = dgsm_from_coefficients(src, i)
        ub[i] = dgsm_upper_bound(src, i)
    return normalize_report(names, d1, dtot, dgsm, ub, total_var, source)
