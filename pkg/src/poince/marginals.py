"""One-dimensional input marginals: truncation, standardization, evaluators.

A marginal is a 1D probability law with density ``rho = exp(-V)`` on its
(possibly truncated) support. Unbounded families are truncated to their
``1e-6`` and ``1 - 1e-6`` quantiles before a spectral basis can be built;
bounded sides are kept as-is. Parametric families are shifted/rescaled to
standard parameters so that downstream eigenvalue computations operate on
O(1) intervals:

* bounds-based rescaling: uniform, triangular (both to ``[-0.5, 0.5]``),
  beta (to ``[0, 1]``);
* location-scale rescaling: gaussian, gumbel, gumbel-min, laplace, logistic;
* scale rescaling: exponential, gamma, weibull, lognormal.

The Laplace family is accepted for bookkeeping but rejected by
:func:`truncate` (its spectral problem has no discrete eigenbasis).

Marginal objects are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .errors import DomainError, UnsupportedFamilyError

TAIL_PROBABILITY = 1e-6

Bounds = Tuple[float, float]


@dataclass(frozen=True)
class StandardizationMap:
    """Affine change of coordinates ``z = (x - shift) / scale``."""

    shift: float
    scale: float

    def __post_init__(self):
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError(f"scale must be positive and finite, got {self.scale}")

    def to_standard(self, x):
        return (np.asarray(x, dtype=float) - self.shift) / self.scale

    def to_model(self, z):
        return self.shift + self.scale * np.asarray(z, dtype=float)

    @property
    def is_identity(self) -> bool:
        return self.shift == 0.0 and self.scale == 1.0


class _Family:
    """Behavior of one parametric family (distribution, rescaling rule)."""

    def __init__(self, name, n_params, frozen, support, standardized,
                 potential_prime):
        self.name = name
        self.n_params = n_params  # tuple of accepted arities
        self.frozen = frozen
        self.support = support
        self.standardized = standardized
        self.potential_prime = potential_prime


def _tri_pot_prime(params, x):
    a, b = params
    m = 0.5 * (a + b)
    out = np.zeros_like(x)
    left = x < m
    right = x > m
    out[left] = -1.0 / (x[left] - a)
    out[right] = 1.0 / (b - x[right])
    return out


def _beta_params(params):
    if len(params) == 2:
        return (*params, 0.0, 1.0)
    return params


_FAMILIES = {
    "uniform": _Family(
        "uniform", (2,),
        lambda p: stats.uniform(loc=p[0], scale=p[1] - p[0]),
        lambda p: (p[0], p[1]),
        lambda p: ((-0.5, 0.5), 0.5 * (p[0] + p[1]), p[1] - p[0]),
        lambda p, x: np.zeros_like(x),
    ),
    "gaussian": _Family(
        "gaussian", (2,),
        lambda p: stats.norm(loc=p[0], scale=p[1]),
        lambda p: (-math.inf, math.inf),
        lambda p: ((0.0, 1.0), p[0], p[1]),
        lambda p, x: (x - p[0]) / p[1] ** 2,
    ),
    "gumbel": _Family(
        # max-Gumbel convention: right-skewed, suited to annual maxima
        "gumbel", (2,),
        lambda p: stats.gumbel_r(loc=p[0], scale=p[1]),
        lambda p: (-math.inf, math.inf),
        lambda p: ((0.0, 1.0), p[0], p[1]),
        lambda p, x: (1.0 - np.exp(-(x - p[0]) / p[1])) / p[1],
    ),
    "gumbel-min": _Family(
        "gumbel-min", (2,),
        lambda p: stats.gumbel_l(loc=p[0], scale=p[1]),
        lambda p: (-math.inf, math.inf),
        lambda p: ((0.0, 1.0), p[0], p[1]),
        lambda p, x: (np.exp((x - p[0]) / p[1]) - 1.0) / p[1],
    ),
    "triangular": _Family(
        # two-parameter symmetric triangle: mode at the midpoint
        "triangular", (2,),
        lambda p: stats.triang(0.5, loc=p[0], scale=p[1] - p[0]),
        lambda p: (p[0], p[1]),
        lambda p: ((-0.5, 0.5), 0.5 * (p[0] + p[1]), p[1] - p[0]),
        _tri_pot_prime,
    ),
    "beta": _Family(
        "beta", (2, 4),
        lambda p: stats.beta(p[0], p[1], loc=_beta_params(p)[2],
                             scale=_beta_params(p)[3] - _beta_params(p)[2]),
        lambda p: (_beta_params(p)[2], _beta_params(p)[3]),
        lambda p: ((p[0], p[1], 0.0, 1.0), _beta_params(p)[2],
                   _beta_params(p)[3] - _beta_params(p)[2]),
        lambda p, x: (
            -(p[0] - 1.0) / ((x - _beta_params(p)[2])
                             / (_beta_params(p)[3] - _beta_params(p)[2]))
            + (p[1] - 1.0) / (1.0 - (x - _beta_params(p)[2])
                              / (_beta_params(p)[3] - _beta_params(p)[2]))
        ) / (_beta_params(p)[3] - _beta_params(p)[2]),
    ),
    "gamma": _Family(
        "gamma", (2,),  # shape k, scale theta
        lambda p: stats.gamma(p[0], scale=p[1]),
        lambda p: (0.0, math.inf),
        lambda p: ((p[0], 1.0), 0.0, p[1]),
        lambda p, x: -(p[0] - 1.0) / x + 1.0 / p[1],
    ),
    "exponential": _Family(
        "exponential", (1,),  # rate
        lambda p: stats.expon(scale=1.0 / p[0]),
        lambda p: (0.0, math.inf),
        lambda p: ((1.0,), 0.0, 1.0 / p[0]),
        lambda p, x: np.full_like(x, p[0]),
    ),
    "weibull": _Family(
        "weibull", (2,),  # shape k, scale lam
        lambda p: stats.weibull_min(p[0], scale=p[1]),
        lambda p: (0.0, math.inf),
        lambda p: ((p[0], 1.0), 0.0, p[1]),
        lambda p, x: (-(p[0] - 1.0) / (x / p[1])
                      + p[0] * (x / p[1]) ** (p[0] - 1.0)) / p[1],
    ),
    "lognormal": _Family(
        "lognormal", (2,),  # mu, sigma of the underlying normal
        lambda p: stats.lognorm(p[1], scale=math.exp(p[0])),
        lambda p: (0.0, math.inf),
        lambda p: ((0.0, p[1]), 0.0, math.exp(p[0])),
        lambda p, x: 1.0 / x + (np.log(x) - p[0]) / (p[1] ** 2 * x),
    ),
    "logistic": _Family(
        "logistic", (2,),
        lambda p: stats.logistic(loc=p[0], scale=p[1]),
        lambda p: (-math.inf, math.inf),
        lambda p: ((0.0, 1.0), p[0], p[1]),
        lambda p, x: np.tanh(0.5 * (x - p[0]) / p[1]) / p[1],
    ),
    "laplace": _Family(
        "laplace", (2,),
        lambda p: stats.laplace(loc=p[0], scale=p[1]),
        lambda p: (-math.inf, math.inf),
        lambda p: ((0.0, 1.0), p[0], p[1]),
        lambda p, x: np.sign(x - p[0]) / p[1],
    ),
}


class Marginal:
    """A 1D probability law, possibly truncated to explicit bounds.

    Parameters
    ----------
    family : str
        One of the supported family names (see module docstring).
    params : sequence of float
        Family parameters, e.g. ``("gaussian", (30, 8))`` or
        ``("uniform", (7, 9))``.
    bounds : (float, float), optional
        Explicit truncation bounds in the same units as ``params``.
        They are intersected with the family's natural support and the
        density is renormalized by the retained probability mass.
    """

    def __init__(self, family: str, params: Sequence[float],
                 bounds: Optional[Bounds] = None):
        family = family.lower()
        if family not in _FAMILIES:
            raise UnsupportedFamilyError(f"unknown marginal family {family!r}")
        desc = _FAMILIES[family]
        params = tuple(float(v) for v in params)
        if len(params) not in desc.n_params:
            raise ValueError(
                f"{family} expects {desc.n_params} parameters, got {len(params)}")
        self.family = family
        self.params = params
        self._desc = desc
        self._dist = desc.frozen(params)

        lo, hi = desc.support(params)
        if bounds is not None:
            lo = max(lo, float(bounds[0]))
            hi = min(hi, float(bounds[1]))
        if not lo < hi:
            raise ValueError(f"empty support [{lo}, {hi}]")
        self.support: Bounds = (lo, hi)
        self._cdf_lo = float(self._dist.cdf(lo)) if math.isfinite(lo) else 0.0
        self._cdf_hi = float(self._dist.cdf(hi)) if math.isfinite(hi) else 1.0
        self._mass = self._cdf_hi - self._cdf_lo
        if not self._mass > 0:
            raise ValueError(f"truncation to [{lo}, {hi}] retains no mass")

    # -- identity -----------------------------------------------------------

    def key(self) -> tuple:
        """Hashable identity, used as a cache key for spectral bases."""
        return (self.family, self.params, self.support)

    def __eq__(self, other):
        return isinstance(other, Marginal) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return f"Marginal({self.family!r}, {self.params}, bounds={self.support})"

    @property
    def is_bounded(self) -> bool:
        return math.isfinite(self.support[0]) and math.isfinite(self.support[1])

    @property
    def is_truncated(self) -> bool:
        return self._mass < 1.0

    # -- evaluators ---------------------------------------------------------

    def _check_support(self, x: np.ndarray):
        lo, hi = self.support
        tol = 1e-9 * max(1.0, abs(lo) if math.isfinite(lo) else 0.0,
                         abs(hi) if math.isfinite(hi) else 0.0)
        if np.any(x < lo - tol) or np.any(x > hi + tol):
            raise DomainError(
                f"point outside support [{lo}, {hi}] of {self.family} marginal")

    def density(self, x):
        """Truncated, renormalized probability density at ``x``."""
        x = np.asarray(x, dtype=float)
        self._check_support(x)
        out = self._dist.pdf(x) / self._mass
        return out if x.ndim else float(out)

    def potential(self, x):
        """Potential ``V(x) = -log(density(x))``."""
        x = np.asarray(x, dtype=float)
        self._check_support(x)
        out = -self._dist.logpdf(x) + math.log(self._mass)
        return out if x.ndim else float(out)

    def potential_prime(self, x):
        """Piecewise derivative of the potential (diagnostic use only)."""
        x = np.asarray(x, dtype=float)
        self._check_support(x)
        out = self._desc.potential_prime(self.params, np.atleast_1d(x).copy())
        out = out.reshape(x.shape)
        return out if x.ndim else float(out)

    def cdf(self, x):
        """CDF of the truncated law."""
        x = np.asarray(x, dtype=float)
        self._check_support(x)
        out = (self._dist.cdf(x) - self._cdf_lo) / self._mass
        return out if x.ndim else float(out)

    def quantile(self, p):
        """Quantile of the truncated law, for ``p`` in [0, 1]."""
        p = np.asarray(p, dtype=float)
        if np.any(p < 0) or np.any(p > 1):
            raise DomainError("quantile level must lie in [0, 1]")
        out = self._dist.ppf(self._cdf_lo + p * self._mass)
        # guard against roundoff pushing ppf marginally past explicit bounds
        out = np.clip(out, self.support[0], self.support[1])
        return out if p.ndim else float(out)


def make_marginal(family: str, params: Sequence[float],
                  bounds: Optional[Bounds] = None) -> Marginal:
    """Factory used by config files: family name, parameter list, bounds."""
    return Marginal(family, params, bounds)


def truncate(marginal: Marginal) -> Marginal:
    """Truncate unbounded support sides to the 1e-6 / (1 - 1e-6) quantiles.

    Finite sides (natural or explicit) are kept. Already-bounded marginals
    are returned unchanged. The returned marginal renormalizes its density
    by the retained mass.
    """
    if marginal.family == "laplace":
        raise UnsupportedFamilyError(
            "the Laplace family admits no Poincare basis (continuous spectrum); "
            "choose a different family or bound it explicitly at modelling time")
    lo, hi = marginal.support
    if math.isfinite(lo) and math.isfinite(hi):
        return marginal
    # quantiles of the *untruncated* family, per the rescaling convention
    dist = marginal._dist
    new_lo = lo if math.isfinite(lo) else float(dist.ppf(TAIL_PROBABILITY))
    new_hi = hi if math.isfinite(hi) else float(dist.ppf(1.0 - TAIL_PROBABILITY))
    return Marginal(marginal.family, marginal.params, (new_lo, new_hi))


def standardize(marginal: Marginal) -> Tuple[Marginal, StandardizationMap]:
    """Shift/rescale a marginal to standard parameters.

    Returns the standardized marginal together with the affine map
    ``z = (x - shift)/scale``; explicit bounds are mapped through. Families
    without a rescaling rule are returned unchanged with the identity map.
    """
    rule = marginal._desc.standardized(marginal.params)
    if rule is None:
        return marginal, StandardizationMap(0.0, 1.0)
    std_params, shift, scale = rule
    m = StandardizationMap(float(shift), float(scale))
    lo, hi = marginal.support
    new_lo = float(m.to_standard(lo)) if math.isfinite(lo) else -math.inf
    new_hi = float(m.to_standard(hi)) if math.isfinite(hi) else math.inf
    std = Marginal(marginal.family, std_params, (new_lo, new_hi))
    return std, m


def _is_standard_unbounded_gaussian(m: Marginal) -> bool:
    return m.family == "gaussian" and not math.isfinite(m.support[0]) \
        and not math.isfinite(m.support[1])


@dataclass(frozen=True)
class PreparedInput:
    """One input after standardization and truncation.

    ``model`` is the truncated marginal in model units (used for sampling),
    ``standard`` the standardized truncated marginal (used for the spectral
    basis and all regressions), and ``map`` converts between the two.
    """

    name: str
    model: Marginal
    standard: Marginal
    map: StandardizationMap


def prepare_input(marginal: Marginal, name: str = "x") -> PreparedInput:
    """Standardize then truncate a marginal for use in an expansion.

    The (untruncated) Gaussian keeps its unbounded support, since its basis
    is known analytically; every other unbounded family is truncated.
    """
    std, m = standardize(marginal)
    if not _is_standard_unbounded_gaussian(std):
        std = truncate(std)
    lo, hi = std.support
    model_lo = float(m.to_model(lo)) if math.isfinite(lo) else -math.inf
    model_hi = float(m.to_model(hi)) if math.isfinite(hi) else math.inf
    model = Marginal(marginal.family, marginal.params, (model_lo, model_hi))
    return PreparedInput(name, model, std, m)


def prepare_inputs(marginals: Sequence[Marginal],
                   names: Optional[Sequence[str]] = None) -> list[PreparedInput]:
    if names is None:
        names = [f"x{i + 1}" for i in range(len(marginals))]
    return [prepare_input(m, n) for m, n in zip(marginals, names)]
