"""Fitting spectral expansions from model evaluations or model derivatives.

Every regression runs in standardized coordinates: design points are mapped
through the per-input affine maps and derivative data are chain-ruled by
the input scale. Model-evaluation fits use the plain tensor basis; the
direction-i derivative fits regress on normalized basis partial derivatives
(columns restricted to indices with a nonzero order in dimension i) and
rescale the fitted coefficients back to the plain-basis normalization, so
the two estimators are directly comparable.

The d per-direction derivative expansions can be aggregated: for each
multi-index, every expansion whose candidate basis contains it contributes
equally to the averaged coefficient. The constant coefficient, which no
derivative sees, is recovered afterwards by a mean fit on the residual.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .basis import BasisSet, MultiIndex, _graded_lex_key, hyperbolic
from .design import ExperimentalDesign
from .errors import ConfigError
from .marginals import (Marginal, PreparedInput, StandardizationMap,
                        prepare_inputs)
from .poincare1d import DEFAULT_GRID_N, PoincareBasis1D, build_basis
from .solver import (FitResult, RegressionProblem, degree_adaptive_fit,
                     hybrid_lars)


@dataclass
class ExpansionSetup:
    """Shared context for all fits on one problem.

    Holds the prepared inputs, the per-input spectral bases (built once at
    the largest candidate degree) and the truncation policy. The master
    regression matrix for the largest degree is assembled per design; each
    candidate degree selects a column subset of it.
    """

    inputs: List[PreparedInput]
    bases: List[PoincareBasis1D]
    p_range: Sequence[int]
    q: float = 1.0
    grid_n: int = DEFAULT_GRID_N
    master_degree: Optional[int] = None
    _master: BasisSet = field(init=False, repr=False, default=None)
    _positions: dict = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self):
        if not self.p_range:
            raise ConfigError("empty degree range")
        self.p_range = sorted(int(p) for p in self.p_range)
        if self.master_degree is None:
            self.master_degree = self.p_range[-1]
        self._master = BasisSet.build(self.bases, self.master_degree, self.q)

    @classmethod
    def create(cls, marginals: Sequence[Marginal], p_range: Sequence[int],
               q: float = 1.0, grid_n: int = DEFAULT_GRID_N,
               names: Optional[Sequence[str]] = None,
               basis_cache: Optional[dict] = None,
               extra_degrees: Sequence[int] = ()) -> "ExpansionSetup":
        inputs = prepare_inputs(marginals, names)
        return cls.from_inputs(inputs, p_range, q, grid_n, basis_cache,
                               extra_degrees)

    @classmethod
    def from_inputs(cls, inputs: Sequence[PreparedInput],
                    p_range: Sequence[int], q: float = 1.0,
                    grid_n: int = DEFAULT_GRID_N,
                    basis_cache: Optional[dict] = None,
                    extra_degrees: Sequence[int] = ()) -> "ExpansionSetup":
        p_max = max([*p_range, *extra_degrees])
        bases = []
        for inp in inputs:
            key = (inp.standard.key(), p_max, grid_n)
            if basis_cache is not None and key in basis_cache:
                bases.append(basis_cache[key])
                continue
            b = build_basis(inp.standard, p_max, grid_n)
            if basis_cache is not None:
                basis_cache[key] = b
            bases.append(b)
        return cls(list(inputs), bases, p_range, q, grid_n,
                   master_degree=p_max)

    @property
    def d(self) -> int:
        return len(self.inputs)

    @property
    def master(self) -> BasisSet:
        return self._master

    def to_standard(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.column_stack([inp.map.to_standard(X[:, i])
                                for i, inp in enumerate(self.inputs)])

    def columns_for(self, p: int) -> np.ndarray:
        """Positions of the degree-p candidate indices within the master set."""
        if p not in self._positions:
            if p > self.master_degree:
                raise ConfigError(
                    f"degree {p} exceeds the prepared master degree "
                    f"{self.master_degree}")
            lookup = {a: j for j, a in enumerate(self._master.indices)}
            self._positions[p] = np.array(
                [lookup[a] for a in hyperbolic(self.d, p, self.q)], dtype=int)
        return self._positions[p]

    def basis_set(self, p: int) -> BasisSet:
        return BasisSet([self._master.indices[j] for j in self.columns_for(p)],
                        self.bases, p, self.q)


@dataclass
class Expansion:
    """Coefficients over a basis set, with provenance and input maps."""

    basis_set: BasisSet
    coefficients: Dict[MultiIndex, float]
    provenance: str
    inputs: List[PreparedInput]
    deriv_dim: Optional[int] = None
    loo_error: Optional[float] = None
    p_star: Optional[int] = None
    grid_n: int = DEFAULT_GRID_N
    diagnostics: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.basis_set.d

    @property
    def n_active(self) -> int:
        return sum(1 for v in self.coefficients.values() if v != 0.0)

    def candidate_indices(self) -> frozenset:
        return frozenset(self.basis_set.indices)

    def coefficient(self, alpha) -> float:
        return self.coefficients.get(tuple(alpha), 0.0)


def _design_matrix_z(setup: ExpansionSetup, design) -> np.ndarray:
    X = design.X if isinstance(design, ExperimentalDesign) else np.asarray(design)
    return setup.to_standard(X)


def fit_poince(setup: ExpansionSetup, design, y) -> Expansion:
    """Degree-adaptive sparse fit of model evaluations on the tensor basis."""
    y = np.asarray(y, dtype=float).ravel()
    z = _design_matrix_z(setup, design)
    psi_full = setup.master.eval_matrix(z)

    def candidates():
        for p in setup.p_range:
            cols = setup.columns_for(p)
            labels = [setup.master.indices[j] for j in cols]
            yield p, RegressionProblem(psi_full[:, cols], y, labels)

    fit = degree_adaptive_fit(candidates())
    return Expansion(setup.basis_set(fit.p_star), fit.coefficient_map(),
                     "poince-lars", setup.inputs,
                     loo_error=fit.loo_error, p_star=fit.p_star,
                     grid_n=setup.grid_n,
                     diagnostics=dict(fit.diagnostics))


def fit_poince_der(setup: ExpansionSetup, design, dy_i, i: int) -> Expansion:
    """Degree-adaptive sparse fit of direction-i partial derivatives.

    ``dy_i`` holds model-unit derivative evaluations; the input scale
    converts them to standardized coordinates before the regression. The
    returned coefficients are rescaled to the plain-basis normalization
    (division by sqrt(lambda_{i, alpha_i})).
    """
    dy_i = np.asarray(dy_i, dtype=float).ravel()
    z = _design_matrix_z(setup, design)
    dy_std = dy_i * setup.inputs[i].map.scale
    master_sub = setup.master.sub_indices(i)
    sub_lookup = {setup.master.indices[j]: col
                  for col, j in enumerate(master_sub)}
    psi_d_full = setup.master.eval_deriv_matrix(i, z)
    lam = setup.bases[i].eigenvalues

    def candidates():
        for p in setup.p_range:
            idx = [setup.master.indices[j] for j in setup.columns_for(p)
                   if setup.master.indices[j][i] >= 1]
            cols = [sub_lookup[a] for a in idx]
            yield p, RegressionProblem(psi_d_full[:, cols], dy_std, idx)

    fit = degree_adaptive_fit(candidates())
    coeffs = {alpha: val / math.sqrt(lam[alpha[i]])
              for alpha, val in fit.coefficient_map().items()}
    deriv_candidates = [a for a in setup.basis_set(fit.p_star).indices
                        if a[i] >= 1]
    bset = BasisSet(deriv_candidates, setup.bases, fit.p_star, setup.q)
    return Expansion(bset, coeffs, f"poince-der-lars({i})", setup.inputs,
                     deriv_dim=i, loo_error=fit.loo_error, p_star=fit.p_star,
                     grid_n=setup.grid_n,
                     diagnostics=dict(fit.diagnostics))


def average_der_expansions(expansions: Sequence[Expansion]) -> Expansion:
    """Average the per-direction derivative expansions index by index.

    Each expansion whose candidate basis contains a multi-index contributes
    its coefficient (zero when inactive) with equal weight. The constant
    index is added to the basis but carries no coefficient until
    :func:`fit_constant_residual` runs.
    """
    if not expansions:
        raise ValueError("no expansions to average")
    first = expansions[0]
    for e in expansions[1:]:
        if e.basis_set.bases is not first.basis_set.bases and \
                [b.marginal for b in e.basis_set.bases] != \
                [b.marginal for b in first.basis_set.bases]:
            raise ValueError("expansions built on different 1D bases")
        if e.deriv_dim is None:
            raise ValueError("averaging requires derivative expansions")
    candidate_sets = [e.candidate_indices() for e in expansions]
    union = set().union(*candidate_sets)
    coeffs: Dict[MultiIndex, float] = {}
    for alpha in union:
        contrib = [e.coefficients.get(alpha, 0.0)
                   for e, cand in zip(expansions, candidate_sets)
                   if alpha[e.deriv_dim] >= 1 and alpha in cand]
        if contrib:
            coeffs[alpha] = float(np.mean(contrib))
    zero = tuple([0] * first.d)
    indices = sorted(union | {zero}, key=_graded_lex_key)
    p_star = max(e.p_star if e.p_star is not None else e.basis_set.p
                 for e in expansions)
    bset = BasisSet(indices, first.basis_set.bases, p_star, first.basis_set.q)
    loo = [e.loo_error for e in expansions]
    return Expansion(bset, coeffs, "poince-der-avg", first.inputs,
                     p_star=p_star, grid_n=first.grid_n,
                     diagnostics={"per_direction_loo": loo})


def fit_constant_residual(avg: Expansion, design, y) -> Expansion:
    """Recover the constant coefficient of an averaged derivative expansion."""
    zero = tuple([0] * avg.d)
    if zero in avg.coefficients:
        raise ValueError("expansion already carries a constant coefficient")
    y = np.asarray(y, dtype=float).ravel()
    pred = eval_surrogate(avg, design.X if isinstance(design, ExperimentalDesign)
                          else design)
    coeffs = dict(avg.coefficients)
    coeffs[zero] = float(np.mean(y - pred))
    return Expansion(avg.basis_set, coeffs, avg.provenance, avg.inputs,
                     p_star=avg.p_star, grid_n=avg.grid_n,
                     diagnostics=dict(avg.diagnostics))


def fit_projection_mc(setup_or_inputs, design, data, p: int,
                      deriv_dim: Optional[int] = None,
                      grid_n: int = DEFAULT_GRID_N,
                      basis_cache: Optional[dict] = None) -> Expansion:
    """Monte Carlo projection estimate of the coefficients at fixed degree.

    With ``deriv_dim`` unset, estimates the inner products of the data with
    each basis function by the sample mean over an i.i.d. design. With
    ``deriv_dim = i``, projects direction-i derivative data onto the
    normalized derivative basis and rescales to plain-basis coefficients.
    """
    if isinstance(setup_or_inputs, ExpansionSetup):
        setup = setup_or_inputs
    else:
        setup = ExpansionSetup.from_inputs(setup_or_inputs, [p],
                                           grid_n=grid_n,
                                           basis_cache=basis_cache)
    data = np.asarray(data, dtype=float).ravel()
    z = _design_matrix_z(setup, design)
    n = z.shape[0]
    bset = setup.basis_set(p)
    if deriv_dim is None:
        psi = setup.master.eval_matrix(z, columns=setup.columns_for(p))
        vals = psi.T @ data / n
        coeffs = {a: float(v) for a, v in zip(bset.indices, vals)}
        return Expansion(bset, coeffs, "poince-mc", setup.inputs,
                         p_star=p, grid_n=setup.grid_n)
    i = deriv_dim
    dy_std = data * setup.inputs[i].map.scale
    col_of = {setup.master.indices[j]: c
              for c, j in enumerate(setup.master.sub_indices(i))}
    idx = [a for a in bset.indices if a[i] >= 1]
    psi_d = setup.master.eval_deriv_matrix(i, z)
    lam = setup.bases[i].eigenvalues
    vals = psi_d[:, [col_of[a] for a in idx]].T @ dy_std / n
    coeffs = {a: float(v) / math.sqrt(lam[a[i]]) for a, v in zip(idx, vals)}
    dbset = BasisSet(idx, setup.bases, p, setup.q)
    return Expansion(dbset, coeffs, f"poince-der-mc({i})", setup.inputs,
                     deriv_dim=i, p_star=p, grid_n=setup.grid_n)


def eval_surrogate(expansion: Expansion, X) -> np.ndarray:
    """Evaluate the expansion at model-unit points."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    z = np.column_stack([inp.map.to_standard(X[:, i])
                         for i, inp in enumerate(expansion.inputs)])
    items = [(a, v) for a, v in expansion.coefficients.items() if v != 0.0]
    if not items:
        return np.zeros(X.shape[0])
    positions = {a: j for j, a in enumerate(expansion.basis_set.indices)}
    cols = [positions[a] for a, _ in items]
    vals = np.array([v for _, v in items])
    psi = expansion.basis_set.eval_matrix(z, columns=cols)
    return psi @ vals


# -- serialization -----------------------------------------------------------

def _bound(v):
    return None if not math.isfinite(v) else float(v)


def _unbound(v, sign):
    return sign * math.inf if v is None else float(v)


def expansion_to_json(expansion: Expansion) -> str:
    doc = {
        "provenance": expansion.provenance,
        "deriv_dim": expansion.deriv_dim,
        "p": expansion.basis_set.p,
        "q": expansion.basis_set.q,
        "p_star": expansion.p_star,
        "loo_error": expansion.loo_error,
        "grid_n": expansion.grid_n,
        "inputs": [
            {
                "name": inp.name,
                "family": inp.model.family,
                "params": list(inp.model.params),
                "model_bounds": [_bound(b) for b in inp.model.support],
                "standard_params": list(inp.standard.params),
                "standard_bounds": [_bound(b) for b in inp.standard.support],
                "shift": inp.map.shift,
                "scale": inp.map.scale,
            }
            for inp in expansion.inputs
        ],
        "indices": [list(a) for a in expansion.basis_set.indices],
        "coefficients": [
            {"index": list(a), "value": v}
            for a, v in sorted(expansion.coefficients.items(),
                               key=lambda kv: _graded_lex_key(kv[0]))
        ],
    }
    return json.dumps(doc, indent=2)


def expansion_from_json(text: str,
                        basis_cache: Optional[dict] = None) -> Expansion:
    doc = json.loads(text)
    inputs = []
    for spec in doc["inputs"]:
        model = Marginal(spec["family"], spec["params"],
                         (_unbound(spec["model_bounds"][0], -1),
                          _unbound(spec["model_bounds"][1], +1)))
        standard = Marginal(spec["family"], spec["standard_params"],
                            (_unbound(spec["standard_bounds"][0], -1),
                             _unbound(spec["standard_bounds"][1], +1)))
        inputs.append(PreparedInput(spec["name"], model, standard,
                                    StandardizationMap(spec["shift"],
                                                       spec["scale"])))
    indices = [tuple(a) for a in doc["indices"]]
    max_order = max((max(a) for a in indices), default=0)
    bases = []
    for inp in inputs:
        key = (inp.standard.key(), max_order, doc["grid_n"])
        if basis_cache is not None and key in basis_cache:
            bases.append(basis_cache[key])
            continue
        b = build_basis(inp.standard, max_order, doc["grid_n"])
        if basis_cache is not None:
            basis_cache[key] = b
        bases.append(b)
    bset = BasisSet(indices, bases, doc["p"], doc["q"])
    coeffs = {tuple(c["index"]): float(c["value"])
              for c in doc["coefficients"]}
    return Expansion(bset, coeffs, doc["provenance"], inputs,
                     deriv_dim=doc["deriv_dim"], loo_error=doc["loo_error"],
                     p_star=doc["p_star"], grid_n=doc["grid_n"])
