"""Built-in test models with gradients, and tabular data-file models.

The river-dyke cost model maps eight physical inputs to an annual cost in
million euros: a flooding-consequence term driven by the maximal annual
overflow, a maintenance term on the no-overflow branch, and a construction
term driven by the dyke height. The model is continuous and piecewise C^1;
its gradient is computed by central finite differences (the derivative of
the cost w.r.t. the dyke height jumps at height 8).

Synthetic targets assembled from basis functions provide exact-recovery
oracles: both the function and its gradient are known in closed form.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from .basis import BasisSet, MultiIndex
from .errors import ConfigError
from .marginals import Marginal

DYKE_INPUT_NAMES = ("Q", "Ks", "Zv", "Zm", "Hd", "Cb", "L", "B")


def dyke_marginals() -> List[Marginal]:
    """The eight dyke-model input laws (flowrate, friction, levels, ...)."""
    return [
        Marginal("gumbel", (1013.0, 558.0), bounds=(500.0, 3000.0)),
        Marginal("gaussian", (30.0, 8.0), bounds=(15.0, np.inf)),
        Marginal("triangular", (49.0, 51.0)),
        Marginal("triangular", (54.0, 56.0)),
        Marginal("uniform", (7.0, 9.0)),
        Marginal("triangular", (55.0, 56.0)),
        Marginal("triangular", (4990.0, 5010.0)),
        Marginal("triangular", (295.0, 305.0)),
    ]


def dyke_overflow(x):
    """Maximal annual overflow S; positive values mean flooding."""
    arr = np.asarray(x, dtype=float)
    x2 = np.atleast_2d(arr)
    q, ks, zv, zm, hd, cb, le, b = (x2[:, j] for j in range(8))
    s = (q / (b * ks * np.sqrt((zm - zv) / le))) ** 0.6 + zv - hd - cb
    return float(s[0]) if arr.ndim == 1 else s


def dyke_cost(x):
    """Annual cost: flooding consequences + maintenance + construction."""
    arr = np.asarray(x, dtype=float)
    x2 = np.atleast_2d(arr)
    s = dyke_overflow(x2)
    hd = x2[:, 4]
    flooding = np.where(s > 0, 1.0, 0.0)
    with np.errstate(divide="ignore", over="ignore"):
        maintenance = np.where(
            s <= 0, 0.2 + 0.8 * (1.0 - np.exp(-1000.0 / s ** 4)), 0.0)
    construction = 0.05 * np.where(hd <= 8.0, 8.0, hd)
    out = flooding + maintenance + construction
    return float(out[0]) if arr.ndim == 1 else out


def dyke_gradient(x, marginals: Optional[Sequence[Marginal]] = None,
                  rel_step: float = 1e-6) -> np.ndarray:
    """Central finite differences of the cost, one column per input.

    The step is ``rel_step`` times the support length of each input
    (falling back to a unit scale when no marginals are given).
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if marginals is None:
        scales = np.ones(x.shape[1])
    else:
        # unbounded supports fall back to the 1e-6 tail-quantile range
        def length(m):
            lo, hi = m.support
            if not (np.isfinite(lo) and np.isfinite(hi)):
                lo, hi = m.quantile(1e-6), m.quantile(1 - 1e-6)
            return hi - lo
        scales = np.array([length(m) for m in marginals])
    grad = np.empty_like(x)
    for j in range(x.shape[1]):
        h = rel_step * scales[j]
        xp = x.copy()
        xm = x.copy()
        xp[:, j] += h
        xm[:, j] -= h
        grad[:, j] = (dyke_cost(xp) - dyke_cost(xm)) / (2.0 * h)
    return grad


@dataclass
class SyntheticTarget:
    """Model assembled from basis functions, with an exact gradient.

    Evaluation points are in model units; the coefficients live over the
    basis set in standardized coordinates, exactly as a fitted expansion.
    """

    basis_set: BasisSet
    coefficients: Dict[MultiIndex, float]
    maps: Optional[list] = None      # StandardizationMap per input; identity if None

    def _standardize(self, x: np.ndarray) -> np.ndarray:
        if self.maps is None:
            return x
        return np.column_stack([m.to_standard(x[:, i])
                                for i, m in enumerate(self.maps)])

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        z = self._standardize(x)
        if not self.coefficients:
            return np.zeros(x.shape[0])
        positions = {a: j for j, a in enumerate(self.basis_set.indices)}
        cols = [positions[a] for a in self.coefficients]
        vals = np.array(list(self.coefficients.values()))
        return self.basis_set.eval_matrix(z, columns=cols) @ vals

    def gradient(self, x) -> np.ndarray:
        """Exact gradient in model units, shape (N, d)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        z = self._standardize(x)
        n, d = z.shape
        out = np.zeros((n, d))
        if not self.coefficients:
            return out
        for i in range(d):
            lam = self.basis_set.bases[i].eigenvalues
            col_of = {self.basis_set.indices[j]: c
                      for c, j in enumerate(self.basis_set.sub_indices(i))}
            touched = [(a, v) for a, v in self.coefficients.items()
                       if a[i] >= 1]
            if not touched:
                continue
            psi_d = self.basis_set.eval_deriv_matrix(i, z)
            acc = np.zeros(n)
            for a, v in touched:
                acc += v * np.sqrt(lam[a[i]]) * psi_d[:, col_of[a]]
            scale = 1.0 if self.maps is None else self.maps[i].scale
            out[:, i] = acc / scale
        return out


def synthetic_target(basis_set: BasisSet,
                     coefficients: Dict[MultiIndex, float],
                     maps=None) -> SyntheticTarget:
    coefficients = {tuple(a): float(v) for a, v in coefficients.items()}
    unknown = set(coefficients) - set(basis_set.indices)
    if unknown:
        raise ValueError(f"coefficients outside the basis set: {unknown}")
    return SyntheticTarget(basis_set, coefficients, maps)


@dataclass
class TabularData:
    """Model evaluations (and optional derivatives) from a CSV file.

    Expected header: one column per input name, a ``y`` column, and
    optionally one ``dy_<name>`` column per input.
    """

    names: List[str]
    X: np.ndarray
    y: np.ndarray
    dY: Optional[np.ndarray]

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def has_derivatives(self) -> bool:
        return self.dY is not None


def load_tabular(path, input_names: Sequence[str]) -> TabularData:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    data = np.asarray(rows)
    col = {name: j for j, name in enumerate(header)}
    missing = [n for n in list(input_names) + ["y"] if n not in col]
    if missing:
        raise ConfigError(f"data file lacks columns {missing}")
    X = data[:, [col[n] for n in input_names]]
    y = data[:, col["y"]]
    d_names = [f"dy_{n}" for n in input_names]
    if all(n in col for n in d_names):
        dY = data[:, [col[n] for n in d_names]]
    else:
        dY = None
    return TabularData(list(input_names), X, y, dY)


def save_tabular(path, names: Sequence[str], X: np.ndarray, y: np.ndarray,
                 dY: Optional[np.ndarray] = None):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        header = list(names) + ["y"]
        if dY is not None:
            header += [f"dy_{n}" for n in names]
        w.writerow(header)
        for k in range(X.shape[0]):
            row = list(X[k]) + [y[k]]
            if dY is not None:
                row += list(dY[k])
            w.writerow([format(float(v), ".17g") for v in row])
