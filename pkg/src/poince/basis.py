"""Multi-index sets and tensor-product evaluation of multivariate bases.

Index sets are generated either by total degree (sum of orders <= p) or by
hyperbolic truncation with an l^q quasi-norm, q in (0, 1]. Enumeration is
graded-lexicographic: ascending total degree, then descending by leading
entries, so that the set for degree p is a prefix of the set for any larger
degree. Tensor-product values and the normalized partial-derivative rows
used by derivative regressions are assembled from per-dimension tables.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .errors import DomainError
from .poincare1d import PoincareBasis1D

MultiIndex = Tuple[int, ...]


def _graded_lex_key(alpha: MultiIndex):
    return (sum(alpha), tuple(-a for a in alpha))


def _enumerate(d: int, p: int, q: float) -> List[MultiIndex]:
    """Depth-first enumeration under the budget sum(alpha_i^q) <= p^q.

    Recursion prunes on the remaining budget, so the cost is proportional
    to the output size times d even when the total-degree superset would be
    astronomically large (e.g. d = 37, p = 8, q = 0.5).
    """
    budget = float(p) ** q
    tol = 1e-9 * max(1.0, budget)
    out: List[MultiIndex] = []
    prefix = [0] * d

    def rec(i: int, remaining: float):
        if i == d:
            out.append(tuple(prefix))
            return
        v = 0
        while True:
            cost = float(v) ** q
            if cost > remaining + tol:
                break
            prefix[i] = v
            rec(i + 1, remaining - cost)
            v += 1
        prefix[i] = 0

    rec(0, budget)
    out.sort(key=_graded_lex_key)
    return out


def total_degree(d: int, p: int) -> List[MultiIndex]:
    """All multi-indices with sum(alpha) <= p, graded-lex ordered."""
    if d < 1 or p < 0:
        raise ValueError("need d >= 1 and p >= 0")
    return _enumerate(d, p, 1.0)


def hyperbolic(d: int, p: int, q: float) -> List[MultiIndex]:
    """Multi-indices with (sum alpha_i^q)^(1/q) <= p; q = 1 is total degree."""
    if not 0.0 < q <= 1.0:
        raise ValueError(f"hyperbolic exponent q must lie in (0, 1], got {q}")
    if d < 1 or p < 0:
        raise ValueError("need d >= 1 and p >= 0")
    return _enumerate(d, p, q)


@dataclass
class BasisSet:
    """An enumerated multivariate basis over per-dimension spectral bases."""

    indices: List[MultiIndex]
    bases: List[PoincareBasis1D]
    p: int
    q: float = 1.0

    @classmethod
    def build(cls, bases: Sequence[PoincareBasis1D], p: int,
              q: float = 1.0) -> "BasisSet":
        d = len(bases)
        idx = hyperbolic(d, p, q)
        max_order = max((max(a) for a in idx), default=0)
        for b in bases:
            if b.p_max < max_order:
                raise ValueError(
                    f"1D basis holds orders up to {b.p_max} "
                    f"but the index set needs {max_order}")
        return cls(idx, list(bases), p, q)

    @property
    def d(self) -> int:
        return len(self.bases)

    def __len__(self) -> int:
        return len(self.indices)

    def position(self, alpha: MultiIndex) -> int:
        return self.indices.index(tuple(alpha))

    def sub_indices(self, i: int) -> List[int]:
        """Positions of the indices with a nonzero order in dimension i."""
        if not 0 <= i < self.d:
            raise DomainError(f"dimension {i} outside 0..{self.d - 1}")
        return [j for j, a in enumerate(self.indices) if a[i] >= 1]

    # -- evaluation (standardized coordinates) ------------------------------

    def _tables(self, X: np.ndarray, deriv_dim: int = -1):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.d:
            raise DomainError(f"points have {X.shape[1]} coordinates, "
                              f"basis set has d = {self.d}")
        max_order = max((max(a) for a in self.indices), default=0)
        vals = [b.eval_table(X[:, i], min(max_order, b.p_max))
                for i, b in enumerate(self.bases)]
        dval = None
        if deriv_dim >= 0:
            dval = self.bases[deriv_dim].eval_deriv_table(
                X[:, deriv_dim], min(max_order, self.bases[deriv_dim].p_max))
        return X, vals, dval

    def eval_matrix(self, X, columns: Sequence[int] | None = None) -> np.ndarray:
        """Regression matrix with entries Phi_alpha(x_k), shape (N, |A|).

        ``columns`` restricts the evaluation to a subset of index positions
        (used when evaluating sparse surrogates at many points).
        """
        X, vals, _ = self._tables(X)
        cols = range(len(self.indices)) if columns is None else columns
        out = np.ones((X.shape[0], len(cols)))
        for pos, j in enumerate(cols):
            for i, a in enumerate(self.indices[j]):
                if a:
                    out[:, pos] *= vals[i][:, a]
        return out

    def eval_deriv_matrix(self, i: int, X) -> np.ndarray:
        """Normalized partial-derivative rows over the indices with alpha_i >= 1.

        Entry (k, j) is ``d Phi_alpha_j / d x_i (x_k) / sqrt(lambda_{i, alpha_j_i})``;
        columns follow :meth:`sub_indices`.
        """
        sub = self.sub_indices(i)
        X, vals, dval = self._tables(X, deriv_dim=i)
        lam = self.bases[i].eigenvalues
        out = np.ones((X.shape[0], len(sub)))
        for col, j in enumerate(sub):
            alpha = self.indices[j]
            out[:, col] = dval[:, alpha[i]] / np.sqrt(lam[alpha[i]])
            for dim, a in enumerate(alpha):
                if a and dim != i:
                    out[:, col] *= vals[dim][:, a]
        return out

    def eval_row(self, x) -> np.ndarray:
        """Single-point row of Phi_alpha(x) in enumeration order."""
        return self.eval_matrix(np.asarray(x, dtype=float)[None, :])[0]

    def eval_deriv_row(self, i: int, x) -> np.ndarray:
        return self.eval_deriv_matrix(i, np.asarray(x, dtype=float)[None, :])[0]
