"""Experimental designs: maximin Latin hypercubes and Monte Carlo samples.

Points are produced in the units of the marginals passed in (inverse-CDF
mapping of unit-hypercube samples). Designs are pure functions of
(marginals, N, seed), so replications with distinct seeds can run
concurrently and reproduce bit-identically.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy.spatial.distance import pdist

from .errors import ConfigError
from .marginals import Marginal


@dataclass
class ExperimentalDesign:
    X: np.ndarray          # (N, d), marginal units
    seed: int
    kind: str              # 'lhs-maximin' or 'mc'
    names: Optional[List[str]] = None

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def save_csv(self, path):
        names = self.names or [f"x{i + 1}" for i in range(self.d)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(names)
            for row in self.X:
                w.writerow([format(v, ".17g") for v in row])


def load_design_csv(path, kind: str = "mc", seed: int = 0) -> ExperimentalDesign:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        names = next(r)
        rows = [[float(v) for v in row] for row in r if row]
    return ExperimentalDesign(np.asarray(rows), seed, kind, names)


def _lhs_unit(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    """One Latin hypercube in [0,1]^d with uniform jitter inside each cell."""
    u = np.empty((n, d))
    for j in range(d):
        perm = rng.permutation(n)
        u[:, j] = (perm + rng.random(n)) / n
    return u


def lhs_maximin(marginals: Sequence[Marginal], n: int, seed: int,
                n_restarts: int = 50,
                names: Optional[Sequence[str]] = None) -> ExperimentalDesign:
    """Latin hypercube with maximin-distance optimization by random restarts.

    Among ``n_restarts`` independent hypercubes the one maximizing the
    minimal pairwise Euclidean distance (in the unit cube) is kept, then
    mapped through the marginal quantile functions.
    """
    if n < 1:
        raise ConfigError("design size must be >= 1")
    rng = np.random.default_rng(seed)
    d = len(marginals)
    best, best_dist = None, -np.inf
    for _ in range(max(1, n_restarts)):
        u = _lhs_unit(rng, n, d)
        dist = pdist(u).min() if n > 1 else np.inf
        if dist > best_dist:
            best, best_dist = u, dist
    X = np.column_stack([m.quantile(best[:, j])
                         for j, m in enumerate(marginals)])
    return ExperimentalDesign(X, seed, "lhs-maximin",
                              list(names) if names else None)


def mc_sample(marginals: Sequence[Marginal], n: int, seed: int,
              names: Optional[Sequence[str]] = None) -> ExperimentalDesign:
    """I.i.d. inverse-CDF sample of size ``n``."""
    if n < 1:
        raise ConfigError("design size must be >= 1")
    rng = np.random.default_rng(seed)
    u = rng.random((n, len(marginals)))
    X = np.column_stack([m.quantile(u[:, j])
                         for j, m in enumerate(marginals)])
    return ExperimentalDesign(X, seed, "mc", list(names) if names else None)


def subsample_without_replacement(n_pool: int, n: int, seed: int) -> np.ndarray:
    """Row indices for drawing ``n`` points from a fixed data pool."""
    if n > n_pool:
        raise ConfigError(f"cannot draw {n} points from a pool of {n_pool}")
    rng = np.random.default_rng(seed)
    return rng.choice(n_pool, size=n, replace=False)
