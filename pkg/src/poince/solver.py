"""Regression engines: OLS, hybrid least-angle regression, LOO selection.

The sparse solver runs a least-angle-regression path on standardized
columns to obtain an activation order, refits each path prefix by ordinary
least squares on the raw columns (the "hybrid" step), and selects the
prefix minimizing the corrected leave-one-out error

    loo = T(N, P_a) * mean_k (r_k / (1 - h_k))^2 / var(y),
    T(N, P_a) = N / (N - P_a) * (1 + trace((Psi_a^T Psi_a)^{-1})),

where r are OLS residuals, h the leverages of the active-column hat matrix
and P_a the number of active columns. Prefix models grow by one column at
a time through an incremental thin-QR factorization, which keeps the whole
path evaluation at O(N k^2) for k selected columns.

Degree adaptivity refits the same data on candidate bases of increasing
degree and keeps the fit with the smallest corrected LOO; no new model
evaluations are required.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import qr, solve_triangular

from .errors import SingularMatrixError

_PATH_PATIENCE = 50          # prefixes without a new LOO minimum before stopping
_DEGREE_PATIENCE = 2         # consecutive LOO increases before stopping degrees
_RANK_TOL = 1e-10


@dataclass
class RegressionProblem:
    psi: np.ndarray
    y: np.ndarray
    labels: Optional[List[tuple]] = None

    def __post_init__(self):
        self.psi = np.atleast_2d(np.asarray(self.psi, dtype=float))
        self.y = np.asarray(self.y, dtype=float).ravel()
        if self.psi.shape[0] != self.y.shape[0]:
            raise ValueError("regression matrix and data length mismatch")
        if not (np.all(np.isfinite(self.psi)) and np.all(np.isfinite(self.y))):
            raise ValueError("non-finite entries in the regression problem")

    @property
    def shape(self) -> Tuple[int, int]:
        return self.psi.shape


@dataclass
class FitResult:
    """Sparse regression result: dense coefficient vector, zeros inactive."""

    coefficients: np.ndarray
    active: List[int]
    loo_error: float
    labels: Optional[List[tuple]] = None
    p_star: Optional[int] = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_active(self) -> int:
        return len(self.active)

    def coefficient_map(self) -> dict:
        if self.labels is None:
            raise ValueError("fit carries no column labels")
        return {self.labels[j]: self.coefficients[j] for j in self.active
                if self.coefficients[j] != 0.0}


def ols(problem: RegressionProblem) -> np.ndarray:
    """Least-squares coefficients by economy QR; requires full column rank."""
    psi, y = problem.psi, problem.y
    n, p = psi.shape
    if n < p:
        raise SingularMatrixError(f"OLS needs N >= P, got N={n}, P={p}")
    q_mat, r_mat = qr(psi, mode="economic")
    diag = np.abs(np.diag(r_mat))
    if diag.size and diag.min() <= _RANK_TOL * max(diag.max(), 1.0):
        raise SingularMatrixError("rank-deficient regression matrix")
    return solve_triangular(r_mat, q_mat.T @ y, lower=False)


class _IncrementalOLS:
    """OLS models growing one column at a time via thin QR (CGS, 2 passes).

    Maintains Q (orthonormal columns), R, Q^T y, the residual, the
    leverages and trace((X^T X)^{-1}); each quantity is updated in
    O(N k) / O(k^2) per added column.
    """

    def __init__(self, y: np.ndarray, max_cols: int):
        self.y = y
        n = y.shape[0]
        self.n = n
        self.q = np.empty((n, max_cols), order="F")
        self.r = np.zeros((max_cols, max_cols))
        self.qty = np.empty(max_cols)
        self.k = 0
        self.residual = y.copy()
        self.leverage = np.zeros(n)
        self.trace_inv = 0.0

    def try_add(self, x: np.ndarray) -> bool:
        """Add a column; returns False (and leaves state intact) if collinear."""
        k = self.k
        nx2 = x @ x
        u = x.copy()
        rvec = np.zeros(k)
        for _ in range(2):
            proj = self.q[:, :k].T @ u
            u -= self.q[:, :k] @ proj
            rvec += proj
        d2 = u @ u
        if d2 <= 1e-20 * max(nx2, 1e-300):
            return False
        delta = np.sqrt(d2)
        u /= delta
        if k:
            rinv_r = solve_triangular(self.r[:k, :k], rvec, lower=False)
            self.trace_inv += (rinv_r @ rinv_r + 1.0) / d2
        else:
            self.trace_inv = 1.0 / d2
        self.q[:, k] = u
        self.r[:k, k] = rvec
        self.r[k, k] = delta
        c = u @ self.y
        self.qty[k] = c
        self.residual = self.residual - c * u
        self.leverage = self.leverage + u ** 2
        self.k = k + 1
        return True

    def corrected_loo(self, denom: float) -> float:
        """Corrected LOO of the current model, normalized by ``denom``."""
        n, pa = self.n, self.k
        if pa >= n:
            return np.inf
        one_minus_h = 1.0 - self.leverage
        if np.any(one_minus_h <= 1e-10):
            return np.inf
        err = np.mean((self.residual / one_minus_h) ** 2)
        t = n / (n - pa) * (1.0 + self.trace_inv)
        return err * t / denom

    def coefficients(self) -> np.ndarray:
        k = self.k
        if k == 0:
            return np.zeros(0)
        return solve_triangular(self.r[:k, :k], self.qty[:k], lower=False)


def _loo_denominator(y: np.ndarray) -> float:
    var = float(np.var(y, ddof=1)) if y.size > 1 else 0.0
    if var > 1e-300:
        return var
    second = float(np.mean(y ** 2))
    return second if second > 1e-300 else 1.0


def loo_corrected(problem: RegressionProblem,
                  active: Sequence[int]) -> float:
    """Corrected leave-one-out error of OLS on the given active columns."""
    inc = _IncrementalOLS(problem.y, len(active))
    for j in active:
        if not inc.try_add(problem.psi[:, j].copy()):
            raise SingularMatrixError(f"active column {j} is collinear")
    return inc.corrected_loo(_loo_denominator(problem.y))


def _lars_iter(x: np.ndarray, y: np.ndarray, max_steps: int, trace=None):
    """Yield LAR activations one at a time on prepared (scaled) columns.

    The path state lives in preallocated Fortran-ordered buffers so that
    per-step work is two matrix-vector products on the full column block
    plus O(k^2) triangular solves; no submatrix copies.
    """
    n, p = x.shape
    norms = np.sqrt((x ** 2).sum(axis=0))
    usable = norms > 1e-14 * max(norms.max(), 1e-300)
    xs = np.asfortranarray(x / np.where(usable, norms, 1.0))
    resid = y.copy()
    active: List[int] = []
    is_active = ~usable                      # unusable columns never activate
    xa = np.empty((n, max_steps), order="F")
    l_chol = np.zeros((max_steps, max_steps))
    beta = np.zeros(p)
    y_scale = max(1.0, float(np.sqrt(y @ y)))

    while len(active) < max_steps and not is_active.all():
        corr = xs.T @ resid
        corr_masked = np.where(is_active, 0.0, np.abs(corr))
        j = int(np.argmax(corr_masked))
        big_c = corr_masked[j]
        if big_c < 1e-12 * y_scale:
            break
        k = len(active)
        g = xa[:, :k].T @ xs[:, j]
        w = solve_triangular(l_chol[:k, :k], g, lower=True) if k else g
        d2 = 1.0 - w @ w
        if d2 <= 1e-12:
            is_active[j] = True              # collinear with active set: drop
            continue
        l_chol[k, :k] = w
        l_chol[k, k] = np.sqrt(d2)
        xa[:, k] = xs[:, j]
        active.append(j)
        is_active[j] = True
        k += 1

        sgn = np.sign(corr[active])
        z = solve_triangular(l_chol[:k, :k], sgn, lower=True)
        a_norm = 1.0 / np.sqrt(z @ z)
        wvec = a_norm * solve_triangular(l_chol[:k, :k].T, z, lower=False)
        u = xa[:, :k] @ wvec
        if is_active.all():
            gamma = big_c / a_norm
        else:
            a_corr = xs.T @ u
            free = ~is_active
            cc, aa = corr[free], a_corr[free]
            with np.errstate(divide="ignore", invalid="ignore"):
                cand = np.concatenate([(big_c - cc) / (a_norm - aa),
                                       (big_c + cc) / (a_norm + aa)])
            cand = cand[cand > 1e-14]
            gamma = min(float(cand.min()) if cand.size else np.inf,
                        big_c / a_norm)
        resid -= gamma * u
        beta[active] += gamma * wvec
        if trace is not None:
            trace["residuals"].append(resid.copy())
            trace["active"].append(list(active))
            trace["beta"].append(beta.copy())
        yield j


def lars_path(x: np.ndarray, y: np.ndarray, max_steps: Optional[int] = None,
              return_trace: bool = False):
    """Least-angle-regression activation order on prepared columns.

    ``x`` is used as given (standardize and center beforehand when
    appropriate). Returns the list of activated column positions; with
    ``return_trace`` also a record with per-step residuals, active sets and
    path coefficients, used by diagnostic checks.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = x.shape
    max_steps = min(n - 1, p) if max_steps is None else min(max_steps, n - 1, p)
    trace = {"residuals": [], "active": [], "beta": []} if return_trace else None
    order = list(_lars_iter(x, y, max_steps, trace=trace))
    if return_trace:
        return order, trace
    return order


def hybrid_lars(problem: RegressionProblem,
                max_active: Optional[int] = None,
                path_patience: int = _PATH_PATIENCE) -> FitResult:
    """LARS activation order + per-prefix OLS refits + corrected-LOO choice.

    A column of ones (labelled by the zero multi-index when labels are
    present) is treated as an always-active intercept; the path then runs
    on centered, norm-scaled columns. Degenerate constant data yields the
    constant-only fit. The path stops after ``path_patience`` prefixes
    without improving the LOO minimum.
    """
    psi, y = problem.psi, problem.y
    n, p = psi.shape
    cap = min(n - 1, p) if max_active is None else min(max_active, n - 1, p)
    denom = _loo_denominator(problem.y)

    intercept_col = _find_intercept(problem)
    if intercept_col is not None:
        centered = psi - psi.mean(axis=0, keepdims=True)
        centered[:, intercept_col] = 0.0
        y_path = y - y.mean()
    else:
        centered = psi
        y_path = y

    coefficients = np.zeros(p)
    base_cols = [] if intercept_col is None else [intercept_col]
    inc = _IncrementalOLS(y, max(cap, 1))
    for j in base_cols:
        inc.try_add(psi[:, j].copy())
    best = (inc.corrected_loo(denom), inc.k, 0)
    best_active: List[int] = list(base_cols)

    if float(np.mean(y_path ** 2)) > 1e-28 * max(1.0, float(np.mean(y ** 2))):
        steps = _lars_iter(centered, y_path, cap - len(base_cols))
        prefix: List[int] = list(base_cols)
        since_best = 0
        for step, j in enumerate(steps, start=1):
            if not inc.try_add(psi[:, j].copy()):
                break
            prefix.append(j)
            cand = (inc.corrected_loo(denom), inc.k, step)
            if cand[:2] < best[:2]:
                best = cand
                best_active = list(prefix)
                since_best = 0
            else:
                since_best += 1
                if since_best >= path_patience:
                    break

    refit = _IncrementalOLS(y, max(len(best_active), 1))
    for j in best_active:
        refit.try_add(psi[:, j].copy())
    coefs = refit.coefficients()
    for j, c in zip(best_active, coefs):
        coefficients[j] = c
    return FitResult(coefficients, sorted(best_active), float(best[0]),
                     labels=problem.labels,
                     diagnostics={"path_len": best[2]})


def _find_intercept(problem: RegressionProblem) -> Optional[int]:
    if problem.labels is not None:
        for j, lab in enumerate(problem.labels):
            if tuple(lab) == tuple([0] * len(lab)):
                return j
        return None
    col_range = problem.psi.max(axis=0) - problem.psi.min(axis=0)
    const = np.flatnonzero((col_range == 0.0) & (problem.psi[0] != 0.0))
    return int(const[0]) if const.size else None


def degree_adaptive_fit(candidates: Iterable[Tuple[int, RegressionProblem]],
                        max_active: Optional[int] = None,
                        path_patience: int = _PATH_PATIENCE,
                        degree_patience: int = _DEGREE_PATIENCE) -> FitResult:
    """Fit every candidate degree and keep the smallest corrected LOO.

    ``candidates`` yields (degree, problem) pairs in ascending degree; the
    sweep stops early once the LOO has increased for ``degree_patience``
    consecutive degrees. Ties favor fewer active terms, then lower degree.
    """
    best_key = None
    best_fit = None
    history = []
    prev_loo = np.inf
    increases = 0
    for p_deg, problem in candidates:
        fit = hybrid_lars(problem, max_active=max_active,
                          path_patience=path_patience)
        history.append((p_deg, fit.loo_error, fit.n_active))
        key = (fit.loo_error, fit.n_active, p_deg)
        if best_key is None or key < best_key:
            best_key = key
            best_fit = fit
            best_fit.p_star = p_deg
        increases = increases + 1 if fit.loo_error > prev_loo else 0
        prev_loo = fit.loo_error
        if increases >= degree_patience:
            break
    if best_fit is None:
        raise ValueError("empty degree range")
    best_fit.diagnostics["degree_history"] = history
    return best_fit
