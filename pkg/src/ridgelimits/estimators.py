"""Coefficient estimators for dense high-dimensional linear models.

All fitters take an n x p design X and an n-vector y and return an
EstimatorFit holding a p-vector of coefficients. Solvers are chosen by
shape: penalized fits go through the p x p normal equations when p <= n
and through the n x n dual system when p > n, which give the same
coefficients up to numerical roundoff.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from .errors import DegenerateFeatureError, DomainError, RankError

# Condition number bound (on X^T X) above which the unpenalized solve
# is refused.
OLS_COND_LIMIT = 1e12

# Relative singular value cutoff factor for the minimum-norm solve.
RIDGELESS_RTOL_FACTOR = 8.0

# Columns whose variance falls below this cannot be standardized.
VARIANCE_FLOOR = 1e-12


class EstimatorKind(enum.Enum):
    MARGINAL = "marginal"
    RIDGE = "ridge"
    RIDGELESS = "ridgeless"
    OLS = "ols"
    BLUP = "blup"
    META = "meta"


@dataclass(frozen=True)
class EstimatorFit:
    """Fitted coefficient vector with its provenance."""

    coefficients: np.ndarray
    kind: EstimatorKind
    n: int
    p: int
    penalty: float | None = None  # lam for ridge, tau for blup, else None

    def __post_init__(self):
        beta = np.asarray(self.coefficients, dtype=float)
        if beta.ndim != 1 or beta.shape[0] != self.p:
            raise DomainError("coefficients must be a 1-D vector of length p")
        object.__setattr__(self, "coefficients", beta)


@dataclass(frozen=True)
class SummaryPanel:
    """Per-study coefficient vectors plus study sample sizes.

    coefficients has shape (p, k) with one column per study.
    """

    coefficients: np.ndarray
    study_sizes: tuple

    def __post_init__(self):
        coefs = np.asarray(self.coefficients, dtype=float)
        if coefs.ndim != 2:
            raise DomainError("panel coefficients must be a p x k matrix")
        if coefs.shape[1] != len(self.study_sizes):
            raise DomainError(
                f"{coefs.shape[1]} coefficient columns but "
                f"{len(self.study_sizes)} study sizes"
            )
        for n_i in self.study_sizes:
            if n_i <= 0 or n_i != int(n_i):
                raise DomainError(f"study sizes must be positive integers, got {n_i!r}")
        object.__setattr__(self, "coefficients", coefs)
        object.__setattr__(self, "study_sizes", tuple(int(n_i) for n_i in self.study_sizes))

    @property
    def p(self) -> int:
        return self.coefficients.shape[0]

    @property
    def n_studies(self) -> int:
        return self.coefficients.shape[1]


def _check_design(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise DomainError("X must be a 2-D array")
    if y.ndim != 1 or y.shape[0] != X.shape[0]:
        raise DomainError("y must be a 1-D array with one entry per row of X")
    if X.shape[0] < 2 or X.shape[1] < 1:
        raise DomainError("X needs at least two rows and one column")
    return X, y


def standardize_columns(X) -> np.ndarray:
    """Center each column and scale to unit variance (divisor n).

    Raises DegenerateFeatureError naming the first column whose variance
    falls below 1e-12.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DomainError("X must be a 2-D array")
    centered = X - X.mean(axis=0)
    var = np.mean(centered**2, axis=0)
    bad = np.flatnonzero(var < VARIANCE_FLOOR)
    if bad.size:
        raise DegenerateFeatureError(
            f"column {bad[0]} has variance {var[bad[0]]:.3e}, below {VARIANCE_FLOOR}"
        )
    return centered / np.sqrt(var)


def fit_marginal(X, y, shortcut: bool = False) -> EstimatorFit:
    """Column-wise regression coefficients.

    The exact form divides each X^T y entry by that column's squared norm.
    With shortcut=True the common divisor n is used instead, which matches
    the exact form exactly on standardized columns and is the form whose
    weighted sums aggregate across studies.
    """
    X, y = _check_design(X, y)
    n = X.shape[0]
    xty = X.T @ y
    if shortcut:
        beta = xty / n
    else:
        colsq = np.einsum("ij,ij->j", X, X)
        if np.any(colsq <= 0):
            raise DegenerateFeatureError("a column of X has zero norm")
        beta = xty / colsq
    return EstimatorFit(beta, EstimatorKind.MARGINAL, n=n, p=X.shape[1])


def fit_ridge(X, y, lam: float) -> EstimatorFit:
    """Ridge coefficients (X^T X + lam*n*I)^{-1} X^T y.

    Solved in the p x p primal form when p <= n and through the equivalent
    n x n dual form when p > n.
    """
    X, y = _check_design(X, y)
    if not (math.isfinite(lam) and lam > 0):
        raise DomainError(
            f"lam must be positive and finite, got {lam!r}; "
            "use fit_ridgeless or fit_ols for the unpenalized solves"
        )
    n, p = X.shape
    shift = lam * n
    if p <= n:
        G = X.T @ X
        G[np.diag_indices_from(G)] += shift
        beta = sla.solve(G, X.T @ y, assume_a="pos")
    else:
        K = X @ X.T
        K[np.diag_indices_from(K)] += shift
        beta = X.T @ sla.solve(K, y, assume_a="pos")
    return EstimatorFit(beta, EstimatorKind.RIDGE, n=n, p=p, penalty=float(lam))


def fit_blup(X, y, tau: float) -> EstimatorFit:
    """Best-linear-prediction coefficients X^T (X X^T + tau*p*I)^{-1} y.

    Identical to ridge at lam = tau * p / n; always an n x n solve.
    """
    X, y = _check_design(X, y)
    if not (math.isfinite(tau) and tau > 0):
        raise DomainError(f"tau must be positive and finite, got {tau!r}")
    n, p = X.shape
    K = X @ X.T
    K[np.diag_indices_from(K)] += tau * p
    beta = X.T @ sla.solve(K, y, assume_a="pos")
    return EstimatorFit(beta, EstimatorKind.BLUP, n=n, p=p, penalty=float(tau))


def _svd_cutoff(s: np.ndarray, n: int, p: int) -> float:
    return max(n, p) * np.finfo(float).eps * RIDGELESS_RTOL_FACTOR * s[0]


def fit_ridgeless(X, y) -> EstimatorFit:
    """Minimum-norm least squares via SVD.

    Singular values below max(n, p) * eps * 8 relative to the largest are
    treated as zero.
    """
    X, y = _check_design(X, y)
    n, p = X.shape
    u, s, vt = np.linalg.svd(X, full_matrices=False)
    keep = s > _svd_cutoff(s, n, p)
    coef = (u.T @ y)[keep] / s[keep]
    beta = vt[keep].T @ coef
    return EstimatorFit(beta, EstimatorKind.RIDGELESS, n=n, p=p)


def fit_ols(X, y) -> EstimatorFit:
    """Ordinary least squares; requires n > p and a well-conditioned design."""
    X, y = _check_design(X, y)
    n, p = X.shape
    if n <= p:
        raise RankError(f"ols needs n > p, got n={n}, p={p}")
    u, s, vt = np.linalg.svd(X, full_matrices=False)
    if s[-1] <= 0 or (s[0] / s[-1]) ** 2 >= OLS_COND_LIMIT:
        raise RankError(
            "normal equations condition number "
            f"{(s[0] / max(s[-1], 1e-300)) ** 2:.3e} exceeds {OLS_COND_LIMIT:.0e}"
        )
    beta = vt.T @ ((u.T @ y) / s)
    return EstimatorFit(beta, EstimatorKind.OLS, n=n, p=p)


def meta_aggregate(panel: SummaryPanel, weights=None) -> EstimatorFit:
    """Weighted combination of per-study coefficient vectors.

    weights defaults to the study sample sizes, the variance-minimizing
    choice for equally powered designs. Weights are normalized to sum to 1,
    so size weights applied to the common-divisor marginal form reproduce
    the pooled-data fit exactly.
    """
    if weights is None:
        weights = np.asarray(panel.study_sizes, dtype=float)
    else:
        weights = np.asarray(weights, dtype=float)
    if weights.ndim != 1 or weights.shape[0] != panel.n_studies:
        raise DomainError("need one weight per study")
    if np.any(weights <= 0) or not np.all(np.isfinite(weights)):
        raise DomainError("weights must be positive and finite")
    weights = weights / weights.sum()
    beta = panel.coefficients @ weights
    return EstimatorFit(
        beta,
        EstimatorKind.META,
        n=int(sum(panel.study_sizes)),
        p=panel.p,
    )
