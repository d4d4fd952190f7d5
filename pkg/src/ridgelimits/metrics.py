"""Accuracy metrics: squared-correlation R2 and exact conditional MSE splits."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, RankError, UnsupportedSigmaError
from .estimators import (
    OLS_COND_LIMIT,
    EstimatorFit,
    EstimatorKind,
    _svd_cutoff,
)
from .spectral import SpectralModel

# Prediction norms below this fraction of the response norm count as a
# degenerate (zero) predictor.
ZERO_PREDICTOR_REL = 1e-14


@dataclass(frozen=True)
class R2Result:
    r2: float
    cosine: float
    kind: str  # "out_of_sample" or "in_sample"
    zero_predictor: bool = False


@dataclass(frozen=True)
class MseDecomposition:
    """Bias-variance split; total is always bias_sq + variance."""

    total: float
    bias_sq: float
    variance: float
    tag: str = ""


def _coefficients(fit) -> np.ndarray:
    if isinstance(fit, EstimatorFit):
        return fit.coefficients
    beta = np.asarray(fit, dtype=float)
    if beta.ndim != 1:
        raise DomainError("coefficients must be a 1-D vector")
    return beta


def _r2(beta: np.ndarray, design: np.ndarray, response: np.ndarray, kind: str) -> R2Result:
    design = np.asarray(design, dtype=float)
    response = np.asarray(response, dtype=float)
    if design.ndim != 2 or response.ndim != 1 or design.shape[0] != response.shape[0]:
        raise DomainError("design must be 2-D with one response per row")
    if design.shape[1] != beta.shape[0]:
        raise DomainError("coefficient length does not match design width")
    y = response - response.mean()
    yhat = design @ beta
    yhat = yhat - yhat.mean()
    ny = float(np.linalg.norm(y))
    nh = float(np.linalg.norm(yhat))
    if ny == 0.0:
        raise DomainError("response is constant; R2 undefined")
    if nh < ZERO_PREDICTOR_REL * ny:
        return R2Result(r2=0.0, cosine=0.0, kind=kind, zero_predictor=True)
    cosine = float(y @ yhat) / (ny * nh)
    return R2Result(r2=cosine * cosine, cosine=cosine, kind=kind)


def r2_out_of_sample(fit, Z, y_z) -> R2Result:
    """Squared correlation between Z @ beta and y_z, both mean-centered."""
    return _r2(_coefficients(fit), Z, y_z, "out_of_sample")


def r2_in_sample(fit, X, y) -> R2Result:
    """Squared correlation between X @ beta and y on the training data."""
    return _r2(_coefficients(fit), X, y, "in_sample")


def _sigma_weights(sigma, p: int):
    # Returns ("diag", vector) or ("full", matrix) for the quadratic norm.
    if isinstance(sigma, SpectralModel):
        if sigma.is_identity:
            return "diag", np.ones(p)
        if sigma.kind == "point_masses":
            return "diag", diagonal_sigma_layout(sigma, p)
        raise UnsupportedSigmaError(
            "explicit spectra carry no eigenvector convention; pass the "
            "covariance matrix (or its diagonal) directly"
        )
    arr = np.asarray(sigma, dtype=float)
    if arr.ndim == 1:
        if arr.shape[0] != p:
            raise DomainError("diagonal sigma length does not match p")
        return "diag", arr
    if arr.ndim == 2 and arr.shape == (p, p):
        return "full", arr
    raise DomainError("sigma must be a SpectralModel, a p-vector, or a p x p matrix")


def diagonal_sigma_layout(spec: SpectralModel, p: int) -> np.ndarray:
    """Deterministic diagonal realization of a point-mass spectrum.

    Atom counts are the weights times p, rounded by largest remainder so
    they always total p, laid out contiguously in the listed atom order.
    """
    if spec.is_identity:
        return np.ones(p)
    if spec.kind != "point_masses":
        raise UnsupportedSigmaError("diagonal layout needs a point-mass spectrum")
    eigs, weights = spec.atoms()
    exact = weights * p
    counts = np.floor(exact).astype(int)
    short = p - int(counts.sum())
    if short:
        order = np.argsort(-(exact - counts))
        counts[order[:short]] += 1
    return np.repeat(eigs, counts)


def mse_decomposition(
    X,
    beta_true,
    sigma_eps: float,
    kind: EstimatorKind,
    sigma=SpectralModel.identity(),
    lam: float | None = None,
    tau: float | None = None,
) -> MseDecomposition:
    """Exact conditional bias-variance split of an estimator given the design.

    For the linear estimator beta_hat = M y with y = X beta + eps this is
        bias_sq = (M X beta - beta)' Sigma (M X beta - beta)
        variance = sigma_eps^2 * tr(M M' Sigma)
    in the population-covariance quadratic norm. sigma may be a
    SpectralModel (identity, or point masses realized on the diagonal in
    listed order) or an explicit diagonal / full matrix.
    """
    X = np.asarray(X, dtype=float)
    beta_true = np.asarray(beta_true, dtype=float)
    if X.ndim != 2 or beta_true.ndim != 1 or beta_true.shape[0] != X.shape[1]:
        raise DomainError("X must be n x p and beta_true a p-vector")
    if not (math.isfinite(sigma_eps) and sigma_eps >= 0):
        raise DomainError(f"sigma_eps must be a nonnegative noise scale, got {sigma_eps!r}")
    n, p = X.shape
    mode, sig = _sigma_weights(sigma, p)

    def quad(vec):
        if mode == "diag":
            return float(np.sum(sig * vec * vec))
        return float(vec @ sig @ vec)

    if kind == EstimatorKind.MARGINAL:
        colsq = np.einsum("ij,ij->j", X, X)
        if np.any(colsq <= 0):
            raise DomainError("a column of X has zero norm")
        mean_beta = (X.T @ (X @ beta_true)) / colsq
        # rows of M are X columns over their squared norms
        if mode == "diag":
            var = sigma_eps**2 * float(np.sum(sig / colsq))
        else:
            G = X.T @ X
            var = sigma_eps**2 * float(np.sum(sig * G / np.outer(colsq, colsq)))
    else:
        if kind == EstimatorKind.BLUP:
            if tau is None:
                raise DomainError("blup needs tau")
            lam = tau * p / n
            kind_for_filter = EstimatorKind.RIDGE
        else:
            kind_for_filter = kind
        u, s, vt = np.linalg.svd(X, full_matrices=False)
        if kind_for_filter == EstimatorKind.RIDGE:
            if lam is None or lam <= 0:
                raise DomainError("ridge needs lam > 0")
            f = s / (s**2 + lam * n)
        elif kind_for_filter == EstimatorKind.RIDGELESS:
            keep = s > _svd_cutoff(s, n, p)
            f = np.where(keep, 1.0 / np.where(keep, s, 1.0), 0.0)
        elif kind_for_filter == EstimatorKind.OLS:
            if n <= p:
                raise RankError(f"ols needs n > p, got n={n}, p={p}")
            if s[-1] <= 0 or (s[0] / s[-1]) ** 2 >= OLS_COND_LIMIT:
                raise RankError("design too ill-conditioned for the unpenalized solve")
            f = 1.0 / s
        else:
            raise DomainError(f"no conditional MSE decomposition for {kind!r}")
        V = vt.T  # p x k eigenvector block
        mean_beta = V @ ((f * s) * (vt @ beta_true))
        if mode == "diag":
            col_quad = (V * V).T @ sig  # v_k' Sigma v_k per singular direction
        else:
            col_quad = np.einsum("jk,jk->k", V, sig @ V)
        var = sigma_eps**2 * float(np.sum(f**2 * col_quad))

    bias_vec = mean_beta - beta_true
    bias_sq = quad(bias_vec)
    return MseDecomposition(
        total=bias_sq + var,
        bias_sq=bias_sq,
        variance=var,
        tag=f"{kind.value}_empirical",
    )
