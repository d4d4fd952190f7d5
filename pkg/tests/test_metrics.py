import numpy as np
import pytest

from ridgelimits.errors import DomainError, UnsupportedSigmaError
from ridgelimits.estimators import EstimatorKind, fit_ridge, standardize_columns
from ridgelimits.metrics import (
    diagonal_sigma_layout,
    mse_decomposition,
    r2_in_sample,
    r2_out_of_sample,
)
from ridgelimits.spectral import SpectralModel


def test_r2_perfect_prediction():
    rng = np.random.default_rng(0)
    Z = rng.standard_normal((50, 4))
    beta = np.array([1.0, -2.0, 0.5, 3.0])
    res = r2_out_of_sample(beta, Z, Z @ beta)
    assert res.r2 == pytest.approx(1.0, abs=1e-12)
    assert not res.zero_predictor


def test_r2_is_squared_correlation_after_centering():
    rng = np.random.default_rng(1)
    Z = rng.standard_normal((200, 3))
    beta = np.array([1.0, 0.0, 0.0])
    y = Z @ np.array([1.0, 1.0, 0.0]) + 5.0  # shifted target
    res = r2_out_of_sample(beta, Z, y)
    pred = Z @ beta
    corr = np.corrcoef(pred, y)[0, 1]
    assert res.r2 == pytest.approx(corr**2, rel=1e-12)
    assert res.cosine == pytest.approx(corr, rel=1e-12)


def test_r2_affine_target_invariance():
    rng = np.random.default_rng(2)
    Z = rng.standard_normal((100, 5))
    beta = rng.standard_normal(5)
    y = Z @ beta + rng.standard_normal(100)
    base = r2_out_of_sample(beta, Z, y).r2
    shifted = r2_out_of_sample(beta, Z, 3.0 * y - 7.0).r2
    assert shifted == pytest.approx(base, rel=1e-12)


def test_r2_zero_predictor_flag():
    Z = np.random.default_rng(3).standard_normal((30, 2))
    res = r2_out_of_sample(np.zeros(2), Z, Z[:, 0])
    assert res.zero_predictor
    assert res.r2 == 0.0


def test_r2_constant_response_rejected():
    Z = np.random.default_rng(4).standard_normal((30, 2))
    with pytest.raises(DomainError):
        r2_out_of_sample(np.ones(2), Z, np.full(30, 2.5))


def test_r2_accepts_fit_objects():
    rng = np.random.default_rng(5)
    X = standardize_columns(rng.standard_normal((60, 20)))
    y = X[:, 0] + rng.standard_normal(60)
    fit = fit_ridge(X, y, 0.5)
    direct = r2_in_sample(fit.coefficients, X, y).r2
    assert r2_in_sample(fit, X, y).r2 == direct


def test_diagonal_sigma_layout_counts():
    spec = SpectralModel.from_point_masses((0.5, 1.5), (0.5, 0.5))
    diag = diagonal_sigma_layout(spec, 11)
    assert diag.shape == (11,)
    assert sorted(set(diag.tolist())) == [0.5, 1.5]
    # largest-remainder rounding keeps totals exact
    assert np.sum(diag == 0.5) + np.sum(diag == 1.5) == 11
    assert abs(np.sum(diag == 0.5) - 5.5) <= 0.5
    assert np.all(diagonal_sigma_layout(SpectralModel.identity(), 7) == 1.0)


def _brute_force_mse(X, beta, sigma_eps, hat):
    # hat maps y -> beta_hat linearly: beta_hat = H y, y = X beta + eps
    n = X.shape[0]
    mean = hat @ (X @ beta)
    bias_sq = float(np.sum((mean - beta) ** 2))
    variance = sigma_eps**2 * float(np.trace(hat @ hat.T))
    return bias_sq, variance


def test_mse_decomposition_ridge_matches_brute_force():
    rng = np.random.default_rng(6)
    n, p = 40, 25
    X = standardize_columns(rng.standard_normal((n, p)))
    beta = rng.standard_normal(p) / np.sqrt(p)
    lam = 0.8
    H = np.linalg.solve(X.T @ X + lam * n * np.eye(p), X.T)
    bias_sq, variance = _brute_force_mse(X, beta, 0.7, H)
    dec = mse_decomposition(X, beta, 0.7, EstimatorKind.RIDGE, lam=lam)
    assert dec.bias_sq == pytest.approx(bias_sq, rel=1e-9)
    assert dec.variance == pytest.approx(variance, rel=1e-9)
    assert dec.total == pytest.approx(bias_sq + variance, rel=1e-9)


def test_mse_decomposition_marginal_matches_brute_force():
    rng = np.random.default_rng(7)
    n, p = 50, 20
    X = standardize_columns(rng.standard_normal((n, p)))
    beta = rng.standard_normal(p) / np.sqrt(p)
    colsq = np.einsum("ij,ij->j", X, X)
    H = (X / colsq).T
    bias_sq, variance = _brute_force_mse(X, beta, 0.5, H)
    dec = mse_decomposition(X, beta, 0.5, EstimatorKind.MARGINAL)
    assert dec.bias_sq == pytest.approx(bias_sq, rel=1e-9)
    assert dec.variance == pytest.approx(variance, rel=1e-9)


def test_mse_decomposition_ols_is_unbiased():
    rng = np.random.default_rng(8)
    n, p = 60, 15
    X = standardize_columns(rng.standard_normal((n, p)))
    beta = rng.standard_normal(p)
    dec = mse_decomposition(X, beta, 1.0, EstimatorKind.OLS)
    assert dec.bias_sq == pytest.approx(0.0, abs=1e-18)
    expected_var = float(np.trace(np.linalg.inv(X.T @ X)))
    assert dec.variance == pytest.approx(expected_var, rel=1e-9)


def test_mse_decomposition_with_diagonal_sigma():
    rng = np.random.default_rng(9)
    n, p = 30, 12
    X = standardize_columns(rng.standard_normal((n, p)))
    beta = rng.standard_normal(p)
    diag = np.linspace(0.5, 1.5, p)
    lam = 1.0
    A = np.linalg.solve(X.T @ X + lam * n * np.eye(p), X.T)
    mean = A @ (X @ beta)
    bias_sq = float((mean - beta) @ (diag * (mean - beta)))
    variance = float(np.sum(diag[:, None] * A * A))
    dec = mse_decomposition(
        X, beta, 1.0, EstimatorKind.RIDGE, sigma=diag, lam=lam
    )
    assert dec.bias_sq == pytest.approx(bias_sq, rel=1e-9)
    assert dec.variance == pytest.approx(variance, rel=1e-9)


def test_mse_decomposition_with_full_sigma_matrix():
    rng = np.random.default_rng(10)
    n, p = 30, 10
    X = standardize_columns(rng.standard_normal((n, p)))
    beta = rng.standard_normal(p)
    B = rng.standard_normal((p, p))
    sigma = B @ B.T / p + np.eye(p)
    lam = 0.6
    A = np.linalg.solve(X.T @ X + lam * n * np.eye(p), X.T)
    mean = A @ (X @ beta)
    bias_sq = float((mean - beta) @ sigma @ (mean - beta))
    variance = float(np.trace(A.T @ sigma @ A))
    dec = mse_decomposition(X, beta, 1.0, EstimatorKind.RIDGE, sigma=sigma, lam=lam)
    assert dec.bias_sq == pytest.approx(bias_sq, rel=1e-8)
    assert dec.variance == pytest.approx(variance, rel=1e-8)


def test_mse_decomposition_rejects_explicit_model_without_layout():
    rng = np.random.default_rng(11)
    X = standardize_columns(rng.standard_normal((20, 8)))
    beta = np.ones(8)
    spec = SpectralModel.from_eigenvalues(tuple(np.linspace(0.6, 1.4, 8)))
    with pytest.raises(UnsupportedSigmaError):
        mse_decomposition(X, beta, 1.0, EstimatorKind.RIDGE, sigma=spec, lam=0.5)
