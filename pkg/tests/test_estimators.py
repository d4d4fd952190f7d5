import numpy as np
import pytest

from ridgelimits.errors import DegenerateFeatureError, DomainError, RankError
from ridgelimits.estimators import (
    EstimatorKind,
    SummaryPanel,
    fit_blup,
    fit_marginal,
    fit_ols,
    fit_ridge,
    fit_ridgeless,
    meta_aggregate,
    standardize_columns,
)


def _data(n, p, seed):
    rng = np.random.default_rng(seed)
    X = standardize_columns(rng.standard_normal((n, p)))
    beta = rng.standard_normal(p) / np.sqrt(p)
    y = X @ beta + rng.standard_normal(n)
    return X, y


def test_standardize_columns_exact():
    rng = np.random.default_rng(0)
    X = standardize_columns(3.0 * rng.standard_normal((50, 8)) + 2.0)
    assert np.allclose(X.mean(axis=0), 0.0, atol=1e-14)
    assert np.allclose((X**2).mean(axis=0), 1.0, atol=1e-12)


def test_standardize_columns_rejects_constant_column():
    X = np.ones((20, 3))
    X[:, 0] = np.arange(20)
    X[:, 2] = np.arange(20) ** 2
    with pytest.raises(DegenerateFeatureError, match="1"):
        standardize_columns(X)


def test_marginal_exact_equals_shortcut_on_standardized_design():
    # after standardization every column squared-norm is exactly n
    X, y = _data(40, 25, 1)
    exact = fit_marginal(X, y)
    short = fit_marginal(X, y, shortcut=True)
    assert np.allclose(exact.coefficients, short.coefficients, atol=1e-12)
    assert exact.kind is EstimatorKind.MARGINAL


def test_marginal_forms_differ_off_standardized_designs():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((40, 10)) * np.linspace(0.5, 2.0, 10)
    y = rng.standard_normal(40)
    exact = fit_marginal(X, y)
    short = fit_marginal(X, y, shortcut=True)
    assert not np.allclose(exact.coefficients, short.coefficients)
    # exact form is per-feature simple regression
    j = 3
    slope = float(X[:, j] @ y / (X[:, j] @ X[:, j]))
    assert exact.coefficients[j] == pytest.approx(slope, rel=1e-12)


@pytest.mark.parametrize("n,p", [(50, 30), (30, 50)])
def test_ridge_matches_direct_solve(n, p):
    X, y = _data(n, p, 3)
    lam = 0.7
    fit = fit_ridge(X, y, lam)
    direct = np.linalg.solve(X.T @ X + lam * n * np.eye(p), X.T @ y)
    assert np.allclose(fit.coefficients, direct, atol=1e-10)
    assert fit.penalty == lam


def test_ridge_requires_positive_penalty():
    X, y = _data(20, 10, 4)
    with pytest.raises(DomainError):
        fit_ridge(X, y, 0.0)
    with pytest.raises(DomainError):
        fit_ridge(X, y, -1.0)


def test_blup_is_reparameterized_ridge():
    # tau on the n-scaled problem equals lam = tau * p / n on the plain one
    for seed, (n, p) in enumerate([(40, 60), (60, 40), (25, 100)]):
        X, y = _data(n, p, 10 + seed)
        tau = 0.5 + 0.1 * seed
        blup = fit_blup(X, y, tau)
        ridge = fit_ridge(X, y, tau * p / n)
        scale = np.linalg.norm(ridge.coefficients)
        assert np.allclose(blup.coefficients, ridge.coefficients, atol=1e-8 * scale)


def test_ridgeless_is_min_norm_interpolator():
    X, y = _data(20, 50, 5)
    # standardized columns are centered, so the column space is the
    # zero-sum hyperplane; only centered responses are interpolable
    y = y - y.mean()
    fit = fit_ridgeless(X, y)
    assert np.allclose(X @ fit.coefficients, y, atol=1e-8)
    # minimum norm: equals the pseudoinverse solution
    assert np.allclose(fit.coefficients, np.linalg.pinv(X) @ y, atol=1e-8)


def test_ridgeless_equals_ols_when_overdetermined():
    X, y = _data(60, 20, 6)
    assert np.allclose(
        fit_ridgeless(X, y).coefficients, fit_ols(X, y).coefficients, atol=1e-8
    )


def test_ridge_approaches_ridgeless_at_tiny_penalty():
    X, y = _data(30, 60, 7)
    ridge = fit_ridge(X, y, 1e-10)
    ridgeless = fit_ridgeless(X, y)
    assert np.allclose(ridge.coefficients, ridgeless.coefficients, atol=1e-6)


def test_ols_rank_guards():
    X, y = _data(30, 10, 8)
    with pytest.raises(RankError):
        fit_ols(X[:, :5].repeat(2, axis=1), y)  # duplicated columns
    with pytest.raises(RankError):
        fit_ols(np.hstack([X, X]), y)  # p >= n not allowed either way


def test_meta_size_weights_equal_pooled_shortcut():
    rng = np.random.default_rng(9)
    n, p = 200, 40
    X = standardize_columns(rng.standard_normal((n, p)))
    y = rng.standard_normal(n)
    sizes = (50, 150)
    cols = []
    start = 0
    for s in sizes:
        cols.append(fit_marginal(X[start:start + s], y[start:start + s], shortcut=True).coefficients)
        start += s
    panel = SummaryPanel(np.column_stack(cols), sizes)
    agg = meta_aggregate(panel)
    pooled = fit_marginal(X, y, shortcut=True)
    assert np.allclose(agg.coefficients, pooled.coefficients, atol=1e-12)
    assert agg.kind is EstimatorKind.META


def test_meta_explicit_weights():
    panel = SummaryPanel(np.array([[1.0, 3.0], [2.0, 6.0]]), (10, 30))
    agg = meta_aggregate(panel, weights=[1.0, 1.0])
    assert np.allclose(agg.coefficients, [2.0, 4.0])
    with pytest.raises(DomainError):
        meta_aggregate(panel, weights=[1.0])
    with pytest.raises(DomainError):
        meta_aggregate(panel, weights=[1.0, -1.0])


def test_summary_panel_validation():
    with pytest.raises(DomainError):
        SummaryPanel(np.zeros((4, 2)), (10,))  # size count mismatch
    with pytest.raises(DomainError):
        SummaryPanel(np.zeros(4), (10,))  # not a matrix
    panel = SummaryPanel(np.zeros((4, 2)), (10, 20))
    assert panel.p == 4 and panel.n_studies == 2
