"""Regression fitters: OLS, logistic IRLS, lasso, and CV selection."""

import numpy as np
import pytest
from scipy.special import expit

from ckgmed import glm
from ckgmed.errors import (
    DegenerateOutcome,
    DomainError,
    NonFinite,
    RankDeficient,
)

from stat_oracles import lasso_kkt_violation


def test_ols_exact_line():
    x = np.arange(10.0)
    res = glm.fit_ols(x[:, None], 2.0 * x)
    assert res.coef("const") == pytest.approx(0.0, abs=1e-10)
    assert res.coef("x0") == pytest.approx(2.0, abs=1e-10)


def test_ols_three_point_closed_form():
    X = np.array([[0.0], [1.0], [2.0]])
    y = np.array([1.0, 2.0, 2.0])
    res = glm.fit_ols(X, y, column_names=["x"])
    assert res.coef("x") == pytest.approx(0.5)
    assert res.coef("const") == pytest.approx(7.0 / 6.0)


def test_ols_constant_response():
    X = np.arange(8.0)[:, None]
    res = glm.fit_ols(X, np.full(8, 3.25))
    assert res.coef("x0") == pytest.approx(0.0, abs=1e-12)
    assert res.coef("const") == pytest.approx(3.25)


def test_ols_drops_constant_and_duplicate_columns():
    rng = np.random.default_rng(0)
    x = rng.normal(size=50)
    X = np.column_stack([x, np.ones(50), x])
    with pytest.warns(glm.CollinearityWarning):
        res = glm.fit_ols(X, 1.0 + 2.0 * x, column_names=["a", "b", "c"])
    assert res.column_names == ["const", "a"]
    assert res.dropped_columns == ["b", "c"]
    assert list(res.kept_indices) == [0]


def test_ols_reports_deeper_collinearity_by_name():
    rng = np.random.default_rng(1)
    a = rng.normal(size=40)
    b = rng.normal(size=40)
    X = np.column_stack([a, b, a + b])
    with pytest.raises(RankDeficient) as exc:
        glm.fit_ols(X, rng.normal(size=40), column_names=["a", "b", "ab"])
    assert exc.value.columns == ["ab"]


def test_ols_rejects_nan_and_tiny_n():
    with pytest.raises(NonFinite):
        glm.fit_ols(np.array([[1.0], [np.nan]]), np.array([0.0, 1.0]))
    with pytest.raises(DomainError):
        glm.fit_ols(np.array([[1.0], [2.0]]), np.array([0.0, 1.0]))


def test_ols_hc1_close_to_classical_when_homoskedastic():
    rng = np.random.default_rng(7)
    n = 10_000
    x = rng.normal(size=n)
    y = 1.0 + 0.5 * x + rng.normal(size=n)
    res = glm.fit_ols(x[:, None], y)
    Z = np.column_stack([np.ones(n), x])
    resid = y - Z @ res.coefficients
    s2 = resid @ resid / (n - 2)
    classical = s2 * np.linalg.inv(Z.T @ Z)
    ratio = res.covariance[1, 1] / classical[1, 1]
    assert ratio == pytest.approx(1.0, rel=0.05)


def test_logistic_intercept_only():
    y = np.tile([1.0, 0.0, 0.0, 0.0], 25)
    res = glm.fit_logistic(np.empty((100, 0)), y)
    assert res.coef("const") == pytest.approx(np.log(0.25 / 0.75), abs=1e-6)
    assert res.converged


def test_logistic_null_model_near_zero():
    rng = np.random.default_rng(3)
    n = 4000
    X = rng.normal(size=(n, 2))
    y = (rng.random(n) < 0.5).astype(float)
    res = glm.fit_logistic(X, y)
    assert abs(res.coef("x0")) < 0.1
    assert abs(res.coef("x1")) < 0.1


def test_logistic_recovers_coefficients():
    rng = np.random.default_rng(11)
    n = 20_000
    X = rng.normal(size=(n, 2))
    eta = -0.5 + 1.2 * X[:, 0] - 0.7 * X[:, 1]
    y = (rng.random(n) < expit(eta)).astype(float)
    res = glm.fit_logistic(X, y)
    assert res.coef("const") == pytest.approx(-0.5, abs=0.08)
    assert res.coef("x0") == pytest.approx(1.2, abs=0.08)
    assert res.coef("x1") == pytest.approx(-0.7, abs=0.08)


def test_logistic_score_equations_hold_at_solution():
    rng = np.random.default_rng(13)
    for _ in range(20):
        n = int(rng.integers(80, 400))
        p = int(rng.integers(1, 4))
        X = rng.normal(size=(n, p))
        eta = rng.normal() + X @ rng.normal(scale=0.8, size=p)
        y = (rng.random(n) < expit(eta)).astype(float)
        if y.min() == y.max():
            continue
        res = glm.fit_logistic(X, y)
        if not res.converged:
            continue
        Z = np.column_stack([np.ones(n), X])
        mu = expit(Z @ res.coefficients)
        score = Z.T @ (y - mu) / n
        assert np.max(np.abs(score)) < 1e-6


def test_logistic_flags_separation():
    x = np.concatenate([-1.0 - np.arange(20) / 10.0, 1.0 + np.arange(20) / 10.0])
    y = (x > 0).astype(float)
    res = glm.fit_logistic(x[:, None], y)
    assert res.separated
    assert not res.converged


def test_logistic_input_validation():
    X = np.random.default_rng(0).normal(size=(30, 1))
    with pytest.raises(DomainError):
        glm.fit_logistic(X, np.full(30, 2.0))
    with pytest.raises(DegenerateOutcome):
        glm.fit_logistic(X, np.ones(30))


def test_soft_threshold():
    assert glm.soft_threshold(1.0, 0.3) == pytest.approx(0.7)
    assert glm.soft_threshold(-1.0, 0.3) == pytest.approx(-0.7)
    assert glm.soft_threshold(0.2, 0.3) == 0.0
    assert glm.soft_threshold(-0.2, 0.3) == 0.0


def hadamard_design(reps=25):
    block = np.array([
        [1.0, 1.0, 1.0],
        [1.0, -1.0, -1.0],
        [-1.0, 1.0, -1.0],
        [-1.0, -1.0, 1.0],
    ])
    return np.tile(block, (reps, 1))


def test_lasso_orthonormal_soft_threshold():
    X = hadamard_design()
    y = X[:, 0].copy()  # OLS slope exactly 1 on the first column
    coefs = glm.fit_lasso(X, y, 0.3)
    assert coefs[1] == pytest.approx(0.7, abs=1e-7)
    assert coefs[2] == pytest.approx(0.0, abs=1e-12)
    assert coefs[3] == pytest.approx(0.0, abs=1e-12)
    assert coefs[0] == pytest.approx(0.0, abs=1e-12)


def test_lasso_support_shrinks_with_lambda_on_orthonormal_design():
    rng = np.random.default_rng(17)
    X = hadamard_design()
    y = X @ np.array([1.0, -0.5, 0.2]) + rng.normal(scale=0.3, size=X.shape[0])
    last_support = None
    for lam in (0.0, 0.1, 0.3, 0.6, 1.2):
        support = set(np.nonzero(glm.fit_lasso(X, y, lam)[1:])[0])
        if last_support is not None:
            assert support <= last_support
        last_support = support


def test_lasso_kills_everything_at_lambda_max():
    rng = np.random.default_rng(19)
    for _ in range(10):
        n = int(rng.integers(30, 120))
        p = int(rng.integers(1, 6))
        X = rng.normal(size=(n, p))
        y = rng.normal(size=n)
        lmax = glm.lambda_max(X, y)
        coefs = glm.fit_lasso(X, y, lmax)
        assert np.all(coefs[1:] == 0.0)
        assert coefs[0] == pytest.approx(y.mean())
        # a touch below the kill point something survives
        coefs = glm.fit_lasso(X, y, lmax * 0.99)
        assert np.any(coefs[1:] != 0.0)


def test_lasso_at_zero_matches_ols():
    rng = np.random.default_rng(29)
    for _ in range(20):
        n = int(rng.integers(40, 200))
        p = int(rng.integers(1, 5))
        X = rng.normal(size=(n, p))
        y = rng.normal(size=n) + X @ rng.normal(size=p)
        coefs = glm.fit_lasso(X, y, 0.0)
        ols = glm.fit_ols(X, y).coefficients
        assert np.max(np.abs(coefs - ols)) < 1e-6


def test_lasso_kkt_conditions():
    rng = np.random.default_rng(37)
    for _ in range(40):
        n = int(rng.integers(30, 150))
        p = int(rng.integers(1, 7))
        X = rng.normal(size=(n, p))
        beta = rng.normal(size=p) * (rng.random(p) < 0.6)
        y = X @ beta + rng.normal(scale=0.5, size=n)
        lam = float(rng.uniform(0.01, 1.0)) * max(glm.lambda_max(X, y), 0.05)
        coefs = glm.fit_lasso(X, y, lam)
        assert lasso_kkt_violation(X, y, coefs, lam) < 1e-5


def test_lasso_input_validation():
    X = np.ones((5, 1))
    with pytest.raises(DomainError):
        glm.fit_lasso(X, np.zeros(5), -0.1)
    with pytest.raises(NonFinite):
        glm.fit_lasso(np.array([[np.inf]]), np.array([1.0]), 0.1)


def test_lambda_grid_shape():
    rng = np.random.default_rng(41)
    X = rng.normal(size=(60, 3))
    y = rng.normal(size=60) + X[:, 0]
    grid = glm.lambda_grid(X, y)
    assert grid.size == 100
    assert grid[0] == pytest.approx(glm.lambda_max(X, y))
    assert grid[-1] == pytest.approx(grid[0] * 1e-3)
    assert np.all(np.diff(grid) < 0)


def test_cv_prefers_zero_penalty_on_noiseless_data():
    rng = np.random.default_rng(43)
    X = rng.normal(size=(100, 2))
    y = X @ np.array([1.5, -2.0])
    assert glm.cv_select_lambda(X, y, grid=np.array([1e6, 0.0])) == 0.0
    assert glm.cv_select_lambda(X, y, grid=np.array([0.25])) == 0.25


def test_cv_prefers_sparsity_on_pure_noise():
    rng = np.random.default_rng(47)
    at_max = 0
    reps = 30
    for _ in range(reps):
        X = rng.normal(size=(80, 4))
        y = rng.normal(size=80)
        grid = glm.lambda_grid(X, y, num=30)
        lam = glm.cv_select_lambda(X, y, folds=5, grid=grid,
                                   seed=int(rng.integers(2**31)))
        if lam == grid[0]:
            at_max += 1
    assert at_max > reps / 2


def test_cv_ties_go_to_the_larger_lambda():
    rng = np.random.default_rng(53)
    X = rng.normal(size=(40, 2))
    y = rng.normal(size=40)
    lmax = glm.lambda_max(X, y)
    # both penalties give the null model, hence identical CV error
    assert glm.cv_select_lambda(X, y, grid=np.array([3 * lmax, 2 * lmax])) == 3 * lmax


def test_cv_validates_arguments():
    X = np.random.default_rng(0).normal(size=(20, 2))
    y = np.arange(20.0)
    with pytest.raises(DomainError):
        glm.cv_select_lambda(X, y, grid=np.array([0.1, 0.5]))  # increasing
    with pytest.raises(DomainError):
        glm.cv_select_lambda(X, y, folds=1)
    with pytest.raises(DomainError):
        glm.cv_select_lambda(X, y, grid=np.array([]))


class FakeSample:
    def __init__(self, t, y, covariates, names):
        self.t = t
        self.y = y
        self.covariates = covariates
        self.covariate_names = names


def test_lasso_union_selection_finds_shared_driver():
    rng = np.random.default_rng(59)
    n = 2000
    z = rng.normal(size=n)
    w = rng.normal(size=n)
    t = (rng.random(n) < expit(1.5 * z)).astype(np.int8)
    y = (rng.random(n) < expit(1.2 * z - 1.0)).astype(np.int8)
    sample = FakeSample(t, y, np.column_stack([z, w]), ["Z", "W"])
    assert glm.lasso_union_selection(sample, seed=0) == ["Z"]


def test_lasso_union_selection_takes_union_and_keeps_order():
    rng = np.random.default_rng(61)
    n = 2000
    a = rng.normal(size=n)
    b = rng.normal(size=n)
    t = (rng.random(n) < expit(1.8 * a)).astype(np.int8)
    y = (rng.random(n) < expit(-1.8 * b)).astype(np.int8)
    sample = FakeSample(t, y, np.column_stack([a, b]), ["a_only_t", "b_only_y"])
    assert glm.lasso_union_selection(sample, seed=1) == ["a_only_t", "b_only_y"]

    empty = FakeSample(t, y, np.empty((n, 0)), [])
    assert glm.lasso_union_selection(empty) == []


def test_lasso_union_selection_perfect_predictor():
    rng = np.random.default_rng(67)
    n = 500
    t = (rng.random(n) < 0.4).astype(np.int8)
    y = (rng.random(n) < 0.3).astype(np.int8)
    X = np.column_stack([t.astype(float), rng.normal(size=n)])
    sample = FakeSample(t, y, X, ["t_copy", "noise"])
    assert "t_copy" in glm.lasso_union_selection(sample, seed=2)
