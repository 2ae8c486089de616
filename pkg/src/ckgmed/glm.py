"""Regression fits used by the mediation estimator.

All fitters take a covariate matrix without the intercept column and add it
themselves, returning coefficients as [intercept, slopes...]. Standard errors
come from the HC1 sandwich in both the linear and logistic case. The lasso
minimizes

    (1/2n) * sum_i (y_i - x_i' b)^2 + lambda * sum_j |b_j|

with an unpenalized intercept, standardizing columns to unit population
variance internally and reporting coefficients on the original scale.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ._kernels import lasso_cd
from .errors import (
    ConvergenceFailure,
    DegenerateOutcome,
    DomainError,
    NonFinite,
    RankDeficient,
)

#: |beta_j| * sd_j beyond this is treated as quasi-separation in the logistic fit
SEPARATION_THRESHOLD = 15.0


class CollinearityWarning(UserWarning):
    """A constant or duplicate column was dropped before fitting."""


@dataclass
class FitResult:
    coefficients: np.ndarray
    covariance: np.ndarray
    column_names: list[str]
    kept_indices: np.ndarray
    dropped_columns: list[str]
    n: int
    model: str
    converged: bool = True
    separated: bool = False
    iterations: int = 0
    objective: float = 0.0

    def coef(self, name: str) -> float:
        return float(self.coefficients[self.column_names.index(name)])

    def se(self, name: str) -> float:
        j = self.column_names.index(name)
        return float(np.sqrt(self.covariance[j, j]))


def _check_finite(X: np.ndarray, y: np.ndarray) -> None:
    if not np.isfinite(X).all() or not np.isfinite(y).all():
        raise NonFinite("design or response contains NaN or infinity")


def _default_names(p: int, names) -> list[str]:
    if names is None:
        return [f"x{j}" for j in range(p)]
    if len(names) != p:
        raise DomainError(f"{len(names)} names for {p} columns")
    return list(names)


def _prepare_design(X: np.ndarray, names: list[str]):
    """Drop constant and exact-duplicate columns; reject deeper collinearity.

    Returns (Z, kept_names, kept_idx, dropped_names) where Z carries the
    intercept in column 0. Rank deficiency that is not explained by constant
    or duplicate columns raises RankDeficient naming the offending columns.
    """
    n, p = X.shape
    kept: list[int] = []
    dropped: list[str] = []
    for j in range(p):
        col = X[:, j]
        if col.size and col.min() == col.max():
            dropped.append(names[j])
            continue
        if any(np.array_equal(col, X[:, k]) for k in kept):
            dropped.append(names[j])
            continue
        kept.append(j)
    if dropped:
        warnings.warn(
            f"dropping constant/duplicate columns: {dropped}", CollinearityWarning,
            stacklevel=3,
        )
    Z = np.column_stack([np.ones(n)] + [X[:, j] for j in kept])
    if n <= Z.shape[1]:
        raise DomainError(f"{n} rows cannot identify {Z.shape[1]} parameters")
    rank = np.linalg.matrix_rank(Z)
    if rank < Z.shape[1]:
        offending: list[str] = []
        base = [0]
        for pos, j in enumerate(kept, start=1):
            cand = Z[:, base + [pos]]
            if np.linalg.matrix_rank(cand) == len(base) + 1:
                base.append(pos)
            else:
                offending.append(names[j])
        raise RankDeficient(offending)
    kept_names = [names[j] for j in kept]
    return Z, kept_names, np.asarray(kept, dtype=np.intp), dropped


def fit_ols(X: np.ndarray, y: np.ndarray, column_names=None) -> FitResult:
    """Least squares with HC1 robust covariance."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=np.float64)
    _check_finite(X, y)
    names = _default_names(X.shape[1], column_names)
    Z, kept_names, kept_idx, dropped = _prepare_design(X, names)
    n, k = Z.shape
    beta, *_ = np.linalg.lstsq(Z, y, rcond=None)
    resid = y - Z @ beta
    bread = np.linalg.inv(Z.T @ Z)
    meat = (Z * resid[:, None] ** 2).T @ Z
    cov = bread @ meat @ bread * (n / (n - k))
    cov = (cov + cov.T) / 2.0
    return FitResult(
        coefficients=beta,
        covariance=cov,
        column_names=["const"] + kept_names,
        kept_indices=kept_idx,
        dropped_columns=dropped,
        n=n,
        model="ols",
        converged=True,
        iterations=0,
        objective=float(resid @ resid),
    )


def _expit(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def fit_logistic(
    X: np.ndarray,
    y: np.ndarray,
    column_names=None,
    ridge: float = 0.0,
    max_iter: int = 100,
    tol: float = 1e-8,
) -> FitResult:
    """Logistic regression by iteratively reweighted least squares.

    Convergence is declared when the sup-norm of the Newton step drops below
    ``tol``. Quasi-separation (any standardized coefficient beyond
    ``SEPARATION_THRESHOLD``) is flagged via ``separated`` and clears
    ``converged``; the fit is still returned. ``ridge`` adds a small L2 term
    to the Hessian for the stabilized retry used by callers.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=np.float64)
    _check_finite(X, y)
    uniq = np.unique(y)
    if not np.isin(uniq, (0.0, 1.0)).all():
        raise DomainError("logistic response must be coded 0/1")
    if uniq.size < 2:
        raise DegenerateOutcome("response is constant")
    names = _default_names(X.shape[1], column_names)
    Z, kept_names, kept_idx, dropped = _prepare_design(X, names)
    n, k = Z.shape

    beta = np.zeros(k)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        eta = Z @ beta
        mu = _expit(eta)
        w = np.clip(mu * (1.0 - mu), 1e-12, None)
        A = (Z * w[:, None]).T @ Z
        if ridge > 0.0:
            A = A + ridge * np.eye(k)
        try:
            step = np.linalg.solve(A, Z.T @ (y - mu))
        except np.linalg.LinAlgError:
            raise ConvergenceFailure("singular weighted normal equations") from None
        beta = beta + step
        if np.max(np.abs(step)) < tol:
            converged = True
            break

    mu = _expit(Z @ beta)
    w = np.clip(mu * (1.0 - mu), 1e-12, None)
    A = (Z * w[:, None]).T @ Z
    if ridge > 0.0:
        A = A + ridge * np.eye(k)
    try:
        bread = np.linalg.inv(A)
    except np.linalg.LinAlgError:
        raise ConvergenceFailure("singular information matrix") from None
    meat = (Z * ((y - mu) ** 2)[:, None]).T @ Z
    cov = bread @ meat @ bread * (n / (n - k))
    cov = (cov + cov.T) / 2.0

    sds = Z[:, 1:].std(axis=0)
    separated = bool(np.any(np.abs(beta[1:]) * sds > SEPARATION_THRESHOLD))
    if separated:
        converged = False
    with np.errstate(divide="ignore"):
        ll = float(np.sum(y * np.log(np.clip(mu, 1e-300, None))
                          + (1.0 - y) * np.log(np.clip(1.0 - mu, 1e-300, None))))
    return FitResult(
        coefficients=beta,
        covariance=cov,
        column_names=["const"] + kept_names,
        kept_indices=kept_idx,
        dropped_columns=dropped,
        n=n,
        model="logistic",
        converged=converged,
        separated=separated,
        iterations=it,
        objective=ll,
    )


def soft_threshold(x: float, lam: float) -> float:
    """S(x, lam) = sign(x) * max(|x| - lam, 0)."""
    a = abs(x) - lam
    if a <= 0.0:
        return 0.0
    return a if x > 0 else -a


def _standardize(X: np.ndarray):
    means = X.mean(axis=0)
    sds = X.std(axis=0)
    active = sds > 0.0
    Xs = (X[:, active] - means[active]) / sds[active]
    return Xs, means, sds, active


def fit_lasso(
    X: np.ndarray,
    y: np.ndarray,
    lam: float,
    tol: float = 1e-7,
    max_sweeps: int = 100_000,
) -> np.ndarray:
    """L1-penalized least squares via cyclic coordinate descent.

    Returns [intercept, slopes...] on the original scale; zero-variance
    columns get a zero slope. ``lam`` applies on the standardized scale.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=np.float64)
    _check_finite(X, y)
    if lam < 0:
        raise DomainError("lambda must be non-negative")
    n, p = X.shape
    if n == 0:
        raise DomainError("empty design")
    ybar = y.mean()
    out = np.zeros(p + 1)
    if p == 0:
        out[0] = ybar
        return out
    Xs, means, sds, active = _standardize(X)
    if Xs.shape[1]:
        beta_std, _, converged = lasso_cd(Xs, y - ybar, lam, tol, max_sweeps)
        if not converged:
            warnings.warn("lasso coordinate descent hit the sweep limit", RuntimeWarning)
        slopes = np.zeros(p)
        slopes[active] = beta_std / sds[active]
    else:
        slopes = np.zeros(p)
    out[0] = ybar - means @ slopes
    out[1:] = slopes
    return out


def lambda_max(X: np.ndarray, y: np.ndarray) -> float:
    """Smallest penalty at which every slope is exactly zero."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    Xs, _, _, active = _standardize(X)
    if not Xs.shape[1]:
        return 0.0
    return float(np.max(np.abs(Xs.T @ (y - y.mean()))) / X.shape[0])


def lambda_grid(X: np.ndarray, y: np.ndarray, num: int = 100, ratio: float = 1e-3) -> np.ndarray:
    """Log-spaced descending grid from lambda_max down to ratio * lambda_max."""
    lmax = lambda_max(X, y)
    if lmax <= 0.0:
        return np.array([0.0])
    return np.logspace(np.log10(lmax), np.log10(lmax * ratio), num=num)


def cv_select_lambda(
    X: np.ndarray,
    y: np.ndarray,
    folds: int = 10,
    grid: np.ndarray | None = None,
    seed: int = 0,
) -> float:
    """Pick the grid value minimizing held-out squared error.

    Folds are assigned by a seeded permutation taken round-robin, so the
    split depends only on (n, folds, seed). Ties go to the larger lambda.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=np.float64)
    _check_finite(X, y)
    n = X.shape[0]
    if grid is None:
        grid = lambda_grid(X, y)
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size == 0:
        raise DomainError("empty lambda grid")
    if np.any(np.diff(grid) > 0):
        raise DomainError("lambda grid must be non-increasing")
    if folds < 2 or folds > n:
        raise DomainError(f"folds must be in [2, {n}]")

    rng = np.random.default_rng(seed)
    fold_id = np.empty(n, dtype=np.intp)
    fold_id[rng.permutation(n)] = np.arange(n) % folds

    total_sq = np.zeros(grid.size)
    for f in range(folds):
        test = fold_id == f
        Xtr, ytr = X[~test], y[~test]
        Xte, yte = X[test], y[test]
        ybar = ytr.mean()
        Xs, means, sds, active = _standardize(Xtr)
        if Xs.shape[1]:
            Xte_s = (Xte[:, active] - means[active]) / sds[active]
            beta = np.zeros(Xs.shape[1])
            yc = ytr - ybar
            for gi, lam in enumerate(grid):
                beta, _, _ = lasso_cd(Xs, yc, lam, 1e-7, 100_000, beta0=beta)
                pred = ybar + Xte_s @ beta
                total_sq[gi] += float(np.sum((yte - pred) ** 2))
        else:
            total_sq += float(np.sum((yte - ybar) ** 2))
    errors = total_sq / n
    best = 0
    for gi in range(1, grid.size):
        if errors[gi] < errors[best]:
            best = gi
    return float(grid[best])


def lasso_union_selection(sample, folds: int = 10, seed: int = 0) -> list[str]:
    """Covariates with a nonzero lasso slope toward either T or Y.

    Fits two cross-validated lasso models (covariates toward treatment and
    toward outcome, both with squared loss) and returns the union of their
    supports, in covariate order.
    """
    X = sample.covariates
    names = sample.covariate_names
    if X.shape[1] == 0:
        return []
    support = np.zeros(X.shape[1], dtype=bool)
    for k, resp in enumerate((sample.t, sample.y)):
        resp = np.asarray(resp, dtype=np.float64)
        lam = cv_select_lambda(X, resp, folds=folds, seed=seed + k)
        coefs = fit_lasso(X, resp, lam)
        support |= coefs[1:] != 0.0
    return [nm for nm, keep in zip(names, support) if keep]
