"""Hot numeric kernels with twin implementations.

Each kernel exists twice: a nopython numba version and a vectorized numpy
version. By default the numba path is used when numba imports cleanly;
setting the environment variable ``CKGMED_DISABLE_NUMBA=1`` (checked once at
import time) forces the numpy path. Both compute the same quantities; the
benchmark under ``benchmarks/`` times one against the other.

Results are reproducible for a fixed path. The two paths can disagree in the
last few ulps because accumulation order differs.
"""

from __future__ import annotations

import os

import numpy as np

_env = os.environ.get("CKGMED_DISABLE_NUMBA", "").strip().lower()
_FORCE_NUMPY = _env in {"1", "true", "yes"}

try:
    if _FORCE_NUMPY:
        raise ImportError("numba disabled by CKGMED_DISABLE_NUMBA")
    from numba import njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False


# ---------------------------------------------------------------------------
# lasso coordinate descent on standardized columns
# ---------------------------------------------------------------------------

def _lasso_cd_numpy(Xs, yc, lam, tol, max_sweeps, beta):
    """Cyclic coordinate descent; Xs columns centered with unit variance.

    Maintains the residual r = yc - Xs beta and applies the soft threshold
    coordinate-wise. Returns (sweeps_used, converged).
    """
    n, p = Xs.shape
    r = yc - Xs @ beta
    for sweep in range(1, max_sweeps + 1):
        delta_max = 0.0
        for j in range(p):
            bj = beta[j]
            rho = Xs[:, j] @ r / n + bj
            bnew = np.sign(rho) * max(abs(rho) - lam, 0.0)
            if bnew != bj:
                r -= (bnew - bj) * Xs[:, j]
                beta[j] = bnew
                delta_max = max(delta_max, abs(bnew - bj))
        if delta_max < tol:
            return sweep, True
    return max_sweeps, False


def _lasso_cd_loops(Xs, yc, lam, tol, max_sweeps, beta):
    n, p = Xs.shape
    r = np.empty(n)
    for i in range(n):
        acc = yc[i]
        for j in range(p):
            acc -= Xs[i, j] * beta[j]
        r[i] = acc
    for sweep in range(1, max_sweeps + 1):
        delta_max = 0.0
        for j in range(p):
            bj = beta[j]
            dot = 0.0
            for i in range(n):
                dot += Xs[i, j] * r[i]
            rho = dot / n + bj
            a = abs(rho) - lam
            if a < 0.0:
                bnew = 0.0
            elif rho > 0.0:
                bnew = a
            else:
                bnew = -a
            if bnew != bj:
                diff = bnew - bj
                for i in range(n):
                    r[i] -= diff * Xs[i, j]
                beta[j] = bnew
                d = abs(diff)
                if d > delta_max:
                    delta_max = d
        if delta_max < tol:
            return sweep, True
    return max_sweeps, False


# ---------------------------------------------------------------------------
# per-draw mediation effects
# ---------------------------------------------------------------------------
#
# cmed/cout hold, per person and simulation draw, the linear predictor of the
# mediator/outcome model with treatment and mediator terms left out (intercept
# and covariate contributions already folded in). at, gt, gm, gtm are the
# per-draw coefficients of T, M, and T*M (gtm = 0 without interaction).
# Indirect effects are evaluated at both treatment arms, direct effects under
# both mediator laws, so tau = d0 + z1 = d1 + z0 holds per draw.

def _effects_numpy(cmed, cout, at, gt, gm, gtm, chunk=256):
    n, S = cmed.shape
    d0 = np.empty(S)
    d1 = np.empty(S)
    z0 = np.empty(S)
    z1 = np.empty(S)
    tau = np.empty(S)
    from scipy.special import expit

    for lo in range(0, S, chunk):
        hi = min(lo + chunk, S)
        cm = cmed[:, lo:hi]
        co = cout[:, lo:hi]
        pm0 = expit(cm)
        pm1 = expit(cm + at[lo:hi])
        py00 = expit(co)
        py01 = expit(co + gm[lo:hi])
        py10 = expit(co + gt[lo:hi])
        py11 = expit(co + gt[lo:hi] + gm[lo:hi] + gtm[lo:hi])
        d0[lo:hi] = ((py01 - py00) * (pm1 - pm0)).mean(axis=0)
        d1[lo:hi] = ((py11 - py10) * (pm1 - pm0)).mean(axis=0)
        z0[lo:hi] = ((py10 - py00) * (1.0 - pm0) + (py11 - py01) * pm0).mean(axis=0)
        z1[lo:hi] = ((py10 - py00) * (1.0 - pm1) + (py11 - py01) * pm1).mean(axis=0)
        tau[lo:hi] = (
            py10 * (1.0 - pm1) + py11 * pm1 - (py00 * (1.0 - pm0) + py01 * pm0)
        ).mean(axis=0)
    return d0, d1, z0, z1, tau


def _expit_scalar(x):
    if x >= 0.0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


def _effects_loops(cmed, cout, at, gt, gm, gtm):
    n, S = cmed.shape
    d0 = np.zeros(S)
    d1 = np.zeros(S)
    z0 = np.zeros(S)
    z1 = np.zeros(S)
    tau = np.zeros(S)
    for s in range(S):
        acc_d0 = 0.0
        acc_d1 = 0.0
        acc_z0 = 0.0
        acc_z1 = 0.0
        acc_tau = 0.0
        for i in range(n):
            cm = cmed[i, s]
            co = cout[i, s]
            pm0 = _expit_scalar(cm)
            pm1 = _expit_scalar(cm + at[s])
            py00 = _expit_scalar(co)
            py01 = _expit_scalar(co + gm[s])
            py10 = _expit_scalar(co + gt[s])
            py11 = _expit_scalar(co + gt[s] + gm[s] + gtm[s])
            dm = pm1 - pm0
            acc_d0 += (py01 - py00) * dm
            acc_d1 += (py11 - py10) * dm
            acc_z0 += (py10 - py00) * (1.0 - pm0) + (py11 - py01) * pm0
            acc_z1 += (py10 - py00) * (1.0 - pm1) + (py11 - py01) * pm1
            acc_tau += py10 * (1.0 - pm1) + py11 * pm1 - (py00 * (1.0 - pm0) + py01 * pm0)
        d0[s] = acc_d0 / n
        d1[s] = acc_d1 / n
        z0[s] = acc_z0 / n
        z1[s] = acc_z1 / n
        tau[s] = acc_tau / n
    return d0, d1, z0, z1, tau


if HAS_NUMBA:
    _lasso_cd_impl = njit(cache=True, nogil=True)(_lasso_cd_loops)
    _expit_scalar = njit(cache=True, nogil=True, inline="always")(_expit_scalar)
    _effects_impl = njit(cache=True, nogil=True)(_effects_loops)
else:
    _lasso_cd_impl = _lasso_cd_numpy
    _effects_impl = _effects_numpy


def active_path() -> str:
    """Which implementation family is live: 'numba' or 'numpy'."""
    return "numba" if HAS_NUMBA else "numpy"


def lasso_cd(Xs, yc, lam, tol, max_sweeps, beta0=None):
    """Solve the standardized lasso subproblem; returns (beta, sweeps, converged)."""
    Xs = np.ascontiguousarray(Xs, dtype=np.float64)
    yc = np.ascontiguousarray(yc, dtype=np.float64)
    beta = np.zeros(Xs.shape[1]) if beta0 is None else np.array(beta0, dtype=np.float64)
    sweeps, converged = _lasso_cd_impl(Xs, yc, float(lam), float(tol), int(max_sweeps), beta)
    return beta, sweeps, bool(converged)


def mediation_effect_draws(cmed, cout, at, gt, gm, gtm):
    """Per-draw ACME (both arms), ADE (both arms), and total effect.

    Returns arrays (d0, d1, z0, z1, tau), each of length nsim; d0 is the
    indirect effect with treatment held at 0, z0 the direct effect under the
    untreated mediator law.
    """
    cmed = np.ascontiguousarray(cmed, dtype=np.float64)
    cout = np.ascontiguousarray(cout, dtype=np.float64)
    args = [np.ascontiguousarray(a, dtype=np.float64) for a in (at, gt, gm, gtm)]
    return _effects_impl(cmed, cout, *args)
