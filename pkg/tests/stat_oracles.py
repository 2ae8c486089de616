"""Independent numeric checks for the regression and metric code.

The lasso check evaluates subgradient stationarity of the penalized
objective directly from the returned coefficients; the AUC oracle counts
pairs. Neither shares code with the package.
"""

import numpy as np


def lasso_kkt_violation(X, y, coefs, lam):
    """Worst stationarity violation at ``coefs`` for the L1 objective.

    The objective is (1/2n)||y - b0 - Xb||^2 + lam * sum_j |b_j| with the
    penalty applied to slopes on the unit-variance scale, matching the
    fitter's internal standardization. Active slopes must see a correlation
    of exactly lam (with matching sign), inactive ones at most lam, and the
    unpenalized intercept forces mean-zero residuals.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    coefs = np.asarray(coefs, dtype=np.float64)
    n = y.size
    r = y - coefs[0] - X @ coefs[1:]
    worst = abs(float(r.mean()))
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    for j in range(X.shape[1]):
        if sd[j] == 0.0:
            continue
        g = float((X[:, j] - mu[j]) / sd[j] @ r) / n
        b_std = coefs[1 + j] * sd[j]
        if b_std != 0.0:
            worst = max(worst, abs(g - lam * np.sign(b_std)))
        else:
            worst = max(worst, abs(g) - lam)
    return worst


def roc_auc_pairwise(scores, labels):
    """AUC by counting positive/negative pairs, half credit on ties."""
    s = np.asarray(list(scores), dtype=np.float64)
    y = np.asarray(list(labels))
    pos = s[y == 1]
    neg = s[y == 0]
    wins = ties = 0
    for a in pos:
        for b in neg:
            if a > b:
                wins += 1
            elif a == b:
                ties += 1
    return (wins + 0.5 * ties) / (pos.size * neg.size)
