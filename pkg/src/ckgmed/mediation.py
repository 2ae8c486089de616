"""Causal mediation estimation with quasi-Bayesian uncertainty.

For one hypothesis the sample provides binary T (indication), M (drug), and
Y (outcome). Two logistic models are fit, M ~ T + covariates and
Y ~ T + M [+ T*M] + covariates, the interaction entering only when its HC1
Wald test is significant at 0.05. Parameter vectors are then drawn from
multivariate normals centered at the estimates with HC1 covariances, and for
every draw the mediator is integrated out analytically over {0, 1}.

Reported quantities fix the treatment at its baseline arm: acme is the
indirect effect at t = 0 and ade the direct effect under the untreated
mediator law. The complementary-arm effects are computed as well so that
total = acme(t=1) + ade(t=0) = acme(t=0) + ade(t=1) holds draw by draw.
The two-sided p-value is twice the smaller tail share of the acme draws,
floored at 2/(nsim + 1).
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import adjustment as adj_mod
from . import cohort as cohort_mod
from . import kg
from ._kernels import mediation_effect_draws
from .errors import (
    ConvergenceFailure,
    CycleError,
    DegenerateOutcome,
    DegenerateSample,
    DomainError,
    EmptySample,
    NoValidSet,
    RankDeficient,
    UnknownNode,
)
from .glm import FitResult, fit_logistic
from .hypotheses import Hypothesis
from .tablefile import read_table, write_table

RIDGE_RETRY = 1e-6
INTERACTION_ALPHA = 0.05

STATUS_OK = "ok"
STATUS_NA = "na"
STATUS_DEGENERATE = "degenerate"

CLASS_NA = "na"
CLASS_INSIG = "insig"
CLASS_POS = "pos"
CLASS_NEG = "neg"


def bh_correct(p_values, alpha: float = 0.05) -> tuple[list[float], list[bool]]:
    """Benjamini-Hochberg step-up: adjusted p-values and rejection flags.

    adjusted_(k) = min_{j >= k} m * p_(j) / j, capped at 1, reported in the
    input order. A test is rejected exactly when its adjusted value is at
    most alpha, which matches the classical largest-k rule.
    """
    ps = np.asarray(list(p_values), dtype=np.float64)
    if ps.size == 0:
        return [], []
    if np.any((ps < 0) | (ps > 1)) or not np.isfinite(ps).all():
        raise DomainError("p-values must lie in [0, 1]")
    if not 0 < alpha < 1:
        raise DomainError("alpha must be in (0, 1)")
    m = ps.size
    order = np.argsort(ps, kind="stable")
    scaled = ps[order] * m / np.arange(1, m + 1)
    adj_sorted = np.minimum.accumulate(scaled[::-1])[::-1]
    adj_sorted = np.minimum(adj_sorted, 1.0)
    adjusted = np.empty(m)
    adjusted[order] = adj_sorted
    reject = adjusted <= alpha
    return adjusted.tolist(), reject.tolist()


@dataclass
class MediationResult:
    status: str
    n: int = 0
    n_covariates: int = 0
    acme: float = math.nan
    ci_low: float = math.nan
    ci_high: float = math.nan
    ade: float = math.nan
    total: float = math.nan
    prop_mediated: float = math.nan
    p_value: float = math.nan
    interaction: bool = False
    note: str = ""


def _wald_p(result: FitResult, name: str) -> float:
    se = result.se(name)
    if se <= 0:
        return 1.0
    z = result.coef(name) / se
    return math.erfc(abs(z) / math.sqrt(2.0))


def _fit_logistic_stable(W, y, names) -> FitResult | None:
    """One plain fit, then one ridge-stabilized retry; None if both fail."""
    for ridge in (0.0, RIDGE_RETRY):
        try:
            res = fit_logistic(W, y, names, ridge=ridge)
        except (ConvergenceFailure, RankDeficient, DegenerateOutcome):
            continue
        if res.converged:
            return res
    return None


def _model_parts(result: FitResult, W: np.ndarray, special: tuple[str, ...]):
    """Split a fit into special-term coefficients and the covariate block.

    Returns (special_positions, cov_design, cov_positions) where positions
    index ``result.coefficients`` and cov_design holds the kept covariate
    columns of W.
    """
    pos = {}
    for nm in special:
        pos[nm] = result.column_names.index(nm) if nm in result.column_names else -1
    cov_positions = [
        i for i, nm in enumerate(result.column_names[1:]) if nm not in special
    ]
    cov_design = W[:, result.kept_indices[cov_positions]] if cov_positions else None
    return pos, cov_design, np.asarray(cov_positions, dtype=np.intp)


def _draw_linear_part(draws, cov_design, cov_positions, n):
    """Intercept plus covariate contribution per person and draw: (n, nsim)."""
    base = draws[:, 0]
    if cov_design is None:
        return np.broadcast_to(base, (n, draws.shape[0])).copy()
    return base[None, :] + cov_design @ draws[:, 1 + cov_positions].T


def estimate_acme(
    sample: "cohort_mod.AnalysisSample",
    covariate_names: list[str],
    nsim: int = 1000,
    seed: int = 0,
) -> MediationResult:
    """Quasi-Bayesian mediation estimate for one selected sample.

    Model failures (after one ridge retry) yield status "na" rather than an
    exception so batch runs can keep going.
    """
    for var, arr in (("T", sample.t), ("M", sample.m), ("Y", sample.y)):
        if arr.min() == arr.max():
            raise DegenerateSample(var)
    if nsim < 1:
        raise DomainError("nsim must be positive")

    t = sample.t.astype(np.float64)
    m = sample.m.astype(np.float64)
    y = sample.y.astype(np.float64)
    Xc = sample.covariate_matrix(covariate_names)
    n = sample.n
    n_cov = len(covariate_names)

    def na(note: str) -> MediationResult:
        return MediationResult(status=STATUS_NA, n=n, n_covariates=n_cov, note=note)

    med_W = np.column_stack([t, Xc])
    med_names = ["T"] + list(covariate_names)
    med_fit = _fit_logistic_stable(med_W, m, med_names)
    if med_fit is None or "T" not in med_fit.column_names:
        return na("mediator model failed")

    int_W = np.column_stack([t, m, t * m, Xc])
    int_names = ["T", "M", "T:M"] + list(covariate_names)
    int_fit = _fit_logistic_stable(int_W, y, int_names)
    interaction = (
        int_fit is not None
        and "T:M" in int_fit.column_names
        and _wald_p(int_fit, "T:M") < INTERACTION_ALPHA
    )

    if interaction:
        out_fit, out_W = int_fit, int_W
        special = ("T", "M", "T:M")
    else:
        out_W = np.column_stack([t, m, Xc])
        out_fit = _fit_logistic_stable(out_W, y, ["T", "M"] + list(covariate_names))
        special = ("T", "M")
        if out_fit is None:
            return na("outcome model failed")
    if "T" not in out_fit.column_names or "M" not in out_fit.column_names:
        return na("treatment or mediator dropped from outcome model")

    rng = np.random.default_rng(seed)
    med_draws = rng.multivariate_normal(
        med_fit.coefficients, med_fit.covariance, size=nsim, method="svd")
    out_draws = rng.multivariate_normal(
        out_fit.coefficients, out_fit.covariance, size=nsim, method="svd")

    med_pos, med_cov_design, med_cov_positions = _model_parts(med_fit, med_W, ("T",))
    out_pos, out_cov_design, out_cov_positions = _model_parts(out_fit, out_W, special)

    cmed = _draw_linear_part(med_draws, med_cov_design, med_cov_positions, n)
    cout = _draw_linear_part(out_draws, out_cov_design, out_cov_positions, n)
    at = med_draws[:, med_pos["T"]]
    gt = out_draws[:, out_pos["T"]]
    gm = out_draws[:, out_pos["M"]]
    if interaction and out_pos.get("T:M", -1) >= 0:
        gtm = out_draws[:, out_pos["T:M"]]
    else:
        gtm = np.zeros(nsim)

    d0, d1, z0, z1, tau = mediation_effect_draws(cmed, cout, at, gt, gm, gtm)

    acme = float(d0.mean())
    ci_low, ci_high = (float(v) for v in np.percentile(d0, [2.5, 97.5]))
    ade = float(z0.mean())
    total = float(tau.mean())
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = d0 / tau
    prop = float(np.nanmedian(ratio)) if np.isnan(ratio).any() else float(np.median(ratio))
    p = 2.0 * min(float(np.mean(d0 <= 0.0)), float(np.mean(d0 >= 0.0)))
    p = min(max(p, 2.0 / (nsim + 1)), 1.0)

    return MediationResult(
        status=STATUS_OK,
        n=n,
        n_covariates=n_cov,
        acme=acme,
        ci_low=ci_low,
        ci_high=ci_high,
        ade=ade,
        total=total,
        prop_mediated=prop,
        p_value=p,
        interaction=interaction,
    )


def hypothesis_seed(global_seed: int, h: Hypothesis, label: str = "acme") -> int:
    """Stable per-hypothesis seed from the global seed and the three codes."""
    key = f"{global_seed}|{h.indication.code}|{h.drug.code}|{h.outcome.code}|{label}"
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") % (2**63)


@dataclass
class MediationConfig:
    criterion: str = "backdoor"
    lasso: bool = False
    nsim: int = 1000
    alpha: float = 0.05
    backdoor_limit: int = 1000
    seed: int = 0
    threads: int = 1


@dataclass
class BatchRow:
    hypothesis: Hypothesis
    criterion: str
    adjustment_nodes: frozenset = frozenset()
    result: MediationResult = field(default_factory=lambda: MediationResult(STATUS_NA))
    p_bh: float = math.nan
    outcome_class: str = CLASS_NA


def _classify(row: BatchRow, alpha: float) -> str:
    if row.result.status != STATUS_OK or math.isnan(row.p_bh):
        return CLASS_NA
    if row.p_bh > alpha or row.result.acme == 0.0:
        return CLASS_INSIG
    return CLASS_POS if row.result.acme > 0.0 else CLASS_NEG


def run_mediation_batch(
    hypotheses: list[Hypothesis],
    c: "cohort_mod.Cohort",
    g: "kg.CausalKnowledgeGraph",
    config: MediationConfig | None = None,
) -> list[BatchRow]:
    """Adjustment, sampling, and estimation per hypothesis, then batch BH.

    Per-hypothesis failures are captured in the row status, never raised.
    Rows come back sorted by (indication, drug, outcome) codes and results
    do not depend on the thread count: every hypothesis derives its own seed.
    """
    cfg = config or MediationConfig()
    if cfg.criterion not in ("backdoor", "disjunctive", "none"):
        raise DomainError(f"unknown criterion {cfg.criterion!r}")
    ordered = sorted(hypotheses, key=lambda h: h.key)

    def worker(h: Hypothesis) -> BatchRow:
        row = BatchRow(hypothesis=h, criterion=cfg.criterion)
        try:
            nodes = adj_mod.hypothesis_adjustment(
                g, h, cfg.criterion, limit=cfg.backdoor_limit)
        except (NoValidSet, UnknownNode, CycleError) as exc:
            row.result = MediationResult(status=STATUS_NA, note=str(exc))
            return row
        row.adjustment_nodes = nodes
        adj = adj_mod.AdjustmentSet(
            nodes=nodes, criterion=cfg.criterion, pruned=True, lasso_selected=cfg.lasso)
        try:
            sample = cohort_mod.select_sample(c, g, h, adj)
        except EmptySample:
            row.result = MediationResult(status=STATUS_NA, note="empty sample")
            return row
        except DegenerateSample as exc:
            size = exc.sample.n if getattr(exc, "sample", None) is not None else 0
            row.result = MediationResult(
                status=STATUS_DEGENERATE, n=size, note=f"{exc.variable} constant")
            return row
        if cfg.lasso:
            from .glm import lasso_union_selection

            names = lasso_union_selection(
                sample, seed=hypothesis_seed(cfg.seed, h, label="lasso"))
        else:
            names = sample.covariate_names
        row.result = estimate_acme(
            sample, names, nsim=cfg.nsim, seed=hypothesis_seed(cfg.seed, h, label="acme"))
        return row

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            rows = list(pool.map(worker, ordered))
    else:
        rows = [worker(h) for h in ordered]

    ok = [r for r in rows if r.result.status == STATUS_OK]
    if ok:
        adjusted, _ = bh_correct([r.result.p_value for r in ok], cfg.alpha)
        for r, q in zip(ok, adjusted):
            r.p_bh = q
    for r in rows:
        r.outcome_class = _classify(r, cfg.alpha)
    return rows


MEDIATION_COLUMNS = [
    "indication", "drug", "outcome", "source", "criterion", "n", "n_covariates",
    "acme", "ci_low", "ci_high", "ade", "total", "prop_mediated", "p", "p_bh",
    "interaction", "status", "class",
]


def write_mediation(path, rows: list[BatchRow], comments=()) -> None:
    table = []
    for r in rows:
        h, res = r.hypothesis, r.result
        table.append((
            h.indication.code, h.drug.code, h.outcome.code, h.source, r.criterion,
            res.n, res.n_covariates, res.acme, res.ci_low, res.ci_high, res.ade,
            res.total, res.prop_mediated, res.p_value, r.p_bh, res.interaction,
            res.status, r.outcome_class,
        ))
    write_table(path, MEDIATION_COLUMNS, table, comments)


def read_mediation(path) -> list[dict[str, str]]:
    return read_table(path, MEDIATION_COLUMNS)


SUMMARY_COLUMNS = [
    "source", "criterion", "n_hypotheses", "n_na", "n_insig", "n_pos", "n_neg",
]


def summarize(rows: list[BatchRow]) -> list[tuple]:
    """Counts per (source, criterion) cell in the style of a results table."""
    cells: dict[tuple[str, str], dict[str, int]] = {}
    for r in rows:
        key = (r.hypothesis.source, r.criterion)
        cell = cells.setdefault(key, {CLASS_NA: 0, CLASS_INSIG: 0, CLASS_POS: 0, CLASS_NEG: 0})
        cell[r.outcome_class] += 1
    out = []
    for (source, criterion) in sorted(cells):
        cell = cells[(source, criterion)]
        total = sum(cell.values())
        out.append((source, criterion, total, cell[CLASS_NA], cell[CLASS_INSIG],
                    cell[CLASS_POS], cell[CLASS_NEG]))
    return out


def write_summary(path, rows: list[BatchRow], comments=()) -> None:
    write_table(path, SUMMARY_COLUMNS, summarize(rows), comments)
