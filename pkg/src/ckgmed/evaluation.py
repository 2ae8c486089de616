"""Scoring of discovered drug effects and side-effect-profile similarity.

Discovered positive pairs are compared against a reference set with
precision/recall/F1, where false negatives are counted over the tested
hypotheses rather than over the whole reference (a pair never tested
cannot be missed). Drug similarity is Jaccard overlap of side-effect
sets, optionally z-scored over the off-diagonal entries, and evaluated by
how well it predicts shared indications (ROC AUC, Mann-Whitney U).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from . import kg
from .errors import BothEmpty, DomainError, EmptyInput, OneClass
from .hypotheses import Hypothesis
from .tablefile import read_table, write_table


@dataclass(frozen=True)
class ReferenceSet:
    known_pairs: frozenset

    def __contains__(self, pair) -> bool:
        return pair in self.known_pairs


REFERENCE_COLUMNS = ["drug", "disease"]


def read_reference(path) -> ReferenceSet:
    rows = read_table(path, REFERENCE_COLUMNS)
    pairs = {(kg.drug(r["drug"]), kg.disease(r["disease"])) for r in rows}
    return ReferenceSet(known_pairs=frozenset(pairs))


def write_reference(path, ref: ReferenceSet, comments=()) -> None:
    rows = sorted((d.code, s.code) for d, s in ref.known_pairs)
    write_table(path, REFERENCE_COLUMNS, rows, comments)


def f1_from_pr(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def prf(
    significant_pos: set,
    tested_hypotheses,
    ref: ReferenceSet,
) -> tuple[float, float, float]:
    """Precision, recall, F1 of significant (drug, outcome) pairs.

    A false negative is a tested hypothesis whose pair is in the reference
    but did not come out significant-positive; hypotheses are counted, so a
    reference pair tested under two indications can be missed twice.
    Empty denominators follow the 0/0 = 0 convention.
    """
    tested = list(tested_hypotheses)
    projections = {(h.drug, h.outcome) for h in tested}
    extra = set(significant_pos) - projections
    if extra:
        raise DomainError(f"{len(extra)} significant pair(s) not among tested hypotheses")
    tp = sum(1 for pair in significant_pos if pair in ref.known_pairs)
    fp = len(significant_pos) - tp
    fn = sum(
        1
        for h in tested
        if (h.drug, h.outcome) in ref.known_pairs
        and (h.drug, h.outcome) not in significant_pos
    )
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return precision, recall, f1_from_pr(precision, recall)


def significant_positive_pairs(mediation_rows) -> set:
    """(drug, outcome) pairs classified "pos" in a mediation batch."""
    return {
        (r.hypothesis.drug, r.hypothesis.outcome)
        for r in mediation_rows
        if r.outcome_class == "pos"
    }


def tanimoto(a, b) -> float:
    sa, sb = set(a), set(b)
    union = sa | sb
    if not union:
        raise BothEmpty("tanimoto of two empty sets is undefined")
    return len(sa & sb) / len(union)


@dataclass(frozen=True)
class SimilarityMatrix:
    drugs: tuple
    scores: np.ndarray
    normalized: bool

    def pair_score(self, i: int, j: int) -> float:
        return float(self.scores[i, j])


def similarity_matrix(drug_to_effects: dict, normalize: bool = True) -> SimilarityMatrix:
    """Pairwise Jaccard similarity of effect sets, optionally z-scored.

    Normalization uses the mean and population SD of the off-diagonal
    entries only; a degenerate SD of zero maps them all to 0. The diagonal
    stays at the raw maximum of 1.
    """
    drugs = sorted(drug_to_effects, key=lambda d: (d.code, d.kind) if hasattr(d, "code") else (str(d), ""))
    k = len(drugs)
    if k < 2:
        raise DomainError("similarity needs at least two drugs")
    scores = np.ones((k, k))
    for i, j in itertools.combinations(range(k), 2):
        s = tanimoto(drug_to_effects[drugs[i]], drug_to_effects[drugs[j]])
        scores[i, j] = scores[j, i] = s
    if normalize and k >= 2:
        iu = np.triu_indices(k, 1)
        vals = scores[iu]
        sd = float(vals.std())
        z = (vals - vals.mean()) / sd if sd > 0 else np.zeros_like(vals)
        scores[iu] = z
        scores[(iu[1], iu[0])] = z
        np.fill_diagonal(scores, 1.0)
    return SimilarityMatrix(drugs=tuple(drugs), scores=scores, normalized=normalize)


def roc_auc(scores, labels) -> float:
    """Rank-based AUC: P(pos score > neg score) + half credit for ties."""
    s = np.asarray(list(scores), dtype=np.float64)
    y = np.asarray(list(labels))
    if s.shape != y.shape or s.ndim != 1:
        raise DomainError("scores and labels must be equal-length vectors")
    if not np.isin(y, (0, 1)).all():
        raise DomainError("labels must be 0 or 1")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise OneClass("AUC needs both classes present")
    ranks = rankdata(s, method="average")
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def _pairwise_u(x: np.ndarray, y: np.ndarray) -> float:
    wins = (x[:, None] > y[None, :]).sum()
    ties = (x[:, None] == y[None, :]).sum()
    return float(wins) + 0.5 * float(ties)


def mann_whitney_u(x, y) -> tuple[float, float]:
    """Two-sided Mann-Whitney U test for the first sample.

    Small pooled samples (<= 10 values) get the exact permutation null by
    full enumeration; larger ones a normal approximation with tie-corrected
    variance and a 0.5 continuity correction.
    """
    xa = np.asarray(list(x), dtype=np.float64)
    ya = np.asarray(list(y), dtype=np.float64)
    if xa.size == 0 or ya.size == 0:
        raise EmptyInput("both samples must be non-empty")
    n1, n2 = xa.size, ya.size
    u_obs = _pairwise_u(xa, ya)

    if n1 + n2 <= 10:
        pooled = np.concatenate([xa, ya])
        idx = range(n1 + n2)
        us = []
        for chosen in itertools.combinations(idx, n1):
            mask = np.zeros(n1 + n2, dtype=bool)
            mask[list(chosen)] = True
            us.append(_pairwise_u(pooled[mask], pooled[~mask]))
        us = np.asarray(us)
        lo = float(np.mean(us <= u_obs))
        hi = float(np.mean(us >= u_obs))
        p = min(2.0 * min(lo, hi), 1.0)
        return u_obs, p

    n = n1 + n2
    pooled = np.concatenate([xa, ya])
    _, counts = np.unique(pooled, return_counts=True)
    tie_term = float(((counts**3 - counts).sum())) / (n * (n - 1))
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term)
    if var <= 0:
        return u_obs, 1.0
    mu = n1 * n2 / 2.0
    z = (abs(u_obs - mu) - 0.5) / math.sqrt(var)
    z = max(z, 0.0)
    p = min(math.erfc(z / math.sqrt(2.0)), 1.0)
    return u_obs, p


def _drug_indications(g: "kg.CausalKnowledgeGraph", drug) -> frozenset:
    return frozenset(g.out_neighbors(drug, kg.RelationKind.INDICATED_FOR))


def shared_indication_labels(sim: SimilarityMatrix, g: "kg.CausalKnowledgeGraph"):
    """Per unordered drug pair: similarity score and shared-indication label."""
    indications = {d: _drug_indications(g, d) for d in sim.drugs}
    scores, labels = [], []
    for i, j in itertools.combinations(range(len(sim.drugs)), 2):
        scores.append(sim.pair_score(i, j))
        labels.append(1 if indications[sim.drugs[i]] & indications[sim.drugs[j]] else 0)
    return scores, labels


def shared_indication_eval(sim: SimilarityMatrix, g: "kg.CausalKnowledgeGraph") -> float:
    """AUC of pairwise similarity for predicting a shared indication."""
    scores, labels = shared_indication_labels(sim, g)
    return roc_auc(scores, labels)


def write_metrics(path, metrics: dict, comments=()) -> None:
    from .tablefile import format_value

    with open(path, "w", encoding="utf-8") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        for key, value in metrics.items():
            fh.write(f"{key}={format_value(value)}\n")


def read_metrics(path) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            out[key] = value
    return out
