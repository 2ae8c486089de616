"""Candidate (indication, drug, outcome) triples.

Two sources feed the screen. The causal source takes disease progression
pairs straight from onset edges. The comorbidity source mines them from the
cohort: every co-occurring disease pair is scored with a relative risk and a
one-sided hypergeometric tail test, significant pairs survive
Benjamini-Hochberg at the given level, and each survivor is oriented by which
disease tends to be diagnosed first. A pair becomes one hypothesis per drug
indicated for its first disease, unless the graph itself explains the pair
(drug indicated for both diseases, or both known side effects of the drug).
"""

from __future__ import annotations

from dataclasses import dataclass

from scipy.stats import hypergeom

from . import cohort as cohort_mod
from . import kg
from .errors import DomainError
from .kg import CausalKnowledgeGraph, NodeId, NodeKind, RelationKind
from .tablefile import read_table, write_table

SOURCE_CAUSAL = "causal"
SOURCE_COMORBIDITY = "comorbidity"


@dataclass(frozen=True, order=True)
class Hypothesis:
    indication: NodeId
    drug: NodeId
    outcome: NodeId
    source: str

    def __str__(self):
        return f"({self.indication.code}, {self.drug.code}, {self.outcome.code})"

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.indication.code, self.drug.code, self.outcome.code)


@dataclass(frozen=True)
class ComorbidityPair:
    d1: NodeId
    d2: NodeId
    rr: float
    p: float
    p_bh: float
    n_before: int
    n_after: int


def relative_risk(c12: int, p1: int, p2: int, n: int) -> tuple[float, float]:
    """Observed/expected co-occurrence ratio and one-sided exact tail p.

    With marginal prevalences p1/n and p2/n, independence predicts
    p1*p2/n joint carriers; rr = c12*n/(p1*p2). The p-value is
    P[X >= c12] for X hypergeometric with population n, p1 marked, p2 drawn.
    """
    if not (0 <= c12 <= min(p1, p2) <= max(p1, p2) <= n):
        raise DomainError(f"inconsistent counts c12={c12}, p1={p1}, p2={p2}, n={n}")
    if p1 < 1 or p2 < 1:
        raise DomainError("both diseases need at least one carrier")
    rr = c12 * n / (p1 * p2)
    p = float(hypergeom.sf(c12 - 1, n, p1, p2))
    return rr, min(p, 1.0)


def mine_comorbidity_pairs(
    c: "cohort_mod.Cohort",
    g: CausalKnowledgeGraph,
    alpha: float = 0.05,
) -> list[ComorbidityPair]:
    """Oriented, multiplicity-corrected comorbidity pairs from the cohort.

    All unordered disease-node pairs with at least one shared carrier are
    scored; BH runs across every scored pair. Pairs pass at rr > 1 and
    corrected p <= alpha. Orientation follows the majority of carriers with
    distinct first-diagnosis dates; exact ties are dropped.
    """
    from .mediation import bh_correct

    if not 0 < alpha < 1:
        raise DomainError("alpha must be in (0, 1)")
    diseases = g.diseases()
    exts = {d: cohort_mod.extension(c, g, d) for d in diseases}
    scored: list[tuple[NodeId, NodeId, float, float, int]] = []
    for i, a in enumerate(diseases):
        ea = exts[a]
        if not ea:
            continue
        for b in diseases[i + 1:]:
            eb = exts[b]
            c12 = len(ea & eb)
            if c12 < 1:
                continue
            rr, p = relative_risk(c12, len(ea), len(eb), c.n)
            scored.append((a, b, rr, p, c12))
    if not scored:
        return []
    p_bh, _ = bh_correct([s[3] for s in scored], alpha)

    closures = {d: kg.closure_codes(g, d) for d in diseases}
    out: list[ComorbidityPair] = []
    for (a, b, rr, p, _), q in zip(scored, p_bh):
        if q > alpha or rr <= 1.0:
            continue
        a_first = 0
        b_first = 0
        for pid in exts[a] & exts[b]:
            person = c.person(pid)
            fa = cohort_mod._first_date_in(person, closures[a])
            fb = cohort_mod._first_date_in(person, closures[b])
            if fa is None or fb is None:
                continue
            if fa < fb:
                a_first += 1
            elif fb < fa:
                b_first += 1
        if a_first == b_first:
            continue
        if a_first > b_first:
            out.append(ComorbidityPair(a, b, rr, p, q, a_first, b_first))
        else:
            out.append(ComorbidityPair(b, a, rr, p, q, b_first, a_first))
    out.sort(key=lambda cp: (cp.d1.code, cp.d2.code))
    return out


def causal_pairs(g: CausalKnowledgeGraph) -> list[tuple[NodeId, NodeId]]:
    """Disease progression pairs read off the onset edges."""
    return sorted(
        ((e.src, e.dst) for e in g.edges if e.rel is RelationKind.CAUSES_ONSET),
        key=lambda p: (p[0].code, p[1].code),
    )


def generate_hypotheses(
    g: CausalKnowledgeGraph,
    pairs,
    source: str,
) -> list[Hypothesis]:
    """One hypothesis per (pair, indicated drug), minus graph-explained ones.

    For a pair (x, y) and each drug indicated for x: skip the drug if it is
    also indicated for y (prescription for y explains the pair) or if x and y
    are both among its known side effects (the drug explains both).
    """
    out: set[Hypothesis] = set()
    for x, y in pairs:
        if x == y:
            raise DomainError(f"pair with identical diseases: {x}")
        if x.kind is not NodeKind.DISEASE or y.kind is not NodeKind.DISEASE:
            raise DomainError(f"pair must be two diseases, got ({x}, {y})")
        for drg in kg.indicated_drugs(g, x):
            if y in g.out_neighbors(drg, RelationKind.INDICATED_FOR):
                continue
            se = kg.side_effects_of(g, drg)
            if x in se and y in se:
                continue
            out.add(Hypothesis(indication=x, drug=drg, outcome=y, source=source))
    return sorted(out, key=lambda h: h.key)


def availability_filter(
    c: "cohort_mod.Cohort",
    g: CausalKnowledgeGraph,
    hypotheses: list[Hypothesis],
) -> list[Hypothesis]:
    """Keep hypotheses whose three extensions share at least one person."""
    kept = []
    for h in hypotheses:
        joint = (
            cohort_mod.extension(c, g, h.indication)
            & cohort_mod.extension(c, g, h.drug)
            & cohort_mod.extension(c, g, h.outcome)
        )
        if joint:
            kept.append(h)
    return kept


HYPOTHESES_COLUMNS = ["indication", "drug", "outcome", "source"]
COMORBIDITY_COLUMNS = ["d1", "d2", "rr", "p", "p_bh", "n_before", "n_after"]


def write_hypotheses(path, hypotheses: list[Hypothesis], comments=()) -> None:
    rows = [(h.indication.code, h.drug.code, h.outcome.code, h.source) for h in hypotheses]
    write_table(path, HYPOTHESES_COLUMNS, rows, comments)


def read_hypotheses(path) -> list[Hypothesis]:
    rows = read_table(path, HYPOTHESES_COLUMNS)
    return [
        Hypothesis(
            indication=kg.disease(r["indication"]),
            drug=kg.drug(r["drug"]),
            outcome=kg.disease(r["outcome"]),
            source=r["source"],
        )
        for r in rows
    ]


def write_comorbidity(path, pairs: list[ComorbidityPair], comments=()) -> None:
    rows = [(cp.d1.code, cp.d2.code, cp.rr, cp.p, cp.p_bh, cp.n_before, cp.n_after)
            for cp in pairs]
    write_table(path, COMORBIDITY_COLUMNS, rows, comments)
