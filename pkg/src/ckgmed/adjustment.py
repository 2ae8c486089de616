"""Confounder identification on the causal DAG.

``backdoor_sets`` enumerates candidate adjustment sets in deterministic order
(cardinality first, then lexicographically by node code) and keeps those that
satisfy the backdoor criterion, stopping after ``limit`` valid sets. The
treatment-to-outcome edge under scrutiny must already be present; callers add
it per hypothesis on a copy of the DAG. ``disjunctive_cause_set`` implements
the cause-of-either criterion: every ancestor of treatment or outcome, minus
the pair itself and anything downstream of treatment.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .digraph import DirectedGraph, node_sort_key
from .errors import CycleError, DomainError, NoValidSet, UnknownNode
from .kg import CausalKnowledgeGraph, NodeId, RelationKind, ancestors, causal_dag


@dataclass(frozen=True)
class AdjustmentSet:
    nodes: frozenset
    criterion: str
    pruned: bool = False
    lasso_selected: bool = False


def _as_set(x) -> set:
    # NamedTuple node ids are tuples; treat them as atoms, not collections
    if isinstance(x, (set, frozenset, list)) or (
            isinstance(x, tuple) and not hasattr(x, "_fields")):
        return set(x)
    return {x}


def d_separated(dag: DirectedGraph, x, y, z) -> bool:
    """True iff every path between x and y is blocked given z.

    Uses the reachability formulation: walk the graph remembering whether a
    node was entered along an incoming or outgoing edge, descending through
    colliders only when the collider or one of its descendants is in z.
    """
    X, Y, Z = _as_set(x), _as_set(y), _as_set(z)
    for n in X | Y | Z:
        if n not in dag:
            raise UnknownNode(f"node {n!r} not in graph")
    if X & Y or X & Z or Y & Z:
        raise DomainError("x, y, z must be pairwise disjoint")

    # z together with every ancestor of z: nodes that open colliders
    opens = set(Z)
    for n in Z:
        opens |= dag.ancestors(n)

    up, down = 0, 1
    visited: set[tuple] = set()
    stack = [(n, up) for n in X]
    while stack:
        node, direction = stack.pop()
        if (node, direction) in visited:
            continue
        visited.add((node, direction))
        if node not in Z and node in Y:
            return False
        if direction == up and node not in Z:
            for p in dag.parents(node):
                stack.append((p, up))
            for c in dag.children(node):
                stack.append((c, down))
        elif direction == down:
            if node not in Z:
                for c in dag.children(node):
                    stack.append((c, down))
            if node in opens:
                for p in dag.parents(node):
                    stack.append((p, up))
    return True


def backdoor_sets(dag: DirectedGraph, t, y, limit: int = 1000) -> list[frozenset]:
    """Valid backdoor adjustment sets for the edge t -> y, in canonical order.

    A set qualifies when it contains no descendant of t and d-separates t
    from y once every edge out of t is removed. Candidates are enumerated by
    ascending cardinality, ties broken lexicographically by node code, and
    enumeration stops after ``limit`` valid sets. The empty set is a
    legitimate candidate and, when valid, always comes first.
    """
    if t not in dag or y not in dag:
        raise UnknownNode(f"{t!r} or {y!r} not in graph")
    if not dag.has_edge(t, y):
        raise DomainError(f"expected edge {t!r} -> {y!r} to be present")
    if limit < 1:
        raise DomainError("limit must be positive")
    forbidden = dag.descendants(t) | {t, y}
    candidates = sorted((n for n in dag.nodes if n not in forbidden), key=node_sort_key)
    trimmed = dag.without_out_edges(t)
    out: list[frozenset] = []
    for size in range(len(candidates) + 1):
        for combo in itertools.combinations(candidates, size):
            if d_separated(trimmed, t, y, set(combo)):
                out.append(frozenset(combo))
                if len(out) >= limit:
                    return out
    return out


def choose_backdoor_set(sets: list[frozenset]) -> frozenset:
    """Smallest set, first-listed on ties; raises NoValidSet if none exist."""
    if not sets:
        raise NoValidSet("no valid backdoor adjustment set")
    best = sets[0]
    for s in sets[1:]:
        if len(s) < len(best):
            best = s
    return best


def disjunctive_cause_set(dag: DirectedGraph, t, y) -> frozenset:
    """All ancestors of t or y, excluding t, y, and descendants of t."""
    if t not in dag or y not in dag:
        raise UnknownNode(f"{t!r} or {y!r} not in graph")
    causes = dag.ancestors(t) | dag.ancestors(y)
    return frozenset(causes - dag.descendants(t) - {t, y})


def prune_hierarchy(nodes, g: CausalKnowledgeGraph) -> frozenset:
    """Drop every node that has a transitive is_a ancestor inside the set.

    When a disease and one of its generalizations are both selected, only the
    more general one is kept. Idempotent.
    """
    node_set = frozenset(nodes)
    kept = []
    for n in node_set:
        if isinstance(n, NodeId) and n in g.nodes:
            if ancestors(g, n, RelationKind.IS_A) & node_set:
                continue
        kept.append(n)
    return frozenset(kept)


def hypothesis_adjustment(
    g: CausalKnowledgeGraph, h, criterion: str, limit: int = 1000
) -> frozenset:
    """Adjustment nodes for one drug/outcome hypothesis.

    The causal DAG is augmented with the hypothesized drug-to-outcome edge,
    the chosen criterion is applied with the drug as treatment, and the
    hypothesis's own three nodes plus hierarchy-redundant diseases are
    removed from the result. criterion "none" short-circuits to the empty
    set for unadjusted runs.
    """
    if criterion not in ("backdoor", "disjunctive", "none"):
        raise DomainError(f"unknown criterion {criterion!r}")
    if criterion == "none":
        return frozenset()
    dag = causal_dag(g)
    for node in (h.indication, h.drug, h.outcome):
        if node not in dag:
            raise UnknownNode(f"node {node} not in graph")
    dag.add_edge(h.drug, h.outcome)
    if not dag.is_acyclic():
        raise CycleError("hypothesized edge closes a causal cycle")
    if criterion == "backdoor":
        nodes = choose_backdoor_set(backdoor_sets(dag, h.drug, h.outcome, limit=limit))
    else:
        nodes = disjunctive_cause_set(dag, h.drug, h.outcome)
    nodes = frozenset(nodes) - {h.indication, h.drug, h.outcome}
    return prune_hierarchy(nodes, g)


ADJUSTMENTS_COLUMNS = ["indication", "drug", "outcome", "criterion", "nodes", "status"]


def write_adjustments(path, rows, comments=()) -> None:
    """rows: (hypothesis, criterion, nodes frozenset | None); None means failed."""
    from .tablefile import write_table

    table = []
    for h, criterion, nodes in rows:
        joined = ";".join(sorted(n.code for n in nodes)) if nodes is not None else ""
        status = "ok" if nodes is not None else "na"
        table.append((
            h.indication.code, h.drug.code, h.outcome.code, criterion, joined, status))
    write_table(path, ADJUSTMENTS_COLUMNS, table, comments)
