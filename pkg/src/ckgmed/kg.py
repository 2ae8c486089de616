"""Typed disease/drug knowledge graph and its induced causal DAG.

The graph holds four edge types over two node kinds:

    is_a            disease -> disease   (child to parent)
    causes_onset    disease -> disease
    indicated_for   drug    -> disease
    has_side_effect drug    -> disease

Only onset and indication edges carry causal meaning. The causal DAG keeps
``causes_onset`` edges as they are and reverses ``indicated_for`` edges
(a disease causes prescription of its drug), so drugs are sinks unless an
analysis adds a hypothesis edge of its own. Hierarchy and side effect edges
never enter the causal DAG.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

from .digraph import DirectedGraph
from .errors import CycleError, KindMismatch, ParseError, UnknownNode


class NodeKind(str, enum.Enum):
    DISEASE = "disease"
    DRUG = "drug"


class RelationKind(str, enum.Enum):
    IS_A = "is_a"
    CAUSES_ONSET = "causes_onset"
    INDICATED_FOR = "indicated_for"
    HAS_SIDE_EFFECT = "has_side_effect"


# required (subject_kind, object_kind) per relation
_ENDPOINT_KINDS = {
    RelationKind.IS_A: (NodeKind.DISEASE, NodeKind.DISEASE),
    RelationKind.CAUSES_ONSET: (NodeKind.DISEASE, NodeKind.DISEASE),
    RelationKind.INDICATED_FOR: (NodeKind.DRUG, NodeKind.DISEASE),
    RelationKind.HAS_SIDE_EFFECT: (NodeKind.DRUG, NodeKind.DISEASE),
}


class NodeId(NamedTuple):
    kind: NodeKind
    code: str

    def __str__(self):
        return f"{self.kind.value}:{self.code}"


def disease(code: str) -> NodeId:
    return NodeId(NodeKind.DISEASE, code)


def drug(code: str) -> NodeId:
    return NodeId(NodeKind.DRUG, code)


class Edge(NamedTuple):
    src: NodeId
    rel: RelationKind
    dst: NodeId


@dataclass(frozen=True)
class LoadSummary:
    n_nodes: int
    n_edges: int
    n_duplicates: int
    relation_counts: dict[str, int] = field(default_factory=dict)


class CausalKnowledgeGraph:
    """Immutable-by-convention container for nodes, edges, and indexes."""

    #: relations that contribute to the causal DAG (indication edges reversed)
    causal_relations = frozenset({RelationKind.CAUSES_ONSET, RelationKind.INDICATED_FOR})

    def __init__(self, edges: Iterable[Edge], n_duplicates: int = 0):
        self.edges: list[Edge] = []
        self.nodes: set[NodeId] = set()
        self._out: dict[tuple[NodeId, RelationKind], set[NodeId]] = {}
        self._in: dict[tuple[NodeId, RelationKind], set[NodeId]] = {}
        seen: set[Edge] = set()
        dups = n_duplicates
        rel_counts: dict[str, int] = {r.value: 0 for r in RelationKind}
        for e in edges:
            if e in seen:
                dups += 1
                continue
            seen.add(e)
            _validate_edge(e)
            self.edges.append(e)
            self.nodes.update((e.src, e.dst))
            self._out.setdefault((e.src, e.rel), set()).add(e.dst)
            self._in.setdefault((e.dst, e.rel), set()).add(e.src)
            rel_counts[e.rel.value] += 1
        self.summary = LoadSummary(
            n_nodes=len(self.nodes),
            n_edges=len(self.edges),
            n_duplicates=dups,
            relation_counts=rel_counts,
        )
        self._check_acyclic()
        self._isa_desc_cache: dict[NodeId, frozenset[NodeId]] = {}
        self._causal: DirectedGraph | None = None

    def _check_acyclic(self) -> None:
        isa = DirectedGraph(self.nodes)
        for e in self.edges:
            if e.rel is RelationKind.IS_A:
                isa.add_edge(e.src, e.dst)
        cyc = isa.find_cycle()
        if cyc:
            raise CycleError("is_a hierarchy contains a cycle", cycle=cyc)
        cyc = self._build_causal().find_cycle()
        if cyc:
            raise CycleError("causal subgraph contains a cycle", cycle=cyc)

    def _build_causal(self) -> DirectedGraph:
        dag = DirectedGraph(self.nodes)
        for e in self.edges:
            if e.rel is RelationKind.CAUSES_ONSET:
                dag.add_edge(e.src, e.dst)
            elif e.rel is RelationKind.INDICATED_FOR:
                dag.add_edge(e.dst, e.src)
        return dag

    def out_neighbors(self, node: NodeId, rel: RelationKind) -> set[NodeId]:
        return set(self._out.get((node, rel), ()))

    def in_neighbors(self, node: NodeId, rel: RelationKind) -> set[NodeId]:
        return set(self._in.get((node, rel), ()))

    def require(self, node: NodeId) -> None:
        if node not in self.nodes:
            raise UnknownNode(f"node {node} not in graph")

    def diseases(self) -> list[NodeId]:
        return sorted((n for n in self.nodes if n.kind is NodeKind.DISEASE))

    def drugs(self) -> list[NodeId]:
        return sorted((n for n in self.nodes if n.kind is NodeKind.DRUG))


def _validate_edge(e: Edge) -> None:
    want_src, want_dst = _ENDPOINT_KINDS[e.rel]
    if e.src.kind is not want_src or e.dst.kind is not want_dst:
        raise KindMismatch(
            f"relation {e.rel.value} requires {want_src.value} -> {want_dst.value}, "
            f"got {e.src} -> {e.dst}"
        )
    if e.src == e.dst:
        raise CycleError(f"self loop on {e.src}", cycle=[e.src, e.src])


def load_graph(path) -> CausalKnowledgeGraph:
    """Read a five column TSV into a validated graph.

    Columns: subject_code, relation, object_code, subject_kind, object_kind.
    Lines starting with '#' and blank lines are ignored. Duplicate triples are
    dropped silently; the count is available in ``graph.summary``.
    """
    edges: list[Edge] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 5:
                raise ParseError(f"expected 5 tab-separated columns, got {len(parts)}",
                                 path=path, line_no=line_no)
            s_code, rel_s, o_code, s_kind_s, o_kind_s = (p.strip() for p in parts)
            try:
                rel = RelationKind(rel_s)
            except ValueError:
                raise ParseError(f"unknown relation {rel_s!r}", path=path, line_no=line_no) from None
            try:
                s_kind = NodeKind(s_kind_s)
                o_kind = NodeKind(o_kind_s)
            except ValueError as exc:
                raise ParseError(f"unknown node kind: {exc}", path=path, line_no=line_no) from None
            if not s_code or not o_code:
                raise ParseError("empty node code", path=path, line_no=line_no)
            edges.append(Edge(NodeId(s_kind, s_code), rel, NodeId(o_kind, o_code)))
    return CausalKnowledgeGraph(edges)


def write_graph(path, g: CausalKnowledgeGraph) -> None:
    """Write the graph back out in the same five column TSV layout."""
    rows = sorted(
        (e.src.code, e.rel.value, e.dst.code, e.src.kind.value, e.dst.kind.value)
        for e in g.edges
    )
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write("\t".join(row) + "\n")


def causal_dag(g: CausalKnowledgeGraph) -> DirectedGraph:
    """DAG over all graph nodes: onset edges forward, indication edges reversed.

    Returns a fresh copy each call so callers may add hypothesis edges freely.
    """
    if g._causal is None:
        g._causal = g._build_causal()
        cyc = g._causal.find_cycle()
        if cyc:
            raise CycleError("causal subgraph contains a cycle", cycle=cyc)
    return g._causal.copy()


def ancestors(g: CausalKnowledgeGraph, node: NodeId, rel: RelationKind) -> set[NodeId]:
    """Transitive closure from ``node`` along ``rel`` edges, source to target.

    For ``is_a`` this walks child to parent, so the result is the set of
    more general diseases that ``node`` specializes.
    """
    g.require(node)
    seen: set[NodeId] = set()
    stack = list(g.out_neighbors(node, rel))
    while stack:
        n = stack.pop()
        if n not in seen:
            seen.add(n)
            stack.extend(g.out_neighbors(n, rel) - seen)
    seen.discard(node)
    return seen


def isa_descendants(g: CausalKnowledgeGraph, node: NodeId) -> frozenset[NodeId]:
    """All diseases that reach ``node`` via is_a edges, excluding node itself.

    A diagnosis of any of these counts as a diagnosis of ``node``. Cached on
    the graph, which is treated as immutable after construction.
    """
    g.require(node)
    cached = g._isa_desc_cache.get(node)
    if cached is not None:
        return cached
    seen: set[NodeId] = set()
    stack = list(g.in_neighbors(node, RelationKind.IS_A))
    while stack:
        n = stack.pop()
        if n not in seen:
            seen.add(n)
            stack.extend(g.in_neighbors(n, RelationKind.IS_A) - seen)
    seen.discard(node)
    out = frozenset(seen)
    g._isa_desc_cache[node] = out
    return out


def closure_codes(g: CausalKnowledgeGraph, node: NodeId) -> frozenset[str]:
    """Codes of ``node`` plus all of its is_a descendants."""
    return frozenset({node.code} | {n.code for n in isa_descendants(g, node)})


def indicated_drugs(g: CausalKnowledgeGraph, dis: NodeId) -> set[NodeId]:
    """Drugs with a direct indication edge into ``dis``; no hierarchy expansion."""
    g.require(dis)
    if dis.kind is not NodeKind.DISEASE:
        raise KindMismatch(f"indicated_drugs expects a disease, got {dis}")
    return g.in_neighbors(dis, RelationKind.INDICATED_FOR)


def side_effects_of(g: CausalKnowledgeGraph, drg: NodeId) -> set[NodeId]:
    """Diseases recorded as known side effects of ``drg``."""
    g.require(drg)
    if drg.kind is not NodeKind.DRUG:
        raise KindMismatch(f"side_effects_of expects a drug, got {drg}")
    return g.out_neighbors(drg, RelationKind.HAS_SIDE_EFFECT)
