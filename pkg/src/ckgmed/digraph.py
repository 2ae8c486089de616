"""Minimal directed graph used for causal DAG reasoning.

Nodes are arbitrary hashable objects. Iteration everywhere is over sorted
nodes so downstream enumeration is deterministic.
"""

from __future__ import annotations

from typing import Hashable, Iterable

from .errors import CycleError, UnknownNode

Node = Hashable


def node_sort_key(n):
    """Sort key used across the package: node code first, kind second.

    Graph nodes carry ``code``/``kind`` attributes; plain strings and tuples
    (as used in tests and synthetic DAGs) sort as themselves.
    """
    code = getattr(n, "code", None)
    if code is not None:
        return (code, getattr(n, "kind", ""))
    return (str(n), "")


class DirectedGraph:
    """Adjacency-set digraph with the few traversals the pipeline needs."""

    def __init__(self, nodes: Iterable[Node] = (), edges: Iterable[tuple[Node, Node]] = ()):
        self._succ: dict[Node, set[Node]] = {}
        self._pred: dict[Node, set[Node]] = {}
        for n in nodes:
            self.add_node(n)
        for u, v in edges:
            self.add_edge(u, v)

    def add_node(self, n: Node) -> None:
        if n not in self._succ:
            self._succ[n] = set()
            self._pred[n] = set()

    def add_edge(self, u: Node, v: Node) -> None:
        self.add_node(u)
        self.add_node(v)
        self._succ[u].add(v)
        self._pred[v].add(u)

    def __contains__(self, n: Node) -> bool:
        return n in self._succ

    def __len__(self) -> int:
        return len(self._succ)

    @property
    def nodes(self) -> list[Node]:
        return sorted(self._succ, key=node_sort_key)

    def edges(self) -> list[tuple[Node, Node]]:
        return sorted(
            ((u, v) for u, vs in self._succ.items() for v in vs),
            key=lambda e: (node_sort_key(e[0]), node_sort_key(e[1])),
        )

    def has_edge(self, u: Node, v: Node) -> bool:
        return u in self._succ and v in self._succ[u]

    def children(self, n: Node) -> set[Node]:
        self._require(n)
        return set(self._succ[n])

    def parents(self, n: Node) -> set[Node]:
        self._require(n)
        return set(self._pred[n])

    def _require(self, n: Node) -> None:
        if n not in self._succ:
            raise UnknownNode(f"node {n!r} not in graph")

    def _reach(self, start: Node, adj: dict[Node, set[Node]]) -> set[Node]:
        self._require(start)
        seen: set[Node] = set()
        stack = list(adj[start])
        while stack:
            n = stack.pop()
            if n not in seen:
                seen.add(n)
                stack.extend(adj[n] - seen)
        return seen

    def descendants(self, n: Node) -> set[Node]:
        """All nodes reachable from n by directed edges, excluding n itself."""
        return self._reach(n, self._succ) - {n}

    def ancestors(self, n: Node) -> set[Node]:
        """All nodes from which n is reachable, excluding n itself."""
        return self._reach(n, self._pred) - {n}

    def copy(self) -> "DirectedGraph":
        g = DirectedGraph()
        for n, vs in self._succ.items():
            g.add_node(n)
            for v in vs:
                g.add_edge(n, v)
        return g

    def without_out_edges(self, n: Node) -> "DirectedGraph":
        """Copy of the graph with every edge leaving n removed."""
        self._require(n)
        g = self.copy()
        for v in list(g._succ[n]):
            g._succ[n].discard(v)
            g._pred[v].discard(n)
        return g

    def topological_sort(self) -> list[Node]:
        """Kahn's algorithm; raises CycleError naming one cycle if cyclic."""
        indeg = {n: len(ps) for n, ps in self._pred.items()}
        ready = sorted((n for n, d in indeg.items() if d == 0), key=node_sort_key)
        order: list[Node] = []
        while ready:
            n = ready.pop(0)
            order.append(n)
            for v in sorted(self._succ[n], key=node_sort_key):
                indeg[v] -= 1
                if indeg[v] == 0:
                    ready.append(v)
        if len(order) != len(self._succ):
            raise CycleError("graph contains a cycle", cycle=self.find_cycle())
        return order

    def find_cycle(self) -> list[Node]:
        """Return one directed cycle as a node list, or [] if acyclic."""
        WHITE, GRAY, BLACK = 0, 1, 2
        color = {n: WHITE for n in self._succ}
        parent: dict[Node, Node] = {}
        for root in sorted(self._succ, key=node_sort_key):
            if color[root] != WHITE:
                continue
            stack = [(root, iter(sorted(self._succ[root], key=node_sort_key)))]
            color[root] = GRAY
            while stack:
                n, it = stack[-1]
                advanced = False
                for v in it:
                    if color[v] == WHITE:
                        color[v] = GRAY
                        parent[v] = n
                        stack.append((v, iter(sorted(self._succ[v], key=node_sort_key))))
                        advanced = True
                        break
                    if color[v] == GRAY:
                        cycle = [v, n]
                        cur = n
                        while cur != v:
                            cur = parent[cur]
                            cycle.append(cur)
                        cycle.reverse()
                        return cycle
                if not advanced:
                    color[n] = BLACK
                    stack.pop()
        return []

    def is_acyclic(self) -> bool:
        return not self.find_cycle()
