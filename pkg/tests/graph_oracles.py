"""Exhaustive graph oracles for cross-checking the adjustment module.

Everything here works on plain edge lists: paths are enumerated outright and
subsets tried one by one, so none of the reachability shortcuts in the
package are shared with these checks.
"""

import itertools


def sort_key(n):
    code = getattr(n, "code", None)
    if code is not None:
        return (code, getattr(n, "kind", ""))
    return (str(n), "")


def descendants_of(edges, node):
    """Nodes reachable from ``node`` by one or more directed steps."""
    out = set()
    frontier = [node]
    while frontier:
        n = frontier.pop()
        for a, b in edges:
            if a == n and b not in out:
                out.add(b)
                frontier.append(b)
    return out


def _undirected_adjacency(edges, nodes):
    adj = {n: set() for n in nodes}
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    return adj


def _blocked(path, edge_set, z, desc):
    """Standard blocking rules applied to one explicit path.

    An interior node with both path edges pointing into it is a collider:
    it blocks unless itself or a descendant is conditioned on. Any other
    interior node blocks exactly when conditioned on.
    """
    for i in range(1, len(path) - 1):
        prev, mid, nxt = path[i - 1], path[i], path[i + 1]
        if (prev, mid) in edge_set and (nxt, mid) in edge_set:
            if not (({mid} | desc[mid]) & z):
                return True
        elif mid in z:
            return True
    return False


def d_separated_by_paths(edges, nodes, xs, ys, z):
    """d-separation decided by enumerating every simple path."""
    edge_set = set(edges)
    adj = _undirected_adjacency(edges, nodes)
    desc = {n: descendants_of(edges, n) for n in nodes}
    z = set(z)
    for x in xs:
        for y in ys:
            stack = [(x, [x])]
            while stack:
                node, path = stack.pop()
                if node == y:
                    if not _blocked(path, edge_set, z, desc):
                        return False
                    continue
                for nb in adj[node]:
                    if nb not in path:
                        stack.append((nb, path + [nb]))
    return True


def brute_backdoor_sets(edges, nodes, t, y):
    """All valid backdoor sets for t -> y, smallest first, ties by code.

    A subset of the remaining nodes qualifies when it avoids descendants of
    t and d-separates t from y after every edge out of t is dropped.
    """
    desc_t = descendants_of(edges, t)
    candidates = sorted(
        (n for n in nodes if n not in desc_t and n != t and n != y), key=sort_key)
    trimmed = [(a, b) for a, b in edges if a != t]
    out = []
    for size in range(len(candidates) + 1):
        for combo in itertools.combinations(candidates, size):
            if d_separated_by_paths(trimmed, nodes, {t}, {y}, set(combo)):
                out.append(frozenset(combo))
    return out


def random_dag_edges(rng, n_nodes, p_edge=0.4, names="abcdefgh"):
    """Random DAG: orient every sampled pair along a random node order."""
    nodes = [names[i] for i in range(n_nodes)]
    order = list(rng.permutation(n_nodes))
    edges = []
    for i in range(n_nodes):
        for j in range(i + 1, n_nodes):
            if rng.random() < p_edge:
                edges.append((nodes[order[i]], nodes[order[j]]))
    return nodes, edges
