"""Maximum matching on small general graphs and minimum edge cover.

The clause graphs produced by the phi-node assignment have one vertex per
saturated dead tree and one edge per variable shared by two of them, so
they stay tiny (at most 2k vertices).  The blossom implementation below
therefore favors clarity over asymptotics.
"""

from collections import deque
from dataclasses import dataclass, field

from usprdist.errors import UncoverableVertexError


@dataclass
class ClauseGraph:
    """Constraint graph of a monotone CNF+(<=2) formula.

    ``edges`` holds (u, v, var) for variables shared by clauses u and v;
    parallel edges are kept (they matter for cover extraction, not for
    matching).  ``private`` maps a clause to variables only it contains.
    """

    n_vertices: int
    edges: list = field(default_factory=list)
    private: dict = field(default_factory=dict)

    def simple_adjacency(self):
        adj = [set() for _ in range(self.n_vertices)]
        for u, v, _ in self.edges:
            if u != v:
                adj[u].add(v)
                adj[v].add(u)
        return [sorted(s) for s in adj]

    def edge_var(self, u, v):
        """Deterministic representative variable for the (u, v) edge."""
        cands = [w for a, b, w in self.edges if {a, b} == {u, v}]
        return min(cands)


def _blossom_match(n, adj):
    """Maximum cardinality matching; returns the match array."""
    match = [-1] * n

    def try_augment(root):
        used = [False] * n
        parent = [-1] * n
        base = list(range(n))
        used[root] = True
        queue = deque([root])

        def lca(a, b):
            seen = [False] * n
            x = a
            while True:
                x = base[x]
                seen[x] = True
                if match[x] == -1:
                    break
                x = parent[match[x]]
            y = b
            while True:
                y = base[y]
                if seen[y]:
                    return y
                y = parent[match[y]]

        def mark_path(v, b, child, in_blossom):
            while base[v] != b:
                in_blossom[base[v]] = True
                in_blossom[base[match[v]]] = True
                parent[v] = child
                child = match[v]
                v = parent[match[v]]

        while queue:
            v = queue.popleft()
            for to in adj[v]:
                if base[v] == base[to] or match[v] == to:
                    continue
                if to == root or (match[to] != -1 and parent[match[to]] != -1):
                    cur = lca(v, to)
                    in_blossom = [False] * n
                    mark_path(v, cur, to, in_blossom)
                    mark_path(to, cur, v, in_blossom)
                    for i in range(n):
                        if in_blossom[base[i]]:
                            base[i] = cur
                            if not used[i]:
                                used[i] = True
                                queue.append(i)
                elif parent[to] == -1:
                    parent[to] = v
                    if match[to] == -1:
                        x = to
                        while x != -1:
                            px = parent[x]
                            nxt = match[px]
                            match[x] = px
                            match[px] = x
                            x = nxt
                        return True
                    used[match[to]] = True
                    queue.append(match[to])
        return False

    for v in range(n):
        if match[v] == -1:
            try_augment(v)
    return match


def maximum_matching(g):
    """Maximum matching of the simple view of the clause graph."""
    match = _blossom_match(g.n_vertices, g.simple_adjacency())
    return {(u, match[u]) for u in range(g.n_vertices) if match[u] > u}


def minimum_edge_cover(g):
    """Minimum-size edge set touching every vertex.

    Built by extending a maximum matching greedily; its size is always
    |V| - |maximum matching|.  Returns (u, v, var) triples.
    """
    adj = g.simple_adjacency()
    for v in range(g.n_vertices):
        if not adj[v]:
            raise UncoverableVertexError("vertex %d has no incident edge" % v)
    match = _blossom_match(g.n_vertices, adj)
    cover = {
        (u, match[u], g.edge_var(u, match[u]))
        for u in range(g.n_vertices)
        if match[u] > u
    }
    covered = {u for u in range(g.n_vertices) if match[u] != -1}
    for v in range(g.n_vertices):
        if v not in covered:
            u = adj[v][0]
            cover.add((min(u, v), max(u, v), g.edge_var(u, v)))
            covered.add(v)
    return cover
