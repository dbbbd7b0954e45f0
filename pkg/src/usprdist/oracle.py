"""Brute-force ground truth at desk scale.

Everything here is definition-level computation: breadth-first search over
tree space, edge-subset enumeration for agreement forests, and exhaustive
endpoint decoration for replug weights.  Nothing is shared with the
production algorithms these oracles validate.
"""

import itertools
from collections import deque

from usprdist.errors import LabelMismatchError, TooLargeError
from usprdist.newick import parse_newick
from usprdist.trees import (
    EndpointEdge,
    PhyloForest,
    UTree,
    cut_edges,
    restrict,
    spr_neighbors,
)

_BFS_MAX = 8
_MAF_MAX = 7


def _check_same_labels(t1, t2):
    if t1.labels() != t2.labels():
        raise LabelMismatchError("trees have different leaf sets")


def all_trees(labels):
    """Every unrooted binary tree on the label set, by stepwise addition."""
    labels = sorted(labels)
    if len(labels) > _BFS_MAX:
        raise TooLargeError("tree space generation capped at n=%d" % _BFS_MAX)
    if len(labels) == 1:
        return [parse_newick("%s;" % labels[0])]
    if len(labels) == 2:
        return [parse_newick("(%s,%s);" % tuple(labels))]
    trees = {parse_newick("(%s,%s,%s);" % tuple(labels[:3])).canonical()}
    trees = {c: parse_newick(c + ";") for c in trees}
    for lab in labels[3:]:
        nxt = {}
        for t in trees.values():
            for u, v in t.edges():
                adj = {n: list(nb) for n, nb in t.adj.items()}
                lbs = dict(t.leaf_label)
                mid = max(adj) + 1
                leaf = mid + 1
                adj[u].remove(v)
                adj[v].remove(u)
                adj[mid] = [u, v, leaf]
                adj[u].append(mid)
                adj[v].append(mid)
                adj[leaf] = [mid]
                lbs[leaf] = lab
                t2 = UTree(adj, lbs)
                nxt.setdefault(t2.canonical(), t2)
        trees = nxt
    return list(trees.values())


class TreeSpaceIndex:
    """All trees on one label set plus their SPR adjacency."""

    def __init__(self, labels):
        self.trees = all_trees(labels)
        self.by_canon = {t.canonical(): t for t in self.trees}
        self._nbrs = {}

    def neighbors(self, canon):
        if canon not in self._nbrs:
            self._nbrs[canon] = sorted(
                t.canonical() for t in spr_neighbors(self.by_canon[canon])
            )
        return self._nbrs[canon]

    def bfs_from(self, canon):
        dist = {canon: 0}
        queue = deque([canon])
        while queue:
            c = queue.popleft()
            for nc in self.neighbors(c):
                if nc not in dist:
                    dist[nc] = dist[c] + 1
                    queue.append(nc)
        return dist


def bfs_uspr(t1, t2):
    """Exact SPR distance by breadth-first search over tree space."""
    _check_same_labels(t1, t2)
    if len(t1.labels()) > _BFS_MAX:
        raise TooLargeError("bfs_uspr capped at n=%d" % _BFS_MAX)
    goal = t2.canonical()
    if t1.canonical() == goal:
        return 0
    if len(t1.labels()) <= 3:
        return 0
    dist = {t1.canonical(): 0}
    queue = deque([t1])
    while queue:
        t = queue.popleft()
        d = dist[t.canonical()]
        for nb in spr_neighbors(t):
            c = nb.canonical()
            if c == goal:
                return d + 1
            if c not in dist:
                dist[c] = d + 1
                queue.append(nb)
    raise LabelMismatchError("target not reachable; differing leaf sets?")


# -- agreement forests by edge-subset enumeration ----------------------


def _partition_of_cut(tree, edge_subset):
    """Component label sets of tree minus the edges (empty ones dropped)."""
    removed = set()
    for u, v in edge_subset:
        removed.add((u, v))
        removed.add((v, u))
    seen = set()
    parts = []
    for start in tree.adj:
        if start in seen:
            continue
        stack, comp = [start], {start}
        while stack:
            n = stack.pop()
            for m in tree.adj[n]:
                if (n, m) in removed or m in comp:
                    continue
                comp.add(m)
                stack.append(m)
        seen |= comp
        labs = frozenset(
            tree.leaf_label[n] for n in comp if n in tree.leaf_label
        )
        if labs:
            parts.append(labs)
    return frozenset(parts)


def _steiner_sets(tree, parts):
    by_label = tree.leaf_by_label()
    from usprdist.trees import _steiner

    return [_steiner(tree, {by_label[l] for l in part}) for part in parts]


def _partition_is_af(t1, t2, parts, _cache):
    key = parts
    if key in _cache:
        return _cache[key]
    ok = True
    for sets, tree in ((_steiner_sets(t1, parts), t1), (_steiner_sets(t2, parts), t2)):
        used = set()
        for st in sets:
            if st & used:
                ok = False
                break
            used |= st
        if not ok:
            break
    if ok:
        for part in parts:
            if len(part) >= 4:
                if restrict(t1, part).canonical() != restrict(t2, part).canonical():
                    ok = False
                    break
    _cache[key] = ok
    return ok


def exhaustive_maf(t1, t2):
    """Minimum component count and all maximal AFs, by brute force."""
    _check_same_labels(t1, t2)
    n = len(t1.labels())
    if n > _MAF_MAX:
        raise TooLargeError("exhaustive_maf capped at n=%d" % _MAF_MAX)
    edges = t1.edges()
    cache = {}
    afs = set()
    for r in range(len(edges) + 1):
        for subset in itertools.combinations(edges, r):
            parts = _partition_of_cut(t1, subset)
            if parts not in afs and _partition_is_af(t1, t2, parts, cache):
                afs.add(parts)
    maximal = {
        p
        for p in afs
        if not any(q != p and _refines(p, q) for q in afs)
    }
    m = min(len(p) for p in afs)
    return m, maximal


def _refines(p, q):
    """True iff every part of p is contained in some part of q."""
    if len(p) < len(q):
        return False
    for part in p:
        if not any(part <= qp for qp in q):
            return False
    return True


def forest_of_partition_oracle(t1, parts):
    """Materialize the agreement forest with the given label partition."""
    return PhyloForest.from_trees([restrict(t1, p) for p in sorted(parts, key=sorted)])


# -- exhaustive endpoint agreement forests ------------------------------


def _endpoint_forests(tree, max_cuts, max_weight):
    """All X-phi-forests obtainable from tree by cutting an endpoint edge
    set of size <= max_cuts, with intrinsic weight <= max_weight.

    Returns a dict canonical-forest-key -> weight.
    """
    forest0 = PhyloForest.from_trees([tree])
    edges = [(u, v) for u in sorted(forest0.adj) for v in forest0.adj[u] if u < v]
    out = {}
    for r in range(max_cuts + 1):
        for subset in itertools.combinations(edges, r):
            for fixes in itertools.product(*(((u,), (v,), ()) for u, v in subset)):
                ees = [
                    EndpointEdge((u, v), frozenset(fix))
                    for (u, v), fix in zip(subset, fixes)
                ]
                f = cut_edges(forest0, ees)
                if any(not labs for labs in f.label_sets()):
                    continue  # a component of phi leaves only is not valid
                w = f.weight()
                if w <= max_weight:
                    key = f.canonical()
                    if key not in out or out[key] > w:
                        out[key] = w
    return out


def exhaustive_meaf(t1, t2):
    """Minimum EAF weight over all endpoint forests of both trees."""
    _check_same_labels(t1, t2)
    n = len(t1.labels())
    if n > _MAF_MAX:
        raise TooLargeError("exhaustive_meaf capped at n=%d" % _MAF_MAX)
    if t1.canonical() == t2.canonical():
        return 0
    d = 1
    while True:
        side1 = _endpoint_forests(t1, d, d)
        side2 = _endpoint_forests(t2, d, d)
        common = set(side1) & set(side2)
        if common:
            return min(side1[k] for k in common)
        d += 1
        if d > 4 * n:
            raise TooLargeError("no common endpoint forest found")
