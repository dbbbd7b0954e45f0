"""Core model for unrooted binary leaf-labeled trees and forests.

Trees are immutable from the caller's point of view: every operation
returns a fresh object and never mutates its inputs.  Node ids are small
ints with no meaning beyond one object's lifetime.

Leaves labeled ``phi`` are placeholders marking fixed endpoints of cut
edges inside endpoint forests; they are the only label allowed to repeat.
"""

import itertools
from dataclasses import dataclass, field

from usprdist.errors import (
    DuplicateLabelError,
    InvalidRegraftError,
    NoSuchEdgeError,
    NonBinaryError,
    TooSmallError,
    UnknownLabelError,
)

PHI = "phi"


def _smooth(adj, node):
    """Remove a degree-2 node, reconnecting its two neighbors."""
    a, b = adj[node]
    del adj[node]
    adj[a] = [x for x in adj[a] if x != node] + [b]
    adj[b] = [x for x in adj[b] if x != node] + [a]


def yield_suppress(adj, leaf_label):
    """Suppress unlabeled nodes of degree < 3 in place, cascading.

    Degree-2 nodes are smoothed, degree-1 and degree-0 nodes deleted.
    Labeled nodes are never touched; entire unlabeled components vanish.
    """
    pending = [n for n in adj if n not in leaf_label and len(adj[n]) < 3]
    while pending:
        n = pending.pop()
        if n not in adj or n in leaf_label:
            continue
        deg = len(adj[n])
        if deg == 2:
            _smooth(adj, n)
        elif deg == 1:
            (nbr,) = adj[n]
            del adj[n]
            adj[nbr] = [x for x in adj[nbr] if x != n]
            if nbr not in leaf_label and len(adj[nbr]) < 3:
                pending.append(nbr)
        else:
            del adj[n]


class UTree:
    """An unrooted binary tree with labeled leaves.

    ``adj`` maps node id -> list of neighbor ids; ``leaf_label`` maps the
    degree<=1 nodes to their labels.  Every unlabeled node has degree 3.
    """

    __slots__ = ("adj", "leaf_label", "_canon")

    def __init__(self, adj, leaf_label):
        self.adj = adj
        self.leaf_label = leaf_label
        self._canon = None

    # -- construction -------------------------------------------------

    @classmethod
    def from_adjacency(cls, adj, leaf_label, check=True):
        t = cls({n: list(v) for n, v in adj.items()}, dict(leaf_label))
        if check:
            t.validate()
        return t

    def copy(self):
        return UTree({n: list(v) for n, v in self.adj.items()}, dict(self.leaf_label))

    def validate(self):
        if not self.adj:
            raise TooSmallError("tree has no nodes")
        seen = set()
        for n, lab in self.leaf_label.items():
            if lab != PHI:
                if lab in seen:
                    raise DuplicateLabelError("duplicate leaf label %r" % lab)
                seen.add(lab)
        for n, nbrs in self.adj.items():
            deg = len(nbrs)
            if n in self.leaf_label:
                if deg > 1:
                    raise NonBinaryError("labeled node %d has degree %d" % (n, deg))
                if deg == 0 and len(self.adj) > 1:
                    raise NonBinaryError("disconnected leaf %d" % n)
            else:
                if deg != 3:
                    raise NonBinaryError("internal node %d has degree %d" % (n, deg))
        # connectivity
        start = next(iter(self.adj))
        stack, reach = [start], {start}
        while stack:
            for m in self.adj[stack.pop()]:
                if m not in reach:
                    reach.add(m)
                    stack.append(m)
        if len(reach) != len(self.adj):
            raise NonBinaryError("tree is not connected")
        return self

    # -- basic queries -------------------------------------------------

    def nodes(self):
        return self.adj.keys()

    def leaves(self):
        return self.leaf_label.keys()

    def labels(self):
        """Sorted tuple of non-phi leaf labels."""
        return tuple(sorted(l for l in self.leaf_label.values() if l != PHI))

    def phi_count(self):
        return sum(1 for l in self.leaf_label.values() if l == PHI)

    def n_leaves(self):
        return len(self.leaf_label)

    def leaf_by_label(self):
        return {lab: n for n, lab in self.leaf_label.items() if lab != PHI}

    def edges(self):
        return [(u, v) for u in self.adj for v in self.adj[u] if u < v]

    def has_edge(self, u, v):
        return u in self.adj and v in self.adj[u]

    def degree(self, n):
        return len(self.adj[n])

    # -- canonical form ------------------------------------------------

    def _render(self, node, parent):
        if node in self.leaf_label:
            return self.leaf_label[node]
        parts = sorted(self._render(c, node) for c in self.adj[node] if c != parent)
        return "(" + ",".join(parts) + ")"

    def canonical(self):
        """Deterministic string equal between trees iff label-isomorphic.

        Rooted at the leaf with the smallest non-phi label; subtrees are
        ordered by their rendered strings, which breaks phi ties.
        """
        if self._canon is None:
            if len(self.adj) == 1:
                self._canon = next(iter(self.leaf_label.values()))
            else:
                root = min(
                    (lab, n) for n, lab in self.leaf_label.items() if lab != PHI
                )[1]
                (nbr,) = self.adj[root]
                self._canon = "(%s,%s)" % (self.leaf_label[root], self._render(nbr, root))
        return self._canon

    def __eq__(self, other):
        return isinstance(other, UTree) and self.canonical() == other.canonical()

    def __hash__(self):
        return hash(self.canonical())

    def __repr__(self):
        return "UTree(%s)" % self.canonical()


@dataclass(frozen=True)
class EndpointEdge:
    """An edge plus a proper subset of its endpoints marked as fixed."""

    edge: tuple
    fixed: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        fixed = frozenset(self.fixed)
        object.__setattr__(self, "fixed", fixed)
        if len(fixed) > 1 or not fixed <= set(self.edge):
            raise ValueError("fixed endpoints must be a proper subset of the edge")


@dataclass(frozen=True)
class Quartet:
    """An unordered pair of disjoint leaf pairs: ab|cd."""

    pairs: frozenset

    @classmethod
    def of(cls, a, b, c, d):
        p1, p2 = frozenset((a, b)), frozenset((c, d))
        if len(p1) != 2 or len(p2) != 2 or p1 & p2:
            raise ValueError("quartet needs four distinct leaves")
        return cls(frozenset((p1, p2)))

    def leaves(self):
        return set().union(*self.pairs)


class PhyloForest:
    """A forest of trees whose leaves carry labels from X plus ``phi``.

    One global node id space; components are derived from connectivity.
    """

    __slots__ = ("adj", "leaf_label", "_comps", "_canon")

    def __init__(self, adj, leaf_label):
        self.adj = adj
        self.leaf_label = leaf_label
        self._comps = None
        self._canon = None

    @classmethod
    def from_trees(cls, trees):
        adj, labels = {}, {}
        offset = 0
        for t in trees:
            remap = {n: i + offset for i, n in enumerate(sorted(t.adj))}
            for n, nbrs in t.adj.items():
                adj[remap[n]] = [remap[m] for m in nbrs]
            for n, lab in t.leaf_label.items():
                labels[remap[n]] = lab
            offset += len(remap)
        return cls(adj, labels)

    def copy(self):
        return PhyloForest({n: list(v) for n, v in self.adj.items()}, dict(self.leaf_label))

    def components(self):
        """List of frozensets of node ids, one per connected component."""
        if self._comps is None:
            seen = set()
            comps = []
            for start in self.adj:
                if start in seen:
                    continue
                stack, comp = [start], {start}
                while stack:
                    for m in self.adj[stack.pop()]:
                        if m not in comp:
                            comp.add(m)
                            stack.append(m)
                seen |= comp
                comps.append(frozenset(comp))
            self._comps = comps
        return self._comps

    def component_trees(self):
        out = []
        for comp in self.components():
            adj = {n: list(self.adj[n]) for n in comp}
            labels = {n: self.leaf_label[n] for n in comp if n in self.leaf_label}
            out.append(UTree(adj, labels))
        return out

    def label_sets(self):
        """Non-phi label set per component."""
        return [
            frozenset(
                self.leaf_label[n]
                for n in comp
                if n in self.leaf_label and self.leaf_label[n] != PHI
            )
            for comp in self.components()
        ]

    def phi_count(self):
        return sum(1 for l in self.leaf_label.values() if l == PHI)

    def n_components(self):
        return len(self.components())

    def weight(self):
        """EAF weight: 2(|F| - 1) - q(F)."""
        return 2 * (self.n_components() - 1) - self.phi_count()

    def canonical(self):
        if self._canon is None:
            self._canon = tuple(sorted(t.canonical() for t in self.component_trees()))
        return self._canon

    def __eq__(self, other):
        return isinstance(other, PhyloForest) and self.canonical() == other.canonical()

    def __hash__(self):
        return hash(self.canonical())

    def __repr__(self):
        return "PhyloForest%s" % (self.canonical(),)


def cut_edges(forest, endpoint_edges):
    """Return the yielded forest F ÷ E for a set of endpoint edges.

    Deletes each edge, attaches a phi leaf to every fixed endpoint, then
    suppresses unlabeled nodes of degree < 3.
    """
    adj = {n: list(v) for n, v in forest.adj.items()}
    labels = dict(forest.leaf_label)
    next_id = max(adj) + 1 if adj else 0
    for ee in endpoint_edges:
        u, v = ee.edge
        if u not in adj or v not in adj[u]:
            raise NoSuchEdgeError("no edge (%r, %r)" % (u, v))
        for p in ee.fixed:
            if labels.get(p) == PHI:
                raise ValueError("phi node cannot be a fixed endpoint")
        adj[u].remove(v)
        adj[v].remove(u)
        for p in ee.fixed:
            adj[p].append(next_id)
            adj[next_id] = [p]
            labels[next_id] = PHI
            next_id += 1
    yield_suppress(adj, labels)
    return PhyloForest(adj, labels)


# -- induced restriction ----------------------------------------------


def _steiner(tree, leaf_nodes):
    """Node set of the minimal subtree connecting leaf_nodes."""
    if len(leaf_nodes) == 1:
        return set(leaf_nodes)
    root = next(iter(leaf_nodes))
    parent = {root: None}
    order = [root]
    stack = [root]
    while stack:
        n = stack.pop()
        for m in tree.adj[n]:
            if m not in parent:
                parent[m] = n
                order.append(m)
                stack.append(m)
    count = {n: (1 if n in leaf_nodes else 0) for n in order}
    for n in reversed(order):
        if parent[n] is not None:
            count[parent[n]] += count[n]
    total = len(leaf_nodes)
    # a node is on a path between two chosen leaves iff its subtree holds
    # between 1 and total-1 of them, or it is the root-side junction
    keep = set(leaf_nodes)
    for n in order:
        if n in keep:
            continue
        below = count[n]
        if 0 < below < total:
            keep.add(n)
    return keep


def restrict(tree, labels):
    """Induced tree T|V: minimal connecting subtree with suppression."""
    by_label = tree.leaf_by_label()
    want = set(labels)
    unknown = want - set(by_label)
    if unknown:
        raise UnknownLabelError("labels not in tree: %s" % sorted(unknown))
    if not want:
        raise TooSmallError("restriction to an empty label set")
    keep_leaves = {by_label[l] for l in want}
    keep = _steiner(tree, keep_leaves)
    adj = {n: [m for m in tree.adj[n] if m in keep] for n in keep}
    labels_out = {n: tree.leaf_label[n] for n in keep_leaves}
    yield_suppress(adj, labels_out)
    return UTree(adj, labels_out)


def forest_of_partition(tree, parts):
    """True iff the label partition is realizable as a forest of ``tree``.

    Holds when the minimal connecting subtrees of the parts are pairwise
    node-disjoint; the component shapes are then the induced restrictions.
    """
    by_label = tree.leaf_by_label()
    used = set()
    for part in parts:
        if not part:
            return False
        try:
            leaf_nodes = {by_label[l] for l in part}
        except KeyError:
            return False
        st = _steiner(tree, leaf_nodes)
        if st & used:
            return False
        used |= st
    return True


# -- SPR / TBR moves ---------------------------------------------------


def _side_nodes(tree, u, v):
    """Nodes of the component containing v once edge (u, v) is removed."""
    stack, side = [v], {v}
    while stack:
        n = stack.pop()
        for m in tree.adj[n]:
            if m == u and n == v:
                continue
            if m not in side:
                side.add(m)
                stack.append(m)
    return side


def spr_move(tree, prune_edge, regraft_edge):
    """One SPR: cut (u, v), regraft the u-side subtree onto (x, y) in T_v."""
    u, v = prune_edge
    if not tree.has_edge(u, v):
        raise NoSuchEdgeError("no edge (%r, %r)" % (u, v))
    x, y = regraft_edge
    if not tree.has_edge(x, y):
        raise NoSuchEdgeError("no edge (%r, %r)" % (x, y))
    tv = _side_nodes(tree, u, v)
    if x not in tv or y not in tv:
        raise InvalidRegraftError("regraft edge lies in the pruned component")
    if v in (x, y):
        raise InvalidRegraftError("regraft recreates the original tree")
    adj = {n: list(nbrs) for n, nbrs in tree.adj.items()}
    labels = dict(tree.leaf_label)
    adj[u].remove(v)
    adj[v].remove(u)
    w = max(adj) + 1
    adj[x].remove(y)
    adj[y].remove(x)
    adj[w] = [x, y, u]
    adj[x].append(w)
    adj[y].append(w)
    adj[u].append(w)
    yield_suppress(adj, labels)
    return UTree(adj, labels)


def spr_neighbors(tree):
    """All distinct trees one SPR away, deduplicated by canonical form."""
    if len(tree.leaf_label) <= 3:
        raise TooSmallError("SPR neighborhood undefined for n <= 3")
    out = {}
    for u in tree.adj:
        for v in tree.adj[u]:
            tv = _side_nodes(tree, u, v)
            for x in tv:
                for y in tree.adj[x]:
                    if x > y or y not in tv or v in (x, y):
                        continue
                    t = spr_move(tree, (u, v), (x, y))
                    out.setdefault(t.canonical(), t)
    out.pop(tree.canonical(), None)
    return set(out.values())


def tbr_neighbors(tree):
    """All distinct trees one TBR away (both cut endpoints may reattach)."""
    if len(tree.leaf_label) <= 3:
        raise TooSmallError("TBR neighborhood undefined for n <= 3")
    out = {}
    for u, v in tree.edges():
        tu = _side_nodes(tree, v, u)
        tv = _side_nodes(tree, u, v)
        u_sites = _reattach_sites(tree, tu, u)
        v_sites = _reattach_sites(tree, tv, v)
        for su in u_sites:
            for sv in v_sites:
                t = _tbr_apply(tree, (u, v), su, sv)
                out.setdefault(t.canonical(), t)
    out.pop(tree.canonical(), None)
    return set(out.values())


def _reattach_sites(tree, side, old_end):
    """Edges within ``side`` plus the bare node when the side is a leaf."""
    sites = []
    if len(side) == 1:
        sites.append(("node", old_end))
        return sites
    for x in side:
        for y in tree.adj[x]:
            if x < y and y in side:
                sites.append(("edge", (x, y)))
    return sites


def _tbr_apply(tree, cut_edge, site_u, site_v):
    u, v = cut_edge
    adj = {n: list(nbrs) for n, nbrs in tree.adj.items()}
    labels = dict(tree.leaf_label)
    adj[u].remove(v)
    adj[v].remove(u)
    nxt = max(adj) + 1
    ends = []
    for kind, site in (site_u, site_v):
        if kind == "node":
            ends.append(site)
        else:
            x, y = site
            adj[x].remove(y)
            adj[y].remove(x)
            adj[nxt] = [x, y]
            adj[x].append(nxt)
            adj[y].append(nxt)
            ends.append(nxt)
            nxt += 1
    a, b = ends
    adj[a].append(b)
    adj[b].append(a)
    yield_suppress(adj, labels)
    return UTree(adj, labels)


# -- quartets -----------------------------------------------------------


def quartets(tree):
    """The set of all quartet topologies displayed by the tree."""
    labs = tree.labels()
    out = set()
    for four in itertools.combinations(labs, 4):
        sub = restrict(tree, four)
        out.add(_quartet_of_four(sub, four))
    return out


def _quartet_of_four(four_leaf_tree, four):
    a = four[0]
    by_label = four_leaf_tree.leaf_by_label()
    na = by_label[a]
    (inner,) = four_leaf_tree.adj[na]
    partner = None
    for m in four_leaf_tree.adj[inner]:
        if m != na and m in four_leaf_tree.leaf_label:
            partner = four_leaf_tree.leaf_label[m]
            break
    if partner is None:
        raise NonBinaryError("not a binary quartet tree")
    rest = [l for l in four if l not in (a, partner)]
    return Quartet.of(a, partner, rest[0], rest[1])


def is_incompatible(quartet, forest):
    """True iff the quartet's leaves are split across components or the
    single containing component displays a different quartet."""
    leaves = quartet.leaves()
    comp_of = {}
    for idx, labs in enumerate(forest.label_sets()):
        for l in labs & leaves:
            comp_of[l] = idx
    if set(comp_of) != leaves:
        raise UnknownLabelError("quartet leaves missing from forest")
    if len(set(comp_of.values())) != 1:
        return True
    comp_tree = forest.component_trees()[comp_of[next(iter(leaves))]]
    sub = restrict(comp_tree, leaves)
    ordered = sorted(leaves)
    return _quartet_of_four(sub, ordered) != quartet


# -- replug graphs ------------------------------------------------------


class RGraph:
    """Loose graph for replug replay: cycles, parallel edges, and isolated
    labeled nodes are all representable.  Adjacency lists may repeat."""

    __slots__ = ("adj", "leaf_label")

    def __init__(self, adj, leaf_label):
        self.adj = adj
        self.leaf_label = leaf_label

    @classmethod
    def from_utree(cls, tree):
        return cls({n: list(v) for n, v in tree.adj.items()}, dict(tree.leaf_label))

    def copy(self):
        return RGraph({n: list(v) for n, v in self.adj.items()}, dict(self.leaf_label))

    def has_edge(self, u, v):
        return u in self.adj and v in self.adj[u]

    def is_tree(self):
        if not self.adj:
            return False
        n_edges = sum(len(v) for v in self.adj.values()) // 2
        if n_edges != len(self.adj) - 1:
            return False
        start = next(iter(self.adj))
        stack, reach = [start], {start}
        while stack:
            for m in self.adj[stack.pop()]:
                if m not in reach:
                    reach.add(m)
                    stack.append(m)
        return len(reach) == len(self.adj)

    def to_utree(self):
        if not self.is_tree():
            raise NonBinaryError("replug graph is not a tree")
        return UTree.from_adjacency(self.adj, self.leaf_label)

    def _suppress_from(self, seeds):
        smoothed = []
        pending = list(seeds)
        while pending:
            n = pending.pop()
            if n not in self.adj or n in self.leaf_label:
                continue
            deg = len(self.adj[n])
            if deg == 2:
                a, b = self.adj[n]
                del self.adj[n]
                self.adj[a].remove(n)
                self.adj[b].remove(n)
                self.adj[a].append(b)
                self.adj[b].append(a)
                smoothed.append((n, a, b))
            elif deg == 1:
                (nbr,) = self.adj[n]
                del self.adj[n]
                self.adj[nbr].remove(n)
                pending.append(nbr)
            elif deg == 0:
                del self.adj[n]
        return smoothed

    def apply_replug(self, prune_edge, regraft_point):
        """Cut (u, v) keeping the u end, reattach at an edge or a bare node.

        Returns (new_graph, attachment_node, smoothings).  The dropped
        stump v is suppressed if unlabeled; smoothings lists the
        (node, left, right) reconnections that cascaded from it.
        """
        u, v = prune_edge
        g = self.copy()
        if not g.has_edge(u, v):
            raise NoSuchEdgeError("no edge (%r, %r)" % (u, v))
        g.adj[u].remove(v)
        g.adj[v].remove(u)
        if isinstance(regraft_point, tuple):
            x, y = regraft_point
            if not g.has_edge(x, y):
                raise NoSuchEdgeError("no regraft edge (%r, %r)" % (x, y))
            w = max(g.adj) + 1
            g.adj[x].remove(y)
            g.adj[y].remove(x)
            g.adj[w] = [x, y, u]
            g.adj[x].append(w)
            g.adj[y].append(w)
            g.adj[u].append(w)
            new_node = w
        else:
            z = regraft_point
            if z not in g.adj or g.adj[z]:
                raise InvalidRegraftError("bare-node regraft needs an isolated node")
            g.adj[z].append(u)
            g.adj[u].append(z)
            new_node = z
        smoothed = g._suppress_from([v])
        return g, new_node, smoothed


def replug_move(graph, prune_edge, regraft_point):
    """Public replug operation on a loose graph; returns the new graph."""
    if isinstance(graph, UTree):
        graph = RGraph.from_utree(graph)
    g, _, _ = graph.apply_replug(prune_edge, regraft_point)
    return g
