"""From maximal agreement forests to the replug distance.

Pipeline per agreement forest F of (T1, T2):

  build_mapping      nodes of both trees <-> nodes of F; per-edge socket
                     paths; dead trees (maximal unmapped edge sets)
  socket assignment  order-preserving pairing of T1/T2 sockets per F edge;
                     paired sockets plus singleton leaves are the phi
                     candidates
  phi optimization   saturated dead trees induce a monotone CNF+(<=2)
                     formula; minimum-cardinality satisfiability via
                     minimum edge cover on the clause graph

The replug distance is the minimum EAF weight 2(|F|-1) - q over all
maximal AFs reachable within the deepening budget.
"""

import itertools
from dataclasses import dataclass, field

from usprdist import matching
from usprdist.errors import LabelMismatchError, NotAnAgreementForestError
from usprdist.maf import AgreementForest, _check_pair, enumerate_mafs
from usprdist.trees import PHI, PhyloForest, UTree, _steiner, restrict

# Set to False to expand edge sets for every dead tree regardless of the
# uncertainty optimization (differential testing hook).
USE_UNCERTAINTY_OPTIMIZATION = True


@dataclass
class DeadTree:
    """A maximal connected set of tree edges that do not map to F."""

    tree_id: int
    nodes: frozenset
    edges: tuple
    boundary: tuple  # nodes that are sockets or singleton leaves
    internal: frozenset
    attachment: dict  # boundary node -> its unique edge into the dead tree

    @property
    def leaf_count(self):
        return len(self.boundary)

    def valid_cut_sets(self):
        """All (q-1)-subsets of the edges whose removal leaves every
        remaining piece attached to at most one boundary node."""
        q = self.leaf_count
        out = []
        for subset in itertools.combinations(sorted(self.edges), q - 1):
            if self._cut_ok(set(subset)):
                out.append(tuple(subset))
        return out

    def _cut_ok(self, cut):
        adj = {n: [] for n in self.nodes}
        for u, v in self.edges:
            if (u, v) not in cut and (v, u) not in cut:
                adj[u].append(v)
                adj[v].append(u)
        seen = set()
        for start in adj:
            if start in seen:
                continue
            stack, comp = [start], {start}
            while stack:
                for m in adj[stack.pop()]:
                    if m not in comp:
                        comp.add(m)
                        stack.append(m)
            seen |= comp
            if len(comp & set(self.boundary)) > 1:
                return False
        return True


@dataclass
class TreeSideMap:
    """Mapping data of one input tree against the forest."""

    tree: UTree
    psi: dict
    psi_inv: dict
    alive: set
    socket_of: dict  # socket node -> (edge key, index along the edge)
    sockets_on_edge: dict  # edge key -> ordered socket node list
    dead_trees: list
    dead_of_node: dict  # boundary node -> dead tree index
    singleton_leaf: dict  # frozenset part -> leaf node


@dataclass
class ForestMapping:
    """psi/psi-inverse for both trees plus one canonical edge-set pair."""

    partition: tuple
    comp_trees: list  # component UTrees; F node ids are (comp index, node)
    f_edges: list  # sorted edge keys ((ci, u), (ci, v))
    side1: TreeSideMap
    side2: TreeSideMap
    e1: tuple
    e2: tuple
    singletons: list  # (part, t1 leaf node, t2 leaf node)


def _rooted_minlab(tree, root, node_set=None):
    """parent map and min leaf label below each node, rooted at root."""
    parent = {root: None}
    order = [root]
    stack = [root]
    while stack:
        n = stack.pop()
        for m in tree.adj[n]:
            if (node_set is None or m in node_set) and m not in parent:
                parent[m] = n
                order.append(m)
                stack.append(m)
    minlab = {}
    for n in reversed(order):
        best = tree.leaf_label.get(n)
        for m in tree.adj[n]:
            if parent.get(m) == n and m in minlab:
                if best is None or minlab[m] < best:
                    best = minlab[m]
        minlab[n] = best
    return parent, minlab


def _walk_side(tree, tree_id, parts, comp_trees):
    psi, psi_inv = {}, {}
    alive = set()
    socket_of = {}
    sockets_on_edge = {}
    traversed = set()
    singleton_leaf = {}
    by_label = tree.leaf_by_label()

    for ci, (part, ct) in enumerate(zip(parts, comp_trees)):
        if len(part) == 1:
            (lab,) = part
            tn = by_label[lab]
            fn = (ci, next(iter(ct.adj)))
            psi[tn] = fn
            psi_inv[fn] = tn
            alive.add(tn)
            singleton_leaf[part] = tn
            continue
        leafnodes = {by_label[l] for l in part}
        st = _steiner(tree, leafnodes)
        rootlab = min(part)
        f_root = ct.leaf_by_label()[rootlab]
        t_root = by_label[rootlab]
        _, f_minlab = _rooted_minlab(ct, f_root)
        _, t_minlab = _rooted_minlab(tree, t_root, st)
        st_deg = {n: sum(1 for m in tree.adj[n] if m in st) for n in st}
        stack = [(f_root, None, t_root, None)]
        while stack:
            fn, fpar, tn, tpar = stack.pop()
            f_id = (ci, fn)
            psi[tn] = f_id
            psi_inv[f_id] = tn
            alive.add(tn)
            for fc in ct.adj[fn]:
                if fc == fpar:
                    continue
                want = f_minlab[fc]
                tdir = None
                for m in tree.adj[tn]:
                    if m in st and m != tpar and t_minlab.get(m) == want:
                        tdir = m
                        break
                if tdir is None:
                    raise NotAnAgreementForestError(
                        "component %s does not embed in tree %d" % (sorted(part), tree_id)
                    )
                interior = []
                prev, cur = tn, tdir
                traversed.add((min(prev, cur), max(prev, cur)))
                while st_deg[cur] == 2 and cur not in tree.leaf_label:
                    interior.append(cur)
                    nxt = [m for m in tree.adj[cur] if m in st and m != prev]
                    prev, cur = cur, nxt[0]
                    traversed.add((min(prev, cur), max(prev, cur)))
                fc_id = (ci, fc)
                ekey = (f_id, fc_id) if f_id < fc_id else (fc_id, f_id)
                ordered = interior if f_id < fc_id else interior[::-1]
                sockets_on_edge[ekey] = ordered
                for idx, s in enumerate(ordered):
                    socket_of[s] = (ekey, idx)
                stack.append((fc, fn, cur, prev))

    unmapped = [
        (u, v) for u, v in tree.edges() if (min(u, v), max(u, v)) not in traversed
    ]
    dead_trees, dead_of_node = _find_dead_components(
        tree, tree_id, unmapped, alive, socket_of
    )
    return TreeSideMap(
        tree,
        psi,
        psi_inv,
        alive,
        socket_of,
        sockets_on_edge,
        dead_trees,
        dead_of_node,
        singleton_leaf,
    )


def _find_dead_components(tree, tree_id, unmapped, alive, socket_of):
    adj = {}
    for u, v in unmapped:
        adj.setdefault(u, []).append(v)
        adj.setdefault(v, []).append(u)
    seen = set()
    out = []
    dead_of_node = {}
    for start in sorted(adj):
        if start in seen:
            continue
        stack, comp = [start], {start}
        while stack:
            for m in adj[stack.pop()]:
                if m not in comp:
                    comp.add(m)
                    stack.append(m)
        seen |= comp
        edges = tuple(
            sorted((min(u, v), max(u, v)) for u in comp for v in adj[u] if u < v)
        )
        boundary = tuple(sorted(n for n in comp if n in alive or n in socket_of))
        internal = frozenset(comp) - set(boundary)
        attachment = {b: next((min(b, m), max(b, m)) for m in adj[b]) for b in boundary}
        q = len(boundary)
        assert len(edges) == 2 * q - 3, "dead tree edge count law violated"
        idx = len(out)
        out.append(
            DeadTree(tree_id, frozenset(comp), edges, boundary, internal, attachment)
        )
        for b in boundary:
            dead_of_node[b] = idx
    return out, dead_of_node


def find_dead_trees(tree, f, mapping_side):
    """All maximal dead components of the tree with respect to F."""
    return mapping_side.dead_trees


def build_mapping(t1, t2, f):
    """Construct psi, psi-inverse, and one valid (E1, E2) pair for an AF."""
    if isinstance(f, AgreementForest):
        partition = f.partition
    else:
        partition = frozenset(f)
    parts = sorted(partition, key=sorted)
    comp_trees = [restrict(t1, p) for p in parts]
    for p, ct in zip(parts, comp_trees):
        if len(p) >= 4:
            if restrict(t2, p).canonical() != ct.canonical():
                raise NotAnAgreementForestError("component shapes disagree")
    side1 = _walk_side(t1, 1, parts, comp_trees)
    side2 = _walk_side(t2, 2, parts, comp_trees)
    f_edges = sorted(side1.sockets_on_edge)
    e1 = tuple(
        itertools.chain.from_iterable(d.valid_cut_sets()[0] for d in side1.dead_trees)
    )
    e2 = tuple(
        itertools.chain.from_iterable(d.valid_cut_sets()[0] for d in side2.dead_trees)
    )
    singletons = [
        (part, side1.singleton_leaf[part], side2.singleton_leaf[part])
        for part in sorted(side1.singleton_leaf, key=sorted)
    ]
    return ForestMapping(
        tuple(parts), comp_trees, f_edges, side1, side2, e1, e2, singletons
    )


def enumerate_edge_sets(mapping, side):
    """Every edge set realizing the side's dead trees, deduplicated.

    Only dead trees uncertain in both trees are expanded; the rest
    contribute their first valid cut set.
    """
    sm = mapping.side1 if side == 1 else mapping.side2
    choices = []
    for d in sm.dead_trees:
        sets = d.valid_cut_sets()
        if USE_UNCERTAINTY_OPTIMIZATION and not _is_uncertain(mapping, side, d):
            sets = sets[:1]
        choices.append(sets)
    for combo in itertools.product(*choices):
        yield tuple(itertools.chain.from_iterable(combo))


def _adjacent_components(mapping, side, dead):
    """Indices of F components touching the dead tree's boundary."""
    sm = mapping.side1 if side == 1 else mapping.side2
    comps = set()
    for b in dead.boundary:
        if b in sm.socket_of:
            (ekey, _) = sm.socket_of[b]
            comps.add(ekey[0][0])
        else:
            fn = sm.psi[b]
            comps.add(fn[0])
    return comps


def _is_uncertain(mapping, side, dead):
    if dead.leaf_count < 3:
        return False
    other = 2 if side == 1 else 1
    sm_other = mapping.side1 if other == 1 else mapping.side2
    big_other = set()
    for d in sm_other.dead_trees:
        if d.leaf_count >= 3:
            big_other |= _adjacent_components(mapping, other, d)
    return bool(_adjacent_components(mapping, side, dead) & big_other)


# -- socket assignments and phi optimization ----------------------------


@dataclass
class SocketAssignment:
    """One orientation-preserving pairing of T1/T2 sockets per F edge."""

    mapping: ForestMapping
    pairing: dict  # edge key -> list of (t1 socket, t2 socket) pairs

    def candidates(self):
        """phi candidates: paired sockets plus singleton components."""
        out = []
        for ekey in sorted(self.pairing):
            for s1, s2 in self.pairing[ekey]:
                out.append(("edge", ekey, s1, s2))
        for part, l1, l2 in self.mapping.singletons:
            out.append(("singleton", part, l1, l2))
        return out


def enumerate_socket_assignments(mapping):
    """All per-edge order-preserving socket pairings."""
    keys = []
    options = []
    for ekey in mapping.f_edges:
        s1 = mapping.side1.sockets_on_edge[ekey]
        s2 = mapping.side2.sockets_on_edge[ekey]
        h1, h2 = len(s1), len(s2)
        if h1 == 0 or h2 == 0:
            continue
        keys.append(ekey)
        if h1 >= h2:
            options.append(
                [
                    list(zip([s1[i] for i in idxs], s2))
                    for idxs in itertools.combinations(range(h1), h2)
                ]
            )
        else:
            options.append(
                [
                    list(zip(s1, [s2[i] for i in idxs]))
                    for idxs in itertools.combinations(range(h2), h1)
                ]
            )
    for combo in itertools.product(*options):
        yield SocketAssignment(mapping, dict(zip(keys, combo)))


def max_candidate_count(mapping):
    total = len(mapping.singletons)
    for ekey in mapping.f_edges:
        total += min(
            len(mapping.side1.sockets_on_edge[ekey]),
            len(mapping.side2.sockets_on_edge[ekey]),
        )
    return total


def optimal_phi_assignment(sa):
    """Maximize phi count subject to every saturated dead tree keeping one
    phi-free adjacent socket; returns (Eaf, weight)."""
    mapping = sa.mapping
    cands = sa.candidates()
    chosen_idx = _solve_phi(mapping, sa, cands)
    eaf = Eaf(mapping.partition, [cands[i] for i in sorted(chosen_idx)], None, mapping)
    return eaf, eaf.weight


def _solve_phi(mapping, sa, cands):
    """Indices of candidates that receive a phi under the optimum."""
    # which sockets/singletons are candidates, per side
    cand_at = {1: {}, 2: {}}
    for i, (kind, _, x1, x2) in enumerate(cands):
        cand_at[1][x1] = i
        cand_at[2][x2] = i
    clauses = []
    for side, sm in ((1, mapping.side1), (2, mapping.side2)):
        for d in sm.dead_trees:
            vars_ = []
            saturated = True
            for b in d.boundary:
                if b in cand_at[side]:
                    vars_.append(cand_at[side][b])
                else:
                    saturated = False
                    break
            if saturated:
                clauses.append(sorted(set(vars_)))
    withheld = _min_true(cands, clauses)
    return set(range(len(cands))) - withheld


def _min_true(cands, clauses):
    """Minimum set of candidate indices set true (phi withheld) so every
    clause holds.  Clause graph edge cover, per-variable <= 2 clauses."""
    occurs = {}
    for ci, clause in enumerate(clauses):
        for v in clause:
            occurs.setdefault(v, []).append(ci)
    for v, occ in occurs.items():
        assert len(occ) <= 2, "variable in more than two clauses"
    withheld = set()
    edges = []
    has_edge = set()
    private = {}
    for v, occ in occurs.items():
        if len(occ) == 2 and occ[0] != occ[1]:
            edges.append((min(occ), max(occ), v))
            has_edge.update(occ)
        else:
            private.setdefault(occ[0], []).append(v)
    core = sorted(has_edge)
    # clauses with no shared variable: forced private withholding
    for ci in range(len(clauses)):
        if ci not in has_edge:
            withheld.add(min(private[ci]))
    if core:
        reindex = {ci: i for i, ci in enumerate(core)}
        g = matching.ClauseGraph(
            len(core),
            [(reindex[u], reindex[v], var) for u, v, var in edges],
            {reindex[ci]: private.get(ci, []) for ci in core},
        )
        for _, _, var in matching.minimum_edge_cover(g):
            withheld.add(var)
    return withheld


@dataclass
class Eaf:
    """An endpoint agreement forest with provenance for move extraction."""

    partition: tuple
    phi_sites: list  # ("edge", ekey, t1 node, t2 node) or ("singleton", ...)
    source_pair: tuple = None
    mapping: ForestMapping = None
    _forest: PhyloForest = field(default=None, repr=False)

    @property
    def weight(self):
        return 2 * (len(self.partition) - 1) - len(self.phi_sites)

    @property
    def forest(self):
        if self._forest is None:
            self._forest = _build_phi_forest(self.mapping, self.phi_sites)
        return self._forest


def _build_phi_forest(mapping, phi_sites):
    trees = []
    by_edge = {}
    singles = set()
    for site in phi_sites:
        if site[0] == "edge":
            _, ekey, s1, s2 = site
            by_edge.setdefault(ekey, []).append(mapping.side1.socket_of[s1][1])
        else:
            singles.add(site[1])
    for ci, ct in enumerate(mapping.comp_trees):
        adj = {n: list(v) for n, v in ct.adj.items()}
        labels = dict(ct.leaf_label)
        nxt = max(adj) + 1
        part = mapping.partition[ci]
        if part in singles:
            (leaf,) = adj
            adj[leaf] = [nxt]
            adj[nxt] = [leaf]
            labels[nxt] = PHI
            nxt += 1
        for ekey, idxs in by_edge.items():
            if ekey[0][0] != ci:
                continue
            (cu, u), (cv, v) = ekey
            # insert subdividing phi nodes ordered along u -> v
            prev = u
            rest = v
            adj[prev].remove(rest)
            adj[rest].remove(prev)
            for _ in sorted(idxs):
                mid = nxt
                leafn = nxt + 1
                nxt += 2
                adj[prev].append(mid)
                adj[mid] = [prev, leafn]
                adj[leafn] = [mid]
                labels[leafn] = PHI
                prev = mid
            adj[prev].append(rest)
            adj[rest].append(prev)
        trees.append(UTree(adj, labels))
    return PhyloForest.from_trees(trees)


# -- replug distance -----------------------------------------------------


def best_weight_for_af(t1, t2, af, upper=None):
    """Minimum EAF weight over socket assignments of one mAF.

    Returns (weight, Eaf) or (None, None) when the bound prunes it.
    """
    mapping = build_mapping(t1, t2, af)
    c = len(mapping.partition) - 1
    if upper is not None and 2 * c - max_candidate_count(mapping) > upper:
        return None, None
    best = None
    best_eaf = None
    for sa in enumerate_socket_assignments(mapping):
        eaf, w = optimal_phi_assignment(sa)
        if best is None or w < best:
            best, best_eaf = w, eaf
            if best == c:  # weight can never go below the cut count
                break
    return best, best_eaf


def replug_distance(t1, t2, witness=True):
    """Exact replug distance; optionally with a minimum-weight EAF."""
    _check_pair(t1, t2)
    if t1.canonical() == t2.canonical():
        triv = Eaf(
            (frozenset(t1.labels()),),
            [],
            (t1, t2),
            build_mapping(t1, t2, frozenset([frozenset(t1.labels())])),
        )
        return (0, triv) if witness else 0
    d = 1
    while True:
        best = None
        best_eaf = None
        for af in sorted(
            enumerate_mafs(t1, t2, d), key=lambda a: sorted(map(sorted, a.partition))
        ):
            w, eaf = best_weight_for_af(t1, t2, af, upper=d)
            if w is not None and (best is None or w < best):
                best, best_eaf = w, eaf
                if best == d:
                    break
        if best is not None and best <= d:
            if witness:
                best_eaf.source_pair = (t1, t2)
                return best, best_eaf
            return best
        d += 1


def replug_value(t1, t2, start=0):
    """Distance-only replug computation with a known lower bound."""
    _check_pair(t1, t2)
    if t1.canonical() == t2.canonical():
        return 0
    d = max(1, start)
    while True:
        best = None
        for af in enumerate_mafs(t1, t2, d):
            w, _ = best_weight_for_af(t1, t2, af, upper=d)
            if w is not None and (best is None or w < best):
                best = w
                if best <= d:
                    break
        if best is not None and best <= d:
            return best
        d += 1
