"""Maximal agreement forest enumeration and TBR distance.

The enumerator is a bounded search tree over a contracted state: agreed
subtrees are collapsed to single "super leaves" shared between the working
copy of the first tree and the working forest of the second.  Components
are recovered at the end as induced restrictions, so the search itself
only tracks label sets.
"""

import math
from dataclasses import dataclass

from usprdist.errors import LabelMismatchError
from usprdist.trees import PHI, PhyloForest, forest_of_partition, restrict


def _check_pair(t1, t2):
    if PHI in t1.leaf_label.values() or PHI in t2.leaf_label.values():
        raise LabelMismatchError("reserved label 'phi' in a distance query")
    if t1.labels() != t2.labels():
        raise LabelMismatchError("trees have different leaf sets")


@dataclass(frozen=True)
class AgreementForest:
    """An agreement forest identified by its component label partition."""

    partition: frozenset
    source_pair: tuple

    def forest(self):
        t1 = self.source_pair[0]
        return PhyloForest.from_trees(
            [restrict(t1, p) for p in sorted(self.partition, key=sorted)]
        )

    def n_components(self):
        return len(self.partition)


class _State:
    __slots__ = ("t1", "f2", "rt", "f0", "k")

    def __init__(self, t1, f2, rt, f0, k):
        self.t1 = t1  # contracted first tree: node -> neighbor list
        self.f2 = f2  # contracted second forest
        self.rt = rt  # super leaf id -> frozenset of labels (shared ids)
        self.f0 = f0  # finished component label sets
        self.k = k

    def copy(self):
        return _State(
            {n: list(v) for n, v in self.t1.items()},
            {n: list(v) for n, v in self.f2.items()},
            dict(self.rt),
            list(self.f0),
            self.k,
        )

    def minlab(self, r):
        return min(self.rt[r])


def _initial_state(t1, t2, k):
    ids = {}
    nxt = [0]

    def fresh():
        n = nxt[0]
        nxt[0] += 1
        return n

    for lab in t1.labels():
        ids[lab] = fresh()
    rt = {ids[lab]: frozenset((lab,)) for lab in t1.labels()}

    def contracted(tree):
        remap = {}
        for n in tree.adj:
            if n in tree.leaf_label:
                remap[n] = ids[tree.leaf_label[n]]
            else:
                remap[n] = fresh()
        return {remap[n]: [remap[m] for m in tree.adj[n]] for n in tree.adj}

    return _State(contracted(t1), contracted(t2), rt, [], k), nxt


def _smooth_f(g, node):
    a, b = g[node]
    del g[node]
    g[a] = [x for x in g[a] if x != node] + [b]
    g[b] = [x for x in g[b] if x != node] + [a]


def _cut_f2(state, u, v):
    """Remove edge (u, v) from the contracted forest and re-yield."""
    state.f2[u].remove(v)
    state.f2[v].remove(u)
    for n in (u, v):
        if n not in state.rt and len(state.f2[n]) == 2:
            _smooth_f(state.f2, n)


def _prune(state, r):
    """Step 3: move the finished component rooted at r into F0."""
    state.f0.append(state.rt.pop(r))
    del state.f2[r]
    nbrs = state.t1[r]
    del state.t1[r]
    if nbrs:
        (y,) = nbrs
        state.t1[y] = [x for x in state.t1[y] if x != r]
        if y not in state.rt and len(state.t1[y]) == 2:
            _smooth_f(state.t1, y)


def _merge(state, a, c, nxt):
    """Step 5: contract the agreeing pair into one new super leaf."""
    m = nxt[0]
    nxt[0] += 1
    state.rt[m] = state.rt.pop(a) | state.rt.pop(c)
    for g in (state.t1, state.f2):
        na = g[a][0] if g[a] else None
        if na == c:  # directly adjacent: merged node is a whole component
            del g[a]
            del g[c]
            g[m] = []
            continue
        nc = g[c][0]
        assert na == nc, "merge on a non-sibling pair"
        y = na
        (z,) = [x for x in g[y] if x not in (a, c)]
        del g[a]
        del g[c]
        del g[y]
        g[z] = [x for x in g[z] if x != y] + [m]
        g[m] = [z]


def _f2_path(state, a, c):
    """Node path from a to c in the contracted forest, or None."""
    parent = {a: None}
    stack = [a]
    while stack:
        n = stack.pop()
        if n == c:
            path = [c]
            while parent[path[-1]] is not None:
                path.append(parent[path[-1]])
            return path[::-1]
        for m in state.f2[n]:
            if m not in parent:
                parent[m] = n
                stack.append(m)
    return None


def _sibling_pairs(state):
    pairs = {}
    for y, nbrs in state.t1.items():
        if y in state.rt:
            continue
        leaves = sorted((r for r in nbrs if r in state.rt), key=state.minlab)
        for i in range(len(leaves)):
            for j in range(i + 1, len(leaves)):
                a, c = leaves[i], leaves[j]
                key = tuple(sorted((state.minlab(a), state.minlab(c))))
                pairs.setdefault(key, (a, c))
    if len(state.t1) == 2:
        a, c = sorted(state.t1, key=state.minlab)
        if a in state.rt and c in state.rt:
            key = tuple(sorted((state.minlab(a), state.minlab(c))))
            pairs.setdefault(key, (a, c))
    if not pairs:
        return None
    return pairs[min(pairs)]


def _drive(state, nxt):
    """Run steps 2-5 to a fixpoint.  Returns 'success', 'branch', or the
    terminal partition on success; mutates the state."""
    while True:
        if len(state.rt) == 1:
            (r,) = state.rt
            assert not state.f2[r], "success state with unfinished forest"
            return frozenset(state.f0) | {state.rt[r]}
        prunable = sorted(
            (r for r in state.rt if not state.f2[r]), key=state.minlab
        )
        if prunable:
            _prune(state, prunable[0])
            continue
        a, c = _sibling_pairs(state)
        fa = state.f2[a][0]
        fc = state.f2[c][0]
        if fa == c or fa == fc:
            _merge(state, a, c, nxt)
            continue
        return (a, c)


def _branches(state, a, c):
    """Step 6 cut sets: lists of (edge list, cost)."""
    path = _f2_path(state, a, c)
    if path is None:
        return [([(a, state.f2[a][0])], 1), ([(c, state.f2[c][0])], 1)]
    interior = path[1:-1]
    pend = []
    for p in interior:
        (b,) = [x for x in state.f2[p] if x not in path]
        pend.append((p, b))
    q = len(pend)
    e_a = (a, path[1])
    e_c = (c, path[-2])
    if q == 1:
        return [([e_a], 1), ([e_c], 1), ([pend[0]], 1)]
    out = [([e_a], 1), ([e_c], 1)]
    for j in range(q):
        out.append(([pend[i] for i in range(q) if i != j], q - 1))
    return out


def _search(state, nxt, results, stop_first, counter):
    if state.k < 0:
        return False
    counter[0] += 1
    res = _drive(state, nxt)
    if isinstance(res, frozenset):
        results.add(res)
        return stop_first
    a, c = res
    for edges, cost in _branches(state, a, c):
        child = state.copy()
        child.k -= cost
        if child.k < 0:
            continue
        for u, v in edges:
            _cut_f2(child, u, v)
        if _search(child, nxt, results, stop_first, counter):
            return True
    return False


def is_agreement_partition(t1, t2, parts):
    """True iff the label partition is an agreement forest of the pair."""
    if not forest_of_partition(t1, parts) or not forest_of_partition(t2, parts):
        return False
    for part in parts:
        if len(part) >= 4:
            if restrict(t1, part).canonical() != restrict(t2, part).canonical():
                return False
    return True


def _is_maximal(t1, t2, parts):
    parts = list(parts)
    for i in range(len(parts)):
        for j in range(i + 1, len(parts)):
            joined = frozenset(
                [parts[x] for x in range(len(parts)) if x not in (i, j)]
                + [parts[i] | parts[j]]
            )
            if is_agreement_partition(t1, t2, joined):
                return False
    return True


def enumerate_mafs(t1, t2, k, stats=None):
    """All maximal agreement forests obtainable by cutting at most k edges."""
    _check_pair(t1, t2)
    state, nxt = _initial_state(t1, t2, k)
    results = set()
    counter = [0]
    _search(state, nxt, results, False, counter)
    if stats is not None:
        stats["recursions"] = counter[0]
    out = set()
    for parts in results:
        if _is_maximal(t1, t2, parts):
            out.add(AgreementForest(parts, (t1, t2)))
    return out


def maf_exists(t1, t2, k):
    """Decision variant: is there an AF reachable with at most k cuts?"""
    _check_pair(t1, t2)
    state, nxt = _initial_state(t1, t2, k)
    results = set()
    return _search(state, nxt, results, True, [0])


def tbr_distance(t1, t2):
    """Exact TBR distance: minimum components over AFs, minus one."""
    _check_pair(t1, t2)
    k = 0
    while True:
        if maf_exists(t1, t2, k):
            return k
        k += 1


def approx_pass_cuts(t1, t2):
    """Cut count A of the non-branching pass that removes every candidate
    edge at each conflict.  A is a feasible cut count, so dtbr <= A."""
    _check_pair(t1, t2)
    state, nxt = _initial_state(t1, t2, len(t1.labels()) * 4)
    cuts = 0
    while True:
        res = _drive(state, nxt)
        if isinstance(res, frozenset):
            break
        a, c = res
        path = _f2_path(state, a, c)
        if path is not None:
            # cut the pendant first: smoothing its path node would otherwise
            # invalidate the attachment edges named below
            p1 = path[1]
            (b1,) = [x for x in state.f2[p1] if x not in path]
            _cut_f2(state, p1, b1)
            cuts += 1
        _cut_f2(state, a, state.f2[a][0])
        _cut_f2(state, c, state.f2[c][0])
        cuts += 2
    return cuts


def tbr_lower_bound_approx(t1, t2):
    """TBR lower bound: the approximation pass cut count divided by 3."""
    return math.ceil(approx_pass_cuts(t1, t2) / 3)
