"""Extract an executable replug move sequence from an endpoint forest.

The extractor follows the inductive construction behind the weight law:
repeatedly attach a component to an effectively adjacent one along their
connecting path in the target tree.  A join guided by a phi node costs one
move (the fixed endpoint stays put); a join between unmarked components
costs two (both ends of a cut edge relocate).  The working graph starts as
T1 and is edited by replug moves only, so replaying the emitted list
through ``replug_move`` reproduces the transformation and ends at T2.

Bookkeeping invariants:

  placed   target-tree node -> working-graph node realizing it
  dirmap   (placed node, target neighbor) -> current working-graph
           neighbor in that direction; arrivals subdivide these edges at
           the doorstep, keeping partially realized regions ordered
  spanned  target-tree edges already realized by (or scheduled inside) a
           working-graph edge; join paths may not re-cross them
  pending  cut edges of T1 awaiting their rewiring move(s)
"""

from collections import deque

from usprdist.errors import NotAnEafError
from usprdist.trees import RGraph


def _ek(a, b):
    return (a, b) if a < b else (b, a)


class _Pending:
    __slots__ = ("edge", "site", "used")

    def __init__(self, edge, site=None):
        self.edge = edge
        self.site = site
        self.used = False

    def other(self, node):
        u, v = self.edge
        return v if node == u else u


class _Replay:
    def __init__(self, t1, t2, eaf):
        self.t1, self.t2 = t1, t2
        self.mapping = eaf.mapping
        self.phi_sites = list(eaf.phi_sites)
        self.H = RGraph.from_utree(t1)
        self.moves = []
        self.uf = list(range(len(self.mapping.partition)))
        self.placed = {}
        self.comp_of = {}
        self.dirmap = {}
        self.spanned = set()
        self._init_placement()
        self._init_pending()

    def _find(self, c):
        while self.uf[c] != c:
            self.uf[c] = self.uf[self.uf[c]]
            c = self.uf[c]
        return c

    def _union(self, a, b):
        self.uf[self._find(a)] = self._find(b)

    # -- initialization --------------------------------------------------

    def _t_path(self, side, ekey):
        sm = self.mapping.side1 if side == 1 else self.mapping.side2
        u, v = ekey
        return [sm.psi_inv[u]] + sm.sockets_on_edge[ekey] + [sm.psi_inv[v]]

    def _init_placement(self):
        m = self.mapping
        for fnode, t2n in m.side2.psi_inv.items():
            self.placed[t2n] = m.side1.psi_inv[fnode]
            self.comp_of[t2n] = fnode[0]
        for site in self.phi_sites:
            if site[0] == "edge":
                _, ekey, s1, s2 = site
                self.placed[s2] = s1
                self.comp_of[s2] = ekey[0][0]
        for ekey in m.f_edges:
            p1 = self._t_path(1, ekey)
            p2 = self._t_path(2, ekey)
            for a, b in zip(p2, p2[1:]):
                self.spanned.add(_ek(a, b))
            self.dirmap[(p2[0], p2[1])] = p1[1]
            self.dirmap[(p2[-1], p2[-2])] = p1[-2]
            pos1 = {n: i for i, n in enumerate(p1)}
            for site in self.phi_sites:
                if site[0] == "edge" and site[1] == ekey:
                    _, _, s1, s2 = site
                    j = p2.index(s2)
                    i = pos1[s1]
                    self.dirmap[(s2, p2[j - 1])] = p1[i - 1]
                    self.dirmap[(s2, p2[j + 1])] = p1[i + 1]

    def _init_pending(self):
        fixed_nodes = {site[2]: site for site in self.phi_sites}
        self.pending = []
        self.pending_of_site = {}
        for d in self.mapping.side1.dead_trees:
            required = {
                d.attachment[b]: fixed_nodes[b] for b in d.boundary if b in fixed_nodes
            }
            cut_set = next(
                (cs for cs in d.valid_cut_sets() if set(required) <= set(cs)), None
            )
            if cut_set is None:
                raise NotAnEafError("phi sites admit no valid T1 edge set")
            for e in cut_set:
                p = _Pending(e, required.get(e))
                self.pending.append(p)
                if p.site is not None:
                    self.pending_of_site[id(p.site)] = p

    # -- move application and repair ---------------------------------------

    def _apply(self, prune, regraft):
        self.H, new_node, smoothed = self.H.apply_replug(prune, regraft)
        self.moves.append((prune, regraft))
        for s, a, b in smoothed:
            for key, val in self.dirmap.items():
                if val == s:
                    anchor = self.placed[key[0]]
                    self.dirmap[key] = b if anchor == a else a
            for p in self.pending:
                if not p.used and s in p.edge:
                    keepo = p.other(s)
                    p.edge = (keepo, a if keepo == b else b)
        return new_node

    # -- path search -------------------------------------------------------

    def _arrival_kind(self, xq, xqm1):
        if (xq, xqm1) in self.dirmap:
            return "edge"
        if xq in self.t2.leaf_label and not self.H.adj.get(self.placed[xq]):
            return "bare"
        return None

    def _find_target(self, start, first, own_root, ride_first):
        """Shortest target-tree path [start, ..., xq] to a valid arrival in
        another component, crossing only unspanned edges in between."""
        if not ride_first and _ek(start, first) in self.spanned:
            return None
        parent = {first: start, start: None}
        queue = deque([first])
        while queue:
            n = queue.popleft()
            if n in self.placed:
                if self._find(self.comp_of[n]) == own_root:
                    continue
                if self._arrival_kind(n, parent[n]):
                    path = [n]
                    while path[-1] != start:
                        path.append(parent[path[-1]])
                    return path[::-1]
                continue
            for m in sorted(self.t2.adj[n]):
                if m in parent:
                    continue
                if m not in self.placed and _ek(n, m) in self.spanned:
                    continue
                parent[m] = n
                queue.append(m)
        return None

    # -- join execution ------------------------------------------------------

    def _subdivide_arrival(self, prune, xq, xqm1, tau_back, merged):
        """Land a loose end at xq's doorstep toward xqm1; registers the new
        node as xqm1's incarnation and rethreads the split span."""
        g = self.placed[xq]
        w = self.dirmap[(xq, xqm1)]
        new_node = self._apply(prune, (g, w))
        self.placed[xqm1] = new_node
        self.comp_of[xqm1] = merged
        self.dirmap[(xq, xqm1)] = new_node
        self.dirmap[(xqm1, xq)] = g
        tau = [x for x in self.t2.adj[xqm1] if x not in (xq, tau_back)]
        if tau:
            self.dirmap[(xqm1, tau[0])] = w
        return new_node

    def _execute_phi(self, site, s2, own, path):
        pend = self.pending_of_site[id(site)]
        s1 = site[2]
        other = pend.other(s1)
        xq = path[-1]
        self._union(own, self.comp_of[xq])
        merged = self._find(own)
        kind = self._arrival_kind(xq, path[-2])
        if kind == "bare":
            far_node = self.placed[xq]
            self._apply((s1, other), far_node)
            far_anchor = xq
        elif kind == "edge":
            far_node = self._subdivide_arrival(
                (s1, other), xq, path[-2], path[-3], merged
            )
            far_anchor = path[-2]
        else:
            raise NotAnEafError("phi arrival became invalid")
        j = path.index(far_anchor)
        self.dirmap[(s2, path[1])] = far_node
        self.dirmap[(far_anchor, path[j - 1])] = s1
        self._mark_span(path, 0, j)
        pend.used = True

    def _execute_tbr(self, own, z, path):
        pend = next((p for p in self.pending if not p.used and p.site is None), None)
        if pend is None:
            raise NotAnEafError("no undirected cut edge left for a plain join")
        xq = path[-1]
        self._union(own, self.comp_of[xq])
        merged = self._find(own)
        u, v = pend.edge
        keep = u if u not in self.H.leaf_label else v
        drop = pend.other(keep)
        # first move: land one end at the target-side doorstep
        kind = self._arrival_kind(xq, path[-2])
        if kind == "bare":
            far_node = self.placed[xq]
            self._apply((keep, drop), far_node)
            far_anchor = xq
        elif kind == "edge":
            far_node = self._subdivide_arrival(
                (keep, drop), xq, path[-2], path[-3], merged
            )
            far_anchor = path[-2]
        else:
            raise NotAnEafError("join arrival became invalid")
        # second move: release the held end onto this component's doorstep
        first = path[1]
        if (z, first) in self.dirmap and first not in self.placed:
            near_node = self._subdivide_arrival(
                (far_node, keep), z, first, path[2], merged
            )
            near_anchor = first
        else:
            near_node = self.placed[z]
            self._apply((far_node, keep), near_node)
            near_anchor = z
        i = path.index(near_anchor)
        j = path.index(far_anchor)
        self.dirmap[(near_anchor, path[i + 1])] = far_node
        self.dirmap[(far_anchor, path[j - 1])] = near_node
        self._mark_span(path, i, j)
        pend.used = True

    def _mark_span(self, path, i, j):
        for a, b in zip(path[i:j], path[i + 1 : j + 1]):
            self.spanned.add(_ek(a, b))

    # -- candidates -----------------------------------------------------------

    def _phi_candidates(self):
        for site in sorted(
            (s for s in self.phi_sites if not self.pending_of_site[id(s)].used),
            key=lambda s: (str(s[1]), str(s[2])),
        ):
            if site[0] == "edge":
                _, ekey, s1, s2 = site
                own = self._find(ekey[0][0])
                p2 = self._t_path(2, ekey)
                j = p2.index(s2)
                dead = [n for n in self.t2.adj[s2] if n not in (p2[j - 1], p2[j + 1])]
            else:
                _, part, l1, s2 = site
                own = self._find(self.comp_of[s2])
                dead = list(self.t2.adj[s2])
            if not dead:
                raise NotAnEafError("phi socket without a cut direction")
            yield site, s2, dead[0], own

    def _tbr_candidates(self):
        comps = {}
        for t2n, c in self.comp_of.items():
            comps.setdefault(self._find(c), []).append(t2n)
        if len(comps) < 2:
            return
        for root in sorted(comps):
            for z in sorted(comps[root]):
                for m in sorted(self.t2.adj[z]):
                    if m in self.placed:
                        continue
                    if (z, m) in self.dirmap:
                        yield root, z, m, True
                    elif z in self.t2.leaf_label and not self.H.adj.get(
                        self.placed[z]
                    ):
                        yield root, z, m, False

    # -- main loop ----------------------------------------------------------

    def run(self):
        n_comp = len(self.mapping.partition)
        for _ in range(n_comp - 1):
            done = False
            for site, s2, first, own in self._phi_candidates():
                path = self._find_target(s2, first, own, ride_first=False)
                if path is not None:
                    self._execute_phi(site, s2, own, path)
                    done = True
                    break
            if not done:
                for own, z, first, riding in self._tbr_candidates():
                    path = self._find_target(z, first, own, ride_first=riding)
                    if path is not None:
                        self._execute_tbr(own, z, path)
                        done = True
                        break
            if not done:
                raise NotAnEafError("replay deadlock: no executable join")
        if not all(p.used for p in self.pending):
            raise NotAnEafError("unconsumed cut edges after all joins")
        return self.moves


def extract_replug_sequence(t1, t2, eaf):
    """A list of exactly omega(eaf) replug moves turning t1 into t2; each
    entry is (prune_edge, regraft) in ``replug_move`` form, with the kept
    endpoint first in the prune edge."""
    if eaf.mapping is None:
        raise NotAnEafError("endpoint forest lacks mapping provenance")
    replay = _Replay(t1, t2, eaf)
    moves = replay.run()
    if len(moves) != eaf.weight:
        raise NotAnEafError(
            "extracted %d moves for weight %d" % (len(moves), eaf.weight)
        )
    if not replay.H.is_tree() or replay.H.to_utree().canonical() != t2.canonical():
        raise NotAnEafError("replayed sequence does not reach the target tree")
    return moves
