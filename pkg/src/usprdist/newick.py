"""Newick parsing, serialization, and canonical forms for unrooted trees.

Branch lengths, internal labels, and bracket comments are accepted on
input and discarded: the distances computed here are topology-only.
Rooted-style Newick (outermost arity 2) is unrooted by suppressing the
root node.
"""

import re

from usprdist.errors import (
    DuplicateLabelError,
    NewickSyntaxError,
    NonBinaryError,
    TooFewLeavesError,
)
from usprdist.trees import UTree, yield_suppress

_LABEL_RE = re.compile(r"[A-Za-z0-9_.\-|]+")
_COMMENT_RE = re.compile(r"\[[^\]]*\]")


def parse_newick(text):
    """Parse one Newick expression into an unrooted binary tree."""
    s = _COMMENT_RE.sub("", text).strip()
    if not s.endswith(";"):
        raise NewickSyntaxError("missing terminating ';'")
    s = s[:-1].strip()
    if not s:
        raise TooFewLeavesError("empty tree")
    pos = 0
    adj = {}
    labels = {}
    next_id = [0]

    def new_node():
        n = next_id[0]
        next_id[0] += 1
        adj[n] = []
        return n

    def skip_ws():
        nonlocal pos
        while pos < len(s) and s[pos].isspace():
            pos += 1

    def skip_decorations():
        # optional internal label, then optional :length
        nonlocal pos
        skip_ws()
        m = _LABEL_RE.match(s, pos)
        if m:
            pos = m.end()
        skip_ws()
        if pos < len(s) and s[pos] == ":":
            pos += 1
            skip_ws()
            m = re.match(r"[-+0-9.eE]+", s[pos:])
            if not m:
                raise NewickSyntaxError("malformed branch length at %d" % pos)
            pos += m.end()

    def parse_subtree():
        nonlocal pos
        skip_ws()
        if pos >= len(s):
            raise NewickSyntaxError("unexpected end of input")
        if s[pos] == "(":
            pos += 1
            node = new_node()
            while True:
                child = parse_subtree()
                adj[node].append(child)
                adj[child].append(node)
                skip_ws()
                if pos >= len(s):
                    raise NewickSyntaxError("unbalanced parentheses")
                if s[pos] == ",":
                    pos += 1
                    continue
                if s[pos] == ")":
                    pos += 1
                    break
                raise NewickSyntaxError("unexpected %r at %d" % (s[pos], pos))
            skip_decorations()
            return node
        m = _LABEL_RE.match(s, pos)
        if not m:
            raise NewickSyntaxError("expected a leaf label at %d" % pos)
        pos = m.end()
        node = new_node()
        labels[node] = m.group()
        skip_decorations()
        return node

    root = parse_subtree()
    skip_ws()
    if pos != len(s):
        raise NewickSyntaxError("trailing characters after tree: %r" % s[pos:])

    seen = set()
    for lab in labels.values():
        if lab in seen:
            raise DuplicateLabelError("duplicate leaf label %r" % lab)
        seen.add(lab)
    if not labels:
        raise TooFewLeavesError("tree has no leaves")

    # Unroot: suppress degree-2/1 unlabeled nodes (rooted-style outer node).
    yield_suppress(adj, labels)
    tree = UTree(adj, labels)
    for n, nbrs in adj.items():
        if n in labels:
            if len(nbrs) > 1:
                raise NonBinaryError("labeled node of degree %d" % len(nbrs))
        elif len(nbrs) != 3:
            raise NonBinaryError(
                "internal node of degree %d after suppression" % len(nbrs)
            )
    return tree


def _render_rooted(tree, node, parent):
    if node in tree.leaf_label:
        return tree.leaf_label[node]
    parts = sorted(_render_rooted(tree, c, node) for c in tree.adj[node] if c != parent)
    return "(" + ",".join(parts) + ")"


def to_newick(tree):
    """Serialize with a trifurcating top level (unrooted convention)."""
    if len(tree.adj) == 1:
        return "%s;" % next(iter(tree.leaf_label.values()))
    if len(tree.adj) == 2:
        a, b = sorted(tree.leaf_label.values())
        return "(%s,%s);" % (a, b)
    root_leaf = min(
        (lab, n) for n, lab in tree.leaf_label.items() if lab != "phi"
    )[1]
    (top,) = tree.adj[root_leaf]
    parts = sorted(_render_rooted(tree, c, top) for c in tree.adj[top])
    return "(" + ",".join(parts) + ");"


def canonical_form(tree):
    """Equal strings iff label-preserving isomorphic; stable across runs."""
    return tree.canonical()
