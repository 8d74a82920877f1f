"""Decoding, pruning and cluster extraction for partitioning trees."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from setree.autodiff import Tensor
from setree.errors import CapacityError, ValidationError
from setree.lorentz import Lorentz
from setree.tree import PartitionTree


def _array(x) -> np.ndarray:
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


def harden(cs) -> list[np.ndarray]:
    """One-hot rows at each row's argmax; ties go to the lowest parent index."""
    out = []
    for c in cs:
        c = _array(c)
        hard = np.zeros_like(c)
        hard[np.arange(c.shape[0]), np.argmax(c, axis=1)] = 1.0
        out.append(hard)
    return out


def decode_tree(cs, z=None) -> PartitionTree:
    """Breadth-first tree from (hardened) level assignments ``[C^1, ..., C^H]``.

    ``z`` optionally lists embeddings per level (index ``h`` for level ``h``);
    they become node coordinates.  Parents that receive no graph node are
    skipped, so the decoded tree has no empty modules.  Model outputs
    (anything with ``assignments()`` and ``z``) may be passed directly.
    """
    if hasattr(cs, "assignments"):
        z = cs.z if z is None else z
        cs = cs.assignments()
    hard = harden(cs)
    H = len(hard)
    n = hard[-1].shape[0]
    # members[h][k]: graph nodes under level-h node k, built from the leaves up
    members: list[list] = [None] * (H + 1)
    members[H] = [[i] for i in range(n)]
    for h in range(H, 0, -1):
        parent_of = np.argmax(hard[h - 1], axis=1)
        groups = [[] for _ in range(hard[h - 1].shape[1])]
        for k, p in enumerate(parent_of):
            groups[p].extend(members[h][k])
        members[h - 1] = [sorted(g) for g in groups]
    children: list[list] = [None] * H
    for h in range(1, H + 1):
        parent_of = np.argmax(hard[h - 1], axis=1)
        kids = [[] for _ in range(hard[h - 1].shape[1])]
        for k, p in enumerate(parent_of):
            if members[h][k]:
                kids[p].append(k)
        children[h - 1] = kids

    def coords(h, k):
        if z is None or z[h] is None:
            return None
        return _array(z[h])[k]

    t = PartitionTree()
    root = t.add_node(range(n), coords=coords(0, 0))
    queue = [(root, 0, 0)]
    while queue:
        tid, h, k = queue.pop(0)
        if h == H:
            continue
        for child in children[h][k]:
            leaf = h + 1 == H
            cid = t.add_node(
                members[h + 1][child], parent=tid, coords=coords(h + 1, child),
                graph_node=child if leaf else None,
            )
            queue.append((cid, h + 1, child))
    return t


def prune(t: PartitionTree) -> PartitionTree:
    """Drop empty-module nodes and collapse single-child nodes that repeat their child's module.

    Neither change alters the tree's structural information.  The root is
    never removed, and neither is a lone child repeating the root's module:
    it marks a one-cluster partition.
    """
    t = t.copy()
    changed = True
    while changed:
        changed = False
        for nid in list(t.bfs()):
            node = t.nodes.get(nid)
            if node is None or nid == t.root:
                continue
            parent = t.nodes[node.parent]
            if not node.module:
                _detach_subtree(t, nid)
                changed = True
            elif len(node.children) == 1 and t[node.children[0]].module == node.module:
                child = node.children[0]
                at = parent.children.index(nid)
                parent.children[at] = child
                t[child].parent = parent.id
                del t.nodes[nid]
                changed = True
    t.recompute_heights()
    return t


def _detach_subtree(t: PartitionTree, nid: int) -> None:
    parent = t[t[nid].parent]
    parent.children.remove(nid)
    stack = [nid]
    while stack:
        v = stack.pop()
        stack.extend(t[v].children)
        del t.nodes[v]


def canonical_labels(labels) -> np.ndarray:
    """Renumber labels by order of first appearance."""
    labels = np.asarray(labels)
    out = np.empty(labels.size, dtype=np.int64)
    seen: dict = {}
    for i, lab in enumerate(labels.tolist()):
        out[i] = seen.setdefault(lab, len(seen))
    return out


def _n_graph(t: PartitionTree) -> int:
    return len(t[t.root].module)


def clusters_natural(t: PartitionTree) -> np.ndarray:
    """Label each graph node by its height-1 ancestor (numbered by first appearance)."""
    n = _n_graph(t)
    labels = np.full(n, -1, dtype=np.int64)
    for idx, node in enumerate(t.at_height(1)):
        labels[sorted(node.module)] = idx
    if (labels < 0).any():
        raise ValidationError("height-1 modules do not cover every graph node")
    return canonical_labels(labels)


@dataclass
class _Group:
    members: frozenset
    coords: np.ndarray
    node: Optional[int]  # tree node id; None for merged midpoints
    dist: float


def clusters_with_k(t: PartitionTree, k: int, z=None, curvature: float = -1.0) -> np.ndarray:
    """Exactly ``k`` clusters by merging far height-1 nodes or splitting near ones.

    Too many clusters: the two groups farthest from the root are replaced by
    their midpoint until ``k`` remain.  Too few: groups are visited in
    ascending distance to the root and replaced by their children (merging
    the children if that overshoots).  ``z`` maps tree node id to coordinates
    and defaults to the coordinates stored on the tree.
    """
    n = _n_graph(t)
    if not 1 <= k <= n:
        raise ValidationError(f"k must lie in 1..{n}, got {k}")
    space = Lorentz(curvature)

    def coord(nid):
        c = z[nid] if z is not None else t[nid].coords
        if c is None:
            raise ValidationError(f"tree node {nid} has no coordinates")
        return np.asarray(c, dtype=np.float64)

    root_c = t[t.root].coords if z is None else z.get(t.root) if isinstance(z, dict) else z[t.root]
    if root_c is None:
        root_c = space.origin(coord(t.at_height(1)[0].id).shape[0] - 1)
    root_c = np.asarray(root_c, dtype=np.float64)

    def group(nid):
        c = coord(nid)
        return _Group(t[nid].module, c, nid, float(space.distance(root_c, c)))

    def order(groups):
        # ascending distance; ties by smallest member for determinism
        return sorted(groups, key=lambda g: (g.dist, min(g.members)))

    def merge_down(groups, target):
        groups = order(groups)
        while len(groups) > target:
            u, v = groups[-2], groups[-1]
            mid = space.weighted_midpoint(np.stack([u.coords, v.coords]), np.ones(2))
            merged = _Group(u.members | v.members, mid, None, float(space.distance(root_c, mid)))
            groups = order(groups[:-2] + [merged])
        return groups

    L = order([group(node.id) for node in t.at_height(1)])
    if len(L) > k:
        L = merge_down(L, k)
    while len(L) < k:
        progressed = False
        for v in list(L):
            if v.node is None or not t[v.node].children:
                continue
            kids = [group(c) for c in t[v.node].children]
            total = len(L) + len(kids) - 1
            rest = [g for g in L if g is not v]
            if total > k:
                kids = merge_down(kids, k - len(rest))
            L = order(rest + kids)
            progressed = progressed or len(kids) > 1 or kids[0].node != v.node
            if len(L) >= k:
                break
        if not progressed:
            raise CapacityError(
                f"tree cannot be split into {k} clusters; reached {len(L)}", achieved=len(L)
            )
    labels = np.full(n, -1, dtype=np.int64)
    for idx, g in enumerate(L):
        labels[sorted(g.members)] = idx
    return canonical_labels(labels)


def tree_coordinates(t: PartitionTree) -> dict:
    return {n.id: n.coords for n in t}
