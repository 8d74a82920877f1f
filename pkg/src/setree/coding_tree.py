"""Hard structural information and the greedy coding-tree heuristic."""
from __future__ import annotations

import heapq
from math import log2

import numpy as np

from setree import _kernels
from setree.errors import CapacityError, ValidationError
from setree.graph import Graph
from setree.tree import PartitionTree

BRUTE_FORCE_LIMIT = 10


def module_stats(g: Graph, module) -> tuple[float, float]:
    """``(volume, cut)`` of a set of graph nodes."""
    idx = np.fromiter(sorted(module), dtype=np.int64)
    if idx.size == 0:
        return 0.0, 0.0
    vol = float(g.degrees[idx].sum())
    if idx.size == 1:
        return vol, vol
    inner = float(g.adjacency[idx][:, idx].sum())
    return vol, max(vol - inner, 0.0)


def _term(cut: float, vol: float, parent_vol: float, total: float) -> float:
    # 0 log 0 = 0: empty modules and zero cuts contribute nothing
    if vol <= 0.0 or cut <= 0.0:
        return 0.0
    return -(cut / total) * log2(vol / parent_vol)


def node_si(g: Graph, t: PartitionTree, alpha: int) -> float:
    node = t[alpha]
    if node.parent is None:
        raise ValidationError("the root carries no structural information")
    vol, cut = module_stats(g, node.module)
    parent_vol, _ = module_stats(g, t[node.parent].module)
    return _term(cut, vol, parent_vol, g.total_volume)


def tree_si(g: Graph, t: PartitionTree, validate: bool = True) -> float:
    """Sum of node terms over every non-root node."""
    if validate:
        t.validate(g.node_count, relaxed=True)
    stats = {n.id: module_stats(g, n.module) for n in t}
    total = g.total_volume
    si = 0.0
    for n in t.non_root():
        vol, cut = stats[n.id]
        si += _term(cut, vol, stats[n.parent][0], total)
    return si


def two_level_tree(labels) -> PartitionTree:
    """Root -> one node per label -> singleton leaves."""
    return PartitionTree.from_level_labels([np.asarray(labels)])


def brute_force_optimal_tree(g: Graph, h: int = 2):
    """Exhaustive search over the middle level of height-2 trees (small graphs only)."""
    if h != 2:
        raise ValidationError("exhaustive search is implemented for height 2 only")
    n = g.node_count
    if n > BRUTE_FORCE_LIMIT:
        raise CapacityError(f"{n} nodes exceeds the exhaustive limit of {BRUTE_FORCE_LIMIT}")
    src, dst, w = g.edges()
    labels, si, _ = _kernels.best_two_level_partition(n, g.degrees, src, dst, w)
    return two_level_tree(labels), float(si)


class _Work:
    """Mutable tree used while the heuristic runs."""

    def __init__(self, g: Graph):
        n = g.node_count
        self.total = g.total_volume
        self.parent: dict[int, int] = {}
        self.children: dict[int, list[int]] = {}
        self.module: dict[int, frozenset] = {}
        self.vol: dict[int, float] = {}
        self.cut: dict[int, float] = {}
        self.root = n
        self.next_id = n + 1
        deg = g.degrees
        for v in range(n):
            self.parent[v] = self.root
            self.children[v] = []
            self.module[v] = frozenset([v])
            self.vol[v] = self.cut[v] = float(deg[v])
        self.children[self.root] = list(range(n))
        self.module[self.root] = frozenset(range(n))
        self.vol[self.root] = self.total
        self.cut[self.root] = 0.0
        self.n = n

    def si(self) -> float:
        return sum(
            _term(self.cut[v], self.vol[v], self.vol[p], self.total) for v, p in self.parent.items()
        )

    def depth_height(self) -> int:
        best, stack = 0, [(self.root, 0)]
        while stack:
            v, d = stack.pop()
            best = max(best, d)
            stack.extend((c, d + 1) for c in self.children[v])
        return best


def merge_delta(w_ab: float, vol_merged: float, total: float) -> float:
    """SI reduction from merging two root children joined by total weight ``w_ab``."""
    if w_ab <= 0.0 or vol_merged <= 0.0:
        return 0.0
    return (2.0 * w_ab / total) * log2(total / vol_merged)


def _merge_stage(g: Graph, work: _Work, verify: bool) -> None:
    coo = g.adjacency.tocoo()
    link: dict[int, dict[int, float]] = {v: {} for v in range(work.n)}
    for i, j, w in zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()):
        if i != j:
            link[i][j] = link[i].get(j, 0.0) + w
    total = work.total
    heap = []
    for i in range(work.n):
        for j, w in link[i].items():
            if i < j:
                d = merge_delta(w, work.vol[i] + work.vol[j], total)
                heapq.heappush(heap, (-d, i, j))
    alive = set(range(work.n))
    while len(alive) > 2:
        pair = None
        while heap:
            _, i, j = heapq.heappop(heap)
            if i in alive and j in alive:
                pair = (i, j)
                break
        if pair is None:
            # no linked pair left: every merge is worth zero, take the lowest ids
            ordered = sorted(alive)
            pair = (ordered[0], ordered[1])
        a, b = pair
        w_ab = link[a].get(b, 0.0)
        if verify:
            before = work.si()
        p = work.next_id
        work.next_id += 1
        work.children[p] = [a, b]
        work.parent[p] = work.root
        work.parent[a] = work.parent[b] = p
        work.children[work.root] = [c for c in work.children[work.root] if c not in (a, b)] + [p]
        work.module[p] = work.module[a] | work.module[b]
        work.vol[p] = work.vol[a] + work.vol[b]
        work.cut[p] = max(work.cut[a] + work.cut[b] - 2.0 * w_ab, 0.0)
        if verify:
            got = before - work.si()
            want = merge_delta(w_ab, work.vol[p], total)
            if abs(got - want) > 1e-9:
                raise AssertionError(f"cached merge delta {want} != recomputed {got}")
        alive -= {a, b}
        merged: dict[int, float] = {}
        for src in (a, b):
            for c, w in link.pop(src).items():
                if c in alive:
                    merged[c] = merged.get(c, 0.0) + w
                    link[c].pop(src, None)
        link[p] = merged
        for c, w in merged.items():
            link[c][p] = w
            d = merge_delta(w, work.vol[p] + work.vol[c], total)
            heapq.heappush(heap, (-d, min(c, p), max(c, p)))
        alive.add(p)


def remove_increase(work: _Work, beta: int) -> float:
    """SI increase from deleting internal node ``beta`` and lifting its children."""
    alpha = work.parent[beta]
    child_cut = sum(work.cut[c] for c in work.children[beta])
    if work.vol[beta] <= 0.0:
        return 0.0
    return ((child_cut - work.cut[beta]) / work.total) * log2(work.vol[alpha] / work.vol[beta])


def _compress_stage(work: _Work, k: int, verify: bool) -> None:
    while work.depth_height() > k:
        best, best_node = None, None
        for v in sorted(work.parent):
            if v < work.n:  # graph-node leaves are never removed
                continue
            inc = remove_increase(work, v)
            if best is None or inc < best:
                best, best_node = inc, v
        if verify:
            before = work.si()
        alpha = work.parent.pop(best_node)
        kids = work.children.pop(best_node)
        siblings = work.children[alpha]
        at = siblings.index(best_node)
        work.children[alpha] = siblings[:at] + kids + siblings[at + 1:]
        for c in kids:
            work.parent[c] = alpha
        for table in (work.module, work.vol, work.cut):
            del table[best_node]
        if verify and abs(work.si() - before - best) > 1e-9:
            raise AssertionError("cached remove increase disagrees with recomputation")


def _fill_stage(work: _Work, k: int) -> PartitionTree:
    # bottom-up heights (leaves 0), root pinned at k, chains of copies bridge gaps
    level: dict[int, int] = {}

    def assign(v):
        kids = work.children[v]
        for c in kids:
            assign(c)
        level[v] = 0 if not kids else 1 + max(level[c] for c in kids)

    assign(work.root)
    level[work.root] = k
    tree = PartitionTree()
    queue = [(work.root, None)]
    while queue:
        v, parent_tid = queue.pop(0)
        if parent_tid is None:
            tid = tree.add_node(work.module[v])
        else:
            gap = tree_level[parent_tid] - level[v]
            for _ in range(gap - 1):
                parent_tid = tree.add_node(work.module[v], parent=parent_tid)
                tree_level[parent_tid] = tree_level[tree[parent_tid].parent] - 1
            tid = tree.add_node(
                work.module[v], parent=parent_tid, graph_node=v if v < work.n else None
            )
        if parent_tid is None:
            tree_level = {tid: k}
        else:
            tree_level[tid] = level[v]
        queue.extend((c, tid) for c in work.children[v])
    return tree


def greedy_coding_tree(g: Graph, k: int = 2, verify: bool = False) -> PartitionTree:
    """Height-``k`` partitioning tree from greedy merges, compression and filling.

    ``verify=True`` recomputes the full structural information after every
    step and checks it against the cached deltas.
    """
    if k < 2:
        raise ValidationError(f"target height must be at least 2, got {k}")
    if g.node_count < 2:
        raise ValidationError("need at least two graph nodes")
    work = _Work(g)
    _merge_stage(g, work, verify)
    _compress_stage(work, k, verify)
    return _fill_stage(work, k)


def tree_conductance(g: Graph, t: PartitionTree) -> float:
    """Smallest conductance over non-root modules with positive volume on both sides."""
    total = g.total_volume
    best = np.inf
    for n in t.non_root():
        vol, cut = module_stats(g, n.module)
        rest = total - vol
        if vol <= 0 or rest <= 1e-12 * total:
            continue
        best = min(best, cut / min(vol, rest))
    return float(best) if np.isfinite(best) else 0.0
