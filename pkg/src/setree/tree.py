"""Partitioning trees: rooted trees whose nodes carry modules of graph nodes."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from setree.errors import ValidationError


@dataclass
class TreeNode:
    id: int
    module: frozenset
    parent: Optional[int] = None
    children: list = field(default_factory=list)
    height: int = 0
    coords: Optional[np.ndarray] = None
    # graph node id for leaves that stand for a single graph node
    graph_node: Optional[int] = None

    @property
    def is_leaf(self) -> bool:
        return not self.children


class PartitionTree:
    """Rooted tree; ``height`` of a node is its depth (root has height 0)."""

    def __init__(self):
        self.nodes: dict[int, TreeNode] = {}
        self.root: Optional[int] = None
        self._next_id = 0

    def add_node(self, module: Iterable[int], parent: Optional[int] = None, coords=None,
                 graph_node: Optional[int] = None, node_id: Optional[int] = None) -> int:
        nid = self._next_id if node_id is None else int(node_id)
        if nid in self.nodes:
            raise ValidationError(f"duplicate tree node id {nid}")
        self._next_id = max(self._next_id, nid + 1)
        node = TreeNode(
            id=nid,
            module=frozenset(int(v) for v in module),
            parent=parent,
            coords=None if coords is None else np.asarray(coords, dtype=np.float64),
            graph_node=graph_node,
        )
        if parent is None:
            if self.root is not None:
                raise ValidationError("tree already has a root")
            self.root = nid
        else:
            p = self.nodes[parent]
            p.children.append(nid)
            node.height = p.height + 1
        self.nodes[nid] = node
        return nid

    def __len__(self):
        return len(self.nodes)

    def __getitem__(self, nid) -> TreeNode:
        return self.nodes[nid]

    def __iter__(self):
        return iter(self.nodes.values())

    @property
    def height(self) -> int:
        return max((n.height for n in self.nodes.values()), default=0)

    def non_root(self):
        return [n for n in self.nodes.values() if n.id != self.root]

    def leaves(self):
        return [n for n in self.nodes.values() if not n.children]

    def at_height(self, h: int):
        return sorted((n for n in self.nodes.values() if n.height == h), key=lambda n: n.id)

    def recompute_heights(self):
        stack = [(self.root, 0)]
        while stack:
            nid, h = stack.pop()
            self.nodes[nid].height = h
            stack.extend((c, h + 1) for c in self.nodes[nid].children)

    def bfs(self):
        order, queue = [], [self.root]
        while queue:
            nid = queue.pop(0)
            order.append(nid)
            queue.extend(self.nodes[nid].children)
        return order

    def copy(self) -> "PartitionTree":
        t = PartitionTree()
        for n in self.nodes.values():
            t.nodes[n.id] = TreeNode(
                id=n.id,
                module=n.module,
                parent=n.parent,
                children=list(n.children),
                height=n.height,
                coords=None if n.coords is None else n.coords.copy(),
                graph_node=n.graph_node,
            )
        t.root = self.root
        t._next_id = self._next_id
        return t

    def modules_at_height(self, h: int):
        return [n.module for n in self.at_height(h)]

    def validate(self, n_graph: int, relaxed: bool = False) -> None:
        """Check the partition-tree invariants against a graph of ``n_graph`` nodes."""
        if self.root is None:
            raise ValidationError("tree has no root")
        root = self.nodes[self.root]
        if root.module != frozenset(range(n_graph)):
            raise ValidationError("root module must be the full node set")
        seen = set()
        for nid in self.bfs():
            if nid in seen:
                raise ValidationError("tree contains a cycle")
            seen.add(nid)
            node = self.nodes[nid]
            if node.parent is not None:
                parent = self.nodes[node.parent]
                if node.height != parent.height + 1:
                    raise ValidationError(f"node {nid} height is not parent height + 1")
                if nid not in parent.children:
                    raise ValidationError(f"node {nid} missing from its parent's children")
            if node.children:
                union = frozenset()
                total = 0
                for c in node.children:
                    union |= self.nodes[c].module
                    total += len(self.nodes[c].module)
                if union != node.module or total != len(node.module):
                    raise ValidationError(f"children of node {nid} do not partition its module")
            elif len(node.module) != 1 and not (relaxed and len(node.module) == 0):
                raise ValidationError(f"leaf {nid} has a non-singleton module")
        if len(seen) != len(self.nodes):
            raise ValidationError("tree has unreachable nodes")

    # --- hard level assignments -------------------------------------------------
    def level_assignment(self, n_graph: int):
        """Binary matrices ``C^h`` (index ``h - 1`` holds ``C^h``) for a uniform-depth tree.

        Leaves must sit at depth ``H`` and leaf ``i`` (by module) is row ``i`` of
        ``C^H``.  Level ``h`` nodes are ordered by id.
        """
        H = self.height
        leaves = self.leaves()
        if any(n.height != H for n in leaves):
            raise ValidationError("all leaves must sit at the same depth")
        levels = [self.at_height(h) for h in range(H + 1)]
        leaf_order = sorted(levels[H], key=lambda n: min(n.module) if n.module else n_graph)
        if [next(iter(n.module)) for n in leaf_order if n.module] != list(range(n_graph)):
            raise ValidationError("leaves must be the singletons of every graph node")
        levels[H] = leaf_order
        mats = []
        for h in range(1, H + 1):
            pos = {n.id: j for j, n in enumerate(levels[h - 1])}
            c = np.zeros((len(levels[h]), len(levels[h - 1])))
            for i, n in enumerate(levels[h]):
                c[i, pos[n.parent]] = 1.0
            mats.append(c)
        return mats

    @classmethod
    def from_level_labels(cls, labels_per_level, coords=None) -> "PartitionTree":
        """Build a tree from nested labelings.

        ``labels_per_level[h - 1][i]`` is the level-``h`` group of graph node
        ``i`` for ``h = 1 .. H-1``; level ``H`` is implicitly the singletons.
        Labels must be nested (same group at level h implies same at h-1).
        """
        labels_per_level = [np.asarray(l, dtype=np.int64) for l in labels_per_level]
        n = labels_per_level[0].shape[0] if labels_per_level else None
        t = cls()
        if n is None:
            raise ValidationError("need at least one level of labels")
        root = t.add_node(range(n))
        frontier = {(): root}
        for lab in labels_per_level:
            nxt = {}
            for key, nid in frontier.items():
                members = sorted(t.nodes[nid].module)
                for g in sorted(set(lab[members].tolist())):
                    sub = [v for v in members if lab[v] == g]
                    nxt[key + (g,)] = t.add_node(sub, parent=nid)
            frontier = nxt
        for key, nid in sorted(frontier.items(), key=lambda kv: min(t.nodes[kv[1]].module)):
            for v in sorted(t.nodes[nid].module):
                t.add_node([v], parent=nid, graph_node=v)
        return t

    # --- serialisation ----------------------------------------------------------
    def to_dict(self) -> dict:
        nodes = []
        for nid in sorted(self.nodes):
            n = self.nodes[nid]
            nodes.append(
                {
                    "id": n.id,
                    "height": n.height,
                    "parent": n.parent,
                    "children": list(n.children),
                    "module": sorted(n.module),
                    "coords": None if n.coords is None else [float(x) for x in n.coords],
                }
            )
        return {"height": self.height, "nodes": nodes}

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: dict) -> "PartitionTree":
        t = cls()
        for item in data["nodes"]:
            nid = int(item["id"])
            t.nodes[nid] = TreeNode(
                id=nid,
                module=frozenset(int(v) for v in item["module"]),
                parent=item["parent"],
                children=[int(c) for c in item["children"]],
                height=int(item["height"]),
                coords=None if item.get("coords") is None else np.asarray(item["coords"], dtype=np.float64),
            )
            if item["parent"] is None:
                t.root = nid
            t._next_id = max(t._next_id, nid + 1)
        for n in t.nodes.values():
            if not n.children and len(n.module) == 1:
                n.graph_node = next(iter(n.module))
        return t

    @classmethod
    def from_json(cls, text: str) -> "PartitionTree":
        return cls.from_dict(json.loads(text))


def random_hard_tree(n: int, height: int, rng) -> PartitionTree:
    """Random uniform-depth tree: each level groups the one below at random."""
    labels = []
    current = np.arange(n)  # level-H group of each graph node
    groups = n
    for _ in range(height - 1):
        k = int(rng.integers(1, groups + 1))
        parent_of_group = rng.integers(0, k, size=groups)
        _, parent_of_group = np.unique(parent_of_group, return_inverse=True)
        current = parent_of_group[current]
        groups = int(current.max()) + 1
        labels.append(current.copy())
    return PartitionTree.from_level_labels(labels[::-1]) if labels else _flat_tree(n)


def _flat_tree(n: int) -> PartitionTree:
    t = PartitionTree()
    root = t.add_node(range(n))
    for v in range(n):
        t.add_node([v], parent=root, graph_node=v)
    return t


flat_tree = _flat_tree
