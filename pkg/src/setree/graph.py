"""Weighted undirected graphs and the cut/volume primitives built on them.

Adjacency is held as a symmetric ``scipy.sparse.csr_matrix``.  A :class:`Graph`
is treated as immutable once constructed.
"""
from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np
import scipy.sparse as sp

from setree.errors import (
    DimensionError,
    DomainError,
    ParseError,
    ValidationError,
)

PathLike = Union[str, Path]


class Graph:
    """Weighted sparse undirected graph with optional attributes and labels."""

    def __init__(self, adjacency, attributes=None, labels=None):
        adj = sp.csr_matrix(adjacency, dtype=np.float64)
        if adj.shape[0] != adj.shape[1]:
            raise DimensionError(f"adjacency must be square, got {adj.shape}")
        if adj.shape[0] < 1:
            raise ValidationError("graph needs at least one node")
        adj.eliminate_zeros()
        adj.sort_indices()
        data = adj.data
        if not np.all(np.isfinite(data)) or np.any(data <= 0):
            raise ValidationError("edge weights must be finite and strictly positive")
        if adj.diagonal().any():
            raise ValidationError("self-loops are not allowed")
        if (abs(adj - adj.T) > 1e-12 * max(1.0, float(np.abs(data).max(initial=0)))).nnz:
            raise ValidationError("adjacency must be symmetric")
        self.adjacency = adj
        self.adjacency.data.flags.writeable = False
        self.degrees = np.asarray(adj.sum(axis=1)).ravel()
        self.degrees.flags.writeable = False
        n = adj.shape[0]
        if attributes is not None:
            attributes = np.asarray(attributes, dtype=np.float64)
            if attributes.ndim != 2 or attributes.shape[0] != n:
                raise DimensionError(
                    f"attributes must have {n} rows, got shape {attributes.shape}"
                )
            attributes.flags.writeable = False
        if labels is not None:
            labels = np.asarray(labels, dtype=np.int64)
            if labels.shape != (n,):
                raise DimensionError(f"labels must have length {n}, got {labels.shape}")
            labels.flags.writeable = False
        self.attributes = attributes
        self.labels = labels

    @classmethod
    def from_edges(cls, n, edges, attributes=None, labels=None):
        """Build a graph from ``(u, v)`` or ``(u, v, w)`` tuples; duplicates are summed."""
        rows, cols, vals = [], [], []
        for e in edges:
            u, v = int(e[0]), int(e[1])
            w = float(e[2]) if len(e) > 2 else 1.0
            _check_edge(n, u, v, w)
            rows += [u, v]
            cols += [v, u]
            vals += [w, w]
        adj = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
        adj.sum_duplicates()
        return cls(adj, attributes=attributes, labels=labels)

    @property
    def node_count(self) -> int:
        return self.adjacency.shape[0]

    @property
    def total_volume(self) -> float:
        return float(self.degrees.sum())

    def edges(self):
        """Undirected edges ``(src, dst, weight)`` with ``src < dst``."""
        upper = sp.triu(self.adjacency, k=1).tocoo()
        return upper.row.astype(np.int64), upper.col.astype(np.int64), upper.data.copy()

    @property
    def edge_count(self) -> int:
        return int(sp.triu(self.adjacency, k=1).nnz)

    def dense(self) -> np.ndarray:
        return self.adjacency.toarray()

    def __repr__(self):
        return f"Graph(N={self.node_count}, edges={self.edge_count})"


def _check_edge(n, u, v, w, line=None):
    if not (0 <= u < n and 0 <= v < n):
        raise ValidationError(f"edge ({u}, {v}) references a node outside [0, {n})")
    if u == v:
        raise ValidationError(f"self-loop on node {u}" + (f" (line {line})" if line else ""))
    if not math.isfinite(w) or w <= 0:
        raise ValidationError(
            f"non-positive or non-finite weight {w}" + (f" on line {line}" if line else "")
        )


def _data_lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            yield lineno, line


def load_graph(edge_list_path: PathLike, attr_path: Optional[PathLike] = None,
               label_path: Optional[PathLike] = None, node_count: Optional[int] = None) -> Graph:
    """Read an edge list plus optional attribute CSV and label file.

    Node count is the largest id named by an edge or the label file, plus one,
    unless ``node_count`` is given.  Attribute rows must match it.
    """
    triples = []
    for lineno, line in _data_lines(edge_list_path):
        parts = line.split()
        if len(parts) not in (2, 3):
            raise ParseError(f"expected 'src dst [weight]', got {line!r}", line=lineno)
        try:
            u, v = int(parts[0]), int(parts[1])
            w = float(parts[2]) if len(parts) == 3 else 1.0
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
        if u < 0 or v < 0:
            raise ParseError("node ids must be non-negative", line=lineno)
        if not math.isfinite(w) or w <= 0:
            raise ValidationError(f"non-positive or non-finite weight {w} on line {lineno}")
        if u == v:
            raise ValidationError(f"self-loop on node {u} (line {lineno})")
        triples.append((u, v, w))

    attributes = None
    if attr_path is not None:
        with open(attr_path, encoding="utf-8", newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
        try:
            attributes = np.array([[float(x) for x in r] for r in rows], dtype=np.float64)
        except ValueError as exc:
            raise ParseError(f"attribute file: {exc}") from None
        if attributes.ndim != 2:
            raise DimensionError("attribute rows must all have the same length")

    labels_map = {}
    if label_path is not None:
        for lineno, line in _data_lines(label_path):
            parts = line.split()
            if len(parts) != 2:
                raise ParseError(f"expected 'node label', got {line!r}", line=lineno)
            try:
                labels_map[int(parts[0])] = int(parts[1])
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from None

    n = node_count
    if n is None:
        n = 1 + max([max(u, v) for u, v, _ in triples] + [-1])
        if labels_map:
            n = max(n, 1 + max(labels_map))
    if attributes is not None and attributes.shape[0] != n:
        raise DimensionError(f"attribute file has {attributes.shape[0]} rows, graph has {n} nodes")
    labels = None
    if label_path is not None:
        if sorted(labels_map) != list(range(n)):
            raise DimensionError(f"label file must list every node 0..{n - 1} exactly once")
        labels = np.array([labels_map[i] for i in range(n)], dtype=np.int64)
    return Graph.from_edges(n, triples, attributes=attributes, labels=labels)


def _subset_index(g: Graph, s: Iterable[int]) -> np.ndarray:
    idx = np.fromiter((int(i) for i in s), dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= g.node_count):
        raise ValidationError(f"subset references a node outside [0, {g.node_count})")
    if np.unique(idx).size != idx.size:
        raise ValidationError("subset contains duplicate node ids")
    return idx


def _indicator(g: Graph, s) -> np.ndarray:
    mask = np.zeros(g.node_count, dtype=bool)
    mask[_subset_index(g, s)] = True
    return mask


def volume(g: Graph, s) -> float:
    """Sum of weighted degrees over ``s``."""
    return float(g.degrees[_subset_index(g, s)].sum())


def cut_weight(g: Graph, s) -> float:
    """Total weight of edges with exactly one endpoint in ``s``."""
    mask = _indicator(g, s)
    inside = g.adjacency[mask][:, mask].sum()
    return float(g.degrees[mask].sum() - inside)


def subset_conductance(g: Graph, s) -> float:
    mask = _indicator(g, s)
    vol_s = float(g.degrees[mask].sum())
    vol_rest = g.total_volume - vol_s
    if vol_s <= 0 or vol_rest <= 0:
        raise DomainError("conductance needs positive volume on both sides of the cut")
    inside = g.adjacency[mask][:, mask].sum()
    return float((vol_s - inside) / min(vol_s, vol_rest))


def one_dim_entropy(g: Graph) -> float:
    """Shannon entropy (bits) of the stationary degree distribution."""
    vol = g.total_volume
    if vol <= 0:
        raise DomainError("one-dimensional entropy is undefined for a graph without edges")
    p = g.degrees[g.degrees > 0] / vol
    return float(-(p * np.log2(p)).sum())


def knn_sparsify(weights, k: int) -> sp.csr_matrix:
    """Keep the ``k`` largest off-diagonal weights of each row, then max-symmetrize.

    Ties go to the lower column index.  Zero entries are never selected.
    """
    w = weights.toarray() if sp.issparse(weights) else np.array(weights, dtype=np.float64)
    n = w.shape[0]
    if w.ndim != 2 or w.shape[1] != n:
        raise DimensionError(f"weights must be square, got {w.shape}")
    if not 1 <= k < n:
        raise ValidationError(f"k must satisfy 1 <= k < N={n}, got {k}")
    if np.any(w < 0):
        raise ValidationError("weights must be non-negative")
    w = w.copy()
    np.fill_diagonal(w, 0.0)
    cols = knn_columns(w, k)
    rows = np.repeat(np.arange(n), k)
    keep = np.zeros_like(w)
    picked = w[rows, cols.ravel()]
    keep[rows, cols.ravel()] = picked
    sym = np.maximum(keep, keep.T)
    return sp.csr_matrix(sym)


def knn_columns(scores: np.ndarray, k: int) -> np.ndarray:
    """Column indices of the ``k`` largest entries per row (diagonal excluded).

    A stable sort on the negated scores makes the lowest column index win ties.
    Entries equal to zero can only be chosen when a row has fewer than ``k``
    positive entries; callers drop them afterwards.
    """
    s = np.array(scores, dtype=np.float64)
    n = s.shape[0]
    s[np.arange(n), np.arange(n)] = -np.inf
    order = np.argsort(-s, axis=1, kind="stable")
    return order[:, :k]


def fuse_adjacency(a, a_virtual, gamma: float) -> sp.csr_matrix:
    """Convex combination ``(1 - gamma) * a + gamma * a_virtual``."""
    if not 0 < gamma <= 1:
        raise ValidationError(f"gamma must lie in (0, 1], got {gamma}")
    a = sp.csr_matrix(a, dtype=np.float64)
    b = sp.csr_matrix(a_virtual, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    for name, m in (("a", a), ("a_virtual", b)):
        if abs(m - m.T).max() > 1e-12:
            raise ValidationError(f"{name} must be symmetric")
    fused = (1.0 - gamma) * a + gamma * b
    fused.eliminate_zeros()
    return fused.tocsr()


def read_labels(path: PathLike) -> np.ndarray:
    """Label vector from ``node label`` lines; every node ``0..n-1`` must appear once."""
    found = {}
    for lineno, line in _data_lines(path):
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"expected 'node label', got {line!r}", line=lineno)
        try:
            node, lab = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
        if node in found:
            raise ParseError(f"node {node} listed twice", line=lineno)
        found[node] = lab
    if sorted(found) != list(range(len(found))):
        raise DimensionError("label file must list nodes 0..n-1 exactly once")
    return np.array([found[i] for i in range(len(found))], dtype=np.int64)


def write_labels(path: PathLike, labels) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, lab in enumerate(np.asarray(labels).tolist()):
            fh.write(f"{i} {lab}\n")
