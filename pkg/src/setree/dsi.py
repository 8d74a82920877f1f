"""Differentiable structural information over level-wise assignment matrices.

A level assignment is a list ``[C^1, ..., C^H]`` where ``C^h`` has shape
``N_h x N_{h-1}``, ``N_H = N`` and ``N_0 = 1``.  Cumulative products
``S^h = C^H ... C^{h+1}`` map graph nodes to level-``h`` tree nodes; ``S^H``
is the identity and is never materialised.

Every function accepts either a :class:`~setree.graph.Graph` or an
:class:`EdgeList` whose weights may be a differentiable tensor.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from setree import autodiff as ad
from setree.autodiff import Tensor
from setree.errors import DimensionError, ValidationError
from setree.graph import Graph

LOG_FLOOR = 1e-15
ROW_TOL = 1e-9


@dataclass
class EdgeList:
    """Symmetric adjacency stored as directed entries (each undirected edge twice)."""

    rows: np.ndarray
    cols: np.ndarray
    values: Tensor
    n: int

    @classmethod
    def from_graph(cls, g: Graph) -> "EdgeList":
        coo = g.adjacency.tocoo()
        return cls(coo.row.astype(np.int64), coo.col.astype(np.int64), Tensor(coo.data), g.node_count)

    def degrees(self) -> Tensor:
        return ad.spmm(self.rows, self.cols, self.values, Tensor(np.ones((self.n, 1))), self.n)

    def matmul(self, x) -> Tensor:
        return ad.spmm(self.rows, self.cols, self.values, x, self.n)


def as_edges(g) -> EdgeList:
    return g if isinstance(g, EdgeList) else EdgeList.from_graph(g)


def _as_tensor(c) -> Tensor:
    return c if isinstance(c, Tensor) else Tensor(c)


class AssignmentStack:
    """Level matrices plus their cumulative products ``S^h``."""

    def __init__(self, cs):
        self.cs = [_as_tensor(c) for c in cs]
        H = len(self.cs)
        if H < 1:
            raise ValidationError("need at least one level")
        if self.cs[0].shape[1] != 1:
            raise DimensionError("C^1 must have a single column (the root)")
        for h in range(1, H):
            if self.cs[h].shape[1] != self.cs[h - 1].shape[0]:
                raise DimensionError(
                    f"C^{h + 1} has {self.cs[h].shape[1]} columns but level {h} has "
                    f"{self.cs[h - 1].shape[0]} nodes"
                )
        self.height = H
        self.n = self.cs[-1].shape[0]
        self.widths = [1] + [c.shape[0] for c in self.cs]
        # s[h] for h = 0..H; s[H] is None (identity)
        s: list[Optional[Tensor]] = [None] * (H + 1)
        for h in range(H - 1, -1, -1):
            s[h] = self.cs[h] if h == H - 1 else ad.matmul(s[h + 1], self.cs[h])
        self.s = s

    def c(self, h: int) -> Tensor:
        """``C^h`` for ``h = 1..H``."""
        return self.cs[h - 1]

    def check_level(self, h: int) -> None:
        if not 1 <= h <= self.height:
            raise ValidationError(f"level must be in 1..{self.height}, got {h}")

    def volumes(self, g) -> list[Tensor]:
        """Column vectors ``V^h`` (shape ``N_h x 1``) for ``h = 0..H``."""
        edges = as_edges(g)
        d = edges.degrees()
        out = []
        for h in range(self.height + 1):
            out.append(d if h == self.height else ad.matmul(ad.transpose(self.s[h]), d))
        return out

    def dense_s(self, h: int) -> np.ndarray:
        return np.eye(self.n) if h == self.height else self.s[h].data


def cumulative_assignment(cs) -> AssignmentStack:
    return AssignmentStack(cs)


def _stack(c) -> AssignmentStack:
    return c if isinstance(c, AssignmentStack) else AssignmentStack(c)


def _safe_log2(x: Tensor) -> Tensor:
    return ad.log2(ad.maximum(x, LOG_FLOOR))


def _level_terms(cut: Tensor, vol: Tensor, parent: Tensor, total: Tensor) -> Tensor:
    ratio = ad.div(ad.maximum(vol, LOG_FLOOR), ad.maximum(parent, LOG_FLOOR))
    return ad.neg(ad.div(ad.sum(ad.mul(cut, ad.log2(ratio))), total))


def level_dsi_edgewise(g, stack, h: int) -> Tensor:
    """Level-``h`` term summing ``S_ik S_jk w_ij`` over every directed edge entry."""
    stack = _stack(stack)
    stack.check_level(h)
    edges = as_edges(g)
    vols = stack.volumes(edges)
    total = ad.sum(vols[stack.height])
    vol = vols[h]
    if h == stack.height:
        inner = Tensor(np.zeros(vol.shape))
    else:
        s = stack.s[h]
        width = s.shape[1]
        prod = ad.mul(ad.gather_rows(s, edges.rows), ad.gather_rows(s, edges.cols))
        w = ad.expand(ad.reshape(edges.values, (-1, 1)), (edges.rows.size, width))
        inner = ad.reshape(ad.sum(ad.mul(prod, w), axis=0), (width, 1))
    parent = ad.matmul(stack.c(h), vols[h - 1])
    return _level_terms(ad.sub(vol, inner), vol, parent, total)


def _coarse_weights(edges: EdgeList, stack: AssignmentStack, h: int):
    """``(d^h, diag W^h)`` with ``W^h = S^hT A S^h`` from sparse products."""
    if h == stack.height:
        d = edges.degrees()
        return d, Tensor(np.zeros(d.shape))
    s = stack.s[h]
    w = ad.matmul(ad.transpose(s), edges.matmul(s))
    width = s.shape[1]
    idx = np.arange(width)
    d = ad.sum(w, axis=1, keepdims=True)
    return d, ad.reshape(ad.take(w, idx, idx), (width, 1))


def level_dsi_nodewise(g, stack, h: int) -> Tensor:
    """Level-``h`` term from the coarsened weights ``W^h``: ``(d - w_kk) log(d / C d^{h-1})``."""
    stack = _stack(stack)
    stack.check_level(h)
    edges = as_edges(g)
    d, diag = _coarse_weights(edges, stack, h)
    if h == 1:
        parent_deg = ad.reshape(ad.sum(edges.values), (1, 1))
    else:
        parent_deg, _ = _coarse_weights(edges, stack, h - 1)
    total = ad.sum(edges.values)
    parent = ad.matmul(stack.c(h), parent_deg)
    return _level_terms(ad.sub(d, diag), d, parent, total)


def total_dsi(g, c) -> Tensor:
    """Sum of the node-wise level terms; differentiable in ``C`` and the edge weights."""
    stack = _stack(c)
    edges = as_edges(g)
    out = level_dsi_nodewise(edges, stack, 1)
    for h in range(2, stack.height + 1):
        out = ad.add(out, level_dsi_nodewise(edges, stack, h))
    return out


def is_hard(cs) -> bool:
    for c in cs:
        c = c.data if isinstance(c, Tensor) else np.asarray(c)
        if not (np.isin(c, (0.0, 1.0)).all() and np.all(c.sum(axis=1) == 1.0)):
            return False
    return True


def check_row_stochastic(cs, tol: float = ROW_TOL) -> None:
    for h, c in enumerate(cs, start=1):
        c = c.data if isinstance(c, Tensor) else np.asarray(c)
        if np.any(c < -tol) or np.any(np.abs(c.sum(axis=1) - 1.0) > tol):
            raise ValidationError(f"C^{h} is not row-stochastic")


def _entropy(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def additivity_decomposition(g, cs) -> float:
    """Sum over levels and parents of parent-weighted entropies of the children's shares."""
    if not is_hard(cs):
        raise ValidationError("the decomposition holds for hard (0/1) assignments only")
    stack = _stack(cs)
    vols = [v.data.ravel() for v in stack.volumes(g)]
    total = vols[stack.height].sum()
    out = 0.0
    for h in range(1, stack.height + 1):
        c = stack.c(h).data
        for j in range(c.shape[1]):
            pv = vols[h - 1][j]
            if pv <= 0:
                continue
            out += pv / total * _entropy(c[:, j] * vols[h] / pv)
    return out


def hard_from_labels(labels, width: Optional[int] = None) -> np.ndarray:
    """One-hot matrix with a row per entry of ``labels``."""
    labels = np.asarray(labels, dtype=np.int64)
    width = int(labels.max()) + 1 if width is None else width
    out = np.zeros((labels.size, width))
    out[np.arange(labels.size), labels] = 1.0
    return out


def random_soft_assignment(widths, rng, floor: float = 1e-3) -> list[np.ndarray]:
    """Random row-stochastic ``[C^1..C^H]`` for ``widths = [N_1, ..., N_H]``, entries above ``floor``."""
    out, prev = [], 1
    for w in widths:
        c = rng.random((w, prev)) + floor
        out.append(c / c.sum(axis=1, keepdims=True))
        prev = w
    return out
