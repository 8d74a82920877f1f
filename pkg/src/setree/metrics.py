"""Clustering scores and the leaf-distance distortion of an embedded tree."""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linear_sum_assignment
from scipy.sparse.csgraph import shortest_path
from sklearn import metrics as skm

from setree.errors import DimensionError, ValidationError
from setree.graph import Graph, subset_conductance
from setree.lorentz import Lorentz
from setree.tree import PartitionTree

# embedded distances at or below this count as the same point
COINCIDENT = 1e-12


def _pair(pred, truth):
    pred = np.asarray(pred).ravel()
    truth = np.asarray(truth).ravel()
    if pred.size != truth.size:
        raise DimensionError(f"label vectors differ in length: {pred.size} vs {truth.size}")
    if pred.size == 0:
        raise ValidationError("label vectors are empty")
    return pred, truth


def nmi(pred, truth) -> float:
    """Mutual information over the arithmetic mean of the two entropies."""
    pred, truth = _pair(pred, truth)
    return float(skm.normalized_mutual_info_score(truth, pred, average_method="arithmetic"))


def ari(pred, truth) -> float:
    pred, truth = _pair(pred, truth)
    return float(skm.adjusted_rand_score(truth, pred))


def acc(pred, truth) -> float:
    """Accuracy after the best one-to-one matching of predicted to true clusters."""
    pred, truth = _pair(pred, truth)
    table = skm.cluster.contingency_matrix(truth, pred)
    rows, cols = linear_sum_assignment(table, maximize=True)
    return float(table[rows, cols].sum() / pred.size)


def partition_conductance(g: Graph, labels) -> float:
    """Smallest conductance over the predicted clusters (0 for a single cluster)."""
    labels = np.asarray(labels)
    groups = [np.flatnonzero(labels == lab) for lab in np.unique(labels)]
    if len(groups) < 2:
        return 0.0
    return float(min(subset_conductance(g, s) for s in groups))


@dataclass
class MetricReport:
    nmi: float
    ari: float
    acc: float
    clusters: int
    conductance: float
    runtime: float

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate(pred, truth, g: Graph | None = None, runtime: float = 0.0) -> MetricReport:
    start = time.perf_counter()
    pred, truth = _pair(pred, truth)
    report = MetricReport(
        nmi=nmi(pred, truth),
        ari=ari(pred, truth),
        acc=acc(pred, truth),
        clusters=int(np.unique(pred).size),
        conductance=partition_conductance(g, pred) if g is not None else float("nan"),
        runtime=0.0,
    )
    report.runtime = runtime + time.perf_counter() - start
    return report


def tree_leaf_distances(t: PartitionTree, n_graph: int) -> np.ndarray:
    """Hop distances in the tree between the leaves standing for graph nodes ``0..n-1``."""
    index = {nid: i for i, nid in enumerate(t.nodes)}
    rows, cols = [], []
    for node in t:
        for c in node.children:
            rows.append(index[node.id])
            cols.append(index[c])
    adj = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(index),) * 2)
    leaf = _leaf_ids(t, n_graph)
    hops = shortest_path(adj, directed=False, unweighted=True, indices=[index[v] for v in leaf])
    hops = hops[:, [index[v] for v in leaf]]
    if not np.all(np.isfinite(hops)):
        raise ValidationError("tree metric is disconnected")
    return hops


def _leaf_ids(t: PartitionTree, n_graph: int) -> list:
    leaf = [None] * n_graph
    for node in t.leaves():
        if len(node.module) == 1:
            (v,) = node.module
            if v < n_graph:
                leaf[v] = node.id
    if any(v is None for v in leaf):
        raise ValidationError("every graph node needs a singleton leaf")
    return leaf


def distortion_report(g: Graph, t: PartitionTree, curvature: float = -1.0) -> float:
    """Sum of ``|d_T / (s d_L) - 1|`` over ordered leaf pairs, divided by ``N^2``.

    ``d_T`` counts tree hops, ``d_L`` is the Lorentz distance between leaf
    coordinates and ``s`` is the least-squares scale matching ``s d_L`` to ``d_T``.
    Pairs embedded at the same point have no finite ratio and are left out.
    """
    n = g.node_count
    d_tree = tree_leaf_distances(t, n)
    leaf = _leaf_ids(t, n)
    coords = [t[v].coords for v in leaf]
    if any(c is None for c in coords):
        raise ValidationError("leaf coordinates are missing")
    x = np.stack(coords)
    d_emb = Lorentz(curvature).distance(x[:, None, :], x[None, :, :])
    off = ~np.eye(n, dtype=bool)
    a, b = d_emb[off], d_tree[off]
    denom = float(a @ a)
    if denom <= 0:
        return float("inf")
    scaled = a * float(a @ b) / denom
    apart = a > COINCIDENT
    return float(np.abs(b[apart] / scaled[apart] - 1.0).sum() / n**2)
