"""Training loop: virtual graph from boosted embeddings, graph fusion, DSI descent."""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from setree import autodiff as ad
from setree.autodiff import Tensor
from setree.dsi import EdgeList, as_edges, total_dsi
from setree.errors import DimensionError, TrainingError, ValidationError
from setree.graph import Graph, knn_columns
from setree.lorentz import Lorentz, minkowski_inner
from setree.lorentz_ad import apply_boost, distance_pairs
from setree.lsenet import LevelOutputs, ModelConfig, Params, forward, init_params, lconv, node_features

ABLATIONS = ("none", "no-fusion", "identity-boost", "tcl")


@dataclass
class TrainConfig:
    height: int = 2
    gamma: float = 0.01
    knn: int = 8
    temp: float = 1.0
    lr: float = 0.003
    epochs: int = 200
    seed: int = 0
    widths: Optional[list] = None
    curvature: float = -1.0
    tree_dim: int = 2
    hidden: int = 32
    ablation: str = "none"
    tcl_weight: float = 0.01
    drop_rate: float = 0.2

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ValidationError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.knn < 1:
            raise ValidationError(f"knn must be at least 1, got {self.knn}")
        if not self.temp > 0:
            raise ValidationError(f"temperature must be positive, got {self.temp}")
        if self.epochs < 0:
            raise ValidationError("epochs must be non-negative")
        if self.ablation not in ABLATIONS:
            raise ValidationError(f"ablation must be one of {ABLATIONS}, got {self.ablation!r}")

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            height=self.height,
            widths=self.widths,
            tree_dim=self.tree_dim,
            curvature=self.curvature,
            hidden=self.hidden,
            seed=self.seed,
        )

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class VirtualGraph:
    """kNN support (both orientations) and differentiable weights on it."""

    rows: np.ndarray
    cols: np.ndarray
    values: Tensor
    n: int

    def to_sparse(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.values.data, (self.rows, self.cols)), shape=(self.n, self.n))


@dataclass
class TrainResult:
    outputs: LevelOutputs
    losses: list
    virtual: Optional[sp.csr_matrix]
    fused: sp.csr_matrix
    elapsed: float
    params: Params
    beta: np.ndarray
    config: TrainConfig
    tcl: list = field(default_factory=list)


def pairwise_distance(z: np.ndarray, curvature: float = -1.0) -> np.ndarray:
    space = Lorentz(curvature)
    return space.distance(z[:, None, :], z[None, :, :])


def knn_support(z: np.ndarray, k: int, curvature: float = -1.0):
    """Symmetric kNN support under the Lorentz distance as sorted ``(rows, cols)``."""
    n = z.shape[0]
    if not 1 <= k < n:
        raise ValidationError(f"k must satisfy 1 <= k < N={n}, got {k}")
    nearest = knn_columns(-pairwise_distance(z, curvature), k)
    mask = np.zeros((n, n), dtype=bool)
    mask[np.repeat(np.arange(n), k), nearest.ravel()] = True
    mask |= mask.T
    np.fill_diagonal(mask, False)
    rows, cols = np.nonzero(mask)
    return rows.astype(np.int64), cols.astype(np.int64)


def virtual_weights(z: Tensor, beta: Tensor, rows, cols, temp: float, curvature: float) -> Tensor:
    """``exp(-d(L z_i, L z_j) / t)`` on the given support entries."""
    zb = apply_boost(beta, z)
    d = distance_pairs(ad.gather_rows(zb, rows), ad.gather_rows(zb, cols), curvature)
    return ad.exp(ad.mul(d, -1.0 / temp))


def virtual_adjacency(z, beta, temp: float, k: int, curvature: float = -1.0) -> VirtualGraph:
    """kNN-sparsified similarity graph of boosted embeddings.

    The support is chosen from detached distances and stays fixed; gradients
    reach ``z`` and ``beta`` through the weights only.
    """
    z = z if isinstance(z, Tensor) else Tensor(z)
    beta = beta if isinstance(beta, Tensor) else Tensor(beta)
    rows, cols = knn_support(z.data, k, curvature)
    values = virtual_weights(z, beta, rows, cols, temp, curvature)
    return VirtualGraph(rows, cols, values, z.shape[0])


def fuse_edges(g: Graph, virtual: Optional[VirtualGraph], gamma: float) -> EdgeList:
    """``(1 - gamma) A + gamma A~`` on the union of both supports, one entry per pair."""
    base = as_edges(g)
    n = base.n
    if virtual is None:
        return base
    if virtual.n != n:
        raise DimensionError("virtual graph size differs from the graph")
    key_a = base.rows * n + base.cols
    key_v = virtual.rows * n + virtual.cols
    keys = np.union1d(key_a, key_v)
    a_part = np.zeros(keys.size)
    a_part[np.searchsorted(keys, key_a)] = (1.0 - gamma) * base.values.data
    pos_v = np.searchsorted(keys, key_v)
    # scatter virtual weights into the union ordering with a 0/1 selection product
    scattered = ad.spmm(
        pos_v, np.arange(key_v.size), np.ones(key_v.size),
        ad.reshape(virtual.values, (-1, 1)), keys.size,
    )
    values = ad.add(Tensor(a_part), ad.mul(ad.reshape(scattered, (-1,)), gamma))
    return EdgeList(keys // n, keys % n, values, n)


def edges_to_sparse(edges: EdgeList) -> sp.csr_matrix:
    return sp.csr_matrix((edges.values.data, (edges.rows, edges.cols)), shape=(edges.n, edges.n))


def augmented_objective(fused, outputs: LevelOutputs) -> Tensor:
    """Structural information of the fused graph under the model's assignments."""
    return total_dsi(fused, outputs.assignments())


def tcl_loss(z: Tensor, z_prime: Tensor, s, beta, curvature: float = -1.0) -> Tensor:
    """Tree contrastive loss with pair weights ``w = S S^T`` from a leaf assignment ``S``."""
    z = z if isinstance(z, Tensor) else Tensor(z)
    z_prime = z_prime if isinstance(z_prime, Tensor) else Tensor(z_prime)
    s = s if isinstance(s, Tensor) else Tensor(s)
    beta = beta if isinstance(beta, Tensor) else Tensor(beta)
    if z.shape != z_prime.shape:
        raise DimensionError(f"views differ in shape: {z.shape} vs {z_prime.shape}")
    n = z.shape[0]
    if s.shape[0] != n:
        raise DimensionError("assignment rows must match the number of embeddings")
    zb = apply_boost(beta, z)
    zpb = apply_boost(beta, z_prime)
    sign = np.ones(zb.shape)
    sign[:, 0] = -1.0
    inner = ad.matmul(ad.mul(zb, Tensor(sign)), ad.transpose(zpb))
    dist = ad.div(ad.arccosh(ad.maximum(ad.mul(inner, curvature), 1.0)), float(np.sqrt(-curvature)))
    e = ad.exp(dist)
    w = ad.matmul(s, ad.transpose(s))
    idx = np.arange(n)
    positive = ad.take(e, idx, idx)
    denom = ad.sum(ad.mul(w, e), axis=1)
    return ad.mean(ad.div(positive, denom))


def drop_edges(g: Graph, rate: float, rng) -> EdgeList:
    """Second view for the contrastive ablation: drop each undirected edge with probability ``rate``."""
    src, dst, w = g.edges()
    keep = rng.random(src.size) >= rate
    src, dst, w = src[keep], dst[keep], w[keep]
    return EdgeList(
        np.concatenate([src, dst]), np.concatenate([dst, src]), Tensor(np.concatenate([w, w])),
        g.node_count,
    )


class Trainer:
    """Holds parameters and optimiser state; one :meth:`step` per epoch."""

    def __init__(self, g: Graph, cfg: TrainConfig, features=None):
        self.g = g
        self.cfg = cfg
        self.model_cfg = cfg.model_config()
        self.features = node_features(g) if features is None else np.asarray(features, dtype=np.float64)
        if self.features.shape[0] != g.node_count:
            raise DimensionError("feature rows must match the node count")
        self.params = init_params(self.model_cfg, g.node_count, self.features.shape[1])
        self.beta = Tensor(np.zeros(cfg.tree_dim), requires_grad=True, name="beta")
        trainable = self.params.tensors()
        if cfg.ablation not in ("identity-boost", "no-fusion"):
            trainable.append(self.beta)
        self.optimizer = ad.Adam(trainable, lr=cfg.lr)
        self.rng = np.random.default_rng(cfg.seed)
        self.edges = as_edges(g)

    def build(self):
        """One full forward pass; returns ``(loss, outputs, virtual, fused, tcl)``."""
        cfg = self.cfg
        virtual = None
        if cfg.ablation != "no-fusion":
            z0 = lconv(self.edges, self.features, self.params, self.model_cfg)
            virtual = virtual_adjacency(z0, self.beta, cfg.temp, cfg.knn, cfg.curvature)
        fused = fuse_edges(self.g, virtual, cfg.gamma)
        leaves = lconv(fused, self.features, self.params, self.model_cfg)
        outputs = forward(fused, self.model_cfg, self.params, features=self.features, leaves=leaves)
        loss = augmented_objective(fused, outputs)
        tcl = None
        if cfg.ablation == "tcl":
            view = drop_edges(self.g, cfg.drop_rate, self.rng)
            z_view = lconv(view, self.features, self.params, self.model_cfg)
            tcl = tcl_loss(leaves, z_view, outputs.c[cfg.height], self.beta, cfg.curvature)
            loss = ad.add(loss, ad.mul(tcl, cfg.tcl_weight))
        return loss, outputs, virtual, fused, tcl

    def step(self, epoch: int):
        self.optimizer.zero_grad()
        with ad.Tape() as tape:
            loss, _, _, _, tcl = self.build()
        value = loss.item()
        if not np.isfinite(value):
            raise TrainingError(f"non-finite loss at epoch {epoch}")
        tape.backward(loss)
        try:
            self.optimizer.step()
        except TrainingError as exc:
            raise TrainingError(f"epoch {epoch}: {exc}") from None
        for p in self.optimizer.params:
            if not np.all(np.isfinite(p.data)):
                raise TrainingError(f"epoch {epoch}: parameter {p.name} became non-finite")
        return value, None if tcl is None else tcl.item()


def train(g: Graph, cfg: Optional[TrainConfig] = None, features=None, callback=None) -> TrainResult:
    cfg = TrainConfig() if cfg is None else cfg
    start = time.perf_counter()
    trainer = Trainer(g, cfg, features)
    losses, tcl_trace = [], []
    for epoch in range(cfg.epochs):
        value, tcl = trainer.step(epoch)
        losses.append(value)
        if tcl is not None:
            tcl_trace.append(tcl)
        if callback is not None:
            callback(epoch, value)
    _, outputs, virtual, fused, _ = trainer.build()
    return TrainResult(
        outputs=outputs,
        losses=losses,
        virtual=None if virtual is None else virtual.to_sparse(),
        fused=edges_to_sparse(fused),
        elapsed=time.perf_counter() - start,
        params=trainer.params,
        beta=trainer.beta.data.copy(),
        config=cfg,
        tcl=tcl_trace,
    )
