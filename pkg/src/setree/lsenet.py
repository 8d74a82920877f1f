"""Neural partitioning-tree builder in the Lorentz model.

Leaves come from a single Lorentz convolution over the graph; each coarser
level is produced by an attentive assigner followed by centroid aggregation,
up to a root fixed at the origin.
"""
from __future__ import annotations

import base64
import json
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from setree import autodiff as ad
from setree.autodiff import Tensor
from setree.dsi import EdgeList, as_edges
from setree.errors import DimensionError, ValidationError
from setree.graph import Graph
from setree.lorentz import Lorentz
from setree.lorentz_ad import lift_spatial, normalize_timelike

MAX_WIDTH = 512


@dataclass
class ModelConfig:
    height: int = 2
    # [N_{H-1}, ..., N_1]; None picks the default schedule
    widths: Optional[list] = None
    tree_dim: int = 2
    curvature: float = -1.0
    hidden: int = 32
    slope: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.height < 2:
            raise ValidationError(f"height must be at least 2, got {self.height}")
        if self.widths is not None:
            self.widths = [int(w) for w in self.widths]
            if len(self.widths) != self.height - 1:
                raise ValidationError(f"need {self.height - 1} level widths, got {len(self.widths)}")
            if any(w < 1 for w in self.widths) or self.widths[-1] < 2:
                raise ValidationError("widths must be positive with N_1 >= 2")
        if not self.curvature < 0:
            raise ValidationError("curvature must be negative")

    def level_widths(self, n: int) -> list[int]:
        """``[N_0 = 1, N_1, ..., N_H = n]``."""
        if self.widths is not None:
            inner = list(reversed(self.widths))
        elif self.height == 2:
            inner = [10]
        else:
            inner = [
                min(MAX_WIDTH, max(2, int(round(n ** (h / self.height)))))
                for h in range(1, self.height)
            ]
        return [1] + inner + [n]


def identity_features(n: int) -> np.ndarray:
    return np.eye(n)


def node_features(g: Graph) -> np.ndarray:
    return identity_features(g.node_count) if g.attributes is None else np.asarray(g.attributes)


# --- parameters -----------------------------------------------------------------

class Params(dict):
    """Ordered name -> Tensor mapping of trainable parameters."""

    def tensors(self):
        return list(self.values())

    def arrays(self) -> dict:
        return {k: v.data.copy() for k, v in self.items()}


def _uniform(rng, shape, fan_in, name) -> Tensor:
    bound = 1.0 / np.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True, name=name)


def _llinear_params(p: Params, rng, prefix: str, d_in: int, d_out: int) -> None:
    p[f"{prefix}.W"] = _uniform(rng, (d_out, d_in), d_in, f"{prefix}.W")
    p[f"{prefix}.b"] = _uniform(rng, (d_out,), d_in, f"{prefix}.b")
    p[f"{prefix}.v"] = _uniform(rng, (d_in,), d_in, f"{prefix}.v")
    p[f"{prefix}.c"] = _uniform(rng, (), d_in, f"{prefix}.c")


def init_params(cfg: ModelConfig, n_nodes: int, n_features: int) -> Params:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation from ``cfg.seed``."""
    rng = np.random.default_rng(cfg.seed)
    widths = cfg.level_widths(n_nodes)
    amb = cfg.tree_dim + 1
    p = Params()
    for head in ("lift", "query", "key"):
        _llinear_params(p, rng, head, n_features + 1, cfg.tree_dim)
    p["att"] = _uniform(rng, (2 * amb,), 2 * amb, "att")
    for h in range(cfg.height, 1, -1):
        pre = f"level{h}"
        _llinear_params(p, rng, f"{pre}.query", amb, cfg.tree_dim)
        _llinear_params(p, rng, f"{pre}.key", amb, cfg.tree_dim)
        p[f"{pre}.att"] = _uniform(rng, (2 * amb,), 2 * amb, f"{pre}.att")
        p[f"{pre}.W1"] = _uniform(rng, (amb, cfg.hidden), amb, f"{pre}.W1")
        p[f"{pre}.b1"] = _uniform(rng, (cfg.hidden,), amb, f"{pre}.b1")
        p[f"{pre}.W2"] = _uniform(rng, (cfg.hidden, widths[h - 1]), cfg.hidden, f"{pre}.W2")
        p[f"{pre}.b2"] = _uniform(rng, (widths[h - 1],), cfg.hidden, f"{pre}.b2")
    return p


def _row_bias(b: Tensor, n: int) -> Tensor:
    return ad.expand(ad.reshape(b, (1, -1)), (n, b.shape[0]))


# --- layers -------------------------------------------------------------------

def llinear(x, p: Params, prefix: str, cfg: ModelConfig) -> Tensor:
    """Lorentz linear map: spatial part ``leaky(Wx + b) * sigmoid(v.x + c)``, time part rebuilt."""
    x = x if isinstance(x, Tensor) else Tensor(x)
    W, b, v, c = (p[f"{prefix}.{k}"] for k in "Wbvc")
    if x.ndim != 2 or x.shape[1] != W.shape[1]:
        raise DimensionError(f"{prefix}: expected input width {W.shape[1]}, got {x.shape}")
    n = x.shape[0]
    pre = ad.add(ad.matmul(x, ad.transpose(W)), _row_bias(b, n))
    gate = ad.sigmoid(ad.add(ad.matmul(x, ad.reshape(v, (-1, 1))), c))
    h = ad.mul(ad.leaky_relu(pre, cfg.slope), ad.expand(gate, pre.shape))
    return lift_spatial(h, cfg.curvature)


def _attention_scores(q: Tensor, k: Tensor, att: Tensor, rows, cols, slope: float) -> Tensor:
    """``leaky(att . [q_i || k_j])`` for each support entry ``(i, j)``."""
    amb = q.shape[1]
    sq = ad.reshape(ad.matmul(q, ad.reshape(att[:amb], (amb, 1))), (-1,))
    sk = ad.reshape(ad.matmul(k, ad.reshape(att[amb:], (amb, 1))), (-1,))
    return ad.leaky_relu(ad.add(ad.gather_rows(sq, rows), ad.gather_rows(sk, cols)), slope)


def latt_sparse(q: Tensor, k: Tensor, att: Tensor, rows, cols, n: int, slope: float = 0.2) -> Tensor:
    """Attention weights on a sparse support; softmax within each row."""
    scores = _attention_scores(q, k, att, rows, cols, slope)
    present = np.zeros(n, dtype=bool)
    present[rows] = True
    if not present.all():
        raise ValidationError("every attention row needs at least one allowed entry")
    return ad.segment_softmax(scores, rows, n)


def latt(q, k, mask, att, slope: float = 0.2) -> Tensor:
    """Dense ``N x N`` attention matrix restricted to ``mask`` (rows sum to one)."""
    q = q if isinstance(q, Tensor) else Tensor(q)
    k = k if isinstance(k, Tensor) else Tensor(k)
    mask = np.asarray(mask, dtype=bool)
    n = q.shape[0]
    amb = q.shape[1]
    sq = ad.matmul(q, ad.reshape(att[:amb], (amb, 1)))
    sk = ad.matmul(k, ad.reshape(att[amb:], (amb, 1)))
    scores = ad.add(ad.expand(sq, (n, n)), ad.expand(ad.transpose(sk), (n, n)))
    return ad.softmax_rows(ad.leaky_relu(scores, slope), mask=mask)


def lagg(omega, x, curvature: float = -1.0) -> Tensor:
    """Row-wise weighted centroids of ``x`` with weights ``omega`` (dense)."""
    omega = omega if isinstance(omega, Tensor) else Tensor(omega)
    if np.any(omega.data.sum(axis=1) <= 0):
        raise ValidationError("every aggregation row needs positive total weight")
    return normalize_timelike(ad.matmul(omega, x), curvature)


def _self_loop_support(edges: EdgeList):
    n = edges.n
    loops = np.arange(n)
    rows = np.concatenate([edges.rows, loops])
    cols = np.concatenate([edges.cols, loops])
    weights = ad.concat([edges.values, Tensor(np.ones(n))])
    return rows, cols, weights


def lconv(g, features, p: Params, cfg: ModelConfig) -> Tensor:
    """One Lorentz convolution: attention-weighted centroids over ``A + I``."""
    edges = as_edges(g)
    x = Lorentz(cfg.curvature).project_origin(np.asarray(features, dtype=np.float64))
    z = llinear(x, p, "lift", cfg)
    q = llinear(x, p, "query", cfg)
    k = llinear(x, p, "key", cfg)
    rows, cols, weights = _self_loop_support(edges)
    omega = latt_sparse(q, k, p["att"], rows, cols, edges.n, cfg.slope)
    m = ad.spmm(rows, cols, ad.mul(omega, weights), z, edges.n)
    return normalize_timelike(m, cfg.curvature)


def assigner(z: Tensor, a, p: Params, h: int, cfg: ModelConfig) -> Tensor:
    """``C^h``: attention over the level-``h`` graph times a softmax over parents."""
    pre = f"level{h}"
    q = llinear(z, p, f"{pre}.query", cfg)
    k = llinear(z, p, f"{pre}.key", cfg)
    n = z.shape[0]
    hidden = ad.leaky_relu(ad.add(ad.matmul(z, p[f"{pre}.W1"]), _row_bias(p[f"{pre}.b1"], n)), cfg.slope)
    logits = ad.add(ad.matmul(hidden, p[f"{pre}.W2"]), _row_bias(p[f"{pre}.b2"], n))
    probs = ad.softmax_rows(logits)
    if isinstance(a, EdgeList):
        rows, cols, _ = _self_loop_support(a)
        omega = latt_sparse(q, k, p[f"{pre}.att"], rows, cols, n, cfg.slope)
        return ad.spmm(rows, cols, omega, probs, n)
    a = a if isinstance(a, Tensor) else Tensor(a)
    mask = (a.data > 0) | np.eye(n, dtype=bool)
    return ad.matmul(latt(q, k, mask, p[f"{pre}.att"], cfg.slope), probs)


def parent_level(z: Tensor, c: Tensor, a, curvature: float = -1.0):
    """Parent centroids weighted by the columns of ``C`` and the coarsened adjacency ``C^T A C``."""
    ct = ad.transpose(c)
    m = ad.matmul(ct, z)
    dead = c.data.sum(axis=0) <= 0
    if dead.any():
        # an unused parent sits at the origin instead of a degenerate centroid
        fill = np.zeros(m.shape)
        fill[dead, 0] = 1.0 / np.sqrt(-curvature)
        m = ad.add(m, fill)
    zp = normalize_timelike(m, curvature)
    ac = a.matmul(c) if isinstance(a, EdgeList) else ad.matmul(a, c)
    return zp, ad.matmul(ct, ac), dead


@dataclass
class LevelOutputs:
    """Index ``h`` of each list refers to tree level ``h`` (0 = root)."""

    z: list
    c: list  # c[h] = C^h for h >= 1; c[0] is None
    a: list  # a[H] is the leaf EdgeList
    dead: list = field(default_factory=list)

    @property
    def height(self) -> int:
        return len(self.z) - 1

    def assignments(self) -> list:
        return self.c[1:]


def forward(g, cfg: ModelConfig, p: Params, features=None, leaves: Optional[Tensor] = None) -> LevelOutputs:
    """Leaf convolution, then assign and aggregate level by level up to the root."""
    edges = as_edges(g)
    n = edges.n
    if features is None:
        features = node_features(g) if isinstance(g, Graph) else identity_features(n)
    widths = cfg.level_widths(n)
    H = cfg.height
    z = [None] * (H + 1)
    c = [None] * (H + 1)
    a = [None] * (H + 1)
    dead = [None] * (H + 1)
    z[H] = lconv(edges, features, p, cfg) if leaves is None else leaves
    a[H] = edges
    for h in range(H, 1, -1):
        c[h] = assigner(z[h], a[h], p, h, cfg)
        if c[h].shape != (widths[h], widths[h - 1]):
            raise DimensionError(f"C^{h} has shape {c[h].shape}")
        z[h - 1], a[h - 1], dead[h - 1] = parent_level(z[h], c[h], a[h], cfg.curvature)
    c[1] = Tensor(np.ones((widths[1], 1)))
    z[0] = Tensor(Lorentz(cfg.curvature).origin(cfg.tree_dim)[None, :])
    a[0] = ad.reshape(ad.sum(edges.values), (1, 1))
    return LevelOutputs(z=z, c=c, a=a, dead=dead)


# --- checkpoints ----------------------------------------------------------------

def _encode(arr: np.ndarray) -> dict:
    arr = np.asarray(arr, dtype="<f8")
    return {"shape": list(arr.shape), "data": base64.b64encode(arr.tobytes()).decode("ascii")}


def _decode(item: dict) -> np.ndarray:
    raw = base64.b64decode(item["data"])
    return np.frombuffer(raw, dtype="<f8").reshape(item["shape"]).copy()


def save_checkpoint(path, cfg: ModelConfig, p: Params, extra: Optional[dict] = None) -> None:
    payload = {
        "config": asdict(cfg),
        "params": {k: _encode(v.data) for k, v in p.items()},
        "extra": {k: _encode(np.asarray(v)) for k, v in (extra or {}).items()},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)


def load_checkpoint(path):
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    cfg = ModelConfig(**payload["config"])
    p = Params()
    for k, item in payload["params"].items():
        p[k] = Tensor(_decode(item), requires_grad=True, name=k)
    extra = {k: _decode(v) for k, v in payload.get("extra", {}).items()}
    return cfg, p, extra
