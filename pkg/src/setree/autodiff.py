"""Small reverse-mode automatic differentiation engine over numpy arrays.

Operations executed while a :class:`Tape` is active are recorded in execution
order together with a vector-Jacobian rule.  ``tape.backward(loss)`` walks the
record in reverse and leaves gradients on every leaf tensor that was created
with ``requires_grad=True``.

Broadcasting is deliberately limited to scalar/tensor pairs; anything else
must be spelled out with :func:`expand`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from setree.errors import DimensionError, DomainError, TapeStateError, TrainingError, ValidationError
from setree.lorentz import ACOSH_SERIES_GAP, stable_arccosh

_ACTIVE: list = []

# running count of (nonzero x column) products done by spmm; used to check
# that sparse objectives never materialise an N x N leaf matrix
SPMM_COUNTER = {"entries": 0}


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "name", "_tape")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._tape = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def T(self):
        return transpose(self)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        if not self.requires_grad:
            return
        if self._tape is None:
            raise TapeStateError("tensor was not produced on a tape")
        self._tape.backward(self)

    def __repr__(self):
        tag = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{tag})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return index(self, idx)


@dataclass
class _Record:
    out: Tensor
    inputs: tuple
    vjp: Callable


class Tape:
    """Ordered record of differentiable operations for one forward pass."""

    def __init__(self):
        self.records: list[_Record] = []
        self.consumed = False

    def __enter__(self):
        _ACTIVE.append(self)
        return self

    def __exit__(self, *exc):
        _ACTIVE.remove(self)
        return False

    def __len__(self):
        return len(self.records)

    def backward(self, loss: Tensor) -> None:
        if self.consumed:
            raise TapeStateError("backward was already run on this tape")
        if loss.size != 1:
            raise ValidationError(f"loss must be a scalar, got shape {loss.shape}")
        self.consumed = True
        if not loss.requires_grad:
            return
        produced = {id(r.out) for r in self.records}
        grads = {id(loss): np.ones_like(loss.data)}
        leaves = {}
        for rec in reversed(self.records):
            g = grads.pop(id(rec.out), None)
            if g is None:
                continue
            for inp, gi in zip(rec.inputs, rec.vjp(g)):
                if gi is None or not isinstance(inp, Tensor) or not inp.requires_grad:
                    continue
                key = id(inp)
                grads[key] = grads[key] + gi if key in grads else gi
                if key not in produced:
                    leaves[key] = inp
        for key, leaf in leaves.items():
            g = grads[key]
            leaf.grad = g.copy() if leaf.grad is None else leaf.grad + g
        self.records.clear()


def _tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(out_data, inputs: Sequence, vjp: Callable) -> Tensor:
    out = Tensor(out_data)
    needs = any(isinstance(t, Tensor) and t.requires_grad for t in inputs)
    if needs and _ACTIVE:
        tape = _ACTIVE[-1]
        out.requires_grad = True
        out._tape = tape
        tape.records.append(_Record(out, tuple(inputs), vjp))
    return out


def _is_scalar(t: Tensor) -> bool:
    return t.ndim == 0


def _binary_shapes(a: Tensor, b: Tensor, op: str):
    if a.shape != b.shape and not (_is_scalar(a) or _is_scalar(b)):
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} differ (no broadcasting)")


def _unbroadcast(g, t: Tensor):
    return np.asarray(g.sum()) if _is_scalar(t) and g.ndim else g


def add(a, b) -> Tensor:
    a, b = _tensor(a), _tensor(b)
    _binary_shapes(a, b, "add")
    return _make(a.data + b.data, (a, b), lambda g: (_unbroadcast(g, a), _unbroadcast(g, b)))


def sub(a, b) -> Tensor:
    a, b = _tensor(a), _tensor(b)
    _binary_shapes(a, b, "sub")
    return _make(a.data - b.data, (a, b), lambda g: (_unbroadcast(g, a), _unbroadcast(-g, b)))


def mul(a, b) -> Tensor:
    a, b = _tensor(a), _tensor(b)
    _binary_shapes(a, b, "mul")
    ad, bd = a.data, b.data
    return _make(ad * bd, (a, b), lambda g: (_unbroadcast(g * bd, a), _unbroadcast(g * ad, b)))


def div(a, b) -> Tensor:
    a, b = _tensor(a), _tensor(b)
    _binary_shapes(a, b, "div")
    ad, bd = a.data, b.data
    out = ad / bd
    return _make(out, (a, b), lambda g: (_unbroadcast(g / bd, a), _unbroadcast(-g * out / bd, b)))


def neg(a) -> Tensor:
    a = _tensor(a)
    return _make(-a.data, (a,), lambda g: (-g,))


def matmul(a, b) -> Tensor:
    a, b = _tensor(a), _tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: incompatible shapes {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data
    return _make(ad @ bd, (a, b), lambda g: (g @ bd.T, ad.T @ g))


def transpose(a) -> Tensor:
    a = _tensor(a)
    if a.ndim != 2:
        raise DimensionError("transpose expects a matrix")
    return _make(a.data.T.copy(), (a,), lambda g: (g.T,))


def reshape(a, shape) -> Tensor:
    a = _tensor(a)
    old = a.shape
    return _make(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    ts = [_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in ts], axis=axis)
    except ValueError as exc:
        raise DimensionError(f"concat: {exc}") from None
    bounds = np.cumsum([0] + [t.shape[axis] for t in ts])

    def vjp(g):
        return tuple(
            np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=axis) for i in range(len(ts))
        )

    return _make(out, ts, vjp)


def index(a, idx) -> Tensor:
    """Basic or advanced indexing; gradient scatters back with ``np.add.at``."""
    a = _tensor(a)
    shape = a.shape

    def vjp(g):
        full = np.zeros(shape)
        np.add.at(full, idx, g)
        return (full,)

    return _make(a.data[idx], (a,), vjp)


def gather_rows(a, rows) -> Tensor:
    rows = np.asarray(rows, dtype=np.int64)
    return index(a, rows)


def take(a, rows, cols) -> Tensor:
    """Entries ``a[rows[e], cols[e]]`` as a vector."""
    return index(a, (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64)))


def expand(a, shape) -> Tensor:
    """Repeat a scalar, ``(n, 1)`` column or ``(1, m)`` row up to ``shape``."""
    a = _tensor(a)
    shape = tuple(shape)
    if a.ndim == 0:
        axes = None
    elif a.ndim == len(shape) and all(s in (1, t) for s, t in zip(a.shape, shape)):
        axes = tuple(i for i, (s, t) in enumerate(zip(a.shape, shape)) if s != t)
    else:
        raise DimensionError(f"cannot expand {a.shape} to {shape}")

    def vjp(g):
        if axes is None:
            return (np.asarray(g.sum()),)
        return (g.sum(axis=axes, keepdims=True),)

    return _make(np.broadcast_to(a.data, shape).copy(), (a,), vjp)


def sum(a, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    a = _tensor(a)
    shape = a.shape

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, shape).copy(),)

    return _make(a.data.sum(axis=axis, keepdims=keepdims), (a,), vjp)


def mean(a, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    a = _tensor(a)
    count = a.size if axis is None else a.shape[axis]
    return div(sum(a, axis=axis, keepdims=keepdims), float(count))


def exp(a) -> Tensor:
    a = _tensor(a)
    out = np.exp(a.data)
    return _make(out, (a,), lambda g: (g * out,))


def log2(a) -> Tensor:
    a = _tensor(a)
    if np.any(a.data <= 0):
        raise DomainError("log2 of a non-positive value; clamp upstream")
    ad = a.data
    return _make(np.log2(ad), (a,), lambda g: (g / (ad * np.log(2.0)),))


def sqrt(a) -> Tensor:
    a = _tensor(a)
    if np.any(a.data < 0):
        raise DomainError("sqrt of a negative value; clamp upstream")
    out = np.sqrt(a.data)
    return _make(out, (a,), lambda g: (g * 0.5 / out,))


def square(a) -> Tensor:
    a = _tensor(a)
    ad = a.data
    return _make(ad * ad, (a,), lambda g: (2.0 * g * ad,))


def arccosh(a) -> Tensor:
    """``arccosh`` clamped at 1 with the series branch near 1.

    Inside the series band the derivative of ``sqrt(2 (a - 1))`` is used with
    ``a - 1`` floored at the band width, so coincident points give a bounded
    gradient instead of an infinite one.
    """
    a = _tensor(a)
    ad = a.data
    out = stable_arccosh(ad)
    gap = ad - 1.0

    def vjp(g):
        near = gap < ACOSH_SERIES_GAP
        d = np.empty_like(ad)
        d[near] = np.where(
            gap[near] > 0, 1.0 / np.sqrt(2.0 * np.maximum(gap[near], ACOSH_SERIES_GAP)), 0.0
        )
        far = ~near
        d[far] = 1.0 / np.sqrt(ad[far] * ad[far] - 1.0)
        return (g * d,)

    return _make(out, (a,), vjp)


def leaky_relu(a, slope: float = 0.2) -> Tensor:
    a = _tensor(a)
    pos = a.data > 0
    return _make(np.where(pos, a.data, slope * a.data), (a,), lambda g: (np.where(pos, g, slope * g),))


def sigmoid(a) -> Tensor:
    a = _tensor(a)
    out = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return _make(out, (a,), lambda g: (g * out * (1.0 - out),))


def maximum(a, b) -> Tensor:
    """Elementwise maximum; ties send the gradient to ``a``."""
    a, b = _tensor(a), _tensor(b)
    _binary_shapes(a, b, "maximum")
    pick_a = a.data >= b.data
    out = np.where(pick_a, a.data, b.data)
    return _make(
        out,
        (a, b),
        lambda g: (_unbroadcast(np.where(pick_a, g, 0.0), a), _unbroadcast(np.where(pick_a, 0.0, g), b)),
    )


def softmax_rows(z, mask: Optional[np.ndarray] = None) -> Tensor:
    """Row-wise softmax, optionally restricted to a boolean support ``mask``."""
    z = _tensor(z)
    if z.ndim != 2:
        raise DimensionError("softmax_rows expects a matrix")
    x = z.data
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != x.shape:
            raise DimensionError(f"mask shape {mask.shape} != {x.shape}")
        if not mask.any(axis=1).all():
            raise ValidationError("every row needs at least one unmasked entry")
        x = np.where(mask, x, -np.inf)
    e = np.exp(x - x.max(axis=1, keepdims=True))
    out = e / e.sum(axis=1, keepdims=True)

    def vjp(g):
        return (out * (g - (g * out).sum(axis=1, keepdims=True)),)

    return _make(out, (z,), vjp)


def segment_softmax(values, segments, n_segments: int) -> Tensor:
    """Softmax of a vector within groups given by integer ``segments``."""
    v = _tensor(values)
    seg = np.asarray(segments, dtype=np.int64)
    if v.shape != seg.shape:
        raise DimensionError("values and segments must have the same shape")
    top = np.full(n_segments, -np.inf)
    np.maximum.at(top, seg, v.data)
    e = np.exp(v.data - top[seg])
    denom = np.zeros(n_segments)
    np.add.at(denom, seg, e)
    out = e / denom[seg]

    def vjp(g):
        s = np.zeros(n_segments)
        np.add.at(s, seg, g * out)
        return (out * (g - s[seg]),)

    return _make(out, (v,), vjp)


def spmm(rows, cols, values, x, n_rows: int) -> Tensor:
    """Sparse-times-dense product ``M @ x`` with ``M[rows[e], cols[e]] = values[e]``.

    Duplicate coordinates add up.  Differentiable in ``values`` and ``x``.
    """
    vals = _tensor(values)
    x = _tensor(x)
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    if vals.shape != rows.shape or rows.shape != cols.shape:
        raise DimensionError("rows, cols and values must be equal-length vectors")
    if x.ndim != 2:
        raise DimensionError("spmm expects a dense matrix operand")
    m = sp.csr_matrix((vals.data, (rows, cols)), shape=(n_rows, x.shape[0]))
    SPMM_COUNTER["entries"] += rows.size * x.shape[1]
    xd = x.data

    def vjp(g):
        SPMM_COUNTER["entries"] += 2 * rows.size * x.shape[1]
        g_vals = (g[rows] * xd[cols]).sum(axis=1)
        return (g_vals, m.T @ g)

    return _make(m @ xd, (vals, x), vjp)


def detach(a) -> Tensor:
    return Tensor(_tensor(a).data.copy())


class Adam:
    """Adam with bias correction.  Parameters are updated in place."""

    def __init__(self, params, lr: float = 0.003, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.lr = float(lr)
        self.beta1, self.beta2 = betas
        self.eps = float(eps)
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        self.t += 1
        for i, p in enumerate(self.params):
            g = np.zeros_like(p.data) if p.grad is None else p.grad
            if not np.all(np.isfinite(g)):
                raise TrainingError(f"non-finite gradient for parameter {p.name or i!r}")
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            m_hat = self.m[i] / (1.0 - self.beta1 ** self.t)
            v_hat = self.v[i] / (1.0 - self.beta2 ** self.t)
            p.data = p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def state_dict(self):
        return {"t": self.t, "m": [m.copy() for m in self.m], "v": [v.copy() for v in self.v]}


def adam_step(params, state: Optional[Adam] = None, lr: float = 0.003, betas=(0.9, 0.999),
              eps: float = 1e-8) -> Adam:
    """Functional wrapper: create the optimizer state on first use and apply one update."""
    if state is None:
        state = Adam(params, lr=lr, betas=betas, eps=eps)
    state.step()
    return state


def numerical_gradient(fn: Callable[[np.ndarray], float], x, eps: float = 1e-6) -> np.ndarray:
    """Central finite differences of a scalar function of an array."""
    x = np.array(x, dtype=np.float64)
    out = np.zeros_like(x)
    flat = x.reshape(-1)
    g = out.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + eps
        hi = fn(x)
        flat[i] = keep - eps
        lo = fn(x)
        flat[i] = keep
        g[i] = (hi - lo) / (2.0 * eps)
    return out


def gradient_relative_error(analytic, numeric, floor: float = 1e-6) -> float:
    """``|g - fd| / max(|fd|, |g|, floor)``; the floor keeps near-zero gradients comparable."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = max(np.linalg.norm(numeric), np.linalg.norm(analytic), floor)
    return float(np.linalg.norm(analytic - numeric) / scale)


def check_gradient(build: Callable[[Tensor], Tensor], x, eps: float = 1e-6) -> float:
    """Relative error between tape gradients and finite differences for ``build(x)``."""
    leaf = Tensor(x, requires_grad=True)
    with Tape() as tape:
        loss = build(leaf)
    tape.backward(loss)
    analytic = np.zeros_like(leaf.data) if leaf.grad is None else leaf.grad
    numeric = numerical_gradient(lambda v: float(build(Tensor(v)).data), x, eps)
    return gradient_relative_error(analytic, numeric)
