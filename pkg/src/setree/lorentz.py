"""Lorentz (hyperboloid) model of hyperbolic space.

Points are numpy arrays whose last axis has length ``d + 1``; index 0 is the
time-like coordinate.  Every routine accepts a single point or a batch of
points stacked along the leading axes.  Curvature belongs to the
:class:`Lorentz` instance and is never passed per call.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from setree.errors import DegenerateInputError, DimensionError, ValidationError

# below this gap above 1 arccosh switches to its series form sqrt(2 (a - 1))
ACOSH_SERIES_GAP = 1e-7


def minkowski_inner(x, y) -> np.ndarray:
    """``-x0*y0 + sum_i xi*yi`` over the last axis."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[-1] != y.shape[-1]:
        raise DimensionError(f"dimension mismatch: {x.shape[-1]} vs {y.shape[-1]}")
    return (x[..., 1:] * y[..., 1:]).sum(axis=-1) - x[..., 0] * y[..., 0]


def stable_arccosh(a):
    a = np.maximum(np.asarray(a, dtype=np.float64), 1.0)
    near = a - 1.0 < ACOSH_SERIES_GAP
    out = np.empty_like(a)
    out[near] = np.sqrt(2.0 * (a[near] - 1.0))
    out[~near] = np.arccosh(a[~near])
    return out


class Lorentz:
    """Hyperboloid ``<x, x>_L = 1/curvature`` with ``x0 > 0``."""

    def __init__(self, curvature: float = -1.0):
        if not curvature < 0:
            raise ValidationError(f"curvature must be negative, got {curvature}")
        self.curvature = float(curvature)
        self._sqrt_c = float(np.sqrt(-self.curvature))

    def __repr__(self):
        return f"Lorentz(curvature={self.curvature})"

    def origin(self, dim: int) -> np.ndarray:
        """Origin of the ``dim``-dimensional model (ambient length ``dim + 1``)."""
        o = np.zeros(dim + 1)
        o[0] = 1.0 / self._sqrt_c
        return o

    inner = staticmethod(minkowski_inner)

    def residual(self, x) -> np.ndarray:
        """``|<x, x>_L - 1/curvature|``; zero on the manifold."""
        return np.abs(minkowski_inner(x, x) - 1.0 / self.curvature)

    def check_point(self, x, tol: float = 1e-9) -> None:
        x = np.asarray(x, dtype=np.float64)
        if np.any(self.residual(x) > tol * np.maximum(1.0, np.abs(x[..., 0]) ** 2)):
            raise ValidationError("point is not on the hyperboloid")
        if np.any(x[..., 0] <= 0):
            raise ValidationError("point lies on the lower sheet")

    def distance(self, x, y) -> np.ndarray:
        arg = self.curvature * minkowski_inner(x, y)
        return stable_arccosh(arg) / self._sqrt_c

    def renormalize(self, x) -> np.ndarray:
        """Rescale so that ``<x, x>_L = 1/curvature`` exactly (up to rounding)."""
        x = np.asarray(x, dtype=np.float64)
        scale = np.sqrt(self.curvature * minkowski_inner(x, x))
        return x / scale[..., None]

    def exp_map(self, x, u) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        u = np.asarray(u, dtype=np.float64)
        tol = 1e-9 * np.maximum(1.0, np.linalg.norm(x, axis=-1) * np.linalg.norm(u, axis=-1))
        if np.any(np.abs(minkowski_inner(x, u)) > tol):
            raise ValidationError("vector is not tangent at the base point")
        norm_u = np.sqrt(np.maximum(minkowski_inner(u, u), 0.0))
        r = self._sqrt_c * norm_u
        small = r < 1e-12
        safe_r = np.where(small, 1.0, r)
        coef = np.where(small, 1.0, np.sinh(r) / safe_r)
        return np.cosh(r)[..., None] * x + coef[..., None] * u

    def log_map(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        alpha = np.maximum(self.curvature * minkowski_inner(x, y), 1.0)
        near = alpha - 1.0 < ACOSH_SERIES_GAP
        denom = np.sqrt(np.where(near, 1.0, alpha * alpha - 1.0))
        # arccosh(a) / sqrt(a^2 - 1) -> 1 - (a - 1)/3 as a -> 1
        coef = np.where(near, 1.0 - (alpha - 1.0) / 3.0, stable_arccosh(alpha) / denom)
        return coef[..., None] * (y - alpha[..., None] * x)

    def to_tangent(self, x, u) -> np.ndarray:
        """Orthogonal projection of an ambient vector onto the tangent space at ``x``."""
        x = np.asarray(x, dtype=np.float64)
        u = np.asarray(u, dtype=np.float64)
        return u - self.curvature * minkowski_inner(x, u)[..., None] * x

    def project_origin(self, v) -> np.ndarray:
        """Lift Euclidean vectors onto the hyperboloid through the origin's exp map."""
        v = np.asarray(v, dtype=np.float64)
        u = np.concatenate([np.zeros(v.shape[:-1] + (1,)), v], axis=-1)
        o = np.broadcast_to(self.origin(v.shape[-1]), u.shape)
        return self.exp_map(o, u)

    def weighted_midpoint(self, points, weights) -> np.ndarray:
        """Closed-form minimiser of ``sum_i w_i ||mu - x_i||_L^2``.

        ``points`` has shape ``(n, d + 1)``; ``weights`` either ``(n,)`` for one
        midpoint or ``(m, n)`` for ``m`` midpoints at once.
        """
        pts = np.asarray(points, dtype=np.float64)
        w = np.asarray(weights, dtype=np.float64)
        if pts.ndim != 2:
            raise DimensionError("points must be a 2-d array of stacked points")
        if w.shape[-1] != pts.shape[0]:
            raise DimensionError(f"{w.shape[-1]} weights for {pts.shape[0]} points")
        if np.any(w < 0):
            raise ValidationError("weights must be non-negative")
        if np.any(w.sum(axis=-1) <= 0):
            raise ValidationError("at least one weight must be positive")
        m = w @ pts
        sq = minkowski_inner(m, m)
        if np.any(sq > -1e-300) or np.any(-sq < 1e-18 * (m * m).sum(axis=-1)):
            raise DegenerateInputError("weighted sum is not time-like")
        return m / (self._sqrt_c * np.sqrt(-sq))[..., None]

    def squared_distance(self, x, y) -> np.ndarray:
        """Squared Lorentzian norm ``||x - y||_L^2 = 2/curvature - 2<x, y>_L`` (non-negative)."""
        return np.maximum(2.0 / self.curvature - 2.0 * minkowski_inner(x, y), 0.0)

    def frechet_objective(self, mu, points, weights) -> float:
        """``sum_i w_i ||mu - x_i||_L^2``; the quantity :meth:`weighted_midpoint` minimises."""
        d2 = self.squared_distance(np.asarray(mu)[None, :], points)
        return float((np.asarray(weights) * d2).sum())

    def to_poincare(self, x) -> np.ndarray:
        """Stereographic projection onto the open unit ball."""
        x = np.asarray(x, dtype=np.float64) * self._sqrt_c
        return x[..., 1:] / (x[..., :1] + 1.0)

    def from_poincare(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=np.float64)
        sq = (p * p).sum(axis=-1, keepdims=True)
        x = np.concatenate([1.0 + sq, 2.0 * p], axis=-1) / (1.0 - sq)
        return x / self._sqrt_c


@dataclass(frozen=True)
class LorentzBoost:
    """Pure Lorentz boost with velocity-like parameter ``beta`` (``|beta| < 1``)."""

    beta: np.ndarray
    matrix: np.ndarray = field(repr=False)

    @classmethod
    def from_beta(cls, beta) -> "LorentzBoost":
        beta = np.atleast_1d(np.asarray(beta, dtype=np.float64)).copy()
        return cls(beta=beta, matrix=boost_matrix(beta))

    @property
    def dim(self) -> int:
        return self.beta.shape[0]

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.dim + 1:
            raise DimensionError(f"boost acts on length {self.dim + 1}, got {x.shape[-1]}")
        return x @ self.matrix.T


def boost_matrix(beta) -> np.ndarray:
    beta = np.atleast_1d(np.asarray(beta, dtype=np.float64))
    d = beta.shape[0]
    b2 = float(beta @ beta)
    if not b2 < (1.0 - 1e-6) ** 2:
        raise ValidationError(f"|beta| = {np.sqrt(b2):.6g} must be below 1 - 1e-6")
    if b2 == 0.0:
        return np.eye(d + 1)
    w = 1.0 / np.sqrt(1.0 - b2)
    L = np.empty((d + 1, d + 1))
    L[0, 0] = w
    L[0, 1:] = L[1:, 0] = -w * beta
    L[1:, 1:] = (w - 1.0) / b2 * np.outer(beta, beta) + np.eye(d)
    return L


def boost_from_beta(beta) -> LorentzBoost:
    return LorentzBoost.from_beta(beta)


def apply_boost(boost: LorentzBoost, x) -> np.ndarray:
    return boost.apply(x)


def metric_tensor(dim: int) -> np.ndarray:
    """``diag(-1, 1, ..., 1)`` of size ``dim + 1``."""
    eta = np.eye(dim + 1)
    eta[0, 0] = -1.0
    return eta


def random_points(space: Lorentz, n: int, dim: int, rng, scale: float = 1.0) -> np.ndarray:
    """Sample manifold points by lifting Gaussian tangent vectors at the origin."""
    return space.project_origin(rng.normal(scale=scale, size=(n, dim)))
