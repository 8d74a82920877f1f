"""Tape-traceable counterparts of the Lorentz-model routines."""
from __future__ import annotations

import numpy as np

from setree import autodiff as ad
from setree.autodiff import Tensor

# floor on -<m, m>_L before the square root in midpoint normalisation
TIMELIKE_FLOOR = 1e-18


def _eta_like(x: Tensor) -> Tensor:
    sign = np.ones(x.shape)
    sign[..., 0] = -1.0
    return Tensor(sign)


def inner_rows(x: Tensor, y: Tensor) -> Tensor:
    """Row-wise Minkowski inner products of two ``n x (d+1)`` tensors, shape ``(n, 1)``."""
    return ad.sum(ad.mul(ad.mul(x, y), _eta_like(x)), axis=1, keepdims=True)


def normalize_timelike(m: Tensor, curvature: float) -> Tensor:
    """Rescale time-like rows onto the hyperboloid: ``m / (sqrt(-k) sqrt(-<m, m>))``."""
    sq = inner_rows(m, m)
    norm = ad.sqrt(ad.maximum(ad.neg(sq), TIMELIKE_FLOOR))
    scale = ad.mul(norm, float(np.sqrt(-curvature)))
    return ad.div(m, ad.expand(scale, m.shape))


def lift_spatial(h: Tensor, curvature: float) -> Tensor:
    """Attach the time coordinate ``sqrt(|h|^2 - 1/k)`` to spatial rows ``h``."""
    sq = ad.sum(ad.square(h), axis=1, keepdims=True)
    time = ad.sqrt(ad.add(sq, -1.0 / curvature))
    return ad.concat([time, h], axis=1)


def distance_pairs(x: Tensor, y: Tensor, curvature: float) -> Tensor:
    """Lorentz distance between matching rows, shape ``(n,)``."""
    arg = ad.mul(inner_rows(x, y), curvature)
    d = ad.arccosh(ad.maximum(arg, 1.0))
    return ad.reshape(ad.div(d, float(np.sqrt(-curvature))), (-1,))


def boost_matrix(beta: Tensor) -> Tensor:
    """Differentiable boost matrix.

    ``(w - 1)/|beta|^2`` is rewritten as ``w^2/(w + 1)`` so that ``beta = 0``
    needs no special case.
    """
    d = beta.shape[0]
    col = ad.reshape(beta, (d, 1))
    row = ad.reshape(beta, (1, d))
    b2 = ad.sum(ad.square(beta))
    w = ad.div(1.0, ad.sqrt(ad.sub(1.0, b2)))
    coef = ad.div(ad.square(w), ad.add(w, 1.0))
    top = ad.concat([ad.reshape(w, (1, 1)), ad.neg(ad.mul(w, row))], axis=1)
    spatial = ad.add(ad.mul(coef, ad.matmul(col, row)), np.eye(d))
    bottom = ad.concat([ad.neg(ad.mul(w, col)), spatial], axis=1)
    return ad.concat([top, bottom], axis=0)


def apply_boost(beta: Tensor, z: Tensor) -> Tensor:
    return ad.matmul(z, ad.transpose(boost_matrix(beta)))
