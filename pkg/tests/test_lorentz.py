import numpy as np
import pytest

from setree.errors import DegenerateInputError, DimensionError, ValidationError
from setree.lorentz import (
    Lorentz, LorentzBoost, boost_matrix, metric_tensor, minkowski_inner, random_points,
)


@pytest.fixture(params=[-1.0, -0.5, -2.0])
def space(request):
    return Lorentz(request.param)


def test_curvature_must_be_negative():
    with pytest.raises(ValidationError):
        Lorentz(0.0)


def test_origin_on_manifold(space):
    o = space.origin(3)
    assert space.residual(o) < 1e-14
    assert space.distance(o, o) == pytest.approx(0.0, abs=1e-7)


def test_distance_closed_form_along_axis():
    s = Lorentz(-1.0)
    x = np.array([np.cosh(1.3), np.sinh(1.3)])
    assert s.distance(s.origin(1), x) == pytest.approx(1.3)


def test_distance_scales_with_curvature():
    # d_k(o, exp_o(v)) equals |v| for every curvature
    for k in (-0.25, -1.0, -4.0):
        s = Lorentz(k)
        x = s.project_origin(np.array([0.7, 0.0]))
        assert s.distance(s.origin(2), x) == pytest.approx(0.7)


def test_exp_log_inverse(space, rng):
    x, y = random_points(space, 2, 3, rng)
    v = space.log_map(x, y)
    assert abs(minkowski_inner(x, v)) < 1e-9
    assert np.allclose(space.exp_map(x, v), y, atol=1e-9)
    assert np.sqrt(minkowski_inner(v, v)) == pytest.approx(space.distance(x, y))


def test_exp_map_rejects_non_tangent():
    s = Lorentz(-1.0)
    with pytest.raises(ValidationError):
        s.exp_map(s.origin(2), np.array([1.0, 0.0, 0.0]))


def test_check_point():
    s = Lorentz(-1.0)
    s.check_point(s.origin(2))
    with pytest.raises(ValidationError):
        s.check_point(np.array([2.0, 0.0, 0.0]))
    with pytest.raises(ValidationError):
        s.check_point(-s.origin(2))


def test_midpoint_on_manifold_and_symmetric(space, rng):
    pts = random_points(space, 5, 2, rng)
    w = rng.uniform(0.1, 1.0, size=5)
    mu = space.weighted_midpoint(pts, w)
    assert space.residual(mu) < 1e-12
    assert np.allclose(space.weighted_midpoint(pts[::-1], w[::-1]), mu)


def test_midpoint_of_two_points_is_equidistant():
    s = Lorentz(-1.0)
    x, y = random_points(s, 2, 2, np.random.default_rng(3))
    mu = s.weighted_midpoint(np.stack([x, y]), np.ones(2))
    assert s.distance(mu, x) == pytest.approx(s.distance(mu, y))


def test_midpoint_single_point_is_itself(space, rng):
    pts = random_points(space, 3, 2, rng)
    assert np.allclose(space.weighted_midpoint(pts, [0, 1, 0]), pts[1])


def test_midpoint_errors():
    s = Lorentz(-1.0)
    pts = random_points(s, 3, 2, np.random.default_rng(0))
    with pytest.raises(DimensionError):
        s.weighted_midpoint(pts, [1, 1])
    with pytest.raises(ValidationError):
        s.weighted_midpoint(pts, [1, -1, 1])
    with pytest.raises(ValidationError):
        s.weighted_midpoint(pts, [0, 0, 0])
    with pytest.raises(DegenerateInputError):
        s.weighted_midpoint(np.array([[1.0, 0.0], [-1.0, 0.0]]), [1, 1])


def test_midpoint_minimises_lorentzian_objective(rng):
    s = Lorentz(-1.0)
    pts = random_points(s, 6, 2, rng)
    w = rng.uniform(0.1, 1.0, size=6)
    mu = s.weighted_midpoint(pts, w)
    u = s.to_tangent(mu, rng.normal(size=(200, 3)))
    u = 1e-2 * u / np.sqrt(minkowski_inner(u, u))[:, None]
    moved = s.exp_map(np.broadcast_to(mu, u.shape), u)
    best = s.frechet_objective(mu, pts, w)
    assert all(best <= s.frechet_objective(m, pts, w) for m in moved)


def test_boost_is_isometry(rng):
    s = Lorentz(-1.0)
    for _ in range(50):
        beta = rng.uniform(-0.5, 0.5, size=3)
        L = boost_matrix(beta)
        eta = metric_tensor(3)
        assert np.allclose(L.T @ eta @ L, eta, atol=1e-12)
        x, y = random_points(s, 2, 3, rng)
        assert s.distance(L @ x, L @ y) == pytest.approx(s.distance(x, y), rel=1e-9)


def test_boost_zero_is_identity():
    assert np.array_equal(boost_matrix(np.zeros(2)), np.eye(3))


def test_boost_moves_origin_to_velocity_point():
    # with one spatial axis the boost is a hyperbolic rotation by artanh(beta)
    b = 0.6
    x = boost_matrix([b]) @ Lorentz(-1.0).origin(1)
    assert x[0] == pytest.approx(np.cosh(np.arctanh(b)))
    assert abs(x[1]) == pytest.approx(np.sinh(np.arctanh(b)))


def test_boost_rejects_fast_beta():
    with pytest.raises(ValidationError):
        boost_matrix([0.8, 0.8])


def test_boost_dimension_check():
    boost = LorentzBoost.from_beta([0.1, 0.2])
    with pytest.raises(DimensionError):
        boost.apply(np.ones(4))


def test_poincare_roundtrip_inside_disc(space, rng):
    pts = random_points(space, 20, 2, rng, scale=3.0)
    p = space.to_poincare(pts)
    assert np.all(np.linalg.norm(p, axis=1) < 1)
    assert np.allclose(space.from_poincare(p), pts, rtol=1e-8)


def test_poincare_distance_formula(rng):
    s = Lorentz(-1.0)
    x, y = random_points(s, 2, 2, rng)
    p, q = s.to_poincare(x), s.to_poincare(y)
    arg = 1 + 2 * np.sum((p - q) ** 2) / ((1 - p @ p) * (1 - q @ q))
    assert s.distance(x, y) == pytest.approx(np.arccosh(arg))
