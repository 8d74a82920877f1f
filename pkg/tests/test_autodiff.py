import numpy as np
import pytest

from setree import autodiff as ad
from setree.autodiff import Tape, Tensor
from setree.errors import DimensionError, DomainError, TapeStateError, TrainingError, ValidationError


def _scalar(out: Tensor, probe: np.ndarray) -> Tensor:
    # random linear functional so every output entry matters
    return ad.sum(ad.mul(out, Tensor(probe)))


UNARY = {
    "exp": (ad.exp, lambda r: r.normal(size=(3, 4))),
    "log2": (ad.log2, lambda r: r.uniform(0.5, 2.0, size=(3, 4))),
    "sqrt": (ad.sqrt, lambda r: r.uniform(0.5, 2.0, size=(3, 4))),
    "square": (ad.square, lambda r: r.normal(size=(3, 4))),
    "arccosh": (ad.arccosh, lambda r: r.uniform(1.2, 3.0, size=(3, 4))),
    "sigmoid": (ad.sigmoid, lambda r: r.normal(size=(3, 4))),
    "leaky_relu": (lambda x: ad.leaky_relu(x, 0.2), lambda r: r.normal(size=(3, 4)) + 0.05),
    "neg": (ad.neg, lambda r: r.normal(size=(3, 4))),
    "transpose": (ad.transpose, lambda r: r.normal(size=(3, 4))),
    "softmax_rows": (ad.softmax_rows, lambda r: r.normal(size=(3, 4))),
    "sum_axis": (lambda x: ad.sum(x, axis=0, keepdims=True), lambda r: r.normal(size=(3, 4))),
    "mean": (lambda x: ad.mean(x, axis=1), lambda r: r.normal(size=(3, 4))),
    "reshape": (lambda x: ad.reshape(x, (4, 3)), lambda r: r.normal(size=(3, 4))),
    "gather_rows": (lambda x: ad.gather_rows(x, np.array([2, 0, 2])), lambda r: r.normal(size=(3, 4))),
    "take": (lambda x: ad.take(x, np.array([0, 1, 1]), np.array([3, 0, 0])), lambda r: r.normal(size=(3, 4))),
    "expand": (lambda x: ad.expand(ad.sum(x, axis=1, keepdims=True), (3, 4)), lambda r: r.normal(size=(3, 4))),
    "maximum": (lambda x: ad.maximum(x, 0.1), lambda r: r.normal(size=(3, 4)) + 0.05),
    "masked_softmax": (
        lambda x: ad.softmax_rows(x, mask=np.array([[1, 1, 0, 1]] * 3, dtype=bool)),
        lambda r: r.normal(size=(3, 4)),
    ),
}


@pytest.mark.parametrize("name", sorted(UNARY))
def test_unary_gradients(name, rng):
    fn, sample = UNARY[name]
    x = sample(rng)
    probe = rng.normal(size=fn(Tensor(x)).shape)
    assert ad.check_gradient(lambda t: _scalar(fn(t), probe), x) < 1e-6


@pytest.mark.parametrize("op", ["add", "sub", "mul", "div", "matmul"])
def test_binary_gradients(op, rng):
    a = rng.normal(size=(3, 3))
    b = rng.uniform(0.5, 2.0, size=(3, 3))
    f = getattr(ad, op)
    probe = rng.normal(size=(3, 3))
    assert ad.check_gradient(lambda t: _scalar(f(t, Tensor(b)), probe), a) < 1e-6
    assert ad.check_gradient(lambda t: _scalar(f(Tensor(a), t), probe), b) < 1e-6


def test_concat_gradient(rng):
    a = rng.normal(size=(2, 3))
    b = rng.normal(size=(2, 2))
    probe = rng.normal(size=(2, 5))
    assert ad.check_gradient(lambda t: _scalar(ad.concat([t, Tensor(b)], axis=1), probe), a) < 1e-6


def test_spmm_gradients(rng):
    rows = np.array([0, 0, 1, 2, 2])
    cols = np.array([1, 2, 0, 0, 2])
    vals = rng.uniform(0.5, 1.5, size=5)
    x = rng.normal(size=(3, 2))
    probe = rng.normal(size=(3, 2))
    assert ad.check_gradient(lambda t: _scalar(ad.spmm(rows, cols, t, Tensor(x), 3), probe), vals) < 1e-6
    assert ad.check_gradient(lambda t: _scalar(ad.spmm(rows, cols, Tensor(vals), t, 3), probe), x) < 1e-6
    dense = np.zeros((3, 3))
    dense[rows, cols] = vals
    assert np.allclose(ad.spmm(rows, cols, Tensor(vals), Tensor(x), 3).data, dense @ x)


def test_segment_softmax(rng):
    seg = np.array([0, 0, 1, 1, 1, 2])
    v = rng.normal(size=6)
    out = ad.segment_softmax(Tensor(v), seg, 3).data
    assert np.allclose(np.bincount(seg, weights=out), 1.0)
    probe = rng.normal(size=6)
    assert ad.check_gradient(lambda t: _scalar(ad.segment_softmax(t, seg, 3), probe), v) < 1e-6


def test_softmax_is_shift_invariant_and_stable():
    x = np.array([[1000.0, 1001.0, 999.0]])
    out = ad.softmax_rows(Tensor(x)).data
    assert np.all(np.isfinite(out))
    assert np.allclose(out, ad.softmax_rows(Tensor(x - 1000)).data)


def test_gradient_accumulates_over_reuse():
    x = Tensor(np.array(3.0), requires_grad=True)
    with Tape() as tape:
        y = ad.add(ad.mul(x, x), x)
    tape.backward(y)
    assert x.grad == pytest.approx(7.0)


def test_tape_single_use():
    x = Tensor(np.ones(2), requires_grad=True)
    with Tape() as tape:
        y = ad.sum(x)
    tape.backward(y)
    with pytest.raises(TapeStateError):
        tape.backward(y)


def test_backward_needs_scalar():
    x = Tensor(np.ones(2), requires_grad=True)
    with Tape() as tape:
        y = ad.mul(x, 2.0)
    with pytest.raises(ValidationError):
        tape.backward(y)


def test_shape_errors():
    with pytest.raises(DimensionError):
        ad.add(Tensor(np.ones(2)), Tensor(np.ones(3)))
    with pytest.raises(DimensionError):
        ad.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
    with pytest.raises(ValidationError):
        ad.softmax_rows(Tensor(np.ones((2, 2))), mask=np.array([[1, 0], [0, 0]], dtype=bool))


def test_domain_errors():
    with pytest.raises(DomainError):
        ad.log2(Tensor(np.array([0.0, 1.0])))
    with pytest.raises(DomainError):
        ad.sqrt(Tensor(np.array([-1.0])))


def test_arccosh_at_one_has_finite_gradient():
    x = Tensor(np.array([1.0]), requires_grad=True)
    with Tape() as tape:
        y = ad.sum(ad.arccosh(x))
    tape.backward(y)
    assert np.all(np.isfinite(x.grad))


def test_adam_minimises_quadratic():
    p = Tensor(np.array([3.0, -2.0]), requires_grad=True)
    opt = ad.Adam([p], lr=0.1)
    for _ in range(300):
        opt.zero_grad()
        with Tape() as tape:
            loss = ad.sum(ad.square(ad.sub(p, Tensor(np.array([1.0, 1.0])))))
        tape.backward(loss)
        opt.step()
    assert np.allclose(p.data, [1.0, 1.0], atol=1e-3)


def test_adam_rejects_nan_gradient():
    p = Tensor(np.ones(1), requires_grad=True)
    opt = ad.Adam([p])
    p.grad = np.array([np.nan])
    with pytest.raises(TrainingError):
        opt.step()


def test_relative_error_floor():
    assert ad.gradient_relative_error(np.zeros(3), np.full(3, 1e-9)) < 1e-2
    assert ad.gradient_relative_error(np.ones(3), 2 * np.ones(3)) == pytest.approx(0.5)


def test_matches_torch_on_composite(rng):
    torch = pytest.importorskip("torch")
    a = rng.normal(size=(4, 3))
    w = rng.normal(size=(3, 2))
    t_a = torch.tensor(a, requires_grad=True)
    torch.sum(torch.softmax(torch.sigmoid(t_a) @ torch.tensor(w), dim=1) ** 2).backward()
    x = Tensor(a, requires_grad=True)
    with Tape() as tape:
        y = ad.sum(ad.square(ad.softmax_rows(ad.matmul(ad.sigmoid(x), Tensor(w)))))
    tape.backward(y)
    assert np.allclose(x.grad, t_a.grad.numpy(), atol=1e-12)
