import numpy as np
import pytest

from setree import _kernels
from setree.coding_tree import tree_si, two_level_tree
from setree.generators import random_graph

compiled = pytest.mark.skipif(_kernels.compiled_backend is None, reason="extension not built")


def test_backend_flag():
    assert _kernels.BACKEND in ("cython", "python")


def test_python_two_level_si_matches_tree_si(rng):
    for _ in range(10):
        g = random_graph(8, 0.5, rng)
        labels = rng.integers(0, 3, size=8)
        _, labels = np.unique(labels, return_inverse=True)
        src, dst, w = g.edges()
        got = _kernels.python_backend.two_level_si(
            labels, int(labels.max()) + 1, g.degrees, src, dst, w, g.total_volume
        )
        assert got == pytest.approx(tree_si(g, two_level_tree(labels)), abs=1e-12)


@compiled
def test_backends_agree(rng):
    c, p = _kernels.compiled_backend, _kernels.python_backend
    for _ in range(5):
        g = random_graph(7, 0.5, rng)
        src, dst, w = g.edges()
        lc, sc, vc = c.best_two_level_partition(7, g.degrees, src, dst, w)
        lp, sp_, vp = p.best_two_level_partition(7, g.degrees, src, dst, w)
        assert sc == pytest.approx(sp_, abs=1e-12)
        assert vc == vp
        a = g.dense()
        assert np.allclose(c.subset_conductances(a), p.subset_conductances(a), equal_nan=True)


def test_partition_count_is_bell_number():
    g = random_graph(6, 0.6, np.random.default_rng(0))
    src, dst, w = g.edges()
    _, _, visited = _kernels.python_backend.best_two_level_partition(6, g.degrees, src, dst, w)
    assert visited == 203


def test_subset_conductance_self_loop_is_not_cut():
    a = np.array([[2.0, 1.0], [1.0, 0.0]])
    out = _kernels.python_backend.subset_conductances(a)
    # {0}: cut 1, volumes 3 and 1
    assert out[1] == pytest.approx(1.0)
    assert np.isnan(out[3])
