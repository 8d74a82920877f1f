import numpy as np
import pytest

from setree.checks import insert_duplicate, insert_empty_leaf, random_corpus
from setree.coding_tree import tree_si, two_level_tree
from setree.dsi import hard_from_labels
from setree.errors import CapacityError, ValidationError
from setree.generators import clique_labels
from setree.lorentz import Lorentz
from setree.tree import PartitionTree, flat_tree
from setree.tree_ops import (
    canonical_labels, clusters_natural, clusters_with_k, decode_tree, harden, prune,
)

SPACE = Lorentz(-1.0)


def test_harden_ties_go_low():
    (h,) = harden([np.array([[0.5, 0.5], [0.2, 0.8]])])
    assert h.tolist() == [[1.0, 0.0], [0.0, 1.0]]


def test_identity_stack_decodes_to_chains():
    n = 4
    t = decode_tree([np.ones((n, 1)), np.eye(n)])
    t.validate(n)
    internal = t.at_height(1)
    assert len(internal) == n
    assert all(len(node.children) == 1 for node in internal)


def test_two_clique_decode():
    labels = clique_labels([3, 3])
    t = decode_tree([np.ones((2, 1)), hard_from_labels(labels)])
    t.validate(6)
    assert sorted(sorted(m) for m in t.modules_at_height(1)) == [[0, 1, 2], [3, 4, 5]]


def test_decode_skips_unused_parents():
    c2 = np.array([[0.1, 0.9, 0.0], [0.2, 0.7, 0.1], [0.1, 0.1, 0.8]])
    t = decode_tree([np.ones((3, 1)), c2])
    t.validate(3)
    assert len(t.at_height(1)) == 2


def test_decode_round_trip_on_corpus():
    for g, t, _ in random_corpus(seed=8, count=20):
        back = decode_tree(t.level_assignment(g.node_count))
        back.validate(g.node_count)
        assert sorted(map(sorted, back.modules_at_height(1))) == sorted(map(sorted, t.modules_at_height(1)))
        assert tree_si(g, back) == pytest.approx(tree_si(g, t), abs=1e-12)


def test_decode_attaches_coordinates(rng):
    z = [SPACE.origin(2)[None, :], SPACE.project_origin(rng.normal(size=(2, 2))),
         SPACE.project_origin(rng.normal(size=(4, 2)))]
    t = decode_tree([np.ones((2, 1)), hard_from_labels([0, 0, 1, 1])], z)
    leaf = next(n for n in t.leaves() if n.module == frozenset([3]))
    assert np.array_equal(leaf.coords, z[2][3])


def test_prune_empty_leaf(rng):
    for g, t, _ in random_corpus(seed=9, count=15):
        dirty = insert_empty_leaf(t, rng)
        pruned = prune(dirty)
        pruned.validate(g.node_count)
        assert all(n.module for n in pruned)
        assert abs(tree_si(g, pruned) - tree_si(g, dirty)) < 1e-12


def test_prune_collapses_duplicate_chain(rng):
    for g, t, _ in random_corpus(seed=10, count=15):
        dirty = insert_duplicate(t, rng)
        pruned = prune(dirty)
        assert len(pruned) < len(dirty)
        assert abs(tree_si(g, pruned) - tree_si(g, dirty)) < 1e-12


def test_prune_minimal_tree_unchanged():
    t = two_level_tree([0, 0, 1, 1])
    assert prune(t).to_dict() == t.to_dict()


def test_prune_keeps_root():
    t = PartitionTree()
    r = t.add_node(range(2))
    mid = t.add_node(range(2), parent=r)
    t.add_node([0], parent=mid)
    t.add_node([1], parent=mid)
    pruned = prune(t)
    assert pruned.root == r
    assert pruned.height == 2
    assert clusters_natural(pruned).tolist() == [0, 0]


def test_clusters_natural():
    t = two_level_tree([1, 1, 0, 0, 0])
    assert clusters_natural(t).tolist() == [0, 0, 1, 1, 1]
    flat = two_level_tree([0] * 4)
    assert clusters_natural(flat).tolist() == [0, 0, 0, 0]


def test_canonical_labels():
    assert canonical_labels([5, 5, 2, 9, 2]).tolist() == [0, 0, 1, 2, 1]


def _three_cluster_tree():
    # clusters at increasing distance from the root: {0,1,2} near, {3,4,5}, {6,7,8} far
    t = PartitionTree.from_level_labels([[0, 0, 0, 1, 1, 1, 2, 2, 2]])
    t[t.root].coords = SPACE.origin(2)
    radius = {0: 0.3, 1: 0.8, 2: 1.5}
    angle = {0: 0.0, 1: 2.0, 2: 4.0}
    for node in t.at_height(1):
        g = min(node.module) // 3
        node.coords = SPACE.project_origin(radius[g] * np.array([np.cos(angle[g]), np.sin(angle[g])]))
        for c in node.children:
            (v,) = t[c].module
            offset = 0.1 * np.array([np.cos(v), np.sin(v)])
            t[c].coords = SPACE.project_origin(radius[g] * np.array([np.cos(angle[g]), np.sin(angle[g])]) + offset)
    return t


def test_clusters_with_natural_k():
    t = _three_cluster_tree()
    assert clusters_with_k(t, 3).tolist() == clusters_natural(t).tolist()


def test_clusters_with_k_one():
    assert clusters_with_k(_three_cluster_tree(), 1).tolist() == [0] * 9


def test_clusters_with_k_two_merges_far_pair():
    # the two clusters farthest from the root merge
    labels = clusters_with_k(_three_cluster_tree(), 2)
    assert labels.tolist() == [0, 0, 0, 1, 1, 1, 1, 1, 1]


def test_clusters_with_k_split_nearest_first():
    # four clusters: the nearest group is split into its leaves, then
    # the leaves merge pairwise (farthest first) until four groups remain
    labels = clusters_with_k(_three_cluster_tree(), 4)
    assert np.unique(labels).size == 4
    assert len(set(labels[3:6].tolist())) == 1
    assert len(set(labels[6:9].tolist())) == 1
    assert len(set(labels[:3].tolist())) == 2


def test_clusters_with_k_all_leaves():
    assert clusters_with_k(_three_cluster_tree(), 9).tolist() == list(range(9))


def test_clusters_with_k_bounds():
    t = _three_cluster_tree()
    with pytest.raises(ValidationError):
        clusters_with_k(t, 0)
    with pytest.raises(ValidationError):
        clusters_with_k(t, 10)


def test_split_needs_child_coordinates():
    t = PartitionTree()
    root = t.add_node(range(3), coords=SPACE.origin(2))
    mid = t.add_node(range(3), parent=root, coords=SPACE.project_origin(np.array([0.2, 0.0])))
    for v in range(3):
        t.add_node([v], parent=mid)
    with pytest.raises(ValidationError):
        clusters_with_k(t, 2)


def test_capacity_error_when_tree_too_shallow():
    t = PartitionTree()
    root = t.add_node(range(3), coords=SPACE.origin(2))
    t.add_node([0, 1, 2], parent=root, coords=SPACE.project_origin(np.array([0.2, 0.0])))
    with pytest.raises(CapacityError) as info:
        clusters_with_k(t, 2)
    assert info.value.achieved == 1


def test_flat_tree_without_coords_is_rejected():
    with pytest.raises(ValidationError):
        clusters_with_k(flat_tree(3), 2)
