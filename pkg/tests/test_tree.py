import numpy as np
import pytest

from setree.errors import ValidationError
from setree.tree import PartitionTree, flat_tree, random_hard_tree


def _two_level():
    return PartitionTree.from_level_labels([[0, 0, 0, 1, 1, 1]])


def test_from_level_labels_shape():
    t = _two_level()
    assert t.height == 2
    assert sorted(sorted(m) for m in t.modules_at_height(1)) == [[0, 1, 2], [3, 4, 5]]
    assert len(t.leaves()) == 6
    t.validate(6)


def test_nested_labels_three_levels():
    t = PartitionTree.from_level_labels([[0, 0, 0, 0, 1, 1], [0, 0, 1, 1, 2, 2]])
    assert t.height == 3
    assert len(t.at_height(1)) == 2
    assert len(t.at_height(2)) == 3
    t.validate(6)


def test_json_round_trip_keeps_coords():
    t = _two_level()
    t[t.root].coords = np.array([1.0, 0.0, 0.0])
    back = PartitionTree.from_json(t.to_json())
    assert back.to_dict() == t.to_dict()
    assert back[back.leaves()[0].id].graph_node is not None


@pytest.mark.parametrize("n,height", [(5, 2), (8, 3), (12, 4)])
def test_random_hard_tree_is_valid(rng, n, height):
    for _ in range(10):
        t = random_hard_tree(n, height, rng)
        t.validate(n)
        assert all(leaf.height == height for leaf in t.leaves())


def test_validate_rejects_bad_root():
    t = _two_level()
    with pytest.raises(ValidationError):
        t.validate(7)


def test_validate_rejects_overlapping_children():
    t = PartitionTree()
    r = t.add_node(range(3))
    t.add_node([0, 1], parent=r)
    t.add_node([1, 2], parent=r)
    with pytest.raises(ValidationError):
        t.validate(3)


def test_validate_empty_leaf_only_when_relaxed():
    t = flat_tree(3)
    t.add_node([], parent=t.root)
    with pytest.raises(ValidationError):
        t.validate(3)
    t.validate(3, relaxed=True)


def test_level_assignment_is_one_hot():
    t = PartitionTree.from_level_labels([[0, 1, 0, 1]])
    c1, c2 = t.level_assignment(4)
    assert c1.shape == (2, 1)
    assert c2.shape == (4, 2)
    assert np.all(c2.sum(axis=1) == 1)
    assert c2[0].tolist() == c2[2].tolist()


def test_duplicate_root_rejected():
    t = PartitionTree()
    t.add_node([0])
    with pytest.raises(ValidationError):
        t.add_node([0])
