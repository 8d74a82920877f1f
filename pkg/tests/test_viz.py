import json

import numpy as np

from setree.lorentz import Lorentz, random_points
from setree.tree_ops import decode_tree
from setree.dsi import hard_from_labels
from setree.viz import poincare_records, render_svg, write_json

SPACE = Lorentz(-1.0)


def _tree(rng):
    z = [SPACE.origin(2)[None, :], random_points(SPACE, 2, 2, rng), random_points(SPACE, 5, 2, rng)]
    return decode_tree([np.ones((2, 1)), hard_from_labels([0, 0, 1, 1, 1])], z)


def test_records_inside_disc(rng):
    t = _tree(rng)
    records = poincare_records(t)
    assert len(records) == len(t)
    assert records[0]["xy"] == [0.0, 0.0]
    assert all(np.hypot(*r["xy"]) < 1 for r in records)
    assert [r["id"] for r in records] == t.bfs()


def test_records_skip_missing_coords(rng):
    t = _tree(rng)
    t[t.leaves()[0].id].coords = None
    assert len(poincare_records(t)) == len(t) - 1


def test_json_and_svg(tmp_path, rng):
    t = _tree(rng)
    records = poincare_records(t)
    write_json(records, tmp_path / "disc.json")
    assert json.loads((tmp_path / "disc.json").read_text()) == records
    svg = render_svg(t, records)
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
    assert svg.count("<line") == len(t) - 1
