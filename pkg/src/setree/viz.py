"""Poincaré-disc export of tree node coordinates, as JSON records or a static SVG."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from setree.lorentz import Lorentz
from setree.tree import PartitionTree

PALETTE = ("#1b6ca8", "#d1495b", "#edae49", "#00798c", "#66a182", "#8d96a3", "#2e4057")


def poincare_records(t: PartitionTree, curvature: float = -1.0) -> list[dict]:
    """``[{"id", "height", "xy"}]`` for every node with coordinates, in BFS order.

    Trees embedded in more than two dimensions keep the first two disc axes.
    """
    space = Lorentz(curvature)
    out = []
    for nid in t.bfs():
        node = t[nid]
        if node.coords is None:
            continue
        xy = space.to_poincare(node.coords)[:2]
        if xy.size < 2:
            xy = np.pad(xy, (0, 2 - xy.size))
        out.append({"id": int(nid), "height": int(node.height), "xy": [float(v) for v in xy]})
    return out


def write_json(records: list[dict], path) -> None:
    Path(path).write_text(json.dumps(records, indent=1) + "\n", encoding="utf-8")


def render_svg(t: PartitionTree, records: list[dict], size: int = 600) -> str:
    """Unit disc with tree edges and nodes coloured by height."""
    half = size / 2
    radius = half - 10

    def px(xy):
        return half + radius * xy[0], half - radius * xy[1]

    pos = {r["id"]: px(r["xy"]) for r in records}
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<circle cx="{half}" cy="{half}" r="{radius}" fill="none" stroke="#444" stroke-width="1"/>',
    ]
    for node in t:
        if node.parent is None or node.id not in pos or node.parent not in pos:
            continue
        (x1, y1), (x2, y2) = pos[node.parent], pos[node.id]
        parts.append(
            f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" stroke="#bbb" stroke-width="0.8"/>'
        )
    for r in records:
        x, y = pos[r["id"]]
        colour = PALETTE[r["height"] % len(PALETTE)]
        rad = max(2.0, 6.0 - r["height"])
        parts.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{rad}" fill="{colour}"><title>{r["id"]}</title></circle>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
