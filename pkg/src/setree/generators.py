"""Small synthetic graphs and the bundled Karate club network."""
from __future__ import annotations

from importlib import resources

import numpy as np

from setree.graph import Graph, load_graph


def _clique_edges(nodes):
    nodes = list(nodes)
    return [(u, v) for i, u in enumerate(nodes) for v in nodes[i + 1:]]


def clique(n: int) -> Graph:
    return Graph.from_edges(n, _clique_edges(range(n)))


def cliques(sizes, bridges=()) -> Graph:
    """Disjoint cliques of the given sizes plus optional ``(u, v[, w])`` bridge edges."""
    edges, start = [], 0
    for s in sizes:
        edges += _clique_edges(range(start, start + s))
        start += s
    return Graph.from_edges(start, list(edges) + list(bridges))


def clique_labels(sizes) -> np.ndarray:
    return np.repeat(np.arange(len(sizes)), sizes)


def two_cliques_bridged(size: int, bridge_weight: float = 1.0) -> Graph:
    """Two ``K_size`` cliques joined by a single edge between node 0 and node ``size``."""
    return cliques([size, size], [(0, size, bridge_weight)])


def triangles_bridged() -> Graph:
    """Two triangles {0,1,2} and {3,4,5} joined by the unit edge 0-3."""
    return cliques([3, 3], [(0, 3)])


def path(n: int) -> Graph:
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def star(leaves: int) -> Graph:
    return Graph.from_edges(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def random_graph(n: int, p: float, rng, weighted: bool = True, connected: bool = False) -> Graph:
    """Erdos-Renyi graph with uniform(0.1, 2) weights; at least one edge is guaranteed."""
    while True:
        upper = np.triu(rng.random((n, n)) < p, k=1)
        if connected:
            # a random spanning path keeps every node reachable
            order = rng.permutation(n)
            for a, b in zip(order[:-1], order[1:]):
                upper[min(a, b), max(a, b)] = True
        if upper.any():
            break
    w = rng.uniform(0.1, 2.0, size=(n, n)) if weighted else np.ones((n, n))
    a = np.where(upper, w, 0.0)
    return Graph(a + a.T)


def imbalanced_fixture() -> tuple[Graph, np.ndarray]:
    """Two K20 majorities joined by 3 bridges and a K4 minority hanging off the first by 2 edges.

    Nodes 0..19 and 20..39 are the majorities, 40..43 the minority.
    """
    bridges = [(0, 20), (1, 21), (2, 22), (40, 3), (41, 4)]
    g = cliques([20, 20, 4], bridges)
    return g, clique_labels([20, 20, 4])


def karate() -> Graph:
    """Zachary's karate club with four community labels."""
    data = resources.files("setree") / "data"
    with resources.as_file(data / "karate.tsv") as edges, resources.as_file(
        data / "karate_labels.txt"
    ) as labels:
        return load_graph(edges, label_path=labels)


def karate_paths():
    """Filesystem paths of the bundled Karate edge list and labels."""
    data = resources.files("setree") / "data"
    return str(data / "karate.tsv"), str(data / "karate_labels.txt")
