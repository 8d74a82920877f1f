"""Invariant suite: each check compares two independent computations on generated instances.

``run_suite`` backs the ``check`` command.  Every check is deterministic given
its seed and returns a :class:`CheckResult` instead of raising.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from setree import _kernels
from setree import autodiff as ad
from setree.coding_tree import (
    brute_force_optimal_tree, greedy_coding_tree, module_stats, tree_conductance, tree_si,
    two_level_tree,
)
from setree.dsi import additivity_decomposition, level_dsi_edgewise, level_dsi_nodewise, total_dsi
from setree.generators import cliques, imbalanced_fixture, random_graph, two_cliques_bridged
from setree.graph import Graph, one_dim_entropy
from setree.lorentz import Lorentz, boost_matrix, metric_tensor, minkowski_inner, random_points
from setree.metrics import acc, ari, nmi
from setree.tree import PartitionTree, random_hard_tree
from setree.tree_ops import clusters_natural, decode_tree, prune


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<22} measured={self.measured:.3g} tol={self.tolerance:g}  {self.detail}"


# --- instance generators -----------------------------------------------------------

def random_corpus(seed: int = 0, count: int = 50, max_nodes: int = 12, p: float = 0.4):
    """``(graph, hard tree, height)`` triples with ``N <= max_nodes`` and ``H`` in {2, 3}."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n = int(rng.integers(3, max_nodes + 1))
        g = random_graph(n, p, rng)
        h = int(rng.integers(2, 4))
        out.append((g, random_hard_tree(n, h, rng), h))
    return out


def insert_empty_leaf(t: PartitionTree, rng) -> PartitionTree:
    t = t.copy()
    internal = [x.id for x in t if x.children]
    t.add_node([], parent=int(rng.choice(internal)))
    return t


def insert_duplicate(t: PartitionTree, rng) -> PartitionTree:
    """Splice a node carrying the same module between a random non-root node and its parent."""
    t = t.copy()
    target = t[int(rng.choice([x.id for x in t.non_root()]))]
    parent = t[target.parent]
    dup = t.add_node(target.module, parent=parent.id)
    parent.children.remove(dup)
    parent.children[parent.children.index(target.id)] = dup
    t[dup].children = [target.id]
    target.parent = dup
    t.recompute_heights()
    return t


def loop_augmented(a: np.ndarray, labels: np.ndarray, rng) -> np.ndarray:
    """Fold a random share of each node's intra-cluster weight into a self-loop.

    Cuts are unchanged and volumes grow, so every subset's conductance can only fall.
    """
    same = labels[:, None] == labels[None, :]
    intra = (a * same).sum(axis=1)
    out = a * rng.uniform(0.5, 1.5)
    out = out + np.diag(intra * rng.uniform(0.2, 2.0, size=a.shape[0]) * rng.uniform(0.5, 1.5))
    return out


# --- checks ------------------------------------------------------------------------

def check_equivalence(seed: int = 0, tol: float = 1e-9) -> CheckResult:
    worst = 0.0
    for g, t, _ in random_corpus(seed):
        c = t.level_assignment(g.node_count)
        worst = max(worst, abs(total_dsi(g, c).item() - tree_si(g, t)))
    return CheckResult("dsi-equivalence", worst <= tol, worst, tol, "50 graphs, H in {2,3}")


def check_nodewise(seed: int = 0, tol: float = 1e-9) -> CheckResult:
    worst = 0.0
    for g, t, h in random_corpus(seed):
        c = t.level_assignment(g.node_count)
        for lvl in range(1, h + 1):
            diff = level_dsi_edgewise(g, c, lvl).item() - level_dsi_nodewise(g, c, lvl).item()
            worst = max(worst, abs(diff))
    return CheckResult("nodewise-form", worst <= tol, worst, tol, "every level")


def check_additivity(seed: int = 0, tol: float = 1e-9) -> CheckResult:
    worst = 0.0
    for g, t, _ in random_corpus(seed):
        c = t.level_assignment(g.node_count)
        worst = max(worst, abs(additivity_decomposition(g, c) - one_dim_entropy(g)))
    return CheckResult("additivity", worst <= tol, worst, tol, "entropy decomposition")


def volume_conductance(g: Graph, t: PartitionTree) -> float:
    """Smallest ``cut / vol`` over non-root modules of positive volume."""
    vals = []
    for node in t.non_root():
        vol, cut = module_stats(g, node.module)
        if vol > 0:
            vals.append(cut / vol)
    return min(vals)


def check_conductance_bound(seed: int = 0, tol: float = 1e-9, literal: bool = False) -> CheckResult:
    """Normalised structural information against the smallest module conductance.

    The default compares with ``cut / vol``; ``literal=True`` uses the usual
    ``cut / min(vol, V - vol)``, which can exceed it for modules holding more
    than half the volume.
    """
    worst = np.inf
    violations = 0
    for g, t, _ in random_corpus(seed):
        tau = tree_si(g, t) / one_dim_entropy(g)
        phi = tree_conductance(g, t) if literal else volume_conductance(g, t)
        margin = tau - phi
        worst = min(worst, margin)
        violations += margin < -tol
    name = "conductance-literal" if literal else "conductance-bound"
    return CheckResult(name, violations == 0, float(worst), tol, f"{violations} violations")


def check_flexibility(seed: int = 0, tol: float = 1e-10) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(3, 11))
        g = random_graph(n, 0.4, rng)
        t = random_hard_tree(n, int(rng.integers(2, 4)), rng)
        base = tree_si(g, t)
        for variant in (insert_empty_leaf(t, rng), insert_duplicate(t, rng)):
            worst = max(worst, abs(tree_si(g, variant) - base))
    return CheckResult("flexibility", worst < tol, worst, tol, "empty leaf and duplicate module")


def check_greedy_fixtures(tol: float = 1e-9) -> CheckResult:
    fixtures = [
        (cliques([4, 4]), [set(range(4)), set(range(4, 8))]),
        (two_cliques_bridged(5), [set(range(5)), set(range(5, 10))]),
    ]
    worst, ok = 0.0, True
    for g, expected in fixtures:
        t = greedy_coding_tree(g, k=2)
        got = sorted(map(set, t.modules_at_height(1)), key=min)
        ok &= got == expected
        _, best = brute_force_optimal_tree(g)
        worst = max(worst, abs(tree_si(g, t) - best))
    return CheckResult("greedy-fixtures", ok and worst <= tol, worst, tol, "modules match the cliques")


def check_monotone_height(seed: int = 0, tol: float = 1e-12) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for _ in range(20):
        g = random_graph(int(rng.integers(4, 16)), 0.4, rng)
        worst = max(worst, tree_si(g, greedy_coding_tree(g, 3)) - tree_si(g, greedy_coding_tree(g, 2)))
    return CheckResult("monotone-height", worst <= tol, worst, tol, "SI(k=3) - SI(k=2)")


def check_boosts(seed: int = 0, tol: float = 1e-9, mid_tol: float = 1e-8) -> CheckResult:
    rng = np.random.default_rng(seed)
    space = Lorentz(-1.0)
    metric_err = inner_err = mid_err = 0.0
    for i in range(1000):
        d = int(rng.integers(1, 5))
        direction = rng.normal(size=d)
        beta = direction / np.linalg.norm(direction) * rng.uniform(0.0, 0.95)
        L = boost_matrix(beta)
        eta = metric_tensor(d)
        metric_err = max(metric_err, np.abs(L.T @ eta @ L - eta).max())
        x, y = random_points(space, 2, d, rng)
        diff = minkowski_inner(L @ x, L @ y) - minkowski_inner(x, y)
        inner_err = max(inner_err, abs(float(diff)) / max(1.0, abs(float(minkowski_inner(x, y)))))
        if i < 100:
            pts = random_points(space, int(rng.integers(2, 9)), d, rng)
            w = rng.uniform(0.1, 1.0, size=pts.shape[0])
            a = space.weighted_midpoint(pts, w) @ L.T
            b = space.weighted_midpoint(pts @ L.T, w)
            mid_err = max(mid_err, np.abs(a - b).max())
    ok = metric_err <= tol and inner_err <= tol and mid_err <= mid_tol
    worst = max(metric_err, inner_err, mid_err)
    return CheckResult(
        "lorentz-boosts", ok, worst, tol,
        f"metric {metric_err:.1e} inner {inner_err:.1e} midpoint {mid_err:.1e}",
    )


def check_centroid(seed: int = 0, trials: int = 100, perturbations: int = 1000, radius: float = 1e-2) -> CheckResult:
    rng = np.random.default_rng(seed)
    space = Lorentz(-1.0)
    wins = 0
    for _ in range(trials):
        d = int(rng.integers(2, 4))
        pts = random_points(space, int(rng.integers(2, 9)), d, rng)
        w = rng.uniform(0.1, 1.0, size=pts.shape[0])
        mu = space.weighted_midpoint(pts, w)
        best = space.frechet_objective(mu, pts, w)
        u = rng.normal(size=(perturbations, d + 1))
        u = space.to_tangent(mu, u)
        norms = np.sqrt(np.maximum(minkowski_inner(u, u), 0.0))
        u = u / norms[:, None] * radius
        moved = space.exp_map(np.broadcast_to(mu, u.shape), u)
        others = space.squared_distance(moved[:, None, :], pts[None, :, :]) @ w
        wins += best <= others.min()
    return CheckResult("centroid", wins == trials, float(wins), float(trials), f"{wins}/{trials} trials")


def check_gradient(seed: int = 0, tol: float = 1e-3, eps: float = 1e-5) -> CheckResult:
    """Tape gradient of the training objective against central differences, per parameter."""
    from setree.train import TrainConfig, Trainer

    rng = np.random.default_rng(seed)
    g = random_graph(6, 0.6, rng, connected=True)
    trainer = Trainer(g, TrainConfig(knn=2, seed=seed))
    params = trainer.optimizer.params
    trainer.optimizer.zero_grad()
    with ad.Tape() as tape:
        loss = trainer.build()[0]
    tape.backward(loss)
    worst, name = 0.0, ""
    for p in params:
        analytic = np.zeros_like(p.data) if p.grad is None else p.grad.copy()
        keep = p.data.copy()

        def fn(v, p=p):
            p.data = v
            return trainer.build()[0].item()

        numeric = ad.numerical_gradient(fn, keep, eps)
        p.data = keep
        err = ad.gradient_relative_error(analytic, numeric)
        if err > worst:
            worst, name = err, p.name
    return CheckResult("gradient", worst <= tol, worst, tol, f"worst tensor {name}")


def check_identifiability() -> CheckResult:
    g, labels = imbalanced_fixture()
    three = tree_si(g, two_level_tree(labels))
    merged = [tree_si(g, two_level_tree(np.where(labels == 2, target, labels))) for target in (0, 1)]
    gap = min(merged) - three
    return CheckResult("identifiability", gap > 0, gap, 0.0, f"SI 3 modules {three:.6f}")


def check_fused_conductance(seed: int = 0, gammas=(0.25, 0.5, 1.0), tol: float = 1e-12) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = -np.inf
    checked = 0
    while checked < 20:
        n = int(rng.integers(4, 11))
        a = random_graph(n, 0.5, rng, connected=True).dense()
        labels = rng.integers(0, max(2, n // 3), size=n)
        virt = loop_augmented(a, labels, rng)
        base = _kernels.subset_conductances(a)
        valid = ~np.isnan(base)
        if np.any(_kernels.subset_conductances(virt)[valid] > base[valid] + tol):
            continue  # premise fails; not expected for this construction
        for gamma in gammas:
            fused = _kernels.subset_conductances((1 - gamma) * a + gamma * virt)
            worst = max(worst, float(np.max(fused[valid] - base[valid])))
        checked += 1
    return CheckResult("fused-conductance", worst <= tol, worst, tol, "exhaustive subsets, 20 graphs")


def check_decode_roundtrip(seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(30):
        n = int(rng.integers(3, 13))
        t = random_hard_tree(n, int(rng.integers(2, 5)), rng)
        d = decode_tree(t.level_assignment(n))
        key = lambda tree: sorted((x.height, tuple(sorted(x.module))) for x in tree)  # noqa: E731
        bad += key(d) != key(t)
    return CheckResult("decode-roundtrip", bad == 0, float(bad), 0.0, "30 random hard trees")


def check_prune(seed: int = 0, tol: float = 1e-12) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst, relabel = 0.0, 0
    for _ in range(20):
        n = int(rng.integers(3, 11))
        g = random_graph(n, 0.4, rng)
        t = random_hard_tree(n, int(rng.integers(2, 4)), rng)
        messy = insert_duplicate(insert_empty_leaf(t, rng), rng)
        pruned = prune(messy)
        pruned.validate(n)
        worst = max(worst, abs(tree_si(g, pruned) - tree_si(g, messy)))
        relabel += not np.array_equal(clusters_natural(pruned), clusters_natural(messy))
    return CheckResult("prune", worst <= tol and relabel == 0, worst, tol, f"{relabel} label changes")


def check_metric_invariance(seed: int = 0, tol: float = 1e-12) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(5, 40))
        pred = rng.integers(0, 4, size=n)
        truth = rng.integers(0, 3, size=n)
        perm_p = rng.permutation(4)[pred]
        perm_t = rng.permutation(3)[truth]
        for f in (nmi, ari, acc):
            worst = max(worst, abs(f(pred, truth) - f(perm_p, perm_t)))
    return CheckResult("metric-invariance", worst <= tol, worst, tol, "label renaming")


SUITE: dict[str, Callable[[], CheckResult]] = {
    "dsi-equivalence": check_equivalence,
    "nodewise-form": check_nodewise,
    "additivity": check_additivity,
    "conductance-bound": check_conductance_bound,
    "flexibility": check_flexibility,
    "greedy-fixtures": check_greedy_fixtures,
    "monotone-height": check_monotone_height,
    "lorentz-boosts": check_boosts,
    "centroid": check_centroid,
    "gradient": check_gradient,
    "identifiability": check_identifiability,
    "fused-conductance": check_fused_conductance,
    "decode-roundtrip": check_decode_roundtrip,
    "prune": check_prune,
    "metric-invariance": check_metric_invariance,
}


def run_suite(names: Optional[list] = None, echo: Optional[Callable[[str], None]] = None) -> list[CheckResult]:
    results = []
    for name in names or list(SUITE):
        start = time.perf_counter()
        try:
            res = SUITE[name]()
        except Exception as exc:  # a crashing check is a failing check
            res = CheckResult(name, False, float("nan"), float("nan"), f"{type(exc).__name__}: {exc}")
        res.seconds = time.perf_counter() - start
        results.append(res)
        if echo is not None:
            echo(res.line())
    return results
