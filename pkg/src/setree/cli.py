"""Command-line entry point: ``setree <command> [--flags]``.

Exit codes: 0 on success, 1 on runtime failure, 2 on usage errors.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from setree.errors import SetreeError
from setree.generators import karate_paths
from setree.graph import Graph, load_graph, read_labels, write_labels

TRAIN_KEYS = ("height", "gamma", "knn", "temp", "lr", "epochs", "seed", "widths", "curvature",
              "tree_dim", "hidden", "ablation")
FILE_KEYS = ("graph", "attrs", "labels", "k", "out")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _load(path, attrs=None, labels=None) -> Graph:
    if path == "karate" and not Path(path).exists():
        path, default_labels = karate_paths()
        labels = labels or default_labels
    return load_graph(path, attr_path=attrs, label_path=labels)


def _merged(args, keys) -> dict:
    """Flags over config-file values; absent entries are omitted."""
    config = {}
    if getattr(args, "config", None):
        config = json.loads(Path(args.config).read_text(encoding="utf-8"))
        if not isinstance(config, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = sorted(set(config) - set(TRAIN_KEYS) - set(FILE_KEYS))
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    out = {}
    for key in keys:
        flag = getattr(args, key, None)
        if flag is not None:
            out[key] = flag
        elif key in config:
            out[key] = config[key]
    return out


def _out_dir(path) -> Path:
    out = Path(path or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")


def _labels_for(tree, k):
    from setree.tree_ops import clusters_natural, clusters_with_k

    return clusters_natural(tree) if k is None else clusters_with_k(tree, int(k))


# --- commands ---------------------------------------------------------------------

def cmd_fit(args) -> int:
    from setree.train import TrainConfig, train
    from setree.tree_ops import decode_tree, prune

    opts = _merged(args, TRAIN_KEYS + FILE_KEYS)
    if "graph" not in opts:
        raise UsageError("fit needs --graph (or a 'graph' entry in --config)")
    g = _load(opts["graph"], opts.get("attrs"), opts.get("labels"))
    cfg = TrainConfig(**{k: opts[k] for k in TRAIN_KEYS if k in opts})
    out = _out_dir(opts.get("out"))

    losses = []
    result = train(g, cfg, callback=lambda epoch, loss: losses.append((epoch, loss)))
    tree = prune(decode_tree(result.outputs))
    labels = _labels_for(tree, opts.get("k"))

    _write_json(out / "tree.json", tree.to_dict())
    write_labels(out / "labels.txt", labels)
    with open(out / "loss.csv", "w", encoding="utf-8") as fh:
        fh.write("epoch,loss\n")
        for epoch, loss in losses:
            fh.write(f"{epoch},{loss!r}\n")
    _write_json(out / "assignments.json", {
        "height": cfg.height,
        "levels": [c.data.tolist() for c in result.outputs.assignments()],
        "z": [z.data.tolist() for z in result.outputs.z],
    })
    if g.labels is not None:
        from setree.metrics import evaluate

        _write_json(out / "metrics.json", evaluate(labels, g.labels, g, result.elapsed).to_dict())
    print(f"trained {cfg.epochs} epochs in {result.elapsed:.2f}s; "
          f"loss {losses[0][1]:.6f} -> {losses[-1][1]:.6f}; {np.unique(labels).size} clusters"
          if losses else f"{np.unique(labels).size} clusters")
    return 0


def cmd_coding_tree(args) -> int:
    from setree.coding_tree import greedy_coding_tree, tree_si
    from setree.tree_ops import clusters_natural

    opts = _merged(args, ("graph", "height", "out"))
    if "graph" not in opts:
        raise UsageError("coding-tree needs --graph")
    g = _load(opts["graph"])
    tree = greedy_coding_tree(g, k=int(opts.get("height", 2)))
    out = _out_dir(opts.get("out"))
    _write_json(out / "tree.json", tree.to_dict())
    write_labels(out / "labels.txt", clusters_natural(tree))
    print(f"structural information {tree_si(g, tree):.6f}")
    return 0


def cmd_decode(args) -> int:
    from setree.tree_ops import decode_tree, prune

    data = json.loads(Path(args.assignments).read_text(encoding="utf-8"))
    z = [np.asarray(level) for level in data["z"]] if data.get("z") else None
    tree = decode_tree([np.asarray(c) for c in data["levels"]], z)
    if not args.no_prune:
        tree = prune(tree)
    out = _out_dir(args.out)
    _write_json(out / "tree.json", tree.to_dict())
    return 0


def _read_tree(path):
    from setree.tree import PartitionTree

    return PartitionTree.from_json(Path(path).read_text(encoding="utf-8"))


def cmd_cluster(args) -> int:
    labels = _labels_for(_read_tree(args.tree), args.k)
    if args.out:
        write_labels(args.out, labels)
    else:
        for i, lab in enumerate(labels.tolist()):
            print(i, lab)
    return 0


def cmd_eval(args) -> int:
    from setree.metrics import evaluate

    pred = read_labels(args.pred)
    truth = read_labels(args.truth)
    g = _load(args.graph) if args.graph else None
    report = evaluate(pred, truth, g).to_dict()
    text = json.dumps(report, indent=1)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


def cmd_check(args) -> int:
    from setree.checks import SUITE, run_suite

    names = args.only or None
    if names:
        unknown = sorted(set(names) - set(SUITE))
        if unknown:
            raise UsageError(f"unknown checks: {', '.join(unknown)}")
    start = time.perf_counter()
    results = run_suite(names, echo=print)
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed in {time.perf_counter() - start:.1f}s")
    return 1 if failed else 0


def cmd_viz(args) -> int:
    from setree.viz import poincare_records, render_svg, write_json

    tree = _read_tree(args.tree)
    records = poincare_records(tree, args.curvature)
    write_json(records, args.out)
    if args.svg:
        Path(args.svg).write_text(render_svg(tree, records), encoding="utf-8")
    return 0


# --- parser -----------------------------------------------------------------------

def _train_flags(p):
    p.add_argument("--graph", help="edge list path, or 'karate' for the bundled graph")
    p.add_argument("--attrs", help="node attribute CSV")
    p.add_argument("--labels", help="ground-truth 'node label' file")
    p.add_argument("--height", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--knn", type=int)
    p.add_argument("--temp", type=float)
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--ablation", choices=("none", "no-fusion", "identity-boost", "tcl"))
    p.add_argument("--k", type=int, help="target cluster count (default: natural clusters)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--config", help="JSON file whose keys mirror the flags")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="setree", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="train a hyperbolic partitioning tree")
    _train_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("coding-tree", help="greedy discrete coding tree")
    p.add_argument("--graph")
    p.add_argument("--height", type=int)
    p.add_argument("--out")
    p.add_argument("--config")
    p.set_defaults(func=cmd_coding_tree)

    p = sub.add_parser("decode", help="partitioning tree from saved assignments")
    p.add_argument("--assignments", required=True)
    p.add_argument("--out")
    p.add_argument("--no-prune", action="store_true")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("cluster", help="labels from a tree")
    p.add_argument("--tree", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("eval", help="NMI, ARI and ACC of predicted labels")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--graph", help="adds the predicted partition's conductance")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("check", help="run the invariant suite")
    p.add_argument("--only", nargs="+", metavar="NAME")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("viz", help="Poincare-disc coordinates of tree nodes")
    p.add_argument("--tree", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--svg")
    p.add_argument("--curvature", type=float, default=-1.0)
    p.set_defaults(func=cmd_viz)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"setree {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (SetreeError, OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        print(f"setree {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
