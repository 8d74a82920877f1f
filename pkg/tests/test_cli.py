import json

import numpy as np
import pytest

from setree.cli import main
from setree.generators import karate_paths
from setree.graph import read_labels

FAST = ["--epochs", "5", "--seed", "0"]


@pytest.fixture(scope="module")
def fitted(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert main(["fit", "--graph", "karate", "--knn", "8", "--gamma", "0.01", *FAST, "--out", str(out)]) == 0
    return out


def test_fit_outputs(fitted):
    for name in ("tree.json", "labels.txt", "loss.csv", "assignments.json", "metrics.json"):
        assert (fitted / name).exists()
    lines = (fitted / "loss.csv").read_text().splitlines()
    assert lines[0] == "epoch,loss" and len(lines) == 6
    assert read_labels(fitted / "labels.txt").size == 34
    metrics = json.loads((fitted / "metrics.json").read_text())
    assert {"nmi", "ari", "acc"} <= set(metrics)


def test_fit_is_byte_deterministic(fitted, tmp_path):
    assert main(["fit", "--graph", "karate", "--knn", "8", "--gamma", "0.01", *FAST, "--out", str(tmp_path)]) == 0
    for name in ("tree.json", "loss.csv"):
        assert (tmp_path / name).read_bytes() == (fitted / name).read_bytes()


def test_eval_prints_json(fitted, capsys):
    _, truth = karate_paths()
    assert main(["eval", "--pred", str(fitted / "labels.txt"), "--truth", truth]) == 0
    report = json.loads(capsys.readouterr().out)
    assert {"nmi", "ari", "acc", "clusters"} <= set(report)


def test_decode_matches_fit(fitted, tmp_path):
    assert main(["decode", "--assignments", str(fitted / "assignments.json"), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "tree.json").read_text() == (fitted / "tree.json").read_text()


def test_cluster_with_k(fitted, tmp_path):
    out = tmp_path / "k3.txt"
    assert main(["cluster", "--tree", str(fitted / "tree.json"), "--k", "3", "--out", str(out)]) == 0
    assert np.unique(read_labels(out)).size == 3


def test_viz(fitted, tmp_path):
    out, svg = tmp_path / "disc.json", tmp_path / "disc.svg"
    assert main(["viz", "--tree", str(fitted / "tree.json"), "--out", str(out), "--svg", str(svg)]) == 0
    records = json.loads(out.read_text())
    assert all(np.hypot(*r["xy"]) < 1 for r in records)
    assert svg.read_text().startswith("<svg")


def test_coding_tree(tmp_path, capsys):
    assert main(["coding-tree", "--graph", "karate", "--height", "2", "--out", str(tmp_path)]) == 0
    assert "3.832628" in capsys.readouterr().out


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"graph": "karate", "epochs": 2, "seed": 1, "knn": 4}))
    out = tmp_path / "run"
    assert main(["fit", "--config", str(cfg), "--epochs", "3", "--out", str(out)]) == 0
    assert len((out / "loss.csv").read_text().splitlines()) == 4


def test_unknown_config_key_is_usage_error(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"graph": "karate", "colour": "blue"}))
    assert main(["fit", "--config", str(cfg)]) == 2


def test_exit_codes(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["fit", "--epochs", "not-a-number"])
    assert info.value.code == 2
    assert main(["fit", "--epochs", "1"]) == 2
    assert main(["fit", "--graph", str(tmp_path / "missing.tsv"), "--epochs", "1"]) == 1
    assert main(["fit", "--graph", "karate", "--gamma", "2", "--epochs", "1", "--out", str(tmp_path)]) == 1
    assert main(["check", "--only", "nope"]) == 2


def test_check_subset(capsys):
    assert main(["check", "--only", "additivity", "prune"]) == 0
    out = capsys.readouterr().out
    assert "2/2 checks passed" in out
