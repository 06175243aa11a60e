from __future__ import annotations

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from edgeprob.cli import main
from edgeprob.io import read_edges, write_matrix


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.setenv("EDGEPROB_OUT", str(tmp_path / "out"))
    cands = tmp_path / "cands"
    cands.mkdir()
    (cands / "b1.json").write_text(json.dumps({"variant": "block", "sizes": [128]}))
    (cands / "b4.json").write_text(json.dumps({"variant": "block", "sizes": [32] * 4}))
    edges = tmp_path / "e.txt"
    assert main(["generate", "--model", "s0_4x32", "--m", "2800", "--seed", "1", "--out", str(edges)]) == 0
    return tmp_path


def test_generate_format_and_determinism(workdir):
    text = (workdir / "e.txt").read_text()
    lines = text.splitlines()
    assert lines[0] == "#n 128" and len(lines) == 2801
    other = workdir / "e2.txt"
    assert main(["generate", "--model", "s0_4x32", "--m", "2800", "--seed", "1", "--out", str(other)]) == 0
    assert other.read_bytes() == (workdir / "e.txt").read_bytes()


def test_generate_from_model_json(workdir):
    spec = workdir / "m.json"
    spec.write_text(json.dumps({"variant": "uniform", "n": 3}))
    out = workdir / "u.txt"
    assert main(["generate", "--model", str(spec), "--m", "10", "--out", str(out)]) == 0
    assert read_edges(out).n == 3


def test_generate_bad_spec(workdir):
    assert main(["generate", "--model", "not_a_model", "--m", "5"]) == 2


def test_encode_one_block(workdir):
    out = workdir / "enc"
    assert main(["encode", "--edges", str(workdir / "e.txt"), "--constraint", str(workdir / "cands/b1.json"), "--out", str(out)]) == 0
    report = json.load(open(out / "report.json"))
    assert report["mean_code_length"] == 14.0
    with open(out / "trace.csv") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 2800
    assert list(rows[0]) == ["k", "source", "dest", "step_prob", "code_bits"]


def test_encode_four_blocks(workdir):
    out = workdir / "enc4"
    assert main(["encode", "--edges", str(workdir / "e.txt"), "--constraint", str(workdir / "cands/b4.json"), "--out", str(out)]) == 0
    report = json.load(open(out / "report.json"))
    assert report["mean_pred_prob"] == pytest.approx(4 / 128**2, rel=0.10)


def test_encode_counts_uses_seed(workdir):
    k = np.zeros((4, 4))
    k[0, 1], k[2, 3], k[1, 1] = 3, 2, 1
    write_matrix(workdir / "k.csv", k)
    (workdir / "free.json").write_text(json.dumps({"variant": "free", "n": 4}))
    args = ["encode", "--counts", str(workdir / "k.csv"), "--constraint", str(workdir / "free.json"), "--seed", "9"]
    assert main(args + ["--out", str(workdir / "c1")]) == 0
    assert main(args + ["--out", str(workdir / "c2")]) == 0
    assert json.load(open(workdir / "c1/report.json"))["seed_ordering"] == 9
    assert (workdir / "c1/trace.csv").read_bytes() == (workdir / "c2/trace.csv").read_bytes()


def test_select(workdir):
    out = workdir / "sel.json"
    assert main(["select", "--edges", str(workdir / "e.txt"), "--candidates", str(workdir / "cands"), "--out", str(out)]) == 0
    assert json.load(open(out))["best"] == "b4"


def test_select_empty_dir(workdir):
    (workdir / "none").mkdir()
    assert main(["select", "--edges", str(workdir / "e.txt"), "--candidates", str(workdir / "none")]) == 2


def test_entropy(workdir):
    out = workdir / "ent.json"
    assert main(["entropy", "--edges", str(workdir / "e.txt"), "--sizes", "32,32,32,32", "--out", str(out)]) == 0
    doc = json.load(open(out))
    assert doc["variant"] == "exact" and doc["entropy_nats"] > 0


def test_infer(workdir):
    out = workdir / "inf"
    assert main(["infer", "--edges", str(workdir / "e.txt"), "--constraint", str(workdir / "cands/b4.json"), "--out", str(out)]) == 0
    q = np.loadtxt(out / "q_star.csv", delimiter=",")
    assert q.shape == (128, 128) and abs(q.sum() - 1) < 1e-9
    assert "objective_bits" in json.load(open(out / "q_star.json"))


def test_numeric_failure_exit_code(workdir):
    args = ["encode", "--edges", str(workdir / "e.txt"), "--constraint", str(workdir / "cands/b4.json"), "--max-iters", "1"]
    assert main(args) == 3


def test_usage_errors(workdir):
    assert main([]) == 2
    assert main(["experiment", "nope"]) == 2
    assert main(["encode", "--edges", str(workdir / "missing.txt"), "--constraint", str(workdir / "cands/b1.json")]) == 2
    bad = workdir / "bad.json"
    bad.write_text("{")
    assert main(["encode", "--edges", str(workdir / "e.txt"), "--constraint", str(bad)]) == 2


def test_experiment_default_out_root(workdir):
    assert main(["experiment", "fig1", "--m", "100"]) == 0
    assert (workdir / "out/fig1/fig1.csv").exists()
    assert (workdir / "out/fig1/manifest.json").exists()


def test_module_entry_point(workdir):
    proc = subprocess.run([sys.executable, "-m", "edgeprob", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip()
