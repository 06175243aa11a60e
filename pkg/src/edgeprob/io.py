"""File formats: edge lists, matrix CSVs, JSON documents and result tables."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import CountMatrix, EdgeSequence, ProbabilityMatrix


def write_edges(path, e: EdgeSequence) -> None:
    """One ``u v`` pair per line after a ``#n <n>`` header."""
    with open(path, "w", newline="\n") as f:
        f.write(f"#n {e.n}\n")
        for u, v in e.edges.tolist():
            f.write(f"{u} {v}\n")


def read_edges(path) -> EdgeSequence:
    n = None
    pairs = []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                fields = line[1:].split()
                if len(fields) == 2 and fields[0] == "n":
                    n = int(fields[1])
                continue
            fields = line.split()
            if len(fields) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'u v', got {line!r}")
            pairs.append((int(fields[0]), int(fields[1])))
    if n is None:
        raise ValueError(f"{path}: missing '#n <n>' header")
    return EdgeSequence.from_pairs(n, pairs)


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return str(int(x)) if x.is_integer() and abs(x) < 1e15 else repr(x)
    return str(x)


def write_matrix(path, a: np.ndarray) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        for row in np.asarray(a):
            w.writerow([_fmt(x) for x in row])


def read_matrix(path) -> np.ndarray:
    with open(path, newline="") as f:
        rows = [[float(x) for x in row] for row in csv.reader(f) if row]
    return np.array(rows, dtype=float)


def read_counts(path) -> CountMatrix:
    return CountMatrix(read_matrix(path))


def read_probabilities(path) -> ProbabilityMatrix:
    return ProbabilityMatrix(read_matrix(path))


def write_json(path, doc) -> None:
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=False)
        f.write("\n")


def read_json(path):
    with open(path) as f:
        return json.load(f)


def write_table(path, columns: Sequence[str], rows: Iterable[dict]) -> None:
    if len(set(columns)) != len(columns):
        raise ValueError("column names must be unique")
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in columns])


def read_table(path) -> tuple[list[str], list[dict]]:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        rows = list(reader)
        return list(reader.fieldnames or []), rows


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
