"""Prequential (sequential) encoding of edge sequences and constraint selection.

Edge ``e_k`` is coded with the estimate fitted on ``e_1 .. e_{k-1}``; the sum
of ``-log2`` of those prediction probabilities is the description length used
to rank constraint sets.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import EdgeSequence, Partition, collapse
from .inference import (
    Block,
    Configuration,
    ConstraintSpec,
    Free,
    SolverError,
    SolverOptions,
    _simplex_kernel,
    constraint_to_json,
    free_parameters,
    minimize,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SequentialTrace:
    spec: ConstraintSpec
    step_probs: np.ndarray
    code_bits: np.ndarray
    seed_ordering: Optional[int] = None

    @property
    def m(self) -> int:
        return self.step_probs.size

    @property
    def description_length(self) -> float:
        return float(self.code_bits.sum())


def mean_code_length(t: SequentialTrace) -> float:
    if t.m == 0:
        raise ValueError("empty trace")
    return float(t.code_bits.mean())


def mean_pred_prob(t: SequentialTrace) -> float:
    if t.m == 0:
        raise ValueError("empty trace")
    return float(t.step_probs.mean())


class _Groups:
    """Simplex subproblem whose units (block pairs or blocks) are pooled by
    ``(count, cell size)``; units in one pool always share a value."""

    def __init__(self, cells: np.ndarray):
        self.cells = np.asarray(cells, dtype=float)
        self.count = np.zeros(self.cells.size, dtype=np.int64)
        self.index: dict[tuple[int, float], int] = {}
        cap = 16
        self.w = np.zeros(cap)
        self.c = np.zeros(cap)
        self.size = 0
        self.free: list[int] = []
        sizes, mult = np.unique(self.cells, return_counts=True)
        for s, k in zip(sizes, mult):
            g = self._group(0, float(s))
            self.w[g] += k * s
        self.t = math.inf
        self.q = None

    def _group(self, k: int, cells: float) -> int:
        g = self.index.get((k, cells))
        if g is None and self.free:
            g = self.free.pop()
            self.index[(k, cells)] = g
            self.c[g] = k / cells
        elif g is None:
            if self.size == self.w.size:
                self.w = np.concatenate([self.w, np.zeros(self.size)])
                self.c = np.concatenate([self.c, np.zeros(self.size)])
            g = self.size
            self.size += 1
            self.index[(k, cells)] = g
            self.c[g] = k / cells
        return g

    def value(self, unit: int) -> float:
        return self.q[self.index[(int(self.count[unit]), float(self.cells[unit]))]]

    def increment(self, unit: int) -> None:
        k = int(self.count[unit])
        cells = float(self.cells[unit])
        g = self._group(k + 1, cells)
        old = self.index[(k, cells)]
        self.w[old] -= cells
        self.w[g] += cells
        self.count[unit] = k + 1
        if self.w[old] == 0.0:
            # recycle the emptied slot; c = 0 keeps it cheap in the kernel
            del self.index[(k, cells)]
            self.c[old] = 0.0
            self.free.append(old)

    def solve(self, opts: SolverOptions) -> bool:
        q, t, _, ok = _simplex_kernel(
            self.w[: self.size], self.c[: self.size], self.t, opts.max_iters, opts.min_prob_floor
        )
        self.q, self.t = q, t
        return bool(ok)


def _block_units(partition: Partition):
    sz = partition.sizes.astype(float)
    return np.outer(sz, sz).ravel()


def sequential_encode(
    e: EdgeSequence,
    spec: ConstraintSpec,
    opts: SolverOptions = SolverOptions(),
    seed_ordering: Optional[int] = None,
) -> SequentialTrace:
    """Prediction probability of every edge given the edges before it.

    Each step re-solves incrementally from the previous level; only one pooled
    count changes between steps.
    """
    if e.m == 0:
        raise ValueError("cannot encode an empty sequence")
    if e.n != spec.n:
        raise ValueError(f"dimension mismatch: sequence has {e.n} nodes, spec {spec.n}")
    probs = np.empty(e.m)
    src = e.edges[:, 0].tolist()
    dst = e.edges[:, 1].tolist()
    if isinstance(spec, (Free, Block)):
        part = spec.partition
        b = part.block_of.tolist()
        p = part.p
        pool = _Groups(_block_units(part))
        for k in range(e.m):
            if not pool.solve(opts):
                raise SolverError(f"solver did not converge at step {k + 1}")
            unit = b[src[k]] * p + b[dst[k]]
            probs[k] = pool.value(unit)
            pool.increment(unit)
    elif isinstance(spec, Configuration):
        bo = spec.b_out.block_of.tolist()
        bi = spec.b_in.block_of.tolist()
        out_pool = _Groups(spec.b_out.sizes)
        in_pool = _Groups(spec.b_in.sizes)
        for k in range(e.m):
            if not (out_pool.solve(opts) and in_pool.solve(opts)):
                raise SolverError(f"solver did not converge at step {k + 1}")
            probs[k] = out_pool.value(bo[src[k]]) * in_pool.value(bi[dst[k]])
            out_pool.increment(bo[src[k]])
            in_pool.increment(bi[dst[k]])
    else:
        raise TypeError(f"unknown constraint spec {spec!r}")
    return SequentialTrace(spec, probs, -np.log2(probs), seed_ordering)


def sequential_encode_cold(e: EdgeSequence, spec: ConstraintSpec, opts: SolverOptions = SolverOptions()) -> SequentialTrace:
    """Reference encoder: a full cold solve on every prefix. Quadratic; for tests."""
    probs = np.empty(e.m)
    for k in range(e.m):
        res = minimize(spec, collapse(e.prefix(k)), opts)
        u, v = e.edges[k]
        probs[k] = res.q_star.p[u, v]
    return SequentialTrace(spec, probs, -np.log2(probs))


@dataclass(frozen=True)
class CandidateScore:
    spec: ConstraintSpec
    description_length: float
    mean_code_length: float
    mean_pred_prob: float


@dataclass(frozen=True)
class SelectionReport:
    candidates: list[CandidateScore]
    best_index: int

    @property
    def best(self) -> CandidateScore:
        return self.candidates[self.best_index]

    def to_json(self, names: Optional[Sequence[str]] = None) -> dict:
        rows = []
        for i, c in enumerate(self.candidates):
            rows.append(
                {
                    "name": names[i] if names else str(i),
                    "constraint": constraint_to_json(c.spec),
                    "free_parameters": free_parameters(c.spec),
                    "description_length_bits": c.description_length,
                    "mean_code_length_bits": c.mean_code_length,
                    "mean_pred_prob": c.mean_pred_prob,
                }
            )
        return {"candidates": rows, "best_index": self.best_index, "best": rows[self.best_index]["name"]}


def _score(args) -> CandidateScore:
    e, spec, opts = args
    t = sequential_encode(e, spec, opts)
    return CandidateScore(spec, t.description_length, mean_code_length(t), mean_pred_prob(t))


def pick_best(scores: Sequence[CandidateScore], tie_tol: float = 1e-9) -> int:
    """Smallest description length; near-ties go to fewer free parameters, then order."""
    best = min(s.description_length for s in scores)
    tied = [i for i, s in enumerate(scores) if s.description_length - best <= tie_tol]
    return min(tied, key=lambda i: (free_parameters(scores[i].spec), i))


def select(
    e: EdgeSequence,
    candidates: Sequence[ConstraintSpec],
    opts: SolverOptions = SolverOptions(),
    workers: int = 1,
) -> SelectionReport:
    if not candidates:
        raise ValueError("need at least one candidate")
    jobs = [(e, spec, opts) for spec in candidates]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            scores = list(pool.map(_score, jobs))
    else:
        scores = [_score(j) for j in jobs]
    return SelectionReport(list(scores), pick_best(scores))
