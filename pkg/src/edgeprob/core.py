"""Edge distributions, edge sequences and code-length primitives.

Nodes are 0-indexed; an edge is a directed pair ``(u, v)`` with ``u, v`` in
``[0, n)``. Self-loops are allowed. All logarithms are base 2.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

SUM_TOL = 1e-9


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ProbabilityMatrix:
    """Probability distribution over the ``n * n`` directed edge slots."""

    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1] or p.shape[0] == 0:
            raise ValueError(f"expected a non-empty square matrix, got shape {p.shape}")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValueError("probabilities must be finite and nonnegative")
        total = p.sum()
        if abs(total - 1.0) > SUM_TOL:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "p", _freeze(p))

    @property
    def n(self) -> int:
        return self.p.shape[0]

    @classmethod
    def uniform(cls, n: int) -> ProbabilityMatrix:
        return cls(np.full((n, n), 1.0 / (n * n)))

    def __getitem__(self, edge):
        return self.p[edge]


@dataclass(frozen=True, eq=False)
class EdgeSequence:
    """Ordered list of directed edges on ``n`` nodes, stored as an (m, 2) int array."""

    n: int
    edges: np.ndarray

    def __post_init__(self):
        if self.n <= 0:
            raise ValueError("n must be positive")
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if e.size and (e.min() < 0 or e.max() >= self.n):
            raise ValueError(f"edge endpoint out of range [0, {self.n})")
        object.__setattr__(self, "edges", _freeze(e))

    @classmethod
    def from_pairs(cls, n: int, pairs: Sequence[tuple[int, int]]) -> EdgeSequence:
        return cls(n, np.array(list(pairs), dtype=np.int64).reshape(-1, 2))

    @property
    def m(self) -> int:
        return self.edges.shape[0]

    def __len__(self) -> int:
        return self.m

    def __iter__(self):
        for u, v in self.edges:
            yield int(u), int(v)

    def prefix(self, k: int) -> EdgeSequence:
        return EdgeSequence(self.n, self.edges[:k])


@dataclass(frozen=True, eq=False)
class CountMatrix:
    """Edge multiplicities ``k[u, v]``.

    Non-integer entries are accepted so that expected counts ``m * P`` can be
    fed to the solvers.
    """

    k: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.k, dtype=float)
        if k.ndim != 2 or k.shape[0] != k.shape[1] or k.shape[0] == 0:
            raise ValueError(f"expected a non-empty square matrix, got shape {k.shape}")
        if np.any(k < 0) or not np.all(np.isfinite(k)):
            raise ValueError("counts must be finite and nonnegative")
        object.__setattr__(self, "k", _freeze(k))

    @classmethod
    def zeros(cls, n: int) -> CountMatrix:
        return cls(np.zeros((n, n)))

    @property
    def n(self) -> int:
        return self.k.shape[0]

    @property
    def m(self) -> float:
        return float(self.k.sum())

    def is_integral(self) -> bool:
        return bool(np.all(self.k == np.round(self.k)))


@dataclass(frozen=True, eq=False)
class Partition:
    """Assignment of every node to one of ``p`` nonempty blocks."""

    block_of: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.block_of, dtype=np.int64).ravel()
        if b.size == 0:
            raise ValueError("partition must cover at least one node")
        if b.min() < 0:
            raise ValueError("block indices must be nonnegative")
        p = int(b.max()) + 1
        if np.any(np.bincount(b, minlength=p) == 0):
            raise ValueError("every block index in [0, p) must be used")
        object.__setattr__(self, "block_of", _freeze(b))

    @classmethod
    def from_sizes(cls, sizes: Sequence[int]) -> Partition:
        """Contiguous blocks of the given sizes."""
        return cls(np.repeat(np.arange(len(sizes)), sizes))

    @classmethod
    def from_blocks(cls, n: int, blocks: Sequence[Sequence[int]]) -> Partition:
        block_of = np.full(n, -1, dtype=np.int64)
        for i, members in enumerate(blocks):
            for u in members:
                if block_of[u] != -1:
                    raise ValueError(f"node {u} appears in two blocks")
                block_of[u] = i
        if np.any(block_of < 0):
            raise ValueError("blocks do not cover every node")
        return cls(block_of)

    @classmethod
    def single(cls, n: int) -> Partition:
        return cls(np.zeros(n, dtype=np.int64))

    @classmethod
    def singletons(cls, n: int) -> Partition:
        return cls(np.arange(n))

    @property
    def n(self) -> int:
        return self.block_of.size

    @property
    def p(self) -> int:
        return int(self.block_of.max()) + 1

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.block_of, minlength=self.p)

    def blocks(self) -> list[list[int]]:
        return [np.flatnonzero(self.block_of == i).tolist() for i in range(self.p)]

    def __eq__(self, other):
        return isinstance(other, Partition) and np.array_equal(self.block_of, other.block_of)

    def __hash__(self):
        return hash(self.block_of.tobytes())


def _xlog2x(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x, dtype=float)
    pos = x > 0
    out[pos] = x[pos] * np.log2(x[pos])
    return out


def entropy(q: ProbabilityMatrix) -> float:
    """Entropy in bits, with ``0 log 0 = 0``."""
    return float(-_xlog2x(q.p).sum())


def cross_entropy(p: ProbabilityMatrix, q: ProbabilityMatrix) -> float:
    """``-sum p log2 q`` in bits; ``inf`` if ``p`` puts mass where ``q`` has none."""
    if p.n != q.n:
        raise ValueError(f"dimension mismatch: {p.n} vs {q.n}")
    support = p.p > 0
    if np.any(q.p[support] == 0):
        return float("inf")
    return float(-(p.p[support] * np.log2(q.p[support])).sum())


def collapse(e: EdgeSequence) -> CountMatrix:
    """Forget the ordering of ``e``, keeping edge multiplicities."""
    k = np.zeros((e.n, e.n))
    np.add.at(k, (e.edges[:, 0], e.edges[:, 1]), 1)
    return CountMatrix(k)


def empirical_distribution(e: EdgeSequence) -> ProbabilityMatrix:
    if e.m == 0:
        raise ValueError("empirical distribution of an empty sequence is undefined")
    return ProbabilityMatrix(collapse(e).k / e.m)


def representative(w: CountMatrix, seed: int) -> EdgeSequence:
    """One uniformly shuffled edge ordering that collapses back to ``w``."""
    if not w.is_integral():
        raise ValueError("representative needs integer multiplicities")
    counts = w.k.astype(np.int64).ravel()
    slots = np.repeat(np.arange(counts.size), counts)
    rng = np.random.default_rng(seed)
    rng.shuffle(slots)
    u, v = np.divmod(slots, w.n)
    return EdgeSequence(w.n, np.stack([u, v], axis=1))


def description_length(e: EdgeSequence, q: ProbabilityMatrix) -> float:
    """Code length ``-sum_k log2 q[e_k]`` of the sequence under a fixed model."""
    if e.n != q.n:
        raise ValueError(f"dimension mismatch: {e.n} vs {q.n}")
    probs = q.p[e.edges[:, 0], e.edges[:, 1]]
    if np.any(probs == 0):
        return float("inf")
    return float(-np.log2(probs).sum())
