"""Slow, independent reference computations used by the solver tests."""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.optimize import minimize as sp_minimize

from edgeprob.core import CountMatrix, EdgeSequence, Partition, ProbabilityMatrix, entropy


def two_term_objective(q: ProbabilityMatrix, e: EdgeSequence) -> float:
    """``-sum_k log2 q[e_k] - S[q]`` computed edge by edge."""
    data = -sum(math.log2(q.p[u, v]) for u, v in e)
    return data - entropy(q)


def _reduced(partition: Partition, counts: CountMatrix):
    b = partition.block_of
    p = partition.p
    sz = partition.sizes.astype(float)
    cells = np.outer(sz, sz).ravel()
    kb = np.zeros((p, p))
    for u in range(partition.n):
        for v in range(partition.n):
            kb[b[u], b[v]] += counts.k[u, v]
    return cells, kb.ravel()


def block_grid_oracle(partition: Partition, counts: CountMatrix, levels=(-6.0, -3.0, 0.0)) -> np.ndarray:
    """Block-pair values minimizing ``sum (n q - K) log2 q`` on ``sum n q = 1``.

    Coarse grid over softmax logits, then BFGS refinement from the best point.
    Returns the expanded n x n matrix.
    """
    cells, kb = _reduced(partition, counts)
    d = cells.size

    def values(z):
        w = np.exp(z - z.max())
        return w / (cells @ w)

    def f(z):
        q = values(z)
        return float(((cells * q - kb) * np.log2(q)).sum())

    def grad(z):
        q = values(z)
        g = cells * np.log2(q) + (cells * q - kb) / (q * math.log(2))
        gq = g * q
        return gq - cells * q * gq.sum()

    grid = np.array(list(itertools.product(levels, repeat=d))) if d <= 9 else np.zeros((1, d))
    best = min(grid, key=f)
    res = sp_minimize(f, best, jac=grad, method="BFGS", options={"gtol": 1e-13, "maxiter": 10_000})
    z = res.x
    # a few Newton polishing steps on the same parameterization via finite Hessian
    for _ in range(3):
        res = sp_minimize(f, z, jac=grad, method="BFGS", options={"gtol": 1e-14, "maxiter": 10_000})
        z = res.x
    q = values(z).reshape(partition.p, partition.p)
    b = partition.block_of
    return q[np.ix_(b, b)]


def _level_value(c: float, t: float) -> float:
    """Root of ``ln q - c / q = t`` by bisection on ``ln q``."""
    if c == 0:
        return math.exp(t)
    lo, hi = -800.0, 50.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        q = math.exp(mid)
        if mid - c / q < t:
            lo = mid
        else:
            hi = mid
    return math.exp(0.5 * (lo + hi))


def marginal_grid_oracle(partition: Partition, marginal: np.ndarray) -> np.ndarray:
    """Per-node values for one configuration-model marginal.

    1-D grid over the level ``t`` to bracket ``sum n q(t) = 1``, then bisection.
    """
    sz = partition.sizes.astype(float)
    kb = np.bincount(partition.block_of, weights=marginal, minlength=partition.p)
    c = kb / sz

    def total(t):
        return sum(n * _level_value(ci, t) for n, ci in zip(sz, c))

    grid = np.arange(-60.0, 0.0, 0.05)
    vals = np.array([total(t) for t in grid])
    i = int(np.searchsorted(vals, 1.0))
    lo, hi = grid[max(i - 1, 0)], grid[min(i, grid.size - 1)]
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if total(mid) < 1.0:
            lo = mid
        else:
            hi = mid
    t = 0.5 * (lo + hi)
    q = np.array([_level_value(ci, t) for ci in c])
    q /= sz @ q
    return q[partition.block_of]
